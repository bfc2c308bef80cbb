fn main() {
    let code = cusplab::cli::main_with_args(std::env::args_os(), std::io::stdout(), std::io::stderr());
    std::process::exit(code);
}
