//! Command-line front end: experiment configs, the pipelines behind each
//! subcommand, CSV/JSON artifacts and a manifest of every file written.

pub mod config;
pub mod verify;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub use config::{Command, ExperimentConfig};

use crate::error::{Error, Result};
use crate::fem::{assemble_and_solve, error_norms, manufactured_case, FemProblem, FemSolution, Kappa};
use crate::mesh::{build_graded_mesh, read_mesh, write_mesh, Mesh};
use crate::probe::{probe_solution, write_ring_csv, write_sweep_csv, ProbeOptions, ProbeReport, Region};
use crate::profiles::ProfileSpec;
use crate::surface::SurfaceQuadrature;
use crate::thresholds::{homogeneous_thresholds, main2_thresholds, XReal};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_SUITE_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "cusplab", version, about = "Elliptic transmission problems near a cusp point")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Bounds on M, M⁻¹₊, g, τ, the level-set slices and the coarea identity.
    VerifyGeometry(GeometryArgs),
    /// Weighted integrability verdicts and the sector localization.
    VerifySurface(CommonArgs),
    /// Gagliardo-Nirenberg finiteness on Ω₂ and the ρ-scaling law.
    VerifyGn(GnArgs),
    /// Integrability thresholds for given d, θ, p₀, α₀.
    Thresholds(ThresholdArgs),
    /// Build a graded mesh and solve the transmission problem.
    Solve(SolveArgs),
    /// Annulus exponent fits of a solution's gradient and Hessian.
    Probe(ProbeArgs),
    /// Solve and probe over a grid of θ, κ-contrast and grading levels.
    Sweep(SweepArgs),
    /// Partial integrals of |x|^{−λ} over the interface.
    Surface(SurfaceArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON experiment config; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (CUSPLAB_OUTPUT takes precedence).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Profile in short form: power:θ[:R0], cone[:R0], log[:R0].
    #[arg(long)]
    pub profile: Option<String>,
}

#[derive(Debug, Args)]
pub struct GeometryArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GnArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub lambda: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub p0: Option<XReal>,
    #[arg(long)]
    pub alpha0: Option<f64>,
    #[arg(long)]
    pub s0: Option<XReal>,
    #[arg(long)]
    pub s1: Option<XReal>,
    #[arg(long)]
    pub beta1: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FemArgs {
    /// smooth_bulk, interface_flux or cone_reference.
    #[arg(long)]
    pub case: Option<String>,
    #[arg(long)]
    pub kappa1: Option<f64>,
    #[arg(long)]
    pub kappa2: Option<f64>,
    #[arg(long)]
    pub h0: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub refinements: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub fem: FemArgs,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub fem: FemArgs,
    /// Directory written by `solve`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub p_gradient: Option<f64>,
    #[arg(long)]
    pub p_hessian: Option<f64>,
    #[arg(long)]
    pub p0: Option<XReal>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub fem: FemArgs,
    #[arg(long, value_delimiter = ',')]
    pub thetas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub contrasts: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub sweep_levels: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct SurfaceArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn apply_common(cfg: &mut ExperimentConfig, c: &CommonArgs) -> Result<()> {
    set(&mut cfg.jobs, c.jobs);
    set(&mut cfg.seed, c.seed);
    set(&mut cfg.output_dir, c.output.clone());
    if let Some(p) = &c.profile {
        cfg.profile = ProfileSpec::parse_short(p)?;
    }
    Ok(())
}

fn apply_fem(cfg: &mut ExperimentConfig, f: &FemArgs) {
    let fem = &mut cfg.fem;
    if f.case.is_some() {
        fem.case = f.case.clone();
    }
    set(&mut fem.kappa[0], f.kappa1);
    set(&mut fem.kappa[1], f.kappa2);
    set(&mut fem.h0, f.h0);
    set(&mut fem.beta, f.beta);
    set(&mut fem.levels, f.levels);
    set(&mut fem.refinements, f.refinements);
    set(&mut fem.tol, f.tol);
}

fn common_of(cmd: &Cmd) -> &CommonArgs {
    match cmd {
        Cmd::VerifyGeometry(a) => &a.common,
        Cmd::VerifySurface(a) => a,
        Cmd::VerifyGn(a) => &a.common,
        Cmd::Thresholds(a) => &a.common,
        Cmd::Solve(a) => &a.common,
        Cmd::Probe(a) => &a.common,
        Cmd::Sweep(a) => &a.common,
        Cmd::Surface(a) => &a.common,
    }
}

/// Effective config: defaults, then the config file, then flags, then
/// CUSPLAB_OUTPUT for the output directory.
pub fn resolve_config(cli: &Cli, env_output: Option<PathBuf>) -> Result<ExperimentConfig> {
    let common = common_of(&cli.command);
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default(),
    };
    apply_common(&mut cfg, common)?;
    let cmd = match &cli.command {
        Cmd::VerifyGeometry(a) => {
            set(&mut cfg.dim, a.dim);
            set(&mut cfg.samples, a.samples);
            Command::VerifyGeometry
        }
        Cmd::VerifySurface(_) => Command::VerifySurface,
        Cmd::VerifyGn(a) => {
            set(&mut cfg.gn.lambda, a.lambda);
            Command::VerifyGn
        }
        Cmd::Thresholds(a) => {
            let t = &mut cfg.thresholds;
            set(&mut t.d, a.d);
            set(&mut t.theta, a.theta);
            set(&mut t.p0, a.p0);
            set(&mut t.alpha0, a.alpha0);
            t.s0 = a.s0.or(t.s0);
            t.s1 = a.s1.or(t.s1);
            t.beta1 = a.beta1.or(t.beta1);
            Command::Thresholds
        }
        Cmd::Solve(a) => {
            apply_fem(&mut cfg, &a.fem);
            Command::Solve
        }
        Cmd::Probe(a) => {
            apply_fem(&mut cfg, &a.fem);
            if a.input.is_some() {
                cfg.probe.input = a.input.clone();
            }
            set(&mut cfg.probe.p_gradient, a.p_gradient);
            set(&mut cfg.probe.p_hessian, a.p_hessian);
            set(&mut cfg.probe.p0, a.p0);
            Command::Probe
        }
        Cmd::Sweep(a) => {
            apply_fem(&mut cfg, &a.fem);
            set(&mut cfg.sweep.thetas, a.thetas.clone());
            set(&mut cfg.sweep.contrasts, a.contrasts.clone());
            set(&mut cfg.sweep.levels, a.sweep_levels.clone());
            Command::Sweep
        }
        Cmd::Surface(a) => {
            let s = &mut cfg.surface;
            set(&mut s.dim, a.dim);
            set(&mut s.lambda, a.lambda);
            s.p = a.p.or(s.p);
            s.alpha = a.alpha.or(s.alpha);
            Command::Surface
        }
    };
    if let Some(c) = cfg.command {
        if c != cmd {
            return Err(Error::Config(format!("config is for '{}' but '{}' was invoked", c.name(), cmd.name())));
        }
    }
    cfg.command = Some(cmd);
    if let Some(dir) = env_output {
        cfg.output_dir = dir;
    }
    Ok(cfg)
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects artifacts in the output directory and hashes them for the manifest.
struct Artifacts {
    dir: PathBuf,
    files: Vec<Value>,
    inputs: serde_json::Map<String, Value>,
}

impl Artifacts {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)
            .map_err(|e| Error::Config(format!("output directory {} is not writable: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new(), inputs: serde_json::Map::new() })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.files.push(json!({ "path": name, "sha256": sha256_hex(bytes), "bytes": bytes.len() }));
        Ok(())
    }

    fn json(&mut self, name: &str, v: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_vec_pretty(v)?;
        text.push(b'\n');
        self.write(name, &text)
    }

    fn input(&mut self, label: &str, bytes: &[u8]) {
        self.inputs.insert(label.to_string(), Value::String(sha256_hex(bytes)));
    }
}

/// What a finished run reports back to `main`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub passed: bool,
    /// Compact JSON printed on stdout.
    pub summary: Value,
    pub files: Vec<PathBuf>,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let cmd = cfg.command.expect("validated");
    let mut art = Artifacts::new(&cfg.output_dir)?;
    // The output location does not change what is computed.
    let config_json = serde_json::to_vec(&ExperimentConfig { output_dir: PathBuf::new(), ..cfg.clone() })?;
    art.input("config", &config_json);
    let (passed, summary) = match cmd {
        Command::VerifyGeometry => {
            let rep = verify::verify_geometry(&cfg.profile, cfg.dim, cfg.samples, cfg.seed)?;
            art.json("geometry_report.json", &rep)?;
            let ctx = crate::geometry::GeometryCtx::new(&cfg.profile, cfg.dim)?;
            let mut csv = String::from("R,rho_hat,z_hat\n");
            let r_max = 0.999 * ctx.r0() / 2f64.sqrt();
            for i in 0..50 {
                let r = r_max * 10f64.powf(-3.0 * (1.0 - i as f64 / 49.0));
                if let Ok(s) = ctx.level_set_slice(r) {
                    csv.push_str(&format!("{:.12e},{:.12e},{:.12e}\n", s.r, s.rho_hat, s.z_hat));
                }
            }
            art.write("slices.csv", csv.as_bytes())?;
            (rep.passed(), suite_summary(&rep))
        }
        Command::VerifySurface => {
            let suite = verify::verify_surface(&cfg.profile, &[2, 3])?;
            art.json("surface_report.json", &suite.report)?;
            let mut csv = String::from("dim,lambda,epsilon,partial_value\n");
            for r in &suite.partials {
                csv.push_str(&format!("{},{},{:.12e},{:.12e}\n", r.dim, r.lambda, r.epsilon, r.partial_value));
            }
            art.write("weight_partials.csv", csv.as_bytes())?;
            (suite.report.passed(), suite_summary(&suite.report))
        }
        Command::VerifyGn => {
            let suite = verify::verify_gn(&cfg.profile, cfg.gn.lambda, &cfg.gn.r_values, &cfg.gn.sweep_r)?;
            art.json("gn_report.json", &suite)?;
            let mut buf = Vec::new();
            write_sweep_csv(&suite.sweep, &mut buf)?;
            art.write("gn_sweep.csv", &buf)?;
            let mut csv = String::from("family,rho,lhs,hessian_norm,holder,term1,term2\n");
            for (name, s) in &suite.scaling {
                for r in &s.rows {
                    csv.push_str(&format!(
                        "{name},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                        r.rho, r.lhs, r.hessian_norm, r.holder, r.term1, r.term2
                    ));
                }
            }
            art.write("gn_scaling.csv", csv.as_bytes())?;
            (suite.report.passed(), suite_summary(&suite.report))
        }
        Command::Thresholds => {
            let t = &cfg.thresholds;
            let h = homogeneous_thresholds(t.d, t.theta, t.p0, t.alpha0)?;
            let mut out = serde_json::to_value(h)?;
            if let Some(inp) = t.full_inputs() {
                out["full"] = serde_json::to_value(main2_thresholds(&inp)?)?;
            }
            art.json("thresholds.json", &out)?;
            (true, out)
        }
        Command::Solve => {
            let (sol, summary) = solve(cfg)?;
            let mut buf = Vec::new();
            write_mesh(&sol.mesh, &mut buf)?;
            art.write("mesh.txt", &buf)?;
            let mut buf = Vec::new();
            sol.write_csv(&mut buf)?;
            art.write("solution.csv", &buf)?;
            art.json("solve.json", &summary)?;
            (true, summary)
        }
        Command::Probe => {
            let sol = match &cfg.probe.input {
                Some(dir) => load_solution(dir, &mut art)?,
                None => solve(cfg)?.0,
            };
            let rep = probe_solution(&sol, &probe_options(cfg))?;
            write_probe(&rep, &mut art)?;
            (true, probe_summary(&rep))
        }
        Command::Sweep => {
            let rows = sweep(cfg)?;
            art.json("sweep.json", &rows)?;
            art.write("sweep.csv", sweep_csv(&rows).as_bytes())?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            (true, json!({ "points": rows.len(), "failed_points": failed }))
        }
        Command::Surface => {
            let s = &cfg.surface;
            let q = SurfaceQuadrature::new(&cfg.profile, s.dim)?;
            let w = q.weight_convergence(s.lambda)?;
            let mut csv = String::from("epsilon,partial_value\n");
            for (e, v) in &w.partial_values {
                csv.push_str(&format!("{e:.12e},{v:.12e}\n"));
            }
            art.write("surface.csv", csv.as_bytes())?;
            let mut out = json!({
                "dim": s.dim,
                "lambda": s.lambda,
                "finite": w.finite,
                "value": w.value,
                "log_slope": w.log_slope,
                "tail_exponent": w.tail_exponent,
            });
            if let (Some(p), Some(alpha)) = (s.p, s.alpha) {
                let d = s.dim;
                let b = q.besov_seminorm(&|x: &[f64]| x[d - 1], p, alpha)?;
                out["besov_seminorm_of_height"] = serde_json::to_value(b)?;
            }
            art.json("surface.json", &out)?;
            (true, out)
        }
    };
    let manifest = json!({
        "tool": "cusplab",
        "version": env!("CARGO_PKG_VERSION"),
        "command": cmd.name(),
        "status": if passed { "pass" } else { "suite-failure" },
        "config": cfg,
        "input_hashes": Value::Object(art.inputs.clone()),
        "files": art.files.clone(),
    });
    let mut text = serde_json::to_vec_pretty(&manifest)?;
    text.push(b'\n');
    fs::write(art.dir.join("manifest.json"), &text)?;
    let mut files: Vec<PathBuf> =
        art.files.iter().map(|f| art.dir.join(f["path"].as_str().expect("path string"))).collect();
    files.push(art.dir.join("manifest.json"));
    Ok(RunOutcome { passed, summary, files })
}

fn suite_summary(rep: &verify::SuiteReport) -> Value {
    let failed: Vec<&str> = rep.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    json!({ "passed": rep.passed(), "checks": rep.checks.len(), "failed": failed })
}

fn build_mesh(profile: &ProfileSpec, fem: &config::FemConfig) -> Result<Mesh> {
    let mut mesh = build_graded_mesh(profile, fem.h0, fem.beta, fem.levels)?;
    for _ in 0..fem.refinements {
        mesh = mesh.refine_uniform()?;
    }
    Ok(mesh)
}

fn fem_problem(profile: &ProfileSpec, fem: &config::FemConfig) -> Result<(FemProblem, Option<crate::fem::ExactSolution>)> {
    let mesh = Arc::new(build_mesh(profile, fem)?);
    match fem.parsed_case()? {
        Some(case) => {
            let m = manufactured_case(case, mesh, fem.kappa)?;
            Ok((m.problem, m.exact))
        }
        None => {
            let [c0, c1, c2] = fem.source;
            let p = FemProblem::new(mesh, Kappa::Scalar(fem.kappa[0]), Kappa::Scalar(fem.kappa[1]))?
                .with_source(move |x, _| c0 + c1 * x[0] + c2 * x[1]);
            Ok((p, None))
        }
    }
}

fn solve(cfg: &ExperimentConfig) -> Result<(FemSolution, Value)> {
    let (problem, exact) = fem_problem(&cfg.profile, &cfg.fem)?;
    let sol = assemble_and_solve(&problem, cfg.fem.tol)?;
    let report = sol.mesh.validate()?;
    let norms = exact.map(|e| {
        let (u, g) = (e.u.clone(), e.grad.clone());
        error_norms(&sol, &move |x| u(x), &move |x| g(x))
    });
    let summary = json!({
        "case": cfg.fem.case,
        "kappa": sol.kappa,
        "unknowns": sol.stats.unknowns,
        "stats": sol.stats,
        "error_norms": norms,
        "mesh": report,
        "min_size": sol.mesh.grading.min_size(),
    });
    Ok((sol, summary))
}

fn load_solution(dir: &Path, art: &mut Artifacts) -> Result<FemSolution> {
    let read = |name: &str| {
        fs::read(dir.join(name)).map_err(|e| Error::Config(format!("cannot read {}: {e}", dir.join(name).display())))
    };
    let mesh_bytes = read("mesh.txt")?;
    let sol_bytes = read("solution.csv")?;
    let solve_bytes = read("solve.json")?;
    art.input("mesh.txt", &mesh_bytes);
    art.input("solution.csv", &sol_bytes);
    art.input("solve.json", &solve_bytes);
    let mesh = Arc::new(read_mesh(mesh_bytes.as_slice())?);
    let summary: Value = serde_json::from_slice(&solve_bytes)?;
    let kappa: [Kappa; 2] = serde_json::from_value(summary["kappa"].clone())
        .map_err(|e| Error::Parse(format!("solve.json kappa: {e}")))?;
    let text = String::from_utf8(sol_bytes).map_err(|_| Error::Parse("solution.csv is not UTF-8".into()))?;
    let mut values = vec![f64::NAN; mesh.nodes.len()];
    for (ln, line) in text.lines().enumerate().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let bad = || Error::Parse(format!("solution.csv line {}", ln + 1));
        let id: usize = cols.first().and_then(|c| c.parse().ok()).ok_or_else(bad)?;
        let u: f64 = cols.get(3).and_then(|c| c.parse().ok()).ok_or_else(bad)?;
        *values.get_mut(id).ok_or_else(bad)? = u;
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Parse("solution.csv does not cover every mesh node".into()));
    }
    FemSolution::from_nodal_values(mesh, kappa, values)
}

fn probe_options(cfg: &ExperimentConfig) -> ProbeOptions {
    ProbeOptions { p_gradient: cfg.probe.p_gradient, p_hessian: cfg.probe.p_hessian, p0: cfg.probe.p0 }
}

fn write_probe(rep: &ProbeReport, art: &mut Artifacts) -> Result<()> {
    for (name, prof) in [("probe_gradient.csv", &rep.gradient), ("probe_hessian.csv", &rep.hessian)] {
        if let Some(p) = prof.get(Region::Both) {
            let mut buf = Vec::new();
            write_ring_csv(p, &mut buf)?;
            art.write(name, &buf)?;
        }
    }
    art.json("probe.json", rep)
}

fn probe_summary(rep: &ProbeReport) -> Value {
    let fits = |p: &crate::probe::RegionProfiles| {
        let one = |r: Region| {
            p.get(r).map(|a| {
                json!({ "s": a.s, "critical_exponent": a.critical_exponent, "r_squared": a.r_squared, "rings": a.rings_used })
            })
        };
        json!({ "region1": one(Region::One), "region2": one(Region::Two), "both": one(Region::Both) })
    };
    json!({
        "gradient": fits(&rep.gradient),
        "hessian": fits(&rep.hessian),
        "alpha0": rep.alpha0.map(|a| a.alpha0),
        "thresholds": rep.thresholds,
    })
}

/// One point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub theta: f64,
    pub contrast: f64,
    pub levels: usize,
    pub unknowns: Option<usize>,
    pub probe: Option<ProbeReport>,
    pub error: Option<String>,
}

fn sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let mut points = Vec::new();
    for &theta in &cfg.sweep.thetas {
        for &contrast in &cfg.sweep.contrasts {
            for &levels in &cfg.sweep.levels {
                points.push((theta, contrast, levels));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let opts = probe_options(cfg);
    Ok(pool.install(|| {
        points
            .par_iter()
            .map(|&(theta, contrast, levels)| {
                let profile = ProfileSpec { theta: Some(theta), ..cfg.profile.clone() };
                let fem = config::FemConfig { kappa: [1.0, contrast], levels, case: None, ..cfg.fem.clone() };
                let run = || -> Result<(usize, ProbeReport)> {
                    let (problem, _) = fem_problem(&profile, &fem)?;
                    let sol = assemble_and_solve(&problem, fem.tol)?;
                    Ok((sol.stats.unknowns, probe_solution(&sol, &opts)?))
                };
                match run() {
                    Ok((n, rep)) => SweepRow { theta, contrast, levels, unknowns: Some(n), probe: Some(rep), error: None },
                    Err(e) => SweepRow { theta, contrast, levels, unknowns: None, probe: None, error: Some(e.to_string()) },
                }
            })
            .collect()
    }))
}

fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "theta,contrast,levels,unknowns,s_region1,crit_region1,r2_region1,s_region2,crit_region2,r2_region2,alpha0,r1,r2,error\n",
    );
    let fmt = |v: Option<String>| v.unwrap_or_default();
    for r in rows {
        let g = r.probe.as_ref().map(|p| &p.gradient);
        let cols = |reg: Region| {
            let a = g.and_then(|g| g.get(reg));
            [
                fmt(a.map(|a| format!("{:.6}", a.s))),
                fmt(a.map(|a| a.critical_exponent.to_string())),
                fmt(a.map(|a| format!("{:.6}", a.r_squared))),
            ]
            .join(",")
        };
        let alpha = fmt(r.probe.as_ref().and_then(|p| p.alpha0).map(|a| format!("{:.6}", a.alpha0)));
        let thr = r.probe.as_ref().and_then(|p| p.thresholds);
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.theta,
            r.contrast,
            r.levels,
            fmt(r.unknowns.map(|n| n.to_string())),
            cols(Region::One),
            cols(Region::Two),
            alpha,
            fmt(thr.map(|t| t.r1.to_string())),
            fmt(thr.map(|t| t.r2.to_string())),
            r.error.as_deref().unwrap_or("").replace(',', ";"),
        ));
    }
    out
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Domain(_) => "domain",
        Error::InvalidProfile(_) => "invalid-profile",
        Error::Degenerate(_) => "degenerate-point",
        Error::UnsupportedDimension(_) => "unsupported-dimension",
        Error::Meshing(_) => "meshing",
        Error::Assembly(_) => "assembly",
        Error::Solver(_) => "solver",
        Error::InsufficientData(_) => "insufficient-data",
        Error::Evaluation(_) => "evaluation",
        Error::NoConvergence(_) => "no-convergence",
        Error::Config(_) => "config",
        Error::Parse(_) => "parse",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
    }
}

/// Exit code for an error: 2 for configuration problems, 3 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_config() {
        EXIT_CONFIG
    } else {
        EXIT_RUNTIME
    }
}

pub fn error_json(e: &Error) -> Value {
    json!({ "error": { "kind": error_kind(e), "message": e.to_string() }, "exit_code": exit_code(e) })
}

/// Parses `args`, runs the experiment and returns the process exit code.
pub fn main_with_args<I, T>(args: I, mut out: impl Write, mut err: impl Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return EXIT_PASS;
            }
            let _ = writeln!(err, "{}", json!({ "error": { "kind": "usage", "message": e.to_string() }, "exit_code": EXIT_CONFIG }));
            return EXIT_CONFIG;
        }
    };
    let env_output = std::env::var_os("CUSPLAB_OUTPUT").filter(|v| !v.is_empty()).map(PathBuf::from);
    let result = resolve_config(&cli, env_output).and_then(|cfg| run_experiment(&cfg));
    match result {
        Ok(outcome) => {
            let _ = writeln!(out, "{}", outcome.summary);
            if outcome.passed {
                EXIT_PASS
            } else {
                EXIT_SUITE_FAILURE
            }
        }
        Err(e) => {
            let _ = writeln!(err, "{}", error_json(&e));
            exit_code(&e)
        }
    }
}
