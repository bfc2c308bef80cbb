//! C ABI for cusplab: opaque handles for geometry contexts, meshes and
//! solutions, plain structs for results, and integer status codes. The
//! message for the last failure on the calling thread is available from
//! `cusplab_last_error`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use cusplab::fem::{assemble_and_solve, error_norms, manufactured_case, Case, FemProblem, FemSolution, Kappa};
use cusplab::geometry::GeometryCtx;
use cusplab::mesh::{build_graded_mesh, Mesh};
use cusplab::probe::{annulus_masses_and_fit, AnnulusOptions, ProbeField, Region};
use cusplab::profiles::ProfileSpec;
use cusplab::thresholds::{homogeneous_thresholds, XReal};
use cusplab::Error;

/// Status returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CusplabStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad input: configuration, profile or dimension.
    InvalidArgument = 2,
    /// Point or parameter outside the domain of an operation.
    Domain = 3,
    /// Meshing, assembly, solver or quadrature failure.
    Numerical = 4,
    InsufficientData = 5,
    Panic = 6,
}

/// Kind tag of an extended real.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CusplabXKind {
    Finite = 0,
    /// `value + δ` for arbitrarily small δ > 0.
    Above = 1,
    ArbitraryLarge = 2,
    Infinite = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CusplabXReal {
    pub kind: CusplabXKind,
    /// Meaningful for `Finite` and `Above`; +∞ otherwise.
    pub value: f64,
}

impl From<XReal> for CusplabXReal {
    fn from(x: XReal) -> Self {
        let kind = match x {
            XReal::Finite(_) => CusplabXKind::Finite,
            XReal::Above(_) => CusplabXKind::Above,
            XReal::ArbitraryLarge => CusplabXKind::ArbitraryLarge,
            XReal::Infinite => CusplabXKind::Infinite,
        };
        Self { kind, value: x.value() }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CusplabThresholds {
    pub r1: CusplabXReal,
    pub r2: CusplabXReal,
    pub q1: CusplabXReal,
    pub q2: CusplabXReal,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CusplabSlice {
    pub r: f64,
    pub rho_hat: f64,
    pub z_hat: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CusplabErrorNorms {
    pub l2: f64,
    pub h1_semi: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CusplabAnnulusFit {
    pub slope: f64,
    pub r_squared: f64,
    pub s: f64,
    pub effective_dimension: f64,
    pub critical_exponent: CusplabXReal,
    pub rings_used: usize,
    pub reliable: bool,
}

/// Opaque geometry context.
pub struct CusplabGeometry(GeometryCtx);
/// Opaque graded mesh.
pub struct CusplabMesh(Arc<Mesh>);
/// Opaque finite element solution.
pub struct CusplabSolution {
    sol: FemSolution,
    norms: Option<CusplabErrorNorms>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> CusplabStatus {
    match e {
        Error::Config(_) | Error::Parse(_) | Error::Json(_) | Error::InvalidProfile(_) | Error::UnsupportedDimension(_) => {
            CusplabStatus::InvalidArgument
        }
        Error::Domain(_) | Error::Degenerate(_) => CusplabStatus::Domain,
        Error::InsufficientData(_) => CusplabStatus::InsufficientData,
        _ => CusplabStatus::Numerical,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (CusplabStatus, String)>) -> CusplabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CusplabStatus::Ok
        }
        Ok(Err((s, msg))) => {
            set_error(&msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            CusplabStatus::Panic
        }
    }
}

fn lib(e: Error) -> (CusplabStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (CusplabStatus, String) {
    (CusplabStatus::NullPointer, format!("{what} is null"))
}

fn power_profile(theta: f64, r0: f64) -> Result<ProfileSpec, (CusplabStatus, String)> {
    let spec = ProfileSpec::power(theta, r0);
    spec.build().map_err(lib)?;
    Ok(spec)
}

/// Message describing the last failure on this thread; empty after success.
/// Valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn cusplab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Homogeneous-data thresholds r₁, r₂, q₁, q₂. `p0 = INFINITY` is allowed.
///
/// # Safety
/// `out` must be null or point to writable memory for one struct.
#[no_mangle]
pub unsafe extern "C" fn cusplab_homogeneous_thresholds(
    d: usize,
    theta: f64,
    p0: f64,
    alpha0: f64,
    out: *mut CusplabThresholds,
) -> CusplabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let h = homogeneous_thresholds(d, theta, XReal::from(p0), alpha0).map_err(lib)?;
        *out = CusplabThresholds { r1: h.r1.into(), r2: h.r2.into(), q1: h.q1.into(), q2: h.q2.into() };
        Ok(())
    })
}

/// Geometry context for the power profile σ(ρ) = ρ^θ on (0, r0] in dimension `dim`.
///
/// # Safety
/// `out` must be null or point to writable memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn cusplab_geometry_new(theta: f64, r0: f64, dim: usize, out: *mut *mut CusplabGeometry) -> CusplabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let ctx = GeometryCtx::new(&power_profile(theta, r0)?, dim).map_err(lib)?;
        *out = Box::into_raw(Box::new(CusplabGeometry(ctx)));
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle from `cusplab_geometry_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cusplab_geometry_free(h: *mut CusplabGeometry) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// M(z) = ∫₀^{|z|} μ.
///
/// # Safety
/// `h` must be a live geometry handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cusplab_geometry_big_m(h: *const CusplabGeometry, z: f64, out: *mut f64) -> CusplabStatus {
    guard(|| {
        let ctx = h.as_ref().ok_or_else(|| null("geometry"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = ctx.0.big_m(z).map_err(lib)?;
        Ok(())
    })
}

/// g(x) = √(½|x̄|² + M(x_d)) at a point with `n` = dim coordinates.
///
/// # Safety
/// `h` must be a live geometry handle, `x` must hold `n` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn cusplab_geometry_g(h: *const CusplabGeometry, x: *const f64, n: usize, out: *mut f64) -> CusplabStatus {
    guard(|| {
        let ctx = h.as_ref().ok_or_else(|| null("geometry"))?;
        if x.is_null() {
            return Err(null("x"));
        }
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = ctx.0.g_value(std::slice::from_raw_parts(x, n)).map_err(lib)?;
        Ok(())
    })
}

/// Γ_R ∩ S: radius ρ̂ and height ẑ.
///
/// # Safety
/// `h` must be a live geometry handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cusplab_geometry_level_set_slice(h: *const CusplabGeometry, big_r: f64, out: *mut CusplabSlice) -> CusplabStatus {
    guard(|| {
        let ctx = h.as_ref().ok_or_else(|| null("geometry"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let s = ctx.0.level_set_slice(big_r).map_err(lib)?;
        *out = CusplabSlice { r: s.r, rho_hat: s.rho_hat, z_hat: s.z_hat };
        Ok(())
    })
}

/// Graded mesh of the box around the tip for σ(ρ) = ρ^θ.
///
/// # Safety
/// `out` must be null or point to writable memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn cusplab_mesh_build(
    theta: f64,
    r0: f64,
    h0: f64,
    beta: f64,
    levels: usize,
    out: *mut *mut CusplabMesh,
) -> CusplabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let mesh = build_graded_mesh(&power_profile(theta, r0)?, h0, beta, levels).map_err(lib)?;
        *out = Box::into_raw(Box::new(CusplabMesh(Arc::new(mesh))));
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle from `cusplab_mesh_build` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cusplab_mesh_free(h: *mut CusplabMesh) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Number of nodes, or 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live mesh handle.
#[no_mangle]
pub unsafe extern "C" fn cusplab_mesh_node_count(h: *const CusplabMesh) -> usize {
    h.as_ref().map_or(0, |m| m.0.nodes.len())
}

/// Number of triangles, or 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live mesh handle.
#[no_mangle]
pub unsafe extern "C" fn cusplab_mesh_triangle_count(h: *const CusplabMesh) -> usize {
    h.as_ref().map_or(0, |m| m.0.triangles.len())
}

/// Solves a manufactured case (`smooth_bulk`, `interface_flux`,
/// `cone_reference`) or, when `case_name` is null, −div(κ∇u) = 1 with zero
/// boundary data. The mesh handle stays owned by the caller.
///
/// # Safety
/// `mesh` must be a live mesh handle, `case_name` null or a NUL-terminated
/// string, and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cusplab_solve(
    mesh: *const CusplabMesh,
    case_name: *const c_char,
    kappa1: f64,
    kappa2: f64,
    tol: f64,
    out: *mut *mut CusplabSolution,
) -> CusplabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let mesh = mesh.as_ref().ok_or_else(|| null("mesh"))?.0.clone();
        let (problem, exact) = if case_name.is_null() {
            let p = FemProblem::new(mesh, Kappa::Scalar(kappa1), Kappa::Scalar(kappa2)).map_err(lib)?.with_source(|_, _| 1.0);
            (p, None)
        } else {
            let name = CStr::from_ptr(case_name)
                .to_str()
                .map_err(|_| (CusplabStatus::InvalidArgument, "case name is not UTF-8".to_string()))?;
            let case: Case = name.parse().map_err(lib)?;
            let m = manufactured_case(case, mesh, [kappa1, kappa2]).map_err(lib)?;
            (m.problem, m.exact)
        };
        let sol = assemble_and_solve(&problem, tol).map_err(lib)?;
        let norms = exact.map(|e| {
            let n = error_norms(&sol, &|x| (e.u)(x), &|x| (e.grad)(x));
            CusplabErrorNorms { l2: n.l2, h1_semi: n.h1_semi }
        });
        *out = Box::into_raw(Box::new(CusplabSolution { sol, norms }));
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle from `cusplab_solve` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cusplab_solution_free(h: *mut CusplabSolution) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Copies up to `len` nodal values into `buf` and stores the node count in `count`.
///
/// # Safety
/// `h` must be a live solution handle, `buf` null or valid for `len`
/// doubles, and `count` null or writable.
#[no_mangle]
pub unsafe extern "C" fn cusplab_solution_values(h: *const CusplabSolution, buf: *mut f64, len: usize, count: *mut usize) -> CusplabStatus {
    guard(|| {
        let s = h.as_ref().ok_or_else(|| null("solution"))?;
        let v = &s.sol.nodal_values;
        if let Some(c) = count.as_mut() {
            *c = v.len();
        }
        if !buf.is_null() {
            let n = len.min(v.len());
            ptr::copy_nonoverlapping(v.as_ptr(), buf, n);
        }
        Ok(())
    })
}

/// L² and H¹-seminorm errors against the exact solution of a manufactured case.
///
/// # Safety
/// `h` must be a live solution handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cusplab_solution_error_norms(h: *const CusplabSolution, out: *mut CusplabErrorNorms) -> CusplabStatus {
    guard(|| {
        let s = h.as_ref().ok_or_else(|| null("solution"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = s.norms.ok_or((CusplabStatus::InvalidArgument, "solution has no exact reference".to_string()))?;
        Ok(())
    })
}

/// Annulus fit of |∇u_h|^p on region 1, 2, or both (0).
///
/// # Safety
/// `h` must be a live solution handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cusplab_probe_gradient(h: *const CusplabSolution, region: u32, p: f64, out: *mut CusplabAnnulusFit) -> CusplabStatus {
    guard(|| {
        let s = h.as_ref().ok_or_else(|| null("solution"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let region = match region {
            0 => Region::Both,
            1 => Region::One,
            2 => Region::Two,
            r => return Err((CusplabStatus::InvalidArgument, format!("region {r} is not 0, 1 or 2"))),
        };
        let mesh = s.sol.mesh.as_ref();
        let norms: Vec<f64> = s.sol.element_gradients.iter().map(|g| g[0].hypot(g[1])).collect();
        let prof = annulus_masses_and_fit(
            &ProbeField::Elementwise { mesh, values: &norms },
            p,
            region,
            &AnnulusOptions::for_mesh(mesh),
        )
        .map_err(lib)?;
        *out = CusplabAnnulusFit {
            slope: prof.slope,
            r_squared: prof.r_squared,
            s: prof.s,
            effective_dimension: prof.effective_dimension,
            critical_exponent: prof.critical_exponent.into(),
            rings_used: prof.rings_used,
            reliable: prof.reliable,
        };
        Ok(())
    })
}
