//! Verification suites behind `verify-geometry`, `verify-surface` and
//! `verify-gn`. Each check records pass/fail with a short detail line.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::GeometryCtx;
use crate::probe::{gn_check, gn_scaling_check, gn_sweep, AnalyticField, GnScalingReport, GnSweepRow};
use crate::profiles::{ProfileKind, ProfileSpec};
use crate::surface::{localize, SurfaceQuadrature};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check { name: name.to_string(), passed, detail });
    }
}

/// Worst relative violation of `lo ≤ v ≤ hi`, zero when satisfied.
fn excess(lo: f64, v: f64, hi: f64) -> f64 {
    let s = v.abs().max(f64::MIN_POSITIVE);
    ((lo - v).max(v - hi) / s).max(0.0)
}

pub fn verify_geometry(spec: &ProfileSpec, dim: usize, samples: usize, seed: u64) -> Result<SuiteReport> {
    let ctx = GeometryCtx::new(spec, dim)?;
    let theta = ctx.theta();
    let top = ctx.top();
    let r0 = ctx.r0();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = SuiteReport::default();
    const SLACK: f64 = 1e-10;

    // M and its inverse.
    let mut worst_m: f64 = 0.0;
    let mut worst_closed: f64 = 0.0;
    let mut worst_mu: f64 = 0.0;
    for _ in 0..samples {
        let z = rng.random_range(-0.999..0.999) * top;
        if z == 0.0 {
            continue;
        }
        let m = ctx.big_m(z)?;
        worst_m = worst_m.max(excess(theta * z * z, 2.0 * m, z * z));
        worst_mu = worst_mu.max(((theta - ctx.mu(z) / z) / theta).max(0.0));
        if spec.kind == ProfileKind::Power {
            worst_closed = worst_closed.max((m - 0.5 * theta * z * z).abs() / (0.5 * theta * z * z));
        }
    }
    rep.push("M bounds θz² ≤ 2M(z) ≤ z²", worst_m <= SLACK, format!("worst relative violation {worst_m:.3e}"));
    rep.push("μ(z)/z ≥ θ", worst_mu <= SLACK, format!("worst relative violation {worst_mu:.3e}"));
    if spec.kind == ProfileKind::Power {
        rep.push("M(z) = θz²/2 for power profiles", worst_closed <= 1e-8, format!("max relative error {worst_closed:.3e}"));
    }
    let m_top = ctx.big_m(0.999 * top)?;
    let mut worst_inv: f64 = 0.0;
    for _ in 0..samples {
        let level = rng.random_range(1e-6..1.0) * m_top;
        let z = ctx.m_inv_plus(level)?;
        worst_inv = worst_inv.max(excess((2.0 * level).sqrt(), z, (2.0 * level / theta).sqrt()));
    }
    rep.push("√(2ρ) ≤ M⁻¹₊(ρ) ≤ √(2ρ/θ)", worst_inv <= SLACK, format!("worst relative violation {worst_inv:.3e}"));
    let mut worst_dm: f64 = 0.0;
    for i in 0..50 {
        let z = (0.01 + 0.89 * i as f64 / 49.0) * top;
        let h = 1e-5 * z;
        let fd = (ctx.big_m(z + h)? - ctx.big_m(z - h)?) / (2.0 * h);
        worst_dm = worst_dm.max((fd - ctx.mu(z)).abs() / ctx.mu(z));
    }
    rep.push("M′ = μ", worst_dm <= 1e-6, format!("max relative difference {worst_dm:.3e}"));

    // g and τ at interior points.
    let mut worst_unit: f64 = 0.0;
    let mut worst_grad: f64 = 0.0;
    let mut worst_fd: f64 = 0.0;
    let mut bound_fail = 0usize;
    let mut n_tau = 0usize;
    while n_tau < samples {
        let mut x: Vec<f64> = (0..dim - 1).map(|_| rng.random_range(-1.0..1.0) * r0).collect();
        let rr = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rr >= r0 {
            continue;
        }
        x.push(rng.random_range(-0.99..0.99) * top);
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 0.05 * r0 {
            continue;
        }
        n_tau += 1;
        let g = ctx.g_field(&x)?;
        worst_grad = worst_grad.max(excess(theta / 2f64.sqrt(), g.grad_norm, 1.0 / (2f64.sqrt() * theta)));
        let t = ctx.tau_field(&x, 0.0)?;
        if !t.bound_ok {
            bound_fail += 1;
        }
        worst_unit = worst_unit.max((t.tau.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs());
        let scale = t.grad.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..dim {
            let h = 1e-6 * norm;
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let (tp, tm) = (ctx.tau_field(&xp, 0.0)?, ctx.tau_field(&xm, 0.0)?);
            for k in 0..dim {
                let fd = (tp.tau[k] - tm.tau[k]) / (2.0 * h);
                worst_fd = worst_fd.max((fd - t.grad[i][k]).abs() / scale);
            }
        }
    }
    rep.push("|∇g| ∈ [θ/√2, 1/(√2θ)]", worst_grad <= SLACK, format!("worst relative violation {worst_grad:.3e}"));
    rep.push("τ has unit norm", worst_unit <= 1e-12, format!("max deviation {worst_unit:.3e}"));
    rep.push("∇τ matches central differences", worst_fd <= 1e-5, format!("max relative difference {worst_fd:.3e}"));
    rep.push("∇τ entry and growth bounds", bound_fail == 0, format!("{bound_fail} of {samples} points violate"));

    // τ tangent to S.
    let mut worst_tan: f64 = 0.0;
    for _ in 0..samples {
        let mut xb: Vec<f64> = (0..dim - 1).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = xb.iter().map(|v| v * v).sum::<f64>().sqrt();
        let r = rng.random_range(1e-3..0.999) * r0;
        xb.iter_mut().for_each(|v| *v *= r / n);
        let nu = ctx.nu_surface(&xb)?;
        let mut x = xb.clone();
        x.push(ctx.profile().sigma(r));
        if x[dim - 1] >= top {
            continue;
        }
        let t = ctx.tau_field(&x, 0.0)?;
        worst_tan = worst_tan.max(t.tau.iter().zip(&nu).map(|(a, b)| a * b).sum::<f64>().abs());
    }
    rep.push("τ·ν = 0 on S", worst_tan <= 1e-10, format!("max |τ·ν| {worst_tan:.3e}"));

    // Level-set slices.
    let r_max = 0.999 * r0 / 2f64.sqrt();
    let mut worst_slice: f64 = 0.0;
    let mut worst_eq: f64 = 0.0;
    for i in 0..50 {
        let big_r = r_max * 10f64.powf(-3.0 * (1.0 - i as f64 / 49.0));
        let sl = match ctx.level_set_slice(big_r) {
            Ok(s) => s,
            Err(_) => continue,
        };
        if sl.z_hat >= top {
            continue;
        }
        let (lo, hi) = ctx.rho_hat_bounds(big_r)?;
        worst_slice = worst_slice.max(excess(lo, sl.rho_hat, hi));
        let res = 0.5 * sl.rho_hat * sl.rho_hat + ctx.big_m(sl.z_hat)? - big_r * big_r;
        worst_eq = worst_eq.max(res.abs() / (big_r * big_r));
    }
    rep.push("a₀R^{1/θ} ≤ ρ̂ ≤ √2R/(1+θφ₀²)^{1/2}", worst_slice <= SLACK, format!("worst relative violation {worst_slice:.3e}"));
    rep.push("½ρ̂² + M(ẑ) = R²", worst_eq <= 1e-10, format!("max relative residual {worst_eq:.3e}"));

    if dim == 2 {
        let c = coarea_check(&ctx, 20)?;
        rep.push("coarea: d|C_R|/dR = ∫_Γ |∇g|⁻¹", c.0 <= 0.01, format!("max relative difference {:.3e}", c.0));
        rep.push("coarea bracket √2θ·|Γ_R| ≤ d|C_R|/dR ≤ √2θ⁻¹·|Γ_R|", c.1 <= SLACK, format!("worst violation {:.3e}", c.1));
    }
    Ok(rep)
}

/// Largest level radius for which C_R stays inside the cylinder.
pub fn coarea_radius_limit(ctx: &GeometryCtx) -> Result<f64> {
    let m_top = ctx.big_m(0.999 * ctx.top())?;
    Ok(m_top.sqrt().min(ctx.r0() / 2f64.sqrt()))
}

/// (max relative coarea mismatch, worst bracket violation) on `n` radii.
pub fn coarea_check(ctx: &GeometryCtx, n: usize) -> Result<(f64, f64)> {
    let r_hi = 0.9 * coarea_radius_limit(ctx)?;
    let (mut mismatch, mut bracket): (f64, f64) = (0.0, 0.0);
    for i in 0..n {
        let big_r = r_hi * (0.05 + 0.95 * i as f64 / (n - 1) as f64);
        let s = ctx.coarea_sample(big_r, 2048)?;
        mismatch = mismatch.max((s.area_derivative - s.flux).abs() / s.flux);
        let th = ctx.theta();
        bracket =
            bracket.max(excess(2f64.sqrt() * th * s.length, s.area_derivative, 2f64.sqrt() / th * s.length));
    }
    Ok((mismatch, bracket))
}

pub fn verify_surface(spec: &ProfileSpec, dims: &[usize]) -> Result<SurfaceSuite> {
    let mut rep = SuiteReport::default();
    let mut rows = Vec::new();
    for &d in dims {
        let q = SurfaceQuadrature::new(spec, d)?;
        let dm1 = (d - 1) as f64;
        let ctx = GeometryCtx::new(spec, d)?;
        // Finite iff λ < (θ + d − 2)/θ for the profile at hand; d − 1 for cones.
        let bound = (ctx.theta() + d as f64 - 2.0) / ctx.theta();
        for frac in [0.0, 0.5, 0.99, 1.01, 1.5] {
            let lambda = frac * dm1;
            let w = q.weight_convergence(lambda)?;
            let expected = lambda < bound;
            rep.push(
                &format!("d={d} λ={lambda:.3} verdict"),
                w.finite == expected,
                format!("finite={} expected={} tail exponent {:.4}", w.finite, expected, w.tail_exponent),
            );
            for (eps, v) in &w.partial_values {
                rows.push(WeightRow { dim: d, lambda, epsilon: *eps, partial_value: *v });
            }
        }
        let loc = localize(d, spec)?;
        let expected_m = if d == 2 { 1 } else { 16 };
        rep.push(&format!("d={d} sector count"), loc.m == expected_m, format!("m={}", loc.m));
        let mut worst: f64 = 0.0;
        for i in 0..1000 {
            let phi = 2.0 * std::f64::consts::PI * (i as f64 + 0.5) / 1000.0;
            let xi = if d == 2 { vec![phi.cos()] } else { vec![phi.cos(), phi.sin()] };
            worst = worst.max((loc.partition(&xi)?.iter().sum::<f64>() - 1.0).abs());
        }
        rep.push(&format!("d={d} partition of unity"), worst <= 1e-10, format!("max |Ση−1| {worst:.3e}"));
        let lip_ok = loc.lipschitz_constants.iter().all(|l| l.is_finite());
        rep.push(&format!("d={d} sector Lipschitz constants finite"), lip_ok, format!("{:?}", loc.lipschitz_constants));
    }
    Ok(SurfaceSuite { report: rep, partials: rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightRow {
    pub dim: usize,
    pub lambda: f64,
    pub epsilon: f64,
    pub partial_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSuite {
    pub report: SuiteReport,
    pub partials: Vec<WeightRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnSuite {
    pub report: SuiteReport,
    pub sweep: Vec<GnSweepRow>,
    pub scaling: Vec<(String, GnScalingReport)>,
}

/// GN finiteness on Ω₂ below the admissible bound, an exploratory sweep
/// toward it, and the ρ-scaling of three homogeneous fields.
pub fn verify_gn(spec: &ProfileSpec, lambda: f64, r_values: &[f64], sweep_r: &[f64]) -> Result<GnSuite> {
    let mut rep = SuiteReport::default();
    let u = AnalyticField::HeightPower { lambda };
    let a = (1.0 - lambda) / (2.0 - lambda);
    for &r in r_values {
        let g = gn_check(&u, spec, r * a, a, lambda)?;
        rep.push(
            &format!("Ω₂ finiteness r={r}"),
            g.finite && g.converged,
            format!(
                "lhs={:.6e} term1={:.6e} term2={:.6e} ratio={:.6e} converged={} admissible={}",
                g.lhs, g.rhs_terms[0], g.rhs_terms[1], g.ratio, g.converged, g.admissible
            ),
        );
    }
    let sweep = gn_sweep(&u, spec, a, lambda, sweep_r);
    let rhos: Vec<f64> = (0..6).map(|k| 0.5f64.powi(k)).collect();
    let families = [
        ("radial_power_2", AnalyticField::RadialPower { k: 2.0 }, 2.0, 1.0, 1.0),
        ("linear", AnalyticField::Linear { a: 1.0, b: 0.0 }, 2.0, 0.5, 1.0),
        ("radial_power_1.5", AnalyticField::RadialPower { k: 1.5 }, 1.5, 0.6, 0.5),
    ];
    let mut scaling = Vec::new();
    for (name, f, q, a, lam) in families {
        let s = gn_scaling_check(&f, q, a, lam, &rhos)?;
        let close = |m: Option<f64>, p: f64| m.map(|m| (m - p).abs() <= 0.03 * p.abs().max(1e-12));
        let e1 = close(s.measured_e1, s.predicted_e1);
        let e2 = close(s.measured_e2, s.predicted_e2);
        rep.push(
            &format!("scaling {name}"),
            e1.unwrap_or(true) && e2.unwrap_or(false),
            format!(
                "e1 {:?} vs {:.4}, e2 {:?} vs {:.4}",
                s.measured_e1, s.predicted_e1, s.measured_e2, s.predicted_e2
            ),
        );
        scaling.push((name.to_string(), s));
    }
    Ok(GnSuite { report: rep, sweep, scaling })
}
