//! Gagliardo-Nirenberg quantities for analytic fields: on the outward cusp
//! region Ω₂ and on shrinking balls B_ρ.

use serde::{Deserialize, Serialize};

use super::field::AnalyticField;
use super::holder::{holder_seminorm, DEFAULT_SEED};
use crate::error::{Error, Result};
use crate::numerics::fit::line_fit;
use crate::numerics::quad::GaussLegendre;
use crate::profiles::ProfileSpec;
use crate::thresholds::{circ_div, XReal};

const MAX_SHELLS: usize = 60;
const GL_NODES: usize = 16;
const ANGLES: usize = 128;

/// Result of a dyadic-shell integration toward a singular point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShellIntegral {
    pub value: f64,
    pub shells: usize,
    pub converged: bool,
}

/// Sums `shell(j)` over j = 0.. until the contributions are negligible or
/// decay geometrically, in which case the tail is added in closed form.
fn shell_sum(mut shell: impl FnMut(usize) -> f64) -> ShellIntegral {
    let mut sum = 0.0;
    let mut contrib: Vec<f64> = Vec::new();
    for j in 0..MAX_SHELLS {
        let c = shell(j);
        if !c.is_finite() {
            return ShellIntegral { value: f64::INFINITY, shells: j + 1, converged: false };
        }
        sum += c;
        contrib.push(c);
        if j < 8 {
            continue;
        }
        if c <= 1e-15 * sum || sum == 0.0 {
            return ShellIntegral { value: sum, shells: j + 1, converged: true };
        }
        let n = contrib.len();
        let r: Vec<f64> = (n - 3..n).map(|i| contrib[i] / contrib[i - 1]).collect();
        let stable = r.iter().all(|&q| q > 0.0 && q < 0.95) && (r[2] - r[1]).abs() < 1e-3 * r[2].max(1e-3);
        if stable {
            let q = r[2];
            return ShellIntegral { value: sum + c * q / (1.0 - q), shells: j + 1, converged: true };
        }
    }
    ShellIntegral { value: sum, shells: MAX_SHELLS, converged: false }
}

/// ∫_{Ω₂} f over Ω₂ = {|x₁| < σ⁻¹(x₂), 0 < x₂ < top}, in dyadic x₂-shells.
fn integrate_cusp(width: &dyn Fn(f64) -> f64, top: f64, f: &dyn Fn([f64; 2]) -> f64) -> ShellIntegral {
    let gl = GaussLegendre::cached(GL_NODES);
    shell_sum(|j| {
        let hi = top * 0.5f64.powi(j as i32);
        let mut s = 0.0;
        for (y, wy) in gl.on(0.5 * hi, hi) {
            let w = width(y);
            if w > 0.0 {
                s += wy * gl.integrate(-w, w, |x| f([x, y]));
            }
        }
        s
    })
}

/// ∫_{B_ρ} f in polar coordinates with dyadic radial shells.
fn integrate_ball(rho: f64, f: &dyn Fn([f64; 2]) -> f64) -> ShellIntegral {
    let gl = GaussLegendre::cached(GL_NODES);
    let dphi = 2.0 * std::f64::consts::PI / ANGLES as f64;
    shell_sum(|j| {
        let hi = rho * 0.5f64.powi(j as i32);
        let mut s = 0.0;
        for (r, wr) in gl.on(0.5 * hi, hi) {
            let mut ring = 0.0;
            for k in 0..ANGLES {
                let phi = (k as f64 + 0.5) * dphi;
                ring += f([r * phi.cos(), r * phi.sin()]);
            }
            s += wr * r * ring * dphi;
        }
        s
    })
}

fn check_params(q: f64, a: f64, lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::Config(format!("λ={lambda} outside (0, 1]")));
    }
    let a_min = (1.0 - lambda) / (2.0 - lambda);
    if !(a >= a_min && a <= 1.0) {
        return Err(Error::Config(format!("a={a} outside [(1-λ)/(2-λ), 1] = [{a_min}, 1]")));
    }
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::Config(format!("q={q} must be positive")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnParams {
    pub q: f64,
    pub a: f64,
    pub lambda: f64,
    pub theta: f64,
    pub d: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnCheckResult {
    /// ‖∇u‖ in L^{q/a}(Ω₂).
    pub lhs: f64,
    /// (‖D²u‖_q^a [u]_λ^{1−a}, [u]_λ).
    pub rhs_terms: [f64; 2],
    /// lhs / (rhs₁ + rhs₂); infinite when both terms vanish and lhs does not.
    pub ratio: f64,
    pub hessian_norm: f64,
    pub holder: f64,
    pub params: GnParams,
    /// r = q/a and the admissible bound (θ+d−1)/(1−λ).
    pub r: f64,
    pub r_bound: XReal,
    pub admissible: bool,
    /// All quadratures met their tail criterion.
    pub converged: bool,
    pub finite: bool,
}

/// Graded point cloud in Ω₂ including the tip: 21 heights, 21 abscissae each.
fn cusp_cloud(width: &dyn Fn(f64) -> f64, top: f64) -> Vec<[f64; 2]> {
    let mut pts = vec![[0.0, 0.0]];
    for i in 0..21 {
        let y = top * 2f64.powf(-0.75 * i as f64);
        let w = width(y);
        for k in 0..21 {
            pts.push([w * (k as f64 / 10.0 - 1.0), y]);
        }
    }
    pts
}

pub fn gn_check(u: &AnalyticField, profile: &ProfileSpec, q: f64, a: f64, lambda: f64) -> Result<GnCheckResult> {
    check_params(q, a, lambda)?;
    let prof = profile.build()?;
    let radius = prof.regular_radius();
    let top = prof.sigma(radius);
    let theta = match prof.nominal_theta() {
        Some(t) => t,
        None => crate::geometry::GeometryCtx::new(profile, 2)?.theta(),
    };
    let width = |y: f64| prof.invert_unchecked(y).min(radius);
    let r = q / a;
    let grad = integrate_cusp(&width, top, &|x| u.grad_norm(x).powf(r));
    let hess = integrate_cusp(&width, top, &|x| u.hessian_norm(x).powf(q));
    let pts = cusp_cloud(&width, top);
    let vals: Vec<f64> = pts.iter().map(|&x| u.value(x)).collect();
    let holder = holder_seminorm(&pts, &vals, lambda, DEFAULT_SEED)?.value;
    let lhs = grad.value.powf(1.0 / r);
    let hessian_norm = hess.value.powf(1.0 / q);
    let term1 = hessian_norm.powf(a) * holder.powf(1.0 - a);
    let rhs = term1 + holder;
    let ratio = if rhs > 0.0 {
        lhs / rhs
    } else if lhs == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let r_bound = circ_div(theta + 1.0, 1.0 - lambda);
    let admissible = match r_bound {
        XReal::Finite(b) => r < b,
        _ => true,
    };
    let finite = [lhs, term1, holder, ratio].iter().all(|v| v.is_finite());
    Ok(GnCheckResult {
        lhs,
        rhs_terms: [term1, holder],
        ratio,
        hessian_norm,
        holder,
        params: GnParams { q, a, lambda, theta, d: 2 },
        r,
        r_bound,
        admissible,
        converged: grad.converged && hess.converged,
        finite,
    })
}

/// One row of a sweep in r = q/a at fixed a and λ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnSweepRow {
    pub r: f64,
    pub q: f64,
    pub result: Option<GnCheckResult>,
    pub error: Option<String>,
}

/// Runs `gn_check` for each r; failures are recorded per row.
pub fn gn_sweep(u: &AnalyticField, profile: &ProfileSpec, a: f64, lambda: f64, r_values: &[f64]) -> Vec<GnSweepRow> {
    r_values
        .iter()
        .map(|&r| {
            let q = r * a;
            match gn_check(u, profile, q, a, lambda) {
                Ok(res) => GnSweepRow { r, q, result: Some(res), error: None },
                Err(e) => GnSweepRow { r, q, result: None, error: Some(e.to_string()) },
            }
        })
        .collect()
}

pub fn write_sweep_csv(rows: &[GnSweepRow], mut w: impl std::io::Write) -> Result<()> {
    writeln!(w, "r,q,lhs,term1,term2,ratio,admissible,converged,error")?;
    for row in rows {
        match &row.result {
            Some(g) => writeln!(
                w,
                "{},{},{:.12e},{:.12e},{:.12e},{:.12e},{},{},",
                row.r, row.q, g.lhs, g.rhs_terms[0], g.rhs_terms[1], g.ratio, g.admissible, g.converged
            )?,
            None => writeln!(w, "{},{},,,,,,,{}", row.r, row.q, row.error.as_deref().unwrap_or("").replace(',', ";"))?,
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnScalingRow {
    pub rho: f64,
    pub lhs: f64,
    pub hessian_norm: f64,
    pub holder: f64,
    pub term1: f64,
    pub term2: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnScalingReport {
    pub rows: Vec<GnScalingRow>,
    pub slope_lhs: Option<f64>,
    pub slope_term1: Option<f64>,
    pub slope_term2: Option<f64>,
    /// slope(lhs) − slope(term1), against (2−λ)a+λ−1.
    pub measured_e1: Option<f64>,
    pub predicted_e1: f64,
    /// slope(lhs) − slope(term2), against λ−1+an/q.
    pub measured_e2: Option<f64>,
    pub predicted_e2: f64,
}

/// Polar cloud in B_ρ: the centre plus 20 radii by 22 angles.
fn ball_cloud(rho: f64) -> Vec<[f64; 2]> {
    let mut pts = vec![[0.0, 0.0]];
    for i in 1..=20 {
        let r = rho * i as f64 / 20.0;
        for k in 0..22 {
            let phi = 2.0 * std::f64::consts::PI * k as f64 / 22.0;
            pts.push([r * phi.cos(), r * phi.sin()]);
        }
    }
    pts
}

fn log_slope(rho: &[f64], v: &[f64]) -> Option<f64> {
    if v.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return None;
    }
    let lx: Vec<f64> = rho.iter().map(|r| r.ln()).collect();
    let ly: Vec<f64> = v.iter().map(|x| x.ln()).collect();
    line_fit(&lx, &ly).ok().map(|f| f.slope)
}

pub fn gn_scaling_check(u: &AnalyticField, q: f64, a: f64, lambda: f64, rho_values: &[f64]) -> Result<GnScalingReport> {
    check_params(q, a, lambda)?;
    if rho_values.len() < 2 || rho_values.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
        return Err(Error::Config("need at least two ρ values in (0, 1]".into()));
    }
    let n = 2.0;
    let r = q / a;
    let mut rows = Vec::with_capacity(rho_values.len());
    for &rho in rho_values {
        let grad = integrate_ball(rho, &|x| u.grad_norm(x).powf(r));
        let hess = integrate_ball(rho, &|x| u.hessian_norm(x).powf(q));
        let pts = ball_cloud(rho);
        let vals: Vec<f64> = pts.iter().map(|&x| u.value(x)).collect();
        let holder = holder_seminorm(&pts, &vals, lambda, DEFAULT_SEED)?.value;
        let hessian_norm = hess.value.powf(1.0 / q);
        rows.push(GnScalingRow {
            rho,
            lhs: grad.value.powf(1.0 / r),
            hessian_norm,
            holder,
            term1: hessian_norm.powf(a) * holder.powf(1.0 - a),
            term2: holder,
            converged: grad.converged && hess.converged,
        });
    }
    let col = |f: fn(&GnScalingRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let slope_lhs = log_slope(rho_values, &col(|r| r.lhs));
    let slope_term1 = log_slope(rho_values, &col(|r| r.term1));
    let slope_term2 = log_slope(rho_values, &col(|r| r.term2));
    let diff = |s: Option<f64>| slope_lhs.zip(s).map(|(l, t)| l - t);
    Ok(GnScalingReport {
        measured_e1: diff(slope_term1),
        measured_e2: diff(slope_term2),
        predicted_e1: (2.0 - lambda) * a + lambda - 1.0,
        predicted_e2: lambda - 1.0 + a * n / q,
        rows,
        slope_lhs,
        slope_term1,
        slope_term2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rhos() -> Vec<f64> {
        (0..6).map(|k| 0.5f64.powi(k)).collect()
    }

    #[test]
    fn linear_field_ratio_is_measure_power() {
        let theta: f64 = 0.5;
        let g = gn_check(&AnalyticField::Linear { a: 0.0, b: 1.0 }, &ProfileSpec::power(theta, 1.0), 2.0, 1.0, 1.0).unwrap();
        let area = 2.0 * theta / (1.0 + theta);
        assert!((g.lhs - area.sqrt()).abs() < 1e-10, "{}", g.lhs);
        assert_eq!(g.rhs_terms[0], 0.0);
        assert!((g.holder - 1.0).abs() < 1e-12);
        assert!((g.ratio - area.sqrt()).abs() < 1e-10);
        assert!(g.converged && g.finite);
    }

    #[test]
    fn cusp_height_power_is_finite_below_threshold() {
        let lambda = 0.5;
        let a = (1.0 - lambda) / (2.0 - lambda);
        for r in [2.0, 2.5, 2.9] {
            let g = gn_check(&AnalyticField::HeightPower { lambda }, &ProfileSpec::power(0.5, 1.0), r * a, a, lambda).unwrap();
            assert!(g.finite && g.converged && g.admissible, "{g:?}");
            assert!((g.holder - 1.0).abs() < 1e-12);
            // ∫ (λ y^{λ−1})^r 2y² dy = 2λ^r/(3 + r(λ−1)) on (0, 1).
            let exact = (2.0 * lambda.powf(r) / (3.0 + r * (lambda - 1.0))).powf(1.0 / r);
            assert!((g.lhs - exact).abs() < 1e-8 * exact, "{} vs {exact}", g.lhs);
        }
        assert_eq!(
            gn_check(&AnalyticField::HeightPower { lambda }, &ProfileSpec::power(0.5, 1.0), 3.2 * a, a, lambda).unwrap().r_bound,
            XReal::Finite(3.0)
        );
    }

    #[test]
    fn rejects_a_outside_range() {
        let u = AnalyticField::Linear { a: 1.0, b: 0.0 };
        assert!(gn_check(&u, &ProfileSpec::power(0.5, 1.0), 1.0, 0.2, 0.5).unwrap_err().is_config());
        assert!(gn_scaling_check(&u, 1.0, 1.1, 0.5, &rhos()).unwrap_err().is_config());
    }

    #[test]
    fn scaling_of_quadratic() {
        let rep = gn_scaling_check(&AnalyticField::RadialPower { k: 2.0 }, 2.0, 1.0, 1.0, &rhos()).unwrap();
        assert!((rep.slope_lhs.unwrap() - 2.0).abs() < 1e-6);
        assert!((rep.slope_term1.unwrap() - 1.0).abs() < 1e-6);
        assert!((rep.measured_e1.unwrap() - rep.predicted_e1).abs() < 0.03 * rep.predicted_e1.abs());
        assert!((rep.measured_e2.unwrap() - rep.predicted_e2).abs() < 0.03 * rep.predicted_e2.abs());
    }

    #[test]
    fn scaling_of_linear_and_constant() {
        let rep = gn_scaling_check(&AnalyticField::Linear { a: 1.0, b: 0.0 }, 2.0, 0.5, 1.0, &rhos()).unwrap();
        assert!(rep.rows.iter().all(|r| (r.holder - 1.0).abs() < 1e-12));
        assert!(rep.measured_e1.is_none());
        assert!((rep.measured_e2.unwrap() - 0.5).abs() < 0.015);
        let rep = gn_scaling_check(&AnalyticField::Constant { c: 2.0 }, 2.0, 0.5, 1.0, &rhos()).unwrap();
        assert!(rep.rows.iter().all(|r| r.lhs == 0.0 && r.term1 == 0.0 && r.term2 == 0.0));
    }

    #[test]
    fn scaling_of_fractional_power() {
        let (a, q, lambda) = (0.6, 1.5, 0.5);
        let rep = gn_scaling_check(&AnalyticField::RadialPower { k: 1.5 }, q, a, lambda, &rhos()).unwrap();
        assert!((rep.measured_e1.unwrap() - rep.predicted_e1).abs() < 0.03 * rep.predicted_e1.abs());
        assert!((rep.measured_e2.unwrap() - rep.predicted_e2).abs() < 0.03 * rep.predicted_e2.abs());
    }
}
