//! Quadrature on the interface S = {x_d = σ(|x̄|)}: surface integrals, the
//! weighted integrability test for |x|^{−λ}, Besov seminorms, the sector
//! localization and the forms a⁰ and a¹_δ.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::geometry::GeometryCtx;
use crate::numerics::{fit::line_fit, quad::GaussLegendre};
use crate::profiles::{Profile, ProfileSpec};

/// Dyadic radial quadrature on S.
#[derive(Debug, Clone)]
pub struct SurfaceQuadrature {
    profile: Profile,
    dim: usize,
    /// Cutoffs ε_j = R₀ 2^{−j} for j in `j_min..=j_max`.
    pub j_min: usize,
    pub j_max: usize,
    pub nodes_per_dyad: usize,
    /// Trapezoid nodes on the circle when d = 3.
    pub angular_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceIntegral {
    pub value: f64,
    pub converged: bool,
    /// (ε_j, ∫ over {|x̄| > ε_j}).
    pub partials: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightConvergence {
    pub finite: bool,
    pub partial_values: Vec<(f64, f64)>,
    /// Slope of partial values against log(1/ε): ≈ 0 when convergent.
    pub log_slope: f64,
    /// Fitted exponent e of the dyadic increments, Δ_j ∝ ε_j^e.
    pub tail_exponent: f64,
    /// Extrapolated total when finite.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesovValue {
    pub value: f64,
    pub divergent: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormMode {
    A0,
    A1,
}

/// Increments decaying slower than ε^TAIL_EXP_MIN are treated as non-summable.
const TAIL_EXP_MIN: f64 = 1e-3;

impl SurfaceQuadrature {
    pub fn new(spec: &ProfileSpec, dim: usize) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        let profile = spec.build()?;
        if !profile.sigma_r0().is_finite() {
            return Err(Error::InvalidProfile("σ(R0) must be finite for surface quadrature".into()));
        }
        Ok(Self { profile, dim, j_min: 4, j_max: 32, nodes_per_dyad: 32, angular_nodes: 64 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    /// Points of S at radius r with their angular weights (summing to ω₁).
    fn ring(&self, r: f64) -> Vec<(Vec<f64>, f64)> {
        let z = self.profile.sigma(r);
        if self.dim == 2 {
            vec![(vec![r, z], 1.0), (vec![-r, z], 1.0)]
        } else {
            let n = self.angular_nodes;
            let w = 2.0 * PI / n as f64;
            (0..n)
                .map(|k| {
                    let phi = w * k as f64;
                    (vec![r * phi.cos(), r * phi.sin(), z], w)
                })
                .collect()
        }
    }

    /// Radial density r^{d−2} √(1 + σ'²).
    fn jacobian(&self, r: f64) -> f64 {
        let ds = self.profile.eval_unchecked(r).dsigma;
        r.powi(self.dim as i32 - 2) * (1.0 + ds * ds).sqrt()
    }

    /// Integrals over the dyadic shells [R₀2^{−k−1}, R₀2^{−k}], k < j_max.
    fn shells(&self, f: &dyn Fn(&[f64]) -> f64) -> Result<Vec<f64>> {
        let rule = GaussLegendre::cached(self.nodes_per_dyad);
        let r0 = self.profile.r0();
        let mut out = Vec::with_capacity(self.j_max);
        for k in 0..self.j_max {
            let hi = r0 * 0.5f64.powi(k as i32);
            let lo = 0.5 * hi;
            let mut s = 0.0;
            for (r, w) in rule.on(lo, hi) {
                let jac = self.jacobian(r);
                let mut ang = 0.0;
                for (x, wa) in self.ring(r) {
                    let v = f(&x);
                    if !v.is_finite() {
                        return Err(Error::Evaluation(format!("non-finite integrand at radius {r}")));
                    }
                    ang += wa * v;
                }
                s += w * jac * ang;
            }
            out.push(s);
        }
        Ok(out)
    }

    fn partials(&self, shells: &[f64]) -> Vec<(f64, f64)> {
        let r0 = self.profile.r0();
        let mut acc = 0.0;
        let mut out = Vec::new();
        for (k, s) in shells.iter().enumerate() {
            acc += s;
            let j = k + 1;
            if j >= self.j_min {
                out.push((r0 * 0.5f64.powi(j as i32), acc));
            }
        }
        out
    }

    /// ∫_S f da for f given on points of S (coordinates in R^d).
    pub fn integrate(&self, f: &dyn Fn(&[f64]) -> f64) -> Result<SurfaceIntegral> {
        let shells = self.shells(f)?;
        let partials = self.partials(&shells);
        let n = shells.len();
        let extrap = |j: usize| -> f64 {
            let base: f64 = shells[..=j].iter().sum();
            let (d1, d0) = (shells[j], shells[j - 1]);
            if d1 == 0.0 {
                return base;
            }
            let q = d1 / d0;
            if q.is_finite() && q > 0.0 && q < 1.0 {
                base + d1 * q / (1.0 - q)
            } else {
                base
            }
        };
        let e1 = extrap(n - 1);
        let e0 = extrap(n - 2);
        let converged = (e1 - e0).abs() <= 1e-8 * e1.abs().max(f64::MIN_POSITIVE) || shells[n - 1] == 0.0;
        Ok(SurfaceIntegral { value: e1, converged, partials })
    }

    /// Integral of an axisymmetric integrand given as a function of (r, z).
    pub fn surface_integral(&self, f: impl Fn(f64, f64) -> f64) -> Result<SurfaceIntegral> {
        let d = self.dim;
        self.integrate(&|x: &[f64]| {
            let r = x[..d - 1].iter().map(|v| v * v).sum::<f64>().sqrt();
            f(r, x[d - 1])
        })
    }

    pub fn weight_convergence(&self, lambda: f64) -> Result<WeightConvergence> {
        if !(lambda >= 0.0) {
            return Err(domain(format!("lambda={lambda} must be nonnegative")));
        }
        let shells = self.shells(&|x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().powf(-0.5 * lambda))?;
        let partial_values = self.partials(&shells);
        let n = shells.len();
        let k = 8.min(n - 1);
        let tail = &shells[n - k..];
        let eps: Vec<f64> = (n - k..n).map(|j| self.profile.r0() * 0.5f64.powi(j as i32 + 1)).collect();
        let total: f64 = shells.iter().sum();
        let cauchy = tail.last().copied().unwrap_or(0.0).abs() <= 1e-6 * total.abs();
        let tail_exponent = if tail.iter().all(|v| *v > 0.0) {
            let lx: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
            let ly: Vec<f64> = tail.iter().map(|v| v.ln()).collect();
            line_fit(&lx, &ly)?.slope
        } else {
            f64::INFINITY
        };
        let finite = cauchy || tail_exponent > TAIL_EXP_MIN;
        let pv_tail = &partial_values[partial_values.len() - k..];
        let lx: Vec<f64> = pv_tail.iter().map(|(e, _)| (1.0 / e).ln()).collect();
        let ly: Vec<f64> = pv_tail.iter().map(|(_, v)| *v).collect();
        let log_slope = line_fit(&lx, &ly)?.slope;
        let value = finite.then(|| {
            let q = 0.5f64.powf(tail_exponent);
            if tail_exponent.is_finite() {
                total + shells[n - 1] * q / (1.0 - q)
            } else {
                total
            }
        });
        Ok(WeightConvergence { finite, partial_values, log_slope, tail_exponent, value })
    }

    /// (∫_S |f|^p da)^{1/p}.
    pub fn lp_norm(&self, f: &dyn Fn(&[f64]) -> f64, p: f64) -> Result<f64> {
        let v = self.integrate(&|x: &[f64]| f(x).abs().powf(p))?.value;
        Ok(v.powf(1.0 / p))
    }

    /// Besov-type seminorm ∫∫_{|x−y|<1} |v(x)−v(y)|^p / |x−y|^{d−1+αp}.
    pub fn besov_seminorm(&self, v: &dyn Fn(&[f64]) -> f64, p: f64, alpha: f64) -> Result<BesovValue> {
        if !(p > 1.0) {
            return Err(domain(format!("p={p} must exceed 1")));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(domain(format!("alpha={alpha} outside (0,1)")));
        }
        let r0 = self.profile.r0();
        let levels = 30;
        let mut segs = Vec::with_capacity(levels + 1);
        let mut hi = r0;
        for _ in 0..levels {
            segs.push((0.5 * hi, hi));
            hi *= 0.5;
        }
        segs.push((0.0, hi));
        let ctx = BesovCtx { q: self, v, p, expo: self.dim as f64 - 1.0 + alpha * p, rule: GaussLegendre::cached(12) };
        let mut total = 0.0;
        for (i, a) in segs.iter().enumerate() {
            total += ctx.diagonal(*a, 0);
            for b in &segs[i + 1..] {
                total += 2.0 * ctx.block(*a, *b);
            }
        }
        if !total.is_finite() {
            return Ok(BesovValue { value: f64::INFINITY, divergent: true });
        }
        Ok(BesovValue { value: total, divergent: false })
    }

    /// a⁰(Q, φ) = ∫_S Qφ, or a¹_δ(P, φ) = ∫_S |x|^δ P τ·∇φ.
    pub fn surface_forms(
        &self,
        ctx: &GeometryCtx,
        field: &dyn Fn(&[f64]) -> f64,
        phi: &dyn Fn(&[f64]) -> f64,
        grad_phi: &dyn Fn(&[f64]) -> Vec<f64>,
        mode: FormMode,
        delta: f64,
    ) -> Result<f64> {
        if ctx.dim() != self.dim {
            return Err(domain("geometry and surface dimensions differ"));
        }
        match mode {
            FormMode::A0 => Ok(self.integrate(&|x: &[f64]| field(x) * phi(x))?.value),
            FormMode::A1 => {
                if !(0.0..=1.0).contains(&delta) {
                    return Err(domain(format!("delta={delta} outside [0,1]")));
                }
                let err = std::cell::RefCell::new(None);
                let v = self.integrate(&|x: &[f64]| {
                    let tau = match ctx.tau_field(x, 0.0) {
                        Ok(t) => t.tau,
                        Err(e) => {
                            err.borrow_mut().get_or_insert(e);
                            return 0.0;
                        }
                    };
                    let g = grad_phi(x);
                    let dot: f64 = tau.iter().zip(&g).map(|(a, b)| a * b).sum();
                    let nx = x.iter().map(|c| c * c).sum::<f64>().sqrt();
                    nx.powf(delta) * field(x) * dot
                })?;
                if let Some(e) = err.into_inner() {
                    return Err(e);
                }
                Ok(v.value)
            }
        }
    }
}

struct BesovCtx<'a> {
    q: &'a SurfaceQuadrature,
    v: &'a dyn Fn(&[f64]) -> f64,
    p: f64,
    expo: f64,
    rule: std::sync::Arc<GaussLegendre>,
}

const BESOV_DEPTH: usize = 12;

impl BesovCtx<'_> {
    /// Kernel summed over the angular variables at radii (r1, r2).
    fn kernel(&self, r1: f64, r2: f64, near: bool) -> f64 {
        let prof = &self.q.profile;
        let (z1, z2) = (prof.sigma(r1), prof.sigma(r2));
        let k = |x: &[f64], y: &[f64]| -> f64 {
            let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            if !(d2 < 1.0) || d2 == 0.0 {
                return 0.0;
            }
            let diff = ((self.v)(x) - (self.v)(y)).abs();
            if diff == 0.0 {
                return 0.0;
            }
            diff.powf(self.p) / d2.powf(0.5 * self.expo)
        };
        if self.q.dim == 2 {
            let mut s = 0.0;
            for sx in [1.0, -1.0] {
                for sy in [1.0, -1.0] {
                    s += k(&[sx * r1, z1], &[sy * r2, z2]);
                }
            }
            s
        } else {
            // Outer angle by trapezoid, relative angle graded toward 0.
            let n_outer = 16;
            let w_outer = 2.0 * PI / n_outer as f64;
            let rel = relative_angles(near);
            let mut s = 0.0;
            for a in 0..n_outer {
                let phi = w_outer * a as f64;
                let x = [r1 * phi.cos(), r1 * phi.sin(), z1];
                for &(psi, w) in rel.iter() {
                    let y = [r2 * (phi + psi).cos(), r2 * (phi + psi).sin(), z2];
                    s += w_outer * w * k(&x, &y);
                }
            }
            s
        }
    }

    fn block(&self, a: (f64, f64), b: (f64, f64)) -> f64 {
        let mut s = 0.0;
        for (r1, w1) in self.rule.on(a.0, a.1) {
            let j1 = self.q.jacobian(r1);
            for (r2, w2) in self.rule.on(b.0, b.1) {
                s += w1 * w2 * j1 * self.q.jacobian(r2) * self.kernel(r1, r2, false);
            }
        }
        s
    }

    fn near_block(&self, a: (f64, f64), b: (f64, f64)) -> f64 {
        let mut s = 0.0;
        for (r1, w1) in self.rule.on(a.0, a.1) {
            let j1 = self.q.jacobian(r1);
            for (r2, w2) in self.rule.on(b.0, b.1) {
                s += w1 * w2 * j1 * self.q.jacobian(r2) * self.kernel(r1, r2, true);
            }
        }
        s
    }

    /// Square seg × seg, refined recursively along the diagonal.
    fn diagonal(&self, seg: (f64, f64), depth: usize) -> f64 {
        let mid = 0.5 * (seg.0 + seg.1);
        let (l, r) = ((seg.0, mid), (mid, seg.1));
        if depth >= BESOV_DEPTH {
            return self.near_block(seg, seg);
        }
        self.diagonal(l, depth + 1) + self.diagonal(r, depth + 1) + 2.0 * self.near_block(l, r)
    }
}

fn relative_angles(near: bool) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::cached(8);
    let levels = if near { 16 } else { 6 };
    let mut out = Vec::new();
    let mut hi = PI;
    for _ in 0..levels {
        let lo = 0.5 * hi;
        for (t, w) in rule.on(lo, hi) {
            out.push((t, w));
            out.push((-t, w));
        }
        hi = lo;
    }
    for (t, w) in rule.on(0.0, hi) {
        out.push((t, w));
        out.push((-t, w));
    }
    out
}

/// Partition of unity subordinate to angular sectors of the (d−2)-sphere.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectorDecomposition {
    pub dim: usize,
    /// Index of the last partition function; there are m + 1 of them.
    pub m: usize,
    /// Sector centers (angles for d = 3, ±1 for d = 2) and half-width.
    pub centers: Vec<f64>,
    pub half_width: f64,
    pub lipschitz_constants: Vec<f64>,
    /// max |(σ⁻¹)'| over the sampled heights.
    pub max_inverse_slope: f64,
}

/// C² bump (1 − t²)³ on (−1, 1).
fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        let s = 1.0 - t * t;
        s * s * s
    }
}

fn wrap_angle(a: f64) -> f64 {
    let mut x = a.rem_euclid(2.0 * PI);
    if x > PI {
        x -= 2.0 * PI;
    }
    x
}

impl SectorDecomposition {
    /// Values (η₀(ξ), …, η_m(ξ)) at a point ξ of the unit (d−2)-sphere.
    pub fn partition(&self, xi: &[f64]) -> Result<Vec<f64>> {
        match self.dim {
            2 => {
                let t = *xi.first().ok_or_else(|| domain("empty sphere point"))?;
                Ok(vec![0.5 * (1.0 + t), 0.5 * (1.0 - t)])
            }
            _ => {
                if xi.len() != 2 {
                    return Err(domain("d=3 sphere points are (cos φ, sin φ)"));
                }
                let phi = xi[1].atan2(xi[0]);
                let raw: Vec<f64> =
                    self.centers.iter().map(|c| bump(wrap_angle(phi - c) / self.half_width)).collect();
                let total: f64 = raw.iter().sum();
                Ok(raw.iter().map(|b| b / total).collect())
            }
        }
    }
}

pub fn localize(dim: usize, spec: &ProfileSpec) -> Result<SectorDecomposition> {
    if !(2..=3).contains(&dim) {
        return Err(Error::UnsupportedDimension(dim));
    }
    let profile = spec.build()?;
    let top = profile.sigma_r0();
    if !top.is_finite() {
        return Err(Error::InvalidProfile("σ(R0) must be finite".into()));
    }
    let inv_slope = |z: f64| 1.0 / profile.eval_unchecked(profile.invert_unchecked(z)).dsigma;
    let heights: Vec<f64> = (0..=400).map(|i| top * 2f64.powf(-30.0 * (1.0 - i as f64 / 400.0))).collect();
    let max_inverse_slope = heights.iter().map(|&z| inv_slope(z)).fold(0.0, f64::max);
    if dim == 2 {
        // Each half of S is the graph x₁ = ±σ⁻¹(x₂) over the height.
        let lip = max_fd_slope_1d(&heights, |z| profile.invert_unchecked(z));
        return Ok(SectorDecomposition {
            dim,
            m: 1,
            centers: vec![1.0, -1.0],
            half_width: 1.0,
            lipschitz_constants: vec![lip, lip],
            max_inverse_slope,
        });
    }
    let m = 16;
    let half_width = PI / 8.0;
    let centers: Vec<f64> = (0..=m).map(|i| i as f64 * PI / 8.0).collect();
    // Rotated graph f(t, z) = √(σ⁻¹(z)² − t²) on |t| < c σ⁻¹(z); identical in
    // every sector by axial symmetry.
    let c = (PI / (16.0 - PI)).sqrt();
    let f = |t: f64, z: f64| {
        let rho = profile.invert_unchecked(z);
        (rho * rho - t * t).max(0.0).sqrt()
    };
    let mut lip: f64 = 0.0;
    for &z in &heights[1..heights.len() - 1] {
        let rho = profile.invert_unchecked(z);
        let hz = 1e-6 * z;
        for k in 0..=20 {
            let t = c * rho * (-1.0 + 2.0 * k as f64 / 20.0) * (1.0 - 1e-9);
            let ht = 1e-6 * rho.max(f64::MIN_POSITIVE);
            let ft = (f(t + ht, z) - f(t - ht, z)) / (2.0 * ht);
            let fz = (f(t, (z + hz).min(top)) - f(t, z - hz)) / ((z + hz).min(top) - (z - hz));
            let g = (ft * ft + fz * fz).sqrt();
            if g.is_finite() {
                lip = lip.max(g);
            }
        }
    }
    Ok(SectorDecomposition { dim, m, centers, half_width, lipschitz_constants: vec![lip; m + 1], max_inverse_slope })
}

fn max_fd_slope_1d(xs: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    xs.windows(2).map(|w| ((f(w[1]) - f(w[0])) / (w[1] - w[0])).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    #[test]
    fn cone_lengths() {
        let q = SurfaceQuadrature::new(&ProfileSpec::power(1.0, 1.0), 2).unwrap();
        let v = q.surface_integral(|_, _| 1.0).unwrap();
        assert!(v.converged);
        assert!((v.value - 2.0 * SQRT_2).abs() < 1e-10);
        let q3 = SurfaceQuadrature::new(&ProfileSpec::power(1.0, 1.0), 3).unwrap();
        let v = q3.surface_integral(|_, _| 1.0).unwrap();
        assert!((v.value - PI * SQRT_2).abs() < 1e-10);
        let z = q.surface_integral(|_, _| 0.0).unwrap();
        assert_eq!(z.value, 0.0);
        assert!(z.converged);
    }

    #[test]
    fn cusp_length_matches_arclength() {
        // Length of x₂ = √|x₁| over |x₁| ≤ 1, via x₁ = x₂²: 2∫₀¹ √(1+4s²) ds.
        let q = SurfaceQuadrature::new(&ProfileSpec::power(0.5, 1.0), 2).unwrap();
        let v = q.surface_integral(|_, _| 1.0).unwrap();
        let exact = 5f64.sqrt() + 0.5 * (2.0 + 5f64.sqrt()).ln();
        assert!(v.converged);
        assert!((v.value - exact).abs() < 1e-8 * exact, "{} vs {exact}", v.value);
    }

    #[test]
    fn weight_examples() {
        let q = SurfaceQuadrature::new(&ProfileSpec::power(0.5, 1.0), 2).unwrap();
        assert!(q.weight_convergence(0.5).unwrap().finite);
        assert!(!q.weight_convergence(1.5).unwrap().finite);
        let w0 = q.weight_convergence(0.0).unwrap();
        let area = q.surface_integral(|_, _| 1.0).unwrap().value;
        assert!(w0.finite && (w0.value.unwrap() - area).abs() < 1e-8 * area);
    }

    #[test]
    fn localize_examples() {
        let s = localize(2, &ProfileSpec::power(0.5, 1.0)).unwrap();
        assert_eq!(s.m, 1);
        assert_eq!(s.partition(&[1.0]).unwrap()[0], 1.0);
        assert_eq!(s.partition(&[-1.0]).unwrap()[0], 0.0);
        let s = localize(3, &ProfileSpec::power(0.5, 1.0)).unwrap();
        assert_eq!(s.m, 16);
        let eta = s.partition(&[0.3f64.cos(), 0.3f64.sin()]).unwrap();
        assert!((eta.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(localize(4, &ProfileSpec::power(0.5, 1.0)).is_err());
    }

    #[test]
    fn besov_constant_is_zero() {
        let q = SurfaceQuadrature::new(&ProfileSpec::power(0.5, 1.0), 2).unwrap();
        let b = q.besov_seminorm(&|_x: &[f64]| 3.0, 2.0, 0.25).unwrap();
        assert_eq!(b.value, 0.0);
    }
}
