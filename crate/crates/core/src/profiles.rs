//! Interface profiles `x_d = σ(|x̄|)` and checks of their standing assumptions.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numerics::{fit::line_fit, roots::brent};

/// Serializable description of a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub kind: ProfileKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(rename = "R0", alias = "r0", default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    /// Samples (ρ, σ, σ', σ'') for `kind = tabulated`.
    #[serde(default, alias = "table", skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<[f64; 4]>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    Power,
    Log,
    Tabulated,
}

impl ProfileSpec {
    pub fn power(theta: f64, r0: f64) -> Self {
        Self { kind: ProfileKind::Power, theta: Some(theta), r0: Some(r0), samples: None }
    }

    pub fn log(r0: f64) -> Self {
        Self { kind: ProfileKind::Log, theta: None, r0: Some(r0), samples: None }
    }

    pub fn tabulated(samples: Vec<[f64; 4]>) -> Self {
        Self { kind: ProfileKind::Tabulated, theta: None, r0: None, samples: Some(samples) }
    }

    /// Parse the short form `power:0.5`, `power:0.5:2`, `log` or `log:1`.
    pub fn parse_short(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize, default: f64| -> Result<f64> {
            match parts.get(i) {
                Some(v) => v.parse::<f64>().map_err(|_| Error::Config(format!("bad number '{v}' in profile '{s}'"))),
                None => Ok(default),
            }
        };
        match parts[0] {
            "power" => Ok(Self::power(num(1, 0.5)?, num(2, 1.0)?)),
            "cone" => Ok(Self::power(1.0, num(1, 1.0)?)),
            "log" => Ok(Self::log(num(1, 1.0)?)),
            other => Err(Error::Config(format!("unknown profile kind '{other}'"))),
        }
    }

    pub fn build(&self) -> Result<Profile> {
        Profile::new(self)
    }
}

#[derive(Debug, Clone)]
enum Shape {
    Power { theta: f64 },
    Log,
    Table { rho: Vec<f64>, sigma: Vec<f64>, slope: Vec<f64>, tail_exp: f64 },
}

/// A validated profile ready for evaluation.
#[derive(Debug, Clone)]
pub struct Profile {
    spec: ProfileSpec,
    shape: Shape,
    r0: f64,
}

/// Values (σ, σ', σ'') at one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileValue {
    pub sigma: f64,
    pub dsigma: f64,
    pub ddsigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CuspType {
    /// σ' unbounded at the tip.
    Cusp,
    /// σ' tends to a positive finite limit.
    Cone,
    Neither,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub a1_ok: bool,
    pub cusp_type: CuspType,
    pub a3_ok: bool,
    pub best_theta: Option<f64>,
    /// (ρ, offending quantity) pairs.
    pub witnesses: Vec<(f64, f64)>,
    /// σ'(ρ) ≤ σ'(R₀)(R₀/ρ)^{1−θ} on the grid, with θ = best_theta.
    pub derivative_bound_ok: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phi0 {
    pub value: f64,
    pub overflow: bool,
}

pub const PHI0_CAP: f64 = 1e12;

impl Profile {
    pub fn new(spec: &ProfileSpec) -> Result<Self> {
        match spec.kind {
            ProfileKind::Power => {
                let theta = spec.theta.ok_or_else(|| Error::InvalidProfile("power profile needs theta".into()))?;
                if !(theta > 0.0 && theta <= 1.0) {
                    return Err(Error::InvalidProfile(format!("theta must lie in (0,1], got {theta}")));
                }
                let r0 = spec.r0.unwrap_or(1.0);
                if !(r0 > 0.0 && r0.is_finite()) {
                    return Err(Error::InvalidProfile(format!("R0 must be positive, got {r0}")));
                }
                Ok(Self { spec: spec.clone(), shape: Shape::Power { theta }, r0 })
            }
            ProfileKind::Log => {
                let r0 = spec.r0.unwrap_or(1.0);
                if !(r0 > 0.0 && r0.is_finite()) {
                    return Err(Error::InvalidProfile(format!("R0 must be positive, got {r0}")));
                }
                Ok(Self { spec: spec.clone(), shape: Shape::Log, r0 })
            }
            ProfileKind::Tabulated => Self::from_table(spec),
        }
    }

    fn from_table(spec: &ProfileSpec) -> Result<Self> {
        let samples = spec
            .samples
            .as_ref()
            .ok_or_else(|| Error::InvalidProfile("tabulated profile needs samples".into()))?;
        if samples.len() < 2 {
            return Err(Error::InvalidProfile("tabulated profile needs at least two samples".into()));
        }
        let rho: Vec<f64> = samples.iter().map(|s| s[0]).collect();
        let sigma: Vec<f64> = samples.iter().map(|s| s[1]).collect();
        let mut slope: Vec<f64> = samples.iter().map(|s| s[2]).collect();
        if rho[0] <= 0.0 || sigma[0] <= 0.0 {
            return Err(Error::InvalidProfile("samples must start at positive ρ and σ".into()));
        }
        for i in 0..rho.len() - 1 {
            if !(rho[i + 1] > rho[i]) {
                return Err(Error::InvalidProfile(format!("ρ samples not increasing at index {}", i + 1)));
            }
            if !(sigma[i + 1] > sigma[i]) {
                return Err(Error::InvalidProfile(format!("σ samples not increasing at index {}", i + 1)));
            }
        }
        if slope.iter().any(|m| !(*m > 0.0)) {
            return Err(Error::InvalidProfile("σ' samples must be positive".into()));
        }
        // Fritsch-Carlson limiting keeps the Hermite interpolant monotone.
        for i in 0..rho.len() - 1 {
            let delta = (sigma[i + 1] - sigma[i]) / (rho[i + 1] - rho[i]);
            let a = slope[i] / delta;
            let b = slope[i + 1] / delta;
            let n2 = a * a + b * b;
            if n2 > 9.0 {
                let t = 3.0 / n2.sqrt();
                slope[i] = t * a * delta;
                slope[i + 1] = t * b * delta;
            }
        }
        let tail_exp = slope[0] * rho[0] / sigma[0];
        let r0 = *rho.last().expect("non-empty");
        if let Some(given) = spec.r0 {
            if (given - r0).abs() > 1e-12 * r0 {
                return Err(Error::InvalidProfile(format!("R0={given} does not match last sample ρ={r0}")));
            }
        }
        Ok(Self { spec: spec.clone(), shape: Shape::Table { rho, sigma, slope, tail_exp }, r0 })
    }

    pub fn spec(&self) -> &ProfileSpec {
        &self.spec
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    /// Opening parameter when it is part of the definition (power profiles).
    pub fn nominal_theta(&self) -> Option<f64> {
        match self.shape {
            Shape::Power { theta } => Some(theta),
            _ => None,
        }
    }

    /// Largest radius at which σ is regular; the log profile blows up at R₀.
    pub fn regular_radius(&self) -> f64 {
        match self.shape {
            Shape::Log => 0.5 * self.r0,
            _ => self.r0,
        }
    }

    /// σ(R₀); infinite for the log profile.
    pub fn sigma_r0(&self) -> f64 {
        match self.shape {
            Shape::Log => f64::INFINITY,
            _ => self.sigma(self.r0),
        }
    }

    /// σ alone, extended by σ(0) = 0.
    pub fn sigma(&self, rho: f64) -> f64 {
        if rho <= 0.0 {
            return 0.0;
        }
        match &self.shape {
            Shape::Power { theta } => rho.powf(*theta),
            Shape::Log => 1.0 / (self.r0 / rho).ln(),
            Shape::Table { .. } => self.eval_unchecked(rho).sigma,
        }
    }

    pub fn eval(&self, rho: f64) -> Result<ProfileValue> {
        let bad = match self.shape {
            Shape::Log => !(rho > 0.0 && rho < self.r0),
            _ => !(rho > 0.0 && rho <= self.r0 * (1.0 + 1e-14)),
        };
        if bad || !rho.is_finite() {
            return Err(domain(format!("ρ={rho} outside the profile domain (0, {}]", self.r0)));
        }
        Ok(self.eval_unchecked(rho))
    }

    pub(crate) fn eval_unchecked(&self, rho: f64) -> ProfileValue {
        match &self.shape {
            Shape::Power { theta } => {
                let t = *theta;
                let s = rho.powf(t);
                ProfileValue { sigma: s, dsigma: t * s / rho, ddsigma: t * (t - 1.0) * s / (rho * rho) }
            }
            Shape::Log => {
                let l = (self.r0 / rho).ln();
                ProfileValue {
                    sigma: 1.0 / l,
                    dsigma: 1.0 / (rho * l * l),
                    ddsigma: (2.0 - l) / (rho * rho * l * l * l),
                }
            }
            Shape::Table { rho: xs, sigma, slope, tail_exp } => {
                if rho < xs[0] {
                    let k = *tail_exp;
                    let s = sigma[0] * (rho / xs[0]).powf(k);
                    return ProfileValue { sigma: s, dsigma: k * s / rho, ddsigma: k * (k - 1.0) * s / (rho * rho) };
                }
                let i = match xs.binary_search_by(|v| v.total_cmp(&rho)) {
                    Ok(i) => i.min(xs.len() - 2),
                    Err(i) => (i - 1).min(xs.len() - 2),
                };
                let h = xs[i + 1] - xs[i];
                let t = (rho - xs[i]) / h;
                let (y0, y1, m0, m1) = (sigma[i], sigma[i + 1], slope[i] * h, slope[i + 1] * h);
                let t2 = t * t;
                let t3 = t2 * t;
                let s = (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * m1;
                let ds = (6.0 * t2 - 6.0 * t) * y0 + (3.0 * t2 - 4.0 * t + 1.0) * m0 + (-6.0 * t2 + 6.0 * t) * y1 + (3.0 * t2 - 2.0 * t) * m1;
                let dds = (12.0 * t - 6.0) * y0 + (6.0 * t - 4.0) * m0 + (-12.0 * t + 6.0) * y1 + (6.0 * t - 2.0) * m1;
                ProfileValue { sigma: s, dsigma: ds / h, ddsigma: dds / (h * h) }
            }
        }
    }

    /// σ⁻¹(z) for 0 ≤ z ≤ σ(R₀).
    pub fn invert(&self, z: f64) -> Result<f64> {
        if z == 0.0 {
            return Ok(0.0);
        }
        let top = self.sigma_r0();
        if !(z > 0.0 && z <= top * (1.0 + 1e-14)) || !z.is_finite() {
            return Err(domain(format!("height {z} outside (0, σ(R0)={top}]")));
        }
        Ok(self.invert_unchecked(z))
    }

    pub(crate) fn invert_unchecked(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        match &self.shape {
            Shape::Power { theta } => z.powf(1.0 / theta).min(self.r0),
            Shape::Log => self.r0 * (-1.0 / z).exp(),
            Shape::Table { rho, sigma, tail_exp, .. } => {
                if z <= sigma[0] {
                    return rho[0] * (z / sigma[0]).powf(1.0 / tail_exp);
                }
                let i = match sigma.binary_search_by(|v| v.total_cmp(&z)) {
                    Ok(i) => return rho[i],
                    Err(i) => i - 1,
                };
                let i = i.min(rho.len() - 2);
                brent(|r| self.eval_unchecked(r).sigma - z, rho[i], rho[i + 1], 1e-14).unwrap_or(rho[i])
            }
        }
    }

    /// Geometric grid of `n` radii in (R₀ 2^{-40}, regular_radius].
    pub fn check_grid(&self, n: usize) -> Vec<f64> {
        let n = n.max(8);
        let hi = self.regular_radius();
        let lo = self.r0 * 2f64.powi(-40);
        let ratio = (hi / lo).ln() / (n - 1) as f64;
        (0..n).map(|i| if i == n - 1 { hi } else { lo * (ratio * i as f64).exp() }).collect()
    }

    pub fn check_assumptions(&self, grid_size: usize) -> AssumptionReport {
        let grid = self.check_grid(grid_size);
        let vals: Vec<ProfileValue> = grid.iter().map(|&r| self.eval_unchecked(r)).collect();
        let mut witnesses = Vec::new();
        let mut a1_ok = true;
        for (r, v) in grid.iter().zip(&vals) {
            if !(v.sigma > 0.0 && v.dsigma > 0.0 && v.sigma.is_finite() && v.dsigma.is_finite()) {
                a1_ok = false;
                witnesses.push((*r, v.dsigma));
            }
        }
        let d_lo = vals[0].dsigma;
        let d_hi = vals[vals.len() - 1].dsigma;
        let tail = &vals[..3];
        let tail_max = tail.iter().map(|v| v.dsigma).fold(f64::MIN, f64::max);
        let tail_min = tail.iter().map(|v| v.dsigma).fold(f64::MAX, f64::min);
        let cusp_type = if d_lo > 1e3 * d_hi {
            CuspType::Cusp
        } else if tail_max <= 1.01 * tail_min {
            CuspType::Cone
        } else {
            CuspType::Neither
        };

        // 1 + σ''ρ/σ' on the grid; its infimum is the best opening parameter.
        let q: Vec<f64> = grid.iter().zip(&vals).map(|(r, v)| 1.0 + v.ddsigma * r / v.dsigma).collect();
        let q_min = q.iter().copied().fold(f64::INFINITY, f64::min);
        // A grid only sees a finite window; if q is still drifting toward the
        // tip, extrapolate in t = 1/ln(R₀/ρ) to the limit t = 0.
        let k = 8.min(grid.len());
        let ts: Vec<f64> = grid[..k].iter().map(|r| 1.0 / (self.r0 / r).ln()).collect();
        let limit = match line_fit(&ts, &q[..k]) {
            Ok(f) if f.slope > 1e-9 * (1.0 + q[0].abs()) => f.intercept,
            _ => q_min,
        };
        let inf = q_min.min(limit);
        let (a3_ok, best_theta) = if inf > 1e-6 { (true, Some(inf.min(1.0))) } else { (false, None) };
        if !a3_ok {
            witnesses.push((grid[0], inf - 1.0));
        }
        let derivative_bound_ok = match best_theta {
            Some(th) => {
                let r_top = grid[grid.len() - 1];
                grid.iter()
                    .zip(&vals)
                    .all(|(r, v)| v.dsigma <= d_hi * (r_top / r).powf(1.0 - th) * (1.0 + 1e-10))
            }
            None => false,
        };
        AssumptionReport { a1_ok, cusp_type, a3_ok, best_theta, witnesses, derivative_bound_ok }
    }

    /// inf over (0, R) of σ(ρ)/ρ, capped at [`PHI0_CAP`].
    pub fn phi0(&self, r: f64) -> Result<Phi0> {
        if !(r > 0.0 && r <= self.r0) {
            return Err(domain(format!("φ0 radius {r} outside (0, R0]")));
        }
        if let Shape::Power { theta } = self.shape {
            // σ(ρ)/ρ = ρ^{θ-1} is nonincreasing, so the infimum is the value at R.
            let v = r.powf(theta - 1.0);
            return Ok(cap(v));
        }
        let n = 400;
        let lo = r * 2f64.powi(-60);
        let mut best = f64::INFINITY;
        for i in 0..=n {
            let rho = lo * (r / lo).powf(i as f64 / n as f64);
            let rho = rho.min(r * (1.0 - 1e-15));
            best = best.min(self.sigma(rho) / rho);
        }
        Ok(cap(best))
    }
}

fn cap(v: f64) -> Phi0 {
    if v > PHI0_CAP || !v.is_finite() {
        Phi0 { value: PHI0_CAP, overflow: true }
    } else {
        Phi0 { value: v, overflow: false }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn eval_examples() {
        let p = ProfileSpec::power(0.5, 1.0).build().unwrap();
        let v = p.eval(1.0).unwrap();
        assert!(close(v.sigma, 1.0, 1e-15) && close(v.dsigma, 0.5, 1e-15) && close(v.ddsigma, -0.25, 1e-15));
        let c = ProfileSpec::power(1.0, 1.0).build().unwrap();
        let v = c.eval(0.3).unwrap();
        assert!(close(v.sigma, 0.3, 1e-15) && close(v.dsigma, 1.0, 1e-15) && v.ddsigma == 0.0);
        let l = ProfileSpec::log(1.0).build().unwrap();
        let v = l.eval((-1f64).exp()).unwrap();
        assert!(close(v.sigma, 1.0, 1e-14) && close(v.dsigma, std::f64::consts::E, 1e-14));
    }

    #[test]
    fn domain_errors() {
        let p = ProfileSpec::power(0.5, 1.0).build().unwrap();
        assert!(p.eval(0.0).is_err());
        assert!(p.eval(1.5).is_err());
        assert!(p.invert(1.5).is_err());
        assert!(ProfileSpec::power(1.5, 1.0).build().is_err());
        assert!(ProfileSpec::log(1.0).build().unwrap().eval(1.0).is_err());
    }

    #[test]
    fn invert_examples() {
        let p = ProfileSpec::power(0.5, 1.0).build().unwrap();
        assert!(close(p.invert(0.5).unwrap(), 0.25, 1e-15));
        let c = ProfileSpec::power(1.0, 1.0).build().unwrap();
        assert!(close(c.invert(0.7).unwrap(), 0.7, 1e-15));
        let q = ProfileSpec::power(0.25, 1.0).build().unwrap();
        assert!(close(q.invert(0.5).unwrap(), 0.0625, 1e-15));
    }

    #[test]
    fn assumption_examples() {
        let r = ProfileSpec::power(0.5, 1.0).build().unwrap().check_assumptions(64);
        assert_eq!(r.cusp_type, CuspType::Cusp);
        assert!(r.a3_ok && close(r.best_theta.unwrap(), 0.5, 1e-12));
        let r = ProfileSpec::power(1.0, 1.0).build().unwrap().check_assumptions(64);
        assert_eq!(r.cusp_type, CuspType::Cone);
        assert!(close(r.best_theta.unwrap(), 1.0, 1e-12));
        let r = ProfileSpec::log(1.0).build().unwrap().check_assumptions(64);
        assert_eq!(r.cusp_type, CuspType::Cusp);
        assert!(r.a1_ok);
        assert!(!r.a3_ok);
        let r = ProfileSpec::log(1.0).build().unwrap().check_assumptions(5000);
        assert!(!r.a3_ok, "fine grids must not hide the failure");
    }

    #[test]
    fn phi0_examples() {
        let p = ProfileSpec::power(0.5, 1.0).build().unwrap();
        assert!(close(p.phi0(0.25).unwrap().value, 2.0, 1e-14));
        let c = ProfileSpec::power(1.0, 1.0).build().unwrap();
        assert!(close(c.phi0(0.37).unwrap().value, 1.0, 1e-14));
        let f = p.phi0(1e-30).unwrap();
        assert!(f.overflow && f.value == PHI0_CAP);
    }

    #[test]
    fn tabulated_matches_power() {
        let theta: f64 = 0.5;
        let samples: Vec<[f64; 4]> = (0..=200)
            .map(|i| {
                let r = 1e-4f64.powf(1.0 - i as f64 / 200.0);
                [r, r.powf(theta), theta * r.powf(theta - 1.0), theta * (theta - 1.0) * r.powf(theta - 2.0)]
            })
            .collect();
        let t = ProfileSpec::tabulated(samples).build().unwrap();
        for &r in &[1e-6, 1e-3, 0.01, 0.3, 0.77, 1.0] {
            let v = t.eval(r).unwrap();
            assert!(close(v.sigma, r.powf(theta), 1e-6), "r={r}");
            assert!(close(t.invert(v.sigma).unwrap(), r, 1e-10));
        }
        let rep = t.check_assumptions(64);
        assert!(rep.a1_ok && rep.a3_ok);
        assert_eq!(rep.cusp_type, CuspType::Cusp);
    }

    #[test]
    fn tabulated_rejects_nonmonotone() {
        let s = vec![[0.1, 0.2, 1.0, 0.0], [0.2, 0.1, 1.0, 0.0]];
        assert!(matches!(ProfileSpec::tabulated(s).build(), Err(Error::InvalidProfile(_))));
    }

    #[test]
    fn short_form() {
        assert_eq!(ProfileSpec::parse_short("power:0.5").unwrap(), ProfileSpec::power(0.5, 1.0));
        assert!(ProfileSpec::parse_short("spline").is_err());
    }
}
