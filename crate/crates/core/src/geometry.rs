//! Level-set toolkit near the tip: the functions μ, M, M⁻¹₊, the level function
//! `g(x) = √(½|x̄|² + M(x_d))`, the unit field τ = ∇g/|∇g| and the slices
//! of the level sets Γ_R.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numerics::{quad, roots::brent};
use crate::profiles::{Profile, ProfileSpec};

const ROOT_RTOL: f64 = 1e-12;

/// Immutable evaluation context for one profile in dimension `dim`.
#[derive(Debug, Clone)]
pub struct GeometryCtx {
    profile: Profile,
    dim: usize,
    quadrature_tol: f64,
    theta: f64,
    top: f64,
    m_top: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aux {
    pub mu: f64,
    pub m: f64,
    /// μ(z) again, kept separately so tests can compare against dM/dz.
    pub mprime_check: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GField {
    pub g: f64,
    pub grad_norm: f64,
    pub grad_dir: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TauField {
    pub tau: Vec<f64>,
    /// `grad[i][k]` is ∂τ_k/∂x_i.
    pub grad: Vec<Vec<f64>>,
    pub bound_ok: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSetSlice {
    pub r: f64,
    pub rho_hat: f64,
    pub z_hat: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaValue {
    pub height: f64,
    pub d1: f64,
    pub d2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoareaSample {
    pub r: f64,
    /// Numerical d/dR of the area of C_R.
    pub area_derivative: f64,
    /// Line integral of |∇g|⁻¹ over Γ_R.
    pub flux: f64,
    /// Length of Γ_R.
    pub length: f64,
}

impl GeometryCtx {
    pub fn new(spec: &ProfileSpec, dim: usize) -> Result<Self> {
        Self::with_tolerance(spec, dim, 1e-10)
    }

    pub fn with_tolerance(spec: &ProfileSpec, dim: usize, quadrature_tol: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::UnsupportedDimension(dim));
        }
        if !(quadrature_tol > 0.0) {
            return Err(Error::Config("quadrature_tol must be positive".into()));
        }
        let profile = spec.build()?;
        let report = profile.check_assumptions(256);
        if !report.a1_ok {
            return Err(Error::InvalidProfile("profile is not positive and increasing".into()));
        }
        let theta = match report.best_theta {
            Some(t) if report.a3_ok => profile.nominal_theta().unwrap_or(t),
            _ => return Err(Error::InvalidProfile("no positive opening parameter: σ''ρ/σ' is unbounded below".into())),
        };
        let top = profile.sigma_r0();
        let mut ctx = Self { profile, dim, quadrature_tol, theta, top, m_top: 0.0 };
        ctx.m_top = ctx.m_raw(top);
        Ok(ctx)
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn r0(&self) -> f64 {
        self.profile.r0()
    }

    /// σ(R₀), the half-height of the cylinder.
    pub fn top(&self) -> f64 {
        self.top
    }

    /// μ(z) = sign(z) σ'(σ⁻¹|z|) σ⁻¹|z|.
    pub fn mu(&self, z: f64) -> f64 {
        if z == 0.0 {
            return 0.0;
        }
        let rho = self.profile.invert_unchecked(z.abs());
        if rho <= 0.0 {
            return 0.0;
        }
        z.signum() * self.profile.eval_unchecked(rho).dsigma * rho
    }

    /// μ'(z) = 1 + σ''ρ/σ' at ρ = σ⁻¹|z|.
    pub fn mu_prime(&self, z: f64) -> f64 {
        let rho = self.profile.invert_unchecked(z.abs()).max(self.r0() * 2f64.powi(-40));
        let v = self.profile.eval_unchecked(rho);
        1.0 + v.ddsigma * rho / v.dsigma
    }

    fn m_raw(&self, z: f64) -> f64 {
        let a = z.abs();
        if a == 0.0 {
            return 0.0;
        }
        let tol = self.quadrature_tol;
        quad::adaptive(0.0, a, tol * 1e-2 * a * a, tol * 1e-2, |s| self.mu(s)).value
    }

    /// M(z) = ∫₀^{|z|} μ.
    pub fn big_m(&self, z: f64) -> Result<f64> {
        self.check_height(z)?;
        Ok(self.m_raw(z))
    }

    fn check_height(&self, z: f64) -> Result<()> {
        if !(z.abs() < self.top) {
            return Err(domain(format!("|z|={} not below σ(R0)={}", z.abs(), self.top)));
        }
        Ok(())
    }

    pub fn aux(&self, z: f64) -> Result<Aux> {
        self.check_height(z)?;
        let mu = self.mu(z);
        Ok(Aux { mu, m: self.m_raw(z), mprime_check: mu })
    }

    /// Positive root of M(z) = level.
    pub fn m_inv_plus(&self, level: f64) -> Result<f64> {
        if !(level > 0.0 && level < self.m_top) {
            return Err(domain(format!("level {level} outside (0, M(σ(R0))={})", self.m_top)));
        }
        let lo = (2.0 * level).sqrt().min(self.top);
        let hi = (2.0 * level / self.theta).sqrt().min(self.top);
        let (lo, hi) = (lo * (1.0 - 1e-9), (hi * (1.0 + 1e-9)).min(self.top));
        brent(|z| self.m_raw(z) - level, lo, hi, ROOT_RTOL)
            .or_else(|_| brent(|z| self.m_raw(z) - level, 0.0, self.top, ROOT_RTOL))
    }

    fn split(&self, x: &[f64]) -> Result<(f64, f64)> {
        if x.len() != self.dim {
            return Err(domain(format!("point has {} coordinates, expected {}", x.len(), self.dim)));
        }
        let r = x[..self.dim - 1].iter().map(|v| v * v).sum::<f64>().sqrt();
        let z = x[self.dim - 1];
        if r > self.r0() * (1.0 + 1e-12) {
            return Err(domain(format!("|x̄|={r} exceeds R0")));
        }
        self.check_height(z)?;
        Ok((r, z))
    }

    /// g alone; defined at the origin.
    pub fn g_value(&self, x: &[f64]) -> Result<f64> {
        let (r, z) = self.split(x)?;
        Ok((0.5 * r * r + self.m_raw(z)).sqrt())
    }

    pub fn g_field(&self, x: &[f64]) -> Result<GField> {
        let (r, z) = self.split(x)?;
        if r == 0.0 && z == 0.0 {
            return Err(Error::Degenerate("∇g direction undefined at the tip".into()));
        }
        let mu = self.mu(z);
        let m = self.m_raw(z);
        let n2 = r * r + mu * mu;
        let grad_norm = 0.5 * (n2 / (0.5 * r * r + m)).sqrt();
        let n = n2.sqrt();
        let mut grad_dir: Vec<f64> = x[..self.dim - 1].iter().map(|v| v / n).collect();
        grad_dir.push(mu / n);
        Ok(GField { g: (0.5 * r * r + m).sqrt(), grad_norm, grad_dir })
    }

    pub fn tau_field(&self, x: &[f64], eps_guard: f64) -> Result<TauField> {
        let (r, z) = self.split(x)?;
        let norm_x = (r * r + z * z).sqrt();
        if !(norm_x > eps_guard) || norm_x == 0.0 {
            return Err(Error::Degenerate(format!("|x|={norm_x} within guard {eps_guard} of the tip")));
        }
        let d = self.dim;
        let mu = self.mu(z);
        let mup = self.mu_prime(z);
        let n2 = r * r + mu * mu;
        let n = n2.sqrt();
        let n3 = n2 * n;
        let mut tau: Vec<f64> = x[..d - 1].iter().map(|v| v / n).collect();
        tau.push(mu / n);
        let mut grad = vec![vec![0.0; d]; d];
        for i in 0..d - 1 {
            for k in 0..d - 1 {
                let delta = if i == k { 1.0 } else { 0.0 };
                grad[i][k] = (delta - x[i] * x[k] / n2) / n;
            }
            // ∂_i τ_d differentiates only the normalization; ∂_d τ_i also carries μ'.
            grad[i][d - 1] = -x[i] * mu / n3;
            grad[d - 1][i] = -x[i] * mu * mup / n3;
        }
        grad[d - 1][d - 1] = mup * r * r / n3;
        let slack = 1.0 + 1e-12;
        let entry_ok = grad.iter().flatten().all(|v| v.abs() <= slack / n);
        let bound_ok = entry_ok && n * slack >= self.theta * norm_x;
        Ok(TauField { tau, grad, bound_ok })
    }

    /// Surface point with radial coordinates `xbar` (length d−1).
    fn surface_frame(&self, xbar: &[f64]) -> Result<(f64, f64, Vec<f64>)> {
        if xbar.len() != self.dim - 1 {
            return Err(domain("surface point needs d-1 coordinates"));
        }
        let r = xbar.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r == 0.0 {
            return Err(Error::Degenerate("surface frame undefined at the tip".into()));
        }
        let ds = self.profile.eval(r)?.dsigma;
        let e: Vec<f64> = xbar.iter().map(|v| v / r).collect();
        Ok((r, ds, e))
    }

    /// Upward unit normal ν^S at the surface point above `xbar`.
    pub fn nu_surface(&self, xbar: &[f64]) -> Result<Vec<f64>> {
        let (_, ds, e) = self.surface_frame(xbar)?;
        let w = (1.0 + ds * ds).sqrt();
        let mut v: Vec<f64> = e.iter().map(|c| -ds * c / w).collect();
        v.push(1.0 / w);
        Ok(v)
    }

    /// Radial unit tangent τ^S at the surface point above `xbar`.
    pub fn tau_surface(&self, xbar: &[f64]) -> Result<Vec<f64>> {
        let (_, ds, e) = self.surface_frame(xbar)?;
        let w = (1.0 + ds * ds).sqrt();
        let mut v: Vec<f64> = e.iter().map(|c| c / w).collect();
        v.push(ds / w);
        Ok(v)
    }

    pub fn level_set_slice(&self, big_r: f64) -> Result<LevelSetSlice> {
        let lim = self.r0() / std::f64::consts::SQRT_2;
        if !(big_r > 0.0 && big_r < lim) {
            return Err(domain(format!("R={big_r} outside (0, R0/√2)")));
        }
        let r2 = big_r * big_r;
        let f = |rho: f64| 0.5 * rho * rho + self.m_raw(self.profile.sigma(rho).min(self.top)) - r2;
        let rho_hat = brent(f, 0.0, self.r0(), ROOT_RTOL)?;
        Ok(LevelSetSlice { r: big_r, rho_hat, z_hat: self.profile.sigma(rho_hat) })
    }

    /// a₀ of the lower bound a₀ R^{1/θ} ≤ ρ̂(R).
    pub fn a0(&self) -> f64 {
        let th = self.theta;
        let r0 = self.r0();
        let s = self.top;
        (2.0 * r0.powf(2.0 * th) / (r0 * r0 + s * s / (th * th))).powf(1.0 / (2.0 * th))
    }

    /// Lower and upper bounds for ρ̂(R).
    pub fn rho_hat_bounds(&self, big_r: f64) -> Result<(f64, f64)> {
        let lo = self.a0() * big_r.powf(1.0 / self.theta);
        let phi = self.profile.phi0(std::f64::consts::SQRT_2 * big_r)?.value;
        let hi = std::f64::consts::SQRT_2 * big_r / (1.0 + self.theta * phi * phi).sqrt();
        Ok((lo, hi))
    }

    /// Upper graph γ(s) = M⁻¹₊(R² − s²/2) of Γ_R and its radial derivatives.
    pub fn gamma(&self, slice: &LevelSetSlice, s: f64) -> Result<GammaValue> {
        let r2 = slice.r * slice.r;
        if !(s >= 0.0 && 0.5 * s * s < r2) {
            return Err(domain(format!("radius {s} outside [0, √2 R)")));
        }
        let h = self.m_inv_plus(r2 - 0.5 * s * s)?;
        let mu = self.mu(h);
        let mup = self.mu_prime(h);
        Ok(GammaValue { height: h, d1: -s / mu, d2: -1.0 / mu - s * s * mup / (mu * mu * mu) })
    }

    /// Area of C_R = {½x₁² + M(x₂) < R²} in the plane.
    pub fn level_set_area(&self, big_r: f64) -> Result<f64> {
        let r2 = big_r * big_r;
        let zmax = self.m_inv_plus(r2)?;
        // x₂ = Z(1−u²) removes the square-root endpoint behavior.
        let v = quad::adaptive(0.0, 1.0, 1e-13 * r2, 1e-12, |u| {
            let x2 = zmax * (1.0 - u * u);
            let w = (2.0 * (r2 - self.m_raw(x2))).max(0.0).sqrt();
            w * 2.0 * zmax * u
        });
        Ok(4.0 * v.value)
    }

    /// Planar coarea data at level R (cut through the axis, d treated as 2).
    pub fn coarea_sample(&self, big_r: f64, n_angles: usize) -> Result<CoareaSample> {
        let h = 1e-4 * big_r;
        let area_derivative = (self.level_set_area(big_r + h)? - self.level_set_area(big_r - h)?) / (2.0 * h);
        let r2 = big_r * big_r;
        let upper = ((2.0 / self.theta).sqrt() * big_r * (1.0 + 1e-9)).min(self.top / 1.0000001);
        let n = n_angles.max(16);
        let mut flux = 0.0;
        let mut length = 0.0;
        for j in 0..n {
            let psi = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
            let (s, c) = psi.sin_cos();
            let hi = if s.abs() > 1e-15 { upper.min(self.top / s.abs() * (1.0 - 1e-12)) } else { upper };
            let f = |rho: f64| 0.5 * rho * rho * c * c + self.m_raw(rho * s) - r2;
            let rho = brent(f, 0.0, hi, 1e-13)?;
            let z = rho * s;
            let mu = self.mu(z);
            let f_rho = rho * c * c + mu * s;
            let f_psi = -rho * rho * c * s + mu * rho * c;
            let drho = -f_psi / f_rho;
            let ds = (rho * rho + drho * drho).sqrt();
            let x1 = rho * c;
            let m = self.m_raw(z);
            let grad = 0.5 * ((x1 * x1 + mu * mu) / (0.5 * x1 * x1 + m)).sqrt();
            flux += ds / grad;
            length += ds;
        }
        let w = 2.0 * std::f64::consts::PI / n as f64;
        Ok(CoareaSample { r: big_r, area_derivative, flux: flux * w, length: length * w })
    }
}
