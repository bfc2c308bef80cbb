//! Singularity probes: dyadic annulus masses with exponent fits, Hölder
//! seminorms and Gagliardo-Nirenberg checks.

mod field;
mod gn;
mod holder;

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use field::AnalyticField;
pub use gn::{
    gn_check, gn_scaling_check, gn_sweep, write_sweep_csv, GnCheckResult, GnParams, GnScalingReport, GnScalingRow,
    GnSweepRow, ShellIntegral,
};
pub use holder::{holder_seminorm, HolderEstimate, DEFAULT_SEED, MAX_PAIRS};

use crate::error::{Error, Result};
use crate::fem::FemSolution;
use crate::geometry::GeometryCtx;
use crate::mesh::Mesh;
use crate::numerics::fit::line_fit;
use crate::numerics::quad::GaussLegendre;
use crate::thresholds::{circ_div, homogeneous_thresholds, HomogeneousThresholds, XReal};

/// Fewest rings a fit accepts.
pub const MIN_RINGS: usize = 5;
/// Fits below this R² are flagged unreliable.
pub const RELIABLE_R2: f64 = 0.9;
/// |s| at or below this counts as no singularity.
pub const S_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    One,
    Two,
    Both,
}

impl FromStr for Region {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "one" => Ok(Region::One),
            "2" | "two" => Ok(Region::Two),
            "both" | "all" => Ok(Region::Both),
            other => Err(Error::Config(format!("unknown region '{other}' (expected 1, 2 or both)"))),
        }
    }
}

/// A field to probe: constant values per mesh triangle, or a closed form
/// |F(x)| on the full plane.
pub enum ProbeField<'a> {
    Elementwise { mesh: &'a Mesh, values: &'a [f64] },
    Analytic(&'a (dyn Fn([f64; 2]) -> f64 + Sync)),
}

/// Rings are [ρ_{k+1}, ρ_k) with ρ_k = outer·2^{−k}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnulusOptions {
    pub outer_radius: f64,
    pub rings: usize,
    /// Rings reaching below this radius are left out of the fit.
    pub fit_min_radius: f64,
}

impl AnnulusOptions {
    pub fn analytic(outer_radius: f64, rings: usize) -> Self {
        Self { outer_radius, rings, fit_min_radius: 0.0 }
    }

    /// Rings from the largest disc inside the box down to the innermost
    /// grading ring (or four smallest element sizes, if larger).
    pub fn for_mesh(mesh: &Mesh) -> Self {
        let outer = mesh.radius.min(mesh.top);
        let g = &mesh.grading;
        let inner = (mesh.radius * g.beta.powi(g.levels as i32)).max(4.0 * g.min_size());
        let rings = if inner < outer { (outer / inner).log2().floor() as usize } else { 0 };
        Self { outer_radius: outer, rings, fit_min_radius: 0.0 }
    }

    /// As [`AnnulusOptions::for_mesh`], but the fit skips the two innermost
    /// grading levels where the recovered Hessian is polluted by the tip.
    pub fn for_mesh_hessian(mesh: &Mesh) -> Self {
        let g = &mesh.grading;
        let cut = mesh.radius * g.beta.powi(g.levels.saturating_sub(2) as i32);
        Self { fit_min_radius: cut, ..Self::for_mesh(mesh) }
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..=self.rings).map(|k| self.outer_radius * 0.5f64.powi(k as i32)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusProfile {
    pub region: Region,
    pub p: f64,
    /// Ring boundaries ρ₀ > ρ₁ > … ; ring k is [ρ_{k+1}, ρ_k).
    pub radii: Vec<f64>,
    /// ∫ |F|^p over ring k restricted to the region.
    pub masses: Vec<f64>,
    /// Measure of ring k within the region.
    pub areas: Vec<f64>,
    /// Per-ring masses for regions 1 and 2 (mesh fields only).
    pub masses_by_region: Vec<[f64; 2]>,
    /// Rings entering the fit.
    pub rings_used: usize,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub reliable: bool,
    /// Volume growth exponent of the region: log-log slope of the ring areas.
    pub effective_dimension: f64,
    /// F ~ |x|^{−s}.
    pub s: f64,
    pub critical_exponent: XReal,
}

impl AnnulusProfile {
    pub fn ring_radius(&self, k: usize) -> f64 {
        self.radii[k]
    }
}

fn ring_sums_mesh(mesh: &Mesh, values: &[f64], p: f64, radii: &[f64]) -> Result<Vec<([f64; 2], [f64; 2])>> {
    if values.len() != mesh.triangles.len() {
        return Err(Error::Config(format!("{} values for {} triangles", values.len(), mesh.triangles.len())));
    }
    let part = mesh.annulus_partition(radii)?;
    Ok(part
        .rings
        .par_iter()
        .map(|tris| {
            let mut mass = [0.0; 2];
            let mut area = [0.0; 2];
            for &t in tris {
                let i = (mesh.regions[t] - 1) as usize;
                let a = mesh.area(t);
                mass[i] += a * values[t].abs().powf(p);
                area[i] += a;
            }
            (mass, area)
        })
        .collect())
}

fn ring_sums_analytic(f: &(dyn Fn([f64; 2]) -> f64 + Sync), p: f64, radii: &[f64]) -> Vec<(f64, f64)> {
    const ANGLES: usize = 256;
    let gl = GaussLegendre::cached(16);
    let dphi = 2.0 * std::f64::consts::PI / ANGLES as f64;
    radii
        .par_windows(2)
        .map(|w| {
            let mut mass = 0.0;
            for (r, wr) in gl.on(w[1], w[0]) {
                let mut s = 0.0;
                for k in 0..ANGLES {
                    let phi = (k as f64 + 0.5) * dphi;
                    s += f([r * phi.cos(), r * phi.sin()]).abs().powf(p);
                }
                mass += wr * r * s * dphi;
            }
            (mass, std::f64::consts::PI * (w[0] * w[0] - w[1] * w[1]))
        })
        .collect()
}

/// Masses of |F|^p over dyadic rings around the tip and the fitted blow-up
/// exponent. For mesh fields the region's measured volume growth replaces
/// the ambient dimension, so a bounded field gives s = 0 even in the cusp.
pub fn annulus_masses_and_fit(field: &ProbeField, p: f64, region: Region, opts: &AnnulusOptions) -> Result<AnnulusProfile> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::Config(format!("p={p} must be at least 1")));
    }
    if opts.rings < MIN_RINGS || !(opts.outer_radius > 0.0) {
        return Err(Error::InsufficientData(format!("{} rings requested, need at least {MIN_RINGS}", opts.rings)));
    }
    let radii = opts.radii();
    let (masses, areas, by_region, ambient) = match field {
        ProbeField::Elementwise { mesh, values } => {
            let sums = ring_sums_mesh(mesh, values, p, &radii)?;
            let pick = |v: [f64; 2]| match region {
                Region::One => v[0],
                Region::Two => v[1],
                Region::Both => v[0] + v[1],
            };
            let masses = sums.iter().map(|(m, _)| pick(*m)).collect::<Vec<_>>();
            let areas = sums.iter().map(|(_, a)| pick(*a)).collect::<Vec<_>>();
            (masses, areas, sums.iter().map(|(m, _)| *m).collect(), None)
        }
        ProbeField::Analytic(f) => {
            if region != Region::Both {
                return Err(Error::Config("analytic fields are probed on full annuli (region both)".into()));
            }
            let sums = ring_sums_analytic(*f, p, &radii);
            (sums.iter().map(|s| s.0).collect(), sums.iter().map(|s| s.1).collect(), Vec::new(), Some(2.0))
        }
    };
    let used: Vec<usize> = (0..masses.len())
        .filter(|&k| masses[k] > 0.0 && areas[k] > 0.0 && radii[k + 1] >= opts.fit_min_radius * (1.0 - 1e-12))
        .collect();
    if used.len() < MIN_RINGS {
        return Err(Error::InsufficientData(format!(
            "only {} usable rings with nonzero mass, need {MIN_RINGS}",
            used.len()
        )));
    }
    let lx: Vec<f64> = used.iter().map(|&k| radii[k].ln()).collect();
    let lm: Vec<f64> = used.iter().map(|&k| masses[k].ln()).collect();
    let fit = line_fit(&lx, &lm)?;
    let d_eff = match ambient {
        Some(d) => d,
        None => line_fit(&lx, &used.iter().map(|&k| areas[k].ln()).collect::<Vec<_>>())?.slope,
    };
    let mut s = (d_eff - fit.slope) / p;
    let critical_exponent = if s.abs() <= S_TOL {
        s = 0.0;
        XReal::Infinite
    } else {
        circ_div(d_eff, s)
    };
    Ok(AnnulusProfile {
        region,
        p,
        radii,
        masses,
        areas,
        masses_by_region: by_region,
        rings_used: used.len(),
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        reliable: fit.r_squared >= RELIABLE_R2,
        effective_dimension: d_eff,
        s,
        critical_exponent,
    })
}

/// Oscillation-decay estimate of the Hölder exponent at the tip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alpha0Estimate {
    /// Fitted slope clamped to (0, 1].
    pub alpha0: f64,
    pub raw_slope: f64,
    pub r_squared: f64,
    pub rings_used: usize,
}

/// Fits osc(u, A_k) ~ ρ_k^α over the nodes of each ring.
pub fn estimate_alpha0(mesh: &Mesh, u: &[f64], opts: &AnnulusOptions) -> Result<Alpha0Estimate> {
    let radii = opts.radii();
    let mut lo = vec![f64::INFINITY; opts.rings];
    let mut hi = vec![f64::NEG_INFINITY; opts.rings];
    for (p, &v) in mesh.nodes.iter().zip(u) {
        let r = p[0].hypot(p[1]);
        if r >= radii[0] || r < radii[opts.rings] {
            continue;
        }
        let k = radii.iter().rposition(|&q| r < q).expect("inside outer radius");
        lo[k] = lo[k].min(v);
        hi[k] = hi[k].max(v);
    }
    let (mut lx, mut ly) = (Vec::new(), Vec::new());
    for k in 0..opts.rings {
        let osc = hi[k] - lo[k];
        if osc > 0.0 && osc.is_finite() {
            lx.push(radii[k].ln());
            ly.push(osc.ln());
        }
    }
    if lx.len() < MIN_RINGS {
        return Err(Error::InsufficientData(format!("oscillation found on {} rings, need {MIN_RINGS}", lx.len())));
    }
    let fit = line_fit(&lx, &ly)?;
    Ok(Alpha0Estimate {
        alpha0: fit.slope.clamp(1e-3, 1.0),
        raw_slope: fit.slope,
        r_squared: fit.r_squared,
        rings_used: lx.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeOptions {
    /// Power used for the gradient masses.
    pub p_gradient: f64,
    /// Power used for the Hessian masses.
    pub p_hessian: f64,
    /// Meyers exponent fed to the homogeneous thresholds.
    pub p0: XReal,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self { p_gradient: 2.0, p_hessian: 1.0, p0: XReal::Finite(4.0) }
    }
}

/// Profiles of one field on regions 1, 2 and both; a region without enough
/// rings carries the reason instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionProfiles {
    pub region1: Option<AnnulusProfile>,
    pub region2: Option<AnnulusProfile>,
    pub both: Option<AnnulusProfile>,
    pub notes: Vec<String>,
}

impl RegionProfiles {
    fn compute(field: &ProbeField, p: f64, opts: &AnnulusOptions) -> Result<Self> {
        let mut notes = Vec::new();
        let mut run = |region: Region| match annulus_masses_and_fit(field, p, region, opts) {
            Ok(prof) => Ok(Some(prof)),
            Err(Error::InsufficientData(msg)) => {
                notes.push(format!("region {region:?}: {msg}"));
                Ok(None)
            }
            Err(e) => Err(e),
        };
        let region1 = run(Region::One)?;
        let region2 = run(Region::Two)?;
        let both = run(Region::Both)?;
        Ok(Self { region1, region2, both, notes })
    }

    pub fn get(&self, region: Region) -> Option<&AnnulusProfile> {
        match region {
            Region::One => self.region1.as_ref(),
            Region::Two => self.region2.as_ref(),
            Region::Both => self.both.as_ref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub options: ProbeOptions,
    pub theta: f64,
    pub gradient: RegionProfiles,
    pub hessian: RegionProfiles,
    pub alpha0: Option<Alpha0Estimate>,
    /// Homogeneous thresholds at the estimated α̂₀, for comparison.
    pub thresholds: Option<HomogeneousThresholds>,
    pub notes: Vec<String>,
}

/// Gradient and Hessian profiles of a finite element solution, with α̂₀ and
/// the thresholds it implies.
pub fn probe_solution(sol: &FemSolution, opts: &ProbeOptions) -> Result<ProbeReport> {
    let mesh = sol.mesh.as_ref();
    let theta = GeometryCtx::new(&mesh.profile, 2)?.theta();
    let grad_norms: Vec<f64> = sol.element_gradients.iter().map(|g| g[0].hypot(g[1])).collect();
    let hess_norms: Vec<f64> =
        sol.recovered_hessian.iter().map(|h| h.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let gopts = AnnulusOptions::for_mesh(mesh);
    let gradient = RegionProfiles::compute(&ProbeField::Elementwise { mesh, values: &grad_norms }, opts.p_gradient, &gopts)?;
    let hessian = RegionProfiles::compute(
        &ProbeField::Elementwise { mesh, values: &hess_norms },
        opts.p_hessian,
        &AnnulusOptions::for_mesh_hessian(mesh),
    )?;
    let mut notes = Vec::new();
    let alpha0 = match estimate_alpha0(mesh, &sol.nodal_values, &gopts) {
        Ok(a) => Some(a),
        Err(Error::InsufficientData(msg)) => {
            notes.push(format!("alpha0: {msg}"));
            None
        }
        Err(e) => return Err(e),
    };
    let thresholds = match alpha0 {
        Some(a) => Some(homogeneous_thresholds(2, theta, opts.p0, a.alpha0)?),
        None => None,
    };
    Ok(ProbeReport { options: *opts, theta, gradient, hessian, alpha0, thresholds, notes })
}

/// `ring_radius,mass_region1,mass_region2`, one row per ring.
pub fn write_ring_csv(profile: &AnnulusProfile, mut w: impl std::io::Write) -> Result<()> {
    writeln!(w, "ring_radius,mass_region1,mass_region2")?;
    for k in 0..profile.masses.len() {
        let [m1, m2] = profile.masses_by_region.get(k).copied().unwrap_or([profile.masses[k], 0.0]);
        writeln!(w, "{:.12e},{:.12e},{:.12e}", profile.radii[k], m1, m2)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn power_field(s: f64) -> impl Fn([f64; 2]) -> f64 + Sync {
        move |x: [f64; 2]| x[0].hypot(x[1]).powf(-s)
    }

    #[test]
    fn calibration_grid() {
        let opts = AnnulusOptions::analytic(1.0, 10);
        for s in [0.25, 0.5, 0.8, 1.2] {
            let f = power_field(s);
            for p in [1.0, 2.0, 3.0] {
                let prof = annulus_masses_and_fit(&ProbeField::Analytic(&f), p, Region::Both, &opts).unwrap();
                assert!((prof.s - s).abs() < 0.05 * s, "s={s} p={p}: {}", prof.s);
                assert!(prof.reliable && prof.rings_used == 10);
            }
        }
    }

    #[test]
    fn half_power_example() {
        let f = power_field(0.5);
        let prof = annulus_masses_and_fit(&ProbeField::Analytic(&f), 2.0, Region::Both, &AnnulusOptions::analytic(1.0, 8)).unwrap();
        assert!((prof.slope - 1.0).abs() < 0.05);
        assert!((prof.critical_exponent.value() - 4.0).abs() < 0.2);
    }

    #[test]
    fn constant_field_has_slope_d() {
        let f = |_: [f64; 2]| 1.0;
        let prof = annulus_masses_and_fit(&ProbeField::Analytic(&f), 2.0, Region::Both, &AnnulusOptions::analytic(1.0, 8)).unwrap();
        assert!((prof.slope - 2.0).abs() < 1e-3);
        assert_eq!(prof.s, 0.0);
        assert_eq!(prof.critical_exponent, XReal::Infinite);
    }

    #[test]
    fn critical_exponent_does_not_depend_on_p() {
        let f = power_field(0.8);
        let opts = AnnulusOptions::analytic(1.0, 10);
        let crit: Vec<f64> = [1.0, 1.5, 2.0, 3.0]
            .iter()
            .map(|&p| annulus_masses_and_fit(&ProbeField::Analytic(&f), p, Region::Both, &opts).unwrap().critical_exponent.value())
            .collect();
        for c in &crit {
            assert!((c - crit[0]).abs() < 0.03 * crit[0]);
        }
    }

    #[test]
    fn too_few_rings() {
        let f = power_field(0.5);
        let e = annulus_masses_and_fit(&ProbeField::Analytic(&f), 2.0, Region::Both, &AnnulusOptions::analytic(1.0, 4));
        assert!(matches!(e, Err(Error::InsufficientData(_))));
        assert!(annulus_masses_and_fit(&ProbeField::Analytic(&f), 0.5, Region::Both, &AnnulusOptions::analytic(1.0, 8)).is_err());
    }

    #[test]
    fn mesh_constant_field_in_each_region() {
        let mesh = crate::mesh::build_graded_mesh(&crate::profiles::ProfileSpec::power(0.5, 1.0), 0.1, 0.5, 8).unwrap();
        let ones = vec![1.0; mesh.triangles.len()];
        let opts = AnnulusOptions::for_mesh(&mesh);
        assert!(opts.rings >= 6);
        for region in [Region::One, Region::Both] {
            let prof = annulus_masses_and_fit(&ProbeField::Elementwise { mesh: &mesh, values: &ones }, 2.0, region, &opts).unwrap();
            assert_eq!(prof.s, 0.0, "{region:?}");
            assert_eq!(prof.critical_exponent, XReal::Infinite);
        }
        let both = annulus_masses_and_fit(&ProbeField::Elementwise { mesh: &mesh, values: &ones }, 1.0, Region::Both, &opts).unwrap();
        assert!((both.effective_dimension - 2.0).abs() < 0.05, "{}", both.effective_dimension);
        let mut buf = Vec::new();
        write_ring_csv(&both, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("ring_radius,mass_region1,mass_region2\n"));
        assert_eq!(text.lines().count(), opts.rings + 1);
    }

    #[test]
    fn region_parsing() {
        assert_eq!("2".parse::<Region>().unwrap(), Region::Two);
        assert_eq!("both".parse::<Region>().unwrap(), Region::Both);
        assert!("3".parse::<Region>().unwrap_err().is_config());
    }
}
