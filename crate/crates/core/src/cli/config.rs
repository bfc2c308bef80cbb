//! Experiment configuration: one JSON file per run, every default explicit.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::Case;
use crate::probe::{AnalyticField, DEFAULT_SEED};
use crate::profiles::ProfileSpec;
use crate::thresholds::{ThresholdInputs, XReal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    VerifyGeometry,
    VerifySurface,
    VerifyGn,
    Thresholds,
    Solve,
    Probe,
    Sweep,
    Surface,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::VerifyGeometry => "verify-geometry",
            Command::VerifySurface => "verify-surface",
            Command::VerifyGn => "verify-gn",
            Command::Thresholds => "thresholds",
            Command::Solve => "solve",
            Command::Probe => "probe",
            Command::Sweep => "sweep",
            Command::Surface => "surface",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FemConfig {
    /// Manufactured case; `None` solves -div(κ∇u) = f with zero boundary data.
    pub case: Option<String>,
    pub kappa: [f64; 2],
    pub h0: f64,
    pub beta: f64,
    pub levels: usize,
    /// Uniform red refinements applied after grading.
    pub refinements: usize,
    pub tol: f64,
    /// Affine source f = c₀ + c₁x₁ + c₂x₂ when no case is set.
    pub source: [f64; 3],
}

impl Default for FemConfig {
    fn default() -> Self {
        Self { case: None, kappa: [1.0, 1.0], h0: 0.1, beta: 0.5, levels: 10, refinements: 0, tol: 1e-10, source: [1.0, 0.0, 0.0] }
    }
}

impl FemConfig {
    pub fn parsed_case(&self) -> Result<Option<Case>> {
        self.case.as_deref().map(str::parse).transpose()
    }

    pub fn validate(&self, profile: &ProfileSpec) -> Result<()> {
        self.parsed_case()?;
        if self.kappa.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
            return Err(Error::Config(format!("kappa {:?} must be positive", self.kappa)));
        }
        let radius = profile.build()?.regular_radius();
        if !(self.h0 > 0.0 && self.h0 < radius / 4.0) {
            return Err(Error::Config(format!("h0={} must lie in (0, R0/4) with R0={radius}", self.h0)));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Config(format!("beta={} outside (0, 1)", self.beta)));
        }
        if !(self.tol > 0.0 && self.tol <= 1e-4) {
            return Err(Error::Config(format!("tol={} outside (0, 1e-4]", self.tol)));
        }
        if self.levels > 30 || self.refinements > 4 {
            return Err(Error::Config("levels ≤ 30 and refinements ≤ 4".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    /// Directory holding `mesh.txt` and `solution.csv` from a `solve` run;
    /// without it the probe solves the `fem` problem itself.
    pub input: Option<PathBuf>,
    pub p_gradient: f64,
    pub p_hessian: f64,
    pub p0: XReal,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { input: None, p_gradient: 2.0, p_hessian: 1.0, p0: XReal::Finite(4.0) }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_gradient >= 1.0 && self.p_hessian >= 1.0) {
            return Err(Error::Config("probe powers must be at least 1".into()));
        }
        if !(self.p0 > XReal::Finite(2.0)) {
            return Err(Error::Config(format!("p0={} must exceed 2", self.p0)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdConfig {
    pub d: usize,
    pub theta: f64,
    pub p0: XReal,
    pub alpha0: f64,
    /// With `s0`, `s1` and `beta1` the full report is produced as well.
    pub s0: Option<XReal>,
    pub s1: Option<XReal>,
    pub beta1: Option<f64>,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self { d: 2, theta: 0.5, p0: XReal::Finite(4.0), alpha0: 0.9, s0: None, s1: None, beta1: None }
    }
}

impl ThresholdConfig {
    pub fn full_inputs(&self) -> Option<ThresholdInputs> {
        Some(ThresholdInputs {
            d: self.d,
            theta: self.theta,
            p0: self.p0,
            alpha0: self.alpha0,
            s0: self.s0?,
            s1: self.s1?,
            beta1: self.beta1?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.d < 2 {
            return bad(format!("d={} must be at least 2", self.d));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return bad(format!("theta={} outside (0, 1]", self.theta));
        }
        if !(self.alpha0 > 0.0 && self.alpha0 <= 1.0) {
            return bad(format!("alpha0={} outside (0, 1]", self.alpha0));
        }
        if !(self.p0 > XReal::Finite(2.0)) {
            return bad(format!("p0={} must exceed 2", self.p0));
        }
        if let Some(inp) = self.full_inputs() {
            inp.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GnConfig {
    pub field: AnalyticField,
    pub lambda: f64,
    /// r = q/a values asserted finite.
    pub r_values: Vec<f64>,
    /// Exploratory sweep toward the admissible bound.
    pub sweep_r: Vec<f64>,
}

impl Default for GnConfig {
    fn default() -> Self {
        Self {
            field: AnalyticField::HeightPower { lambda: 0.5 },
            lambda: 0.5,
            r_values: vec![2.0, 2.5, 2.9],
            sweep_r: vec![2.0, 2.5, 2.8, 2.9, 2.95, 2.99],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceConfig {
    pub dim: usize,
    pub lambda: f64,
    /// Besov parameters; the seminorm of x_d is reported when both are set.
    pub p: Option<f64>,
    pub alpha: Option<f64>,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        Self { dim: 2, lambda: 0.5, p: None, alpha: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub thetas: Vec<f64>,
    /// κ₂/κ₁ with κ₁ = 1.
    pub contrasts: Vec<f64>,
    pub levels: Vec<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { thetas: vec![0.5, 1.0], contrasts: vec![1.0, 10.0], levels: vec![6] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Option<Command>,
    pub profile: ProfileSpec,
    pub dim: usize,
    /// Random samples per check in the verification suites.
    pub samples: usize,
    pub fem: FemConfig,
    pub probe: ProbeConfig,
    pub thresholds: ThresholdConfig,
    pub gn: GnConfig,
    pub surface: SurfaceConfig,
    pub sweep: SweepConfig,
    pub seed: u64,
    pub jobs: usize,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            command: None,
            profile: ProfileSpec::power(0.5, 1.0),
            dim: 2,
            samples: 1000,
            fem: FemConfig::default(),
            probe: ProbeConfig::default(),
            thresholds: ThresholdConfig::default(),
            gn: GnConfig::default(),
            surface: SurfaceConfig::default(),
            sweep: SweepConfig::default(),
            seed: DEFAULT_SEED,
            jobs: 1,
            output_dir: PathBuf::from("cusplab-out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    /// Checks every sub-configuration the command uses.
    pub fn validate(&self) -> Result<()> {
        let cmd = self.command.ok_or_else(|| Error::Config("no command given".into()))?;
        let cfg = |e: Error| if e.is_config() { e } else { Error::Config(e.to_string()) };
        self.profile.build().map_err(cfg)?;
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        match cmd {
            Command::VerifyGeometry => {
                if !(2..=3).contains(&self.dim) || self.samples == 0 {
                    return Err(Error::Config("verify-geometry needs dim 2 or 3 and samples ≥ 1".into()));
                }
            }
            Command::VerifySurface | Command::Surface => {
                if cmd == Command::Surface && !(2..=3).contains(&self.surface.dim) {
                    return Err(Error::Config(format!("surface dim {} must be 2 or 3", self.surface.dim)));
                }
                if !(self.surface.lambda >= 0.0) {
                    return Err(Error::Config("surface lambda must be nonnegative".into()));
                }
            }
            Command::VerifyGn => {
                let l = self.gn.lambda;
                if !(l > 0.0 && l <= 1.0) {
                    return Err(Error::Config(format!("gn lambda={l} outside (0, 1]")));
                }
                if self.gn.r_values.iter().chain(&self.gn.sweep_r).any(|r| !(*r > 0.0)) {
                    return Err(Error::Config("gn r values must be positive".into()));
                }
            }
            Command::Thresholds => self.thresholds.validate()?,
            Command::Solve => self.fem.validate(&self.profile)?,
            Command::Probe => {
                self.probe.validate()?;
                if self.probe.input.is_none() {
                    self.fem.validate(&self.profile)?;
                }
            }
            Command::Sweep => {
                self.probe.validate()?;
                let s = &self.sweep;
                if s.thetas.is_empty() || s.contrasts.is_empty() || s.levels.is_empty() {
                    return Err(Error::Config("sweep grid has an empty axis".into()));
                }
                for &t in &s.thetas {
                    if !(t > 0.0 && t <= 1.0) {
                        return Err(Error::Config(format!("sweep theta={t} outside (0, 1]")));
                    }
                    let profile = ProfileSpec { theta: Some(t), ..self.profile.clone() };
                    for &c in &s.contrasts {
                        for &l in &s.levels {
                            FemConfig { kappa: [1.0, c], levels: l, ..self.fem.clone() }.validate(&profile)?;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
