//! Manufactured problems for validating the solver.

use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{FemProblem, Kappa};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::profiles::ProfileKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    /// u = |x|² everywhere; the coefficient jump shows up in Q.
    SmoothBulk,
    /// Zero bulk source, a bump of Q away from the tip, no closed form.
    InterfaceFlux,
    /// u = |x|² on a cone interface with κ ≡ 1.
    ConeReference,
}

impl Case {
    pub const ALL: [Case; 3] = [Case::SmoothBulk, Case::InterfaceFlux, Case::ConeReference];

    pub fn name(self) -> &'static str {
        match self {
            Case::SmoothBulk => "smooth_bulk",
            Case::InterfaceFlux => "interface_flux",
            Case::ConeReference => "cone_reference",
        }
    }
}

impl FromStr for Case {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Case::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown manufactured case '{s}'")))
    }
}

pub type ScalarField = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;

#[derive(Clone)]
pub struct ExactSolution {
    pub u: ScalarField,
    pub grad: VectorField,
}

pub struct Manufactured {
    pub problem: FemProblem,
    pub exact: Option<ExactSolution>,
}

fn paraboloid() -> ExactSolution {
    ExactSolution { u: Arc::new(|x| x[0] * x[0] + x[1] * x[1]), grad: Arc::new(|x| [2.0 * x[0], 2.0 * x[1]]) }
}

/// Build one of the manufactured problems on `mesh`. `kappa` gives the
/// scalar conductivities of Ω₁ and Ω₂; the cone case always uses κ ≡ 1.
pub fn manufactured_case(case: Case, mesh: Arc<Mesh>, kappa: [f64; 2]) -> Result<Manufactured> {
    let profile = mesh.profile_fn()?;
    match case {
        Case::SmoothBulk => {
            let [k1, k2] = kappa;
            let exact = paraboloid();
            let u = exact.u.clone();
            let problem = FemProblem::new(mesh, Kappa::Scalar(k1), Kappa::Scalar(k2))?
                .with_source(move |_, region| if region == 1 { -4.0 * k1 } else { -4.0 * k2 })
                .with_interface_source(move |x| {
                    if x[0] == 0.0 {
                        return 0.0;
                    }
                    // Q = −(κ₂−κ₁) ∇u·ν with ∇u = 2x and ν the upward normal.
                    let ds = profile.eval_unchecked(x[0].abs()).dsigma;
                    let x_dot_nu = if ds <= 1.0 {
                        (-x[0].abs() * ds + x[1]) / (1.0 + ds * ds).sqrt()
                    } else {
                        (-x[0].abs() + x[1] / ds) / (1.0 + 1.0 / (ds * ds)).sqrt()
                    };
                    -2.0 * (k2 - k1) * x_dot_nu
                })
                .with_dirichlet(move |x| u(x));
            Ok(Manufactured { problem, exact: Some(exact) })
        }
        Case::InterfaceFlux => {
            let [k1, k2] = kappa;
            let r = mesh.radius;
            let problem = FemProblem::new(mesh, Kappa::Scalar(k1), Kappa::Scalar(k2))?.with_interface_source(move |x| {
                let t = (x[0].abs() - 0.5 * r) / (0.25 * r);
                if t.abs() < 1.0 {
                    (1.0 - t * t).powi(3)
                } else {
                    0.0
                }
            });
            Ok(Manufactured { problem, exact: None })
        }
        Case::ConeReference => {
            let spec = &mesh.profile;
            if spec.kind != ProfileKind::Power || spec.theta != Some(1.0) {
                return Err(Error::Config("cone_reference needs the power profile with θ = 1".into()));
            }
            let exact = paraboloid();
            let u = exact.u.clone();
            let problem = FemProblem::new(mesh, Kappa::Scalar(1.0), Kappa::Scalar(1.0))?
                .with_source(|_, _| -4.0)
                .with_dirichlet(move |x| u(x));
            Ok(Manufactured { problem, exact: Some(exact) })
        }
    }
}
