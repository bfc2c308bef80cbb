//! Closed-form planar test fields with their first and second derivatives.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalyticField {
    Constant { c: f64 },
    /// a·x₁ + b·x₂.
    Linear { a: f64, b: f64 },
    /// x₂^λ, for x₂ > 0.
    HeightPower { lambda: f64 },
    /// |x|^k.
    RadialPower { k: f64 },
}

impl AnalyticField {
    pub fn value(&self, x: [f64; 2]) -> f64 {
        match *self {
            AnalyticField::Constant { c } => c,
            AnalyticField::Linear { a, b } => a * x[0] + b * x[1],
            AnalyticField::HeightPower { lambda } => x[1].max(0.0).powf(lambda),
            AnalyticField::RadialPower { k } => x[0].hypot(x[1]).powf(k),
        }
    }

    pub fn grad(&self, x: [f64; 2]) -> [f64; 2] {
        match *self {
            AnalyticField::Constant { .. } => [0.0; 2],
            AnalyticField::Linear { a, b } => [a, b],
            AnalyticField::HeightPower { lambda } => [0.0, lambda * x[1].max(0.0).powf(lambda - 1.0)],
            AnalyticField::RadialPower { k } => {
                let r = x[0].hypot(x[1]);
                let c = k * r.powf(k - 2.0);
                [c * x[0], c * x[1]]
            }
        }
    }

    pub fn hessian(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        match *self {
            AnalyticField::Constant { .. } | AnalyticField::Linear { .. } => [[0.0; 2]; 2],
            AnalyticField::HeightPower { lambda } => {
                [[0.0, 0.0], [0.0, lambda * (lambda - 1.0) * x[1].max(0.0).powf(lambda - 2.0)]]
            }
            AnalyticField::RadialPower { k } => {
                let r2 = x[0] * x[0] + x[1] * x[1];
                let c = k * r2.powf(0.5 * k - 1.0);
                let e = (k - 2.0) / r2;
                [
                    [c * (1.0 + e * x[0] * x[0]), c * e * x[0] * x[1]],
                    [c * e * x[0] * x[1], c * (1.0 + e * x[1] * x[1])],
                ]
            }
        }
    }

    pub fn grad_norm(&self, x: [f64; 2]) -> f64 {
        let g = self.grad(x);
        g[0].hypot(g[1])
    }

    /// Frobenius norm of the Hessian.
    pub fn hessian_norm(&self, x: [f64; 2]) -> f64 {
        self.hessian(x).iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_match_finite_differences() {
        let fields = [
            AnalyticField::Linear { a: 1.5, b: -2.0 },
            AnalyticField::HeightPower { lambda: 0.5 },
            AnalyticField::RadialPower { k: 2.0 },
            AnalyticField::RadialPower { k: -0.7 },
        ];
        let h = 1e-6;
        for f in fields {
            for x in [[0.3, 0.4], [-0.2, 0.7], [0.05, 0.9]] {
                let g = f.grad(x);
                let hs = f.hessian(x);
                for k in 0..2 {
                    let mut xp = x;
                    let mut xm = x;
                    xp[k] += h;
                    xm[k] -= h;
                    let fd = (f.value(xp) - f.value(xm)) / (2.0 * h);
                    assert!((fd - g[k]).abs() < 1e-6 * (1.0 + g[k].abs()), "{f:?} grad");
                    let (gp, gm) = (f.grad(xp), f.grad(xm));
                    for l in 0..2 {
                        let fd2 = (gp[l] - gm[l]) / (2.0 * h);
                        assert!((fd2 - hs[k][l]).abs() < 1e-5 * (1.0 + hs[k][l].abs()), "{f:?} hessian");
                    }
                }
            }
        }
    }

    #[test]
    fn serde_form() {
        let f: AnalyticField = serde_json::from_str(r#"{"kind":"height_power","lambda":0.5}"#).unwrap();
        assert_eq!(f, AnalyticField::HeightPower { lambda: 0.5 });
    }
}
