//! Hölder seminorm estimates from point samples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seed used when the caller does not pick one.
pub const DEFAULT_SEED: u64 = 20_240_917;
/// Largest number of pairs examined.
pub const MAX_PAIRS: usize = 100_000;
const MIN_POINTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderEstimate {
    pub value: f64,
    pub pairs: usize,
    /// All pairs were examined (no subsampling).
    pub exhaustive: bool,
    pub seed: u64,
}

/// `max |u(x) − u(y)| / |x − y|^λ` over all pairs, or over `MAX_PAIRS`
/// random pairs drawn with `seed` when there are more.
pub fn holder_seminorm(points: &[[f64; 2]], values: &[f64], lambda: f64, seed: u64) -> Result<HolderEstimate> {
    let n = points.len();
    if n != values.len() {
        return Err(Error::Config(format!("{n} points but {} values", values.len())));
    }
    if n < MIN_POINTS {
        return Err(Error::InsufficientData(format!("Hölder estimate needs at least {MIN_POINTS} points, got {n}")));
    }
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::Config(format!("Hölder exponent {lambda} outside (0, 1]")));
    }
    let ratio = |i: usize, j: usize| -> f64 {
        let d = (points[i][0] - points[j][0]).hypot(points[i][1] - points[j][1]);
        if d == 0.0 {
            0.0
        } else {
            (values[i] - values[j]).abs() / d.powf(lambda)
        }
    };
    let total = n * (n - 1) / 2;
    if total <= MAX_PAIRS {
        let mut best: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                best = best.max(ratio(i, j));
            }
        }
        return Ok(HolderEstimate { value: best, pairs: total, exhaustive: true, seed });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    for _ in 0..MAX_PAIRS {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        best = best.max(ratio(i, j));
    }
    Ok(HolderEstimate { value: best, pairs: MAX_PAIRS, exhaustive: false, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk_cloud(n_r: usize, n_phi: usize) -> Vec<[f64; 2]> {
        let mut pts = vec![[0.0, 0.0]];
        for i in 1..=n_r {
            let r = i as f64 / n_r as f64;
            for k in 0..n_phi {
                let phi = 2.0 * std::f64::consts::PI * k as f64 / n_phi as f64;
                pts.push([r * phi.cos(), r * phi.sin()]);
            }
        }
        pts
    }

    #[test]
    fn linear_field_is_lipschitz_one() {
        let pts = disk_cloud(30, 40);
        let u: Vec<f64> = pts.iter().map(|p| 0.6 * p[0] + 0.8 * p[1]).collect();
        let h = holder_seminorm(&pts, &u, 1.0, DEFAULT_SEED).unwrap();
        assert!(!h.exhaustive);
        assert!((h.value - 1.0).abs() < 0.02, "{}", h.value);
    }

    #[test]
    fn square_root_of_radius() {
        let pts = disk_cloud(30, 40);
        let u: Vec<f64> = pts.iter().map(|p| p[0].hypot(p[1]).sqrt()).collect();
        let h = holder_seminorm(&pts, &u, 0.5, DEFAULT_SEED).unwrap();
        assert!(h.value >= 0.95 && h.value <= 1.0 + 1e-12, "{}", h.value);
    }

    #[test]
    fn constant_and_errors() {
        let pts = disk_cloud(10, 12);
        let u = vec![3.0; pts.len()];
        let h = holder_seminorm(&pts, &u, 0.7, 1).unwrap();
        assert_eq!(h.value, 0.0);
        assert!(h.exhaustive);
        assert!(holder_seminorm(&pts[..50], &u[..50], 0.5, 1).is_err());
        assert!(holder_seminorm(&pts, &u, 1.5, 1).is_err());
    }

    #[test]
    fn seeded_runs_repeat() {
        let pts = disk_cloud(30, 40);
        let u: Vec<f64> = pts.iter().map(|p| (3.0 * p[0]).sin() * p[1]).collect();
        let a = holder_seminorm(&pts, &u, 0.8, 7).unwrap();
        let b = holder_seminorm(&pts, &u, 0.8, 7).unwrap();
        assert_eq!(a, b);
    }
}
