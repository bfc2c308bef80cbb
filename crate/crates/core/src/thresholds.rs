//! Exponent calculus: Sobolev and trace exponents, the `(x/y)°` division and
//! the integrability thresholds for gradients and Hessians.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{domain, Result};

/// Extended positive reals with an explicit "arbitrarily large" token.
///
/// `Above(x)` stands for `x + δ` with arbitrary small δ > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XReal {
    Finite(f64),
    Above(f64),
    ArbitraryLarge,
    Infinite,
}

use XReal::*;

impl XReal {
    fn key(&self) -> (u8, f64, u8) {
        match *self {
            Finite(x) => (0, x, 0),
            Above(x) => (0, x, 1),
            ArbitraryLarge => (1, 0.0, 0),
            Infinite => (2, 0.0, 0),
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Finite(_) | Above(_))
    }

    /// Representative value: the base for `Above`, `f64::INFINITY` otherwise
    /// for the unbounded tokens.
    pub fn value(&self) -> f64 {
        match *self {
            Finite(x) | Above(x) => x,
            ArbitraryLarge | Infinite => f64::INFINITY,
        }
    }

    pub fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    pub fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    /// Multiplication by a positive finite scalar.
    pub fn scale(self, k: f64) -> Self {
        match self {
            Finite(x) => Finite(k * x),
            Above(x) => Above(k * x),
            other => other,
        }
    }

    /// Conjugate exponent p' = p/(p−1), with 1' = ∞ and ∞' = 1.
    pub fn conjugate(self) -> Self {
        match self {
            Finite(x) if x == 1.0 => Infinite,
            Finite(x) => Finite(x / (x - 1.0)),
            Above(x) if x == 1.0 => ArbitraryLarge,
            Above(x) => Finite(x / (x - 1.0)),
            ArbitraryLarge => Above(1.0),
            Infinite => Finite(1.0),
        }
    }
}

impl PartialOrd for XReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        let (a, b) = (self.key(), other.key());
        Some(a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)))
    }
}

impl From<f64> for XReal {
    fn from(x: f64) -> Self {
        if x == f64::INFINITY {
            Infinite
        } else {
            Finite(x)
        }
    }
}

impl fmt::Display for XReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finite(x) => write!(f, "{x}"),
            Above(x) => write!(f, "{x}+"),
            ArbitraryLarge => write!(f, "arbitrarily_large"),
            Infinite => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for XReal {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "+inf" => return Ok(Infinite),
            "arbitrarily_large" | "arb" | "large" => return Ok(ArbitraryLarge),
            _ => {}
        }
        if let Some(base) = t.strip_suffix('+') {
            return base.parse::<f64>().map(Above).map_err(|_| crate::Error::Parse(format!("bad extended real '{s}'")));
        }
        t.parse::<f64>().map(XReal::from).map_err(|_| crate::Error::Parse(format!("bad extended real '{s}'")))
    }
}

impl Serialize for XReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Finite(x) => s.serialize_f64(*x),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for XReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(XReal::from(x)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// `(x/y)°`: x/y for y > 0, arbitrarily large for y = 0, +∞ for y < 0.
pub fn circ_div(x: f64, y: f64) -> XReal {
    if y > 0.0 {
        Finite(x / y)
    } else if y == 0.0 {
        ArbitraryLarge
    } else {
        Infinite
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevExponents {
    pub p_star: XReal,
    pub p_sharp: XReal,
    pub ps_star: XReal,
    pub ps_sharp: XReal,
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs().max(1.0)
}

pub fn sobolev_exponents(p: XReal, d: usize) -> Result<SobolevExponents> {
    if d < 2 {
        return Err(domain(format!("dimension {d} < 2")));
    }
    let df = d as f64;
    let pv = match p {
        Finite(x) | Above(x) => x,
        ArbitraryLarge | Infinite => f64::INFINITY,
    };
    if !(pv >= 1.0) {
        return Err(domain(format!("exponent p={p} below 1")));
    }
    if !pv.is_finite() {
        return Ok(SobolevExponents { p_star: Infinite, p_sharp: Finite(df), ps_star: Infinite, ps_sharp: p });
    }
    let crit = df / (df - 1.0);
    let (p_star, ps_star) = if same(pv, df) {
        (ArbitraryLarge, ArbitraryLarge)
    } else if pv < df {
        (Finite(df * pv / (df - pv)), Finite((df - 1.0) * pv / (df - pv)))
    } else {
        (Infinite, Infinite)
    };
    let (p_sharp, ps_sharp) = if same(pv, crit) {
        (Above(1.0), Above(1.0))
    } else if pv < crit {
        (Finite(1.0), Finite(1.0))
    } else {
        (Finite(df * pv / (df + pv)), Finite((df - 1.0) * pv / df))
    };
    Ok(SobolevExponents { p_star, p_sharp, ps_star, ps_sharp })
}

/// d/s for an extended s (0 when s is unbounded).
fn d_over(d: f64, s: XReal) -> f64 {
    match s {
        Finite(x) | Above(x) => d / x,
        _ => 0.0,
    }
}

/// λ₀ = min{α₀, 2 − d/s₀}.
pub fn holder_exponent(alpha0: f64, s0: XReal, d: usize) -> Result<f64> {
    let df = d as f64;
    if !(alpha0 > 0.0 && alpha0 <= 1.0) {
        return Err(domain(format!("alpha0={alpha0} outside (0,1]")));
    }
    if !(s0 > Finite(df / 2.0)) {
        return Err(domain(format!("s0={s0} must exceed d/2={}", df / 2.0)));
    }
    let direct = alpha0.min(2.0 - d_over(df, s0));
    // Same quantity through the embedding exponent: min{α₀, 1 − d/s₀*}.
    let s_star = sobolev_exponents(s0, d)?.p_star;
    let via_star = alpha0.min(1.0 - d_over(df, s_star));
    let gap = (direct - via_star).abs();
    let boundary = same(s0.value(), df);
    debug_assert!(boundary || gap <= 1e-12, "λ0 forms disagree: {direct} vs {via_star}");
    Ok(direct)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdInputs {
    pub d: usize,
    pub theta: f64,
    pub p0: XReal,
    pub alpha0: f64,
    pub s0: XReal,
    pub s1: XReal,
    pub beta1: f64,
}

impl ThresholdInputs {
    pub fn validate(&self) -> Result<()> {
        let df = self.d as f64;
        if self.d < 2 {
            return Err(domain("d must be at least 2"));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(domain(format!("theta={} outside (0,1]", self.theta)));
        }
        if !(self.p0 > Finite(2.0)) {
            return Err(domain(format!("p0={} must exceed 2", self.p0)));
        }
        if !(self.alpha0 > 0.0 && self.alpha0 <= 1.0) {
            return Err(domain(format!("alpha0={} outside (0,1]", self.alpha0)));
        }
        if !(self.s0 > Finite(df / 2.0)) {
            return Err(domain(format!("s0={} must exceed d/2", self.s0)));
        }
        if !(self.s1 > self.p0.conjugate()) {
            return Err(domain(format!("s1={} must exceed p0'={}", self.s1, self.p0.conjugate())));
        }
        if self.s1 < self.s0 {
            return Err(domain(format!("s1={} must be at least s0={}", self.s1, self.s0)));
        }
        if !(0.0..=1.0).contains(&self.beta1) {
            return Err(domain(format!("beta1={} outside [0,1]", self.beta1)));
        }
        Ok(())
    }
}

/// The open interval ]max{d/(d−1), p₀'}, p₀[.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PInterval {
    pub lower: XReal,
    pub upper: XReal,
    pub empty: bool,
}

pub fn main_p_interval(d: usize, p0: XReal) -> PInterval {
    let df = d as f64;
    let lower = Finite(df / (df - 1.0)).max(p0.conjugate());
    PInterval { lower, upper: p0, empty: !(p0 > lower) }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub r1: XReal,
    pub r2: XReal,
    pub q1: XReal,
    pub q2: XReal,
    pub lambda0: f64,
    pub m0: XReal,
    pub p_interval: PInterval,
    pub notes: Vec<String>,
}

/// Hessian threshold r d/(r + d); unbounded r maps to d.
pub fn hessian_threshold(r: XReal, d: usize) -> XReal {
    let df = d as f64;
    match r {
        Finite(x) => Finite(x * df / (x + df)),
        Above(x) => Finite(x * df / (x + df)),
        ArbitraryLarge | Infinite => Finite(df),
    }
}

fn m0_branch(m0: XReal, d: f64, beta1: f64) -> XReal {
    match m0 {
        Finite(m) | Above(m) => circ_div(m, d + (beta1 - 1.0) * m),
        ArbitraryLarge if beta1 == 1.0 => ArbitraryLarge,
        _ => Infinite,
    }
}

pub fn main2_thresholds(inp: &ThresholdInputs) -> Result<ThresholdReport> {
    inp.validate()?;
    let d = inp.d;
    let df = d as f64;
    let m0 = inp.p0.min(inp.s1);
    let lambda0 = holder_exponent(inp.alpha0, inp.s0, d)?;
    let r_for = |theta_i: f64| -> XReal {
        if m0 == Infinite {
            return Infinite;
        }
        let first = m0_branch(m0, df, inp.beta1);
        let second = circ_div(1.0 + (theta_i - 1.0) / df, 1.0 - lambda0);
        first.min(second).scale(df)
    };
    let r1 = r_for(1.0);
    let r2 = r_for(inp.theta);
    Ok(ThresholdReport {
        r1,
        r2,
        q1: hessian_threshold(r1, d),
        q2: hessian_threshold(r2, d),
        lambda0,
        m0,
        p_interval: main_p_interval(d, inp.p0),
        notes: vec!["interface datum measured in the trace Besov space with smoothness index 1-1/p#_S".into()],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousThresholds {
    pub r1: XReal,
    pub r2: XReal,
    pub q1: XReal,
    pub q2: XReal,
}

/// Thresholds for vanishing data: r < min{p₀*, …} and q < min{p₀, …}.
pub fn homogeneous_thresholds(d: usize, theta: f64, p0: XReal, alpha0: f64) -> Result<HomogeneousThresholds> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(domain(format!("theta={theta} outside (0,1]")));
    }
    if !(alpha0 > 0.0 && alpha0 <= 1.0) {
        return Err(domain(format!("alpha0={alpha0} outside (0,1]")));
    }
    if !(p0 > Finite(2.0)) {
        return Err(domain(format!("p0={p0} must exceed 2")));
    }
    let df = d as f64;
    let p_star = sobolev_exponents(p0, d)?.p_star;
    let a = 1.0 - alpha0;
    let num2 = df + theta - 1.0;
    Ok(HomogeneousThresholds {
        r1: p_star.min(circ_div(df, a)),
        r2: p_star.min(circ_div(num2, a)),
        q1: p0.min(circ_div(df, 2.0 - alpha0)),
        q2: p0.min(circ_div(num2, 2.0 - alpha0 - (theta - 1.0) / df)),
    })
}

/// True when the cusp bound (d+θ−1)/(1−α₀) cannot improve on p₀.
pub fn no_gain(d: usize, theta: f64, p0: f64, alpha0: f64) -> bool {
    theta <= 1.0 + p0 - d as f64 - p0 * alpha0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fin(x: XReal) -> f64 {
        match x {
            Finite(v) => v,
            other => panic!("expected finite, got {other:?}"),
        }
    }

    #[test]
    fn ordering() {
        assert!(Finite(1e300) < ArbitraryLarge);
        assert!(ArbitraryLarge < Infinite);
        assert!(Finite(1.0) < Above(1.0) && Above(1.0) < Finite(1.0000001));
        assert_eq!(Finite(3.0).min(ArbitraryLarge), Finite(3.0));
    }

    #[test]
    fn circ_div_examples() {
        assert_eq!(circ_div(3.0, 1.5), Finite(2.0));
        assert_eq!(circ_div(3.0, 0.0), ArbitraryLarge);
        assert_eq!(circ_div(3.0, -1.0), Infinite);
    }

    #[test]
    fn sobolev_examples() {
        let e = sobolev_exponents(Finite(2.0), 3).unwrap();
        assert!((fin(e.p_star) - 6.0).abs() < 1e-12);
        assert!((fin(e.p_sharp) - 1.2).abs() < 1e-12);
        assert!((fin(e.ps_sharp) - 4.0 / 3.0).abs() < 1e-12);
        assert_eq!(sobolev_exponents(Finite(1.0), 3).unwrap().p_sharp, Finite(1.0));
        assert_eq!(sobolev_exponents(Finite(3.0), 3).unwrap().p_star, ArbitraryLarge);
        assert_eq!(sobolev_exponents(Finite(1.5), 3).unwrap().p_sharp, Above(1.0));
        assert!(sobolev_exponents(Finite(0.5), 3).is_err());
    }

    #[test]
    fn holder_examples() {
        assert_eq!(holder_exponent(0.7, Finite(4.0), 2).unwrap(), 0.7);
        assert_eq!(holder_exponent(1.0, Infinite, 2).unwrap(), 1.0);
        assert!((holder_exponent(0.9, Finite(1.2), 2).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!(holder_exponent(0.9, Finite(1.0), 2).is_err());
    }

    #[test]
    fn homogeneous_example() {
        let h = homogeneous_thresholds(2, 0.5, Finite(4.0), 0.9).unwrap();
        assert!((fin(h.r1) - 20.0).abs() < 1e-12);
        assert!((fin(h.r2) - 15.0).abs() < 1e-12);
        assert!((fin(h.q1) - 2.0 / 1.1).abs() < 1e-12);
        assert!((fin(h.q2) - 1.5 / 1.35).abs() < 1e-12);
        // p₀* = ∞ and d/0 is arbitrarily large: every finite r is admissible.
        let h = homogeneous_thresholds(2, 0.5, Finite(4.0), 1.0).unwrap();
        assert_eq!((h.r1, h.r2), (ArbitraryLarge, ArbitraryLarge));
        let h = homogeneous_thresholds(3, 0.5, Finite(2.5), 1.0).unwrap();
        assert_eq!((h.r1, h.r2), (Finite(15.0), Finite(15.0)));
    }

    #[test]
    fn main2_example() {
        let inp = ThresholdInputs { d: 2, theta: 0.5, p0: Finite(4.0), alpha0: 0.9, s0: Infinite, s1: Infinite, beta1: 1.0 };
        let r = main2_thresholds(&inp).unwrap();
        assert!((fin(r.r1) - 4.0).abs() < 1e-12);
        assert!((fin(r.r2) - 4.0).abs() < 1e-12);
        assert_eq!(r.m0, Finite(4.0));
        let inf = ThresholdInputs { p0: Infinite, ..inp };
        let r = main2_thresholds(&inf).unwrap();
        assert_eq!((r.r1, r.r2), (Infinite, Infinite));
        assert_eq!(r.q1, Finite(2.0));
    }

    #[test]
    fn serde_roundtrip() {
        let v = vec![Finite(2.5), Infinite, ArbitraryLarge, Above(1.0)];
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"[2.5,"inf","arbitrarily_large","1+"]"#);
        let back: Vec<XReal> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
    }
}
