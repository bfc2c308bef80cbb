//! Numerical laboratory for elliptic transmission problems whose interface
//! has an axisymmetric cusp (or cone) point at the origin.
//!
//! The interface is the graph `x_d = σ(|x̄|)`; `Ω₁` lies below it and `Ω₂`
//! (the outward cusp) above.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN.

pub mod cli;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod mesh;
pub mod numerics;
pub mod probe;
pub mod profiles;
pub mod surface;
pub mod thresholds;

pub use error::{Error, Result};
