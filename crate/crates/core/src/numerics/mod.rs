//! Small numerical kernels shared by the modeling modules.

pub mod cholesky;
pub mod fit;
pub mod quad;
pub mod roots;
pub mod sparse;
