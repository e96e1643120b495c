//! Configuration-space discretization of the polymer distribution.

pub mod basis;
pub mod ops;
pub mod poly;
pub mod quadrature;

pub use basis::{build_basis, BasisId, BasisLabel, RBasis};
pub use ops::{adjointness_defect, adjointness_residual, assemble_operators, stress, FpOperators};
pub use quadrature::BallQuadrature;
