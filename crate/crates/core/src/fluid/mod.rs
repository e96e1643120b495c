//! Pseudo-spectral evolution of the coupled and the incompressible systems.

pub mod rhs;
pub mod simulate;
pub mod stepper;

pub use rhs::{
    compressible_linear, compressible_nonlinear, compressible_rhs, compressible_rhs_with, divergence_defect,
    incompressible_linear, incompressible_nonlinear, incompressible_rhs, Dynamics,
};
pub use simulate::{simulate, RunOptions};
pub use stepper::{run, step_count, Evolvable, Scheme, Stepper};
