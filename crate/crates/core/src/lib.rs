//! Spectral micro-macro solver for the compressible FENE dumbbell model on
//! the periodic torus and for its incompressible limit.

pub mod checkpoint;
pub mod error;
pub mod field;
pub mod fluid;
pub mod model;
pub mod monitor;
pub mod params;
pub mod polymer;
pub mod spectrum;
pub mod state;

pub use error::{Error, Result};
pub use field::{Grid, SpectralField, Torus};
pub use model::Model;
pub use params::{validate_params, Parameters, SigmaMode};
pub use state::{momentum, CoupledState, IncompressibleState, PolymerField};
