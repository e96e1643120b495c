//! Physical constants and numerical configuration.
//!
//! The model is normalized with unit temperature factor and unit maximal
//! spring extension, so the configuration ball is the unit ball and the
//! pressure law is `P(rho) = rho^3 / 3` with `P'(1) = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the velocity gradient enters the polymer drift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SigmaMode {
    /// `sigma(u) = grad u`.
    #[default]
    Full,
    /// `sigma(u) = (grad u - grad u^T) / 2`.
    Corotational,
}

/// Full parameter set of one simulation. Missing fields deserialize to the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Parameters {
    /// Shear viscosity.
    pub mu: f64,
    /// Volume viscosity.
    pub lambda: f64,
    /// `2 mu + lambda`, recomputed by [`validate_params`].
    pub nu: f64,
    /// Strength of the FENE potential `U = -k log(1 - |R|^2)`.
    pub k: f64,
    /// Spatial dimension (2 or 3); the configuration ball has the same dimension.
    pub dim: usize,
    /// Torus points per axis.
    pub grid_n: usize,
    /// Number of radial polynomials per angular harmonic.
    pub rad_order: usize,
    /// Highest angular harmonic degree.
    pub ang_order: usize,
    pub dt: f64,
    pub t_final: f64,
    /// Sobolev index used by the monitored norms.
    pub sobolev_m: u32,
    /// Exponential weight constant in `exp(2 c_tilde t / nu)`.
    pub c_tilde: f64,
    /// Algebraic weight constant in `(1 + delta t)^2`.
    pub delta: f64,
    pub sigma_mode: SigmaMode,
    pub seed: u64,
}

impl Default for Parameters {
    fn default() -> Self {
        let mu = 1.0;
        let lambda = 98.0;
        Self {
            mu,
            lambda,
            nu: 2.0 * mu + lambda,
            k: 1.0,
            dim: 2,
            grid_n: 32,
            rad_order: 6,
            ang_order: 4,
            dt: 0.01,
            t_final: 1.0,
            sobolev_m: 3,
            c_tilde: 0.5,
            delta: default_delta(mu, 1.0),
            sigma_mode: SigmaMode::Full,
            seed: 0,
        }
    }
}

impl Parameters {
    /// Returns a copy with `lambda` chosen so that `2 mu + lambda = nu`.
    pub fn with_nu(&self, nu: f64) -> Self {
        let mut p = self.clone();
        p.lambda = nu - 2.0 * p.mu;
        p.nu = nu;
        p
    }
}

/// `min(0.1, mu / (8 C_P))`.
pub fn default_delta(mu: f64, c_p: f64) -> f64 {
    (mu / (8.0 * c_p)).min(0.1)
}

/// Poincare constant of mean-zero fields on the `2 pi`-periodic torus,
/// `1 / min |xi|^2` over the non-zero resolved wave vectors.
pub fn torus_poincare_constant(dim: usize, grid_n: usize) -> f64 {
    // Every grid with at least three points per axis resolves the unit
    // vectors e_i, which minimize |xi|^2 over the non-zero lattice.
    if dim >= 1 && grid_n >= 3 {
        1.0
    } else {
        f64::INFINITY
    }
}

/// Checks every invariant of [`Parameters`] and returns it with `nu` recomputed.
///
/// The Poincare constant entering the `delta` bound is the torus constant;
/// see [`validate_params_with_poincare`] to also account for the polymer gap.
pub fn validate_params(p: &Parameters) -> Result<Parameters> {
    let c_p = torus_poincare_constant(p.dim, p.grid_n).max(1.0);
    validate_params_with_poincare(p, c_p)
}

/// Same as [`validate_params`] with an explicit Poincare constant `c_p >= 1`.
pub fn validate_params_with_poincare(p: &Parameters, c_p: f64) -> Result<Parameters> {
    let mut q = p.clone();
    if !(p.mu > 0.0) || !p.mu.is_finite() {
        return Err(Error::NonPositiveViscosity(format!("mu = {} must be > 0", p.mu)));
    }
    if !(p.lambda > 0.0) || !p.lambda.is_finite() {
        return Err(Error::BadParameter(format!("volume viscosity lambda = {} must be > 0", p.lambda)));
    }
    q.nu = 2.0 * p.mu + p.lambda;
    if !(p.k > 0.0) {
        return Err(Error::BadParameter(format!("k = {} must be > 0", p.k)));
    }
    if p.dim != 2 && p.dim != 3 {
        return Err(Error::BadParameter(format!("dim = {} must be 2 or 3", p.dim)));
    }
    if p.grid_n < 8 || !p.grid_n.is_power_of_two() {
        return Err(Error::BadGrid(format!("grid_n = {} must be a power of two >= 8", p.grid_n)));
    }
    if p.rad_order < 2 {
        return Err(Error::BadParameter(format!("rad_order = {} must be >= 2", p.rad_order)));
    }
    if !(p.dt > 0.0) {
        return Err(Error::BadParameter(format!("dt = {} must be > 0", p.dt)));
    }
    // t_final = 0 is a valid no-op run that only records the initial sample.
    if !(p.t_final >= 0.0) || (p.t_final > 0.0 && p.t_final < p.dt) {
        return Err(Error::BadParameter(format!("t_final = {} must be 0 or >= dt = {}", p.t_final, p.dt)));
    }
    if p.sobolev_m < 1 {
        return Err(Error::BadParameter("sobolev_m must be >= 1".into()));
    }
    if !(p.c_tilde > 0.0 && p.c_tilde <= 1.0) {
        return Err(Error::BadParameter(format!("c_tilde = {} must lie in (0, 1]", p.c_tilde)));
    }
    if !(p.delta > 0.0) {
        return Err(Error::BadParameter(format!("delta = {} must be > 0", p.delta)));
    }
    let limit = p.mu / (4.0 * c_p);
    if p.delta > limit {
        return Err(Error::DeltaTooLarge { delta: p.delta, limit, c_p });
    }
    Ok(q)
}
