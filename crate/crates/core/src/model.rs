//! Discretization bundle shared by the solvers: validated parameters, the
//! torus, the configuration-space basis and its operators.

use crate::error::Result;
use crate::field::{Grid, Torus};
use crate::params::{validate_params, Parameters};
use crate::polymer::{assemble_operators, build_basis, FpOperators, RBasis};

#[derive(Debug, Clone)]
pub struct Model {
    pub params: Parameters,
    pub torus: Torus,
    pub basis: RBasis,
    pub ops: FpOperators,
}

impl Model {
    /// Validates `p` and builds the torus, basis and operators.
    pub fn new(p: &Parameters) -> Result<Self> {
        let params = validate_params(p)?;
        let torus = Torus::new(Grid::new(params.dim, params.grid_n));
        let basis = build_basis(params.dim, params.k, params.rad_order, params.ang_order)?;
        let ops = assemble_operators(&basis);
        Ok(Self { params, torus, basis, ops })
    }

    /// Same discretization with new physical parameters; the basis is rebuilt
    /// only when its defining parameters change.
    pub fn with_params(&self, p: &Parameters) -> Result<Self> {
        let params = validate_params(p)?;
        let same_basis = params.dim == self.params.dim
            && params.k == self.params.k
            && params.rad_order == self.params.rad_order
            && params.ang_order == self.params.ang_order;
        let same_grid = params.dim == self.params.dim && params.grid_n == self.params.grid_n;
        if !(same_basis && same_grid) {
            return Self::new(&params);
        }
        Ok(Self { params, ..self.clone() })
    }

    pub fn dim(&self) -> usize {
        self.params.dim
    }

    /// Number of configuration-space basis functions `N_R`.
    pub fn n_basis(&self) -> usize {
        self.basis.size()
    }
}
