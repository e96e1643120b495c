//! Implicit-explicit time stepping.
//!
//! The linear generator of every Fourier mode is treated implicitly through a
//! pre-factorized block per mode; the nonlinear remainder is explicit. Only
//! one mode of each `+-xi` pair is solved, the other is its conjugate.

use nalgebra::{Complex, DMatrix, DVector, LU};
use rayon::prelude::*;
use std::sync::atomic::{AtomicU64, Ordering};

use super::rhs::{compressible_nonlinear, incompressible_nonlinear, Dynamics};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::spectrum::{compressible_matrix, incompressible_matrix};
use crate::state::{momentum, CoupledState, IncompressibleState};

type C64 = Complex<f64>;

/// Time discretization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Forward-backward Euler, first order.
    Euler,
    /// Two-stage stiffly accurate scheme ARS(2,2,2), second order.
    Ars222,
}

impl Scheme {
    pub fn order(self) -> usize {
        match self {
            Scheme::Euler => 1,
            Scheme::Ars222 => 2,
        }
    }

    pub fn from_order(order: usize) -> Result<Self> {
        match order {
            1 => Ok(Scheme::Euler),
            2 => Ok(Scheme::Ars222),
            _ => Err(Error::BadParameter(format!("IMEX order {order} must be 1 or 2"))),
        }
    }

    /// Diagonal coefficient of the implicit stages.
    fn gamma(self) -> f64 {
        match self {
            Scheme::Euler => 1.0,
            Scheme::Ars222 => 1.0 - std::f64::consts::FRAC_1_SQRT_2,
        }
    }
}

/// A state that can be advanced by [`Stepper`].
pub trait Evolvable: Clone + Send + Sync + Sized {
    /// Unknowns per Fourier mode.
    fn width(model: &Model) -> usize;
    /// Linear generator at wave vector `xi`.
    fn mode_matrix(model: &Model, dyn_: Dynamics, xi: &[f64; 3]) -> DMatrix<C64>;
    /// Explicit remainder.
    fn nonlinear(model: &Model, dyn_: Dynamics, s: &Self) -> Result<Self>;
    fn gather(&self, idx: usize) -> DVector<C64>;
    fn scatter(&mut self, idx: usize, x: &DVector<C64>);
    fn axpy(&mut self, a: f64, other: &Self);
    fn zeros_like(model: &Model) -> Self;
    fn time(&self) -> f64;
    fn set_time(&mut self, t: f64);
    /// Restores quantities the exact flow conserves, using the state `prev`
    /// before the step; returns the size of the correction.
    fn restore_invariants(&mut self, _model: &Model, _dyn: Dynamics, _prev: &Self) -> f64 {
        0.0
    }
}

impl Evolvable for CoupledState {
    fn width(model: &Model) -> usize {
        1 + model.dim() + model.n_basis()
    }

    fn mode_matrix(model: &Model, dyn_: Dynamics, xi: &[f64; 3]) -> DMatrix<C64> {
        let mut a = compressible_matrix(xi, &model.params, &model.ops, dyn_.coupling);
        if !dyn_.potential_forcing {
            // freeze eta and project the velocity rows
            let d = model.dim();
            let k2: f64 = xi[..d].iter().map(|x| x * x).sum();
            a.row_mut(0).fill(C64::new(0.0, 0.0));
            if k2 > 0.0 {
                let rows = a.rows(1, d).into_owned();
                for r in 0..d {
                    for c in 0..a.ncols() {
                        let dot: C64 = (0..d).map(|b| rows[(b, c)] * xi[b]).sum();
                        a[(1 + r, c)] = rows[(r, c)] - dot * (xi[r] / k2);
                    }
                }
            }
        }
        a
    }

    fn nonlinear(model: &Model, dyn_: Dynamics, s: &Self) -> Result<Self> {
        compressible_nonlinear(model, s, dyn_)
    }

    fn gather(&self, idx: usize) -> DVector<C64> {
        let d = self.u.ncomp();
        let nb = self.psi.size();
        DVector::from_fn(1 + d + nb, |r, _| {
            if r == 0 {
                self.eta.comps[0][idx]
            } else if r <= d {
                self.u.comps[r - 1][idx]
            } else {
                self.psi.field.comps[r - 1 - d][idx]
            }
        })
    }

    fn scatter(&mut self, idx: usize, x: &DVector<C64>) {
        let d = self.u.ncomp();
        self.eta.comps[0][idx] = x[0];
        for a in 0..d {
            self.u.comps[a][idx] = x[1 + a];
        }
        for n in 0..self.psi.size() {
            self.psi.field.comps[n][idx] = x[1 + d + n];
        }
    }

    fn axpy(&mut self, a: f64, other: &Self) {
        CoupledState::axpy(self, a, other);
    }

    fn zeros_like(model: &Model) -> Self {
        CoupledState::zeros(model)
    }

    fn time(&self) -> f64 {
        self.t
    }

    fn set_time(&mut self, t: f64) {
        self.t = t;
    }

    /// Shifts the mean velocity so that the mean momentum equals that of `prev`.
    fn restore_invariants(&mut self, model: &Model, dyn_: Dynamics, prev: &Self) -> f64 {
        if !dyn_.conserve_momentum {
            return 0.0;
        }
        let t = &model.torus;
        let before = momentum(t, prev);
        let after = momentum(t, self);
        let rho_bar = 1.0 + self.eta.comps[0][0].re;
        let mut size = 0.0f64;
        for a in 0..self.u.ncomp() {
            let shift = (before.comps[a][0].re - after.comps[a][0].re) / rho_bar;
            self.u.comps[a][0].re += shift;
            size = size.max(shift.abs());
        }
        size
    }
}

impl Evolvable for IncompressibleState {
    fn width(model: &Model) -> usize {
        model.dim() + model.n_basis()
    }

    fn mode_matrix(model: &Model, dyn_: Dynamics, xi: &[f64; 3]) -> DMatrix<C64> {
        incompressible_matrix(xi, &model.params, &model.ops, dyn_.coupling)
    }

    fn nonlinear(model: &Model, dyn_: Dynamics, s: &Self) -> Result<Self> {
        incompressible_nonlinear(model, s, dyn_)
    }

    fn gather(&self, idx: usize) -> DVector<C64> {
        let d = self.v.ncomp();
        DVector::from_fn(d + self.phi.size(), |r, _| {
            if r < d {
                self.v.comps[r][idx]
            } else {
                self.phi.field.comps[r - d][idx]
            }
        })
    }

    fn scatter(&mut self, idx: usize, x: &DVector<C64>) {
        let d = self.v.ncomp();
        for a in 0..d {
            self.v.comps[a][idx] = x[a];
        }
        for n in 0..self.phi.size() {
            self.phi.field.comps[n][idx] = x[d + n];
        }
    }

    fn axpy(&mut self, a: f64, other: &Self) {
        IncompressibleState::axpy(self, a, other);
    }

    fn zeros_like(model: &Model) -> Self {
        IncompressibleState::zeros(model)
    }

    fn time(&self) -> f64 {
        self.t
    }

    fn set_time(&mut self, t: f64) {
        self.t = t;
    }
}

struct Block {
    idx: usize,
    neg: usize,
    lu: LU<C64, nalgebra::Dyn, nalgebra::Dyn>,
}

/// IMEX integrator with per-mode factorizations of `I - gamma dt A_xi`.
pub struct Stepper<S: Evolvable> {
    pub model: Model,
    pub dynamics: Dynamics,
    pub scheme: Scheme,
    pub dt: f64,
    blocks: Vec<Block>,
    /// Running sum of the invariant corrections, stored as `f64` bits.
    correction: AtomicU64,
    _state: std::marker::PhantomData<S>,
}

impl<S: Evolvable> Stepper<S> {
    /// Factorizes the implicit blocks; fails when a factorization residual
    /// exceeds `1e-12` relative to the block norm.
    pub fn new(model: &Model, scheme: Scheme, dynamics: Dynamics) -> Result<Self> {
        let dt = model.params.dt;
        let t = &model.torus;
        let g = scheme.gamma() * dt;
        let blocks = t
            .canonical_indices()
            .par_iter()
            .map(|&idx| {
                let a = S::mode_matrix(model, dynamics, &t.xi(idx));
                let n = a.nrows();
                let m = DMatrix::<C64>::identity(n, n) - a * C64::new(g, 0.0);
                let lu = m.clone().lu();
                let mut pm = m.clone();
                lu.p().permute_rows(&mut pm);
                let resid = (lu.l() * lu.u() - &pm).iter().fold(0.0f64, |r, z| r.max(z.norm()));
                let scale = m.iter().fold(0.0f64, |r, z| r.max(z.norm()));
                if !(resid <= 1e-12 * scale) || !lu.is_invertible() {
                    return Err(Error::SolveFailed(format!(
                        "factorization residual {resid:e} at xi = {:?}",
                        t.xi(idx)
                    )));
                }
                Ok(Block { idx, neg: t.neg_index(idx), lu })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            model: model.clone(),
            dynamics,
            scheme,
            dt,
            blocks,
            correction: AtomicU64::new(0f64.to_bits()),
            _state: std::marker::PhantomData,
        })
    }

    /// Solves `(I - gamma dt A) x = r` mode by mode; dealiased modes are zeroed.
    fn implicit_solve(&self, r: &S) -> Result<S> {
        let sols: Vec<(usize, usize, DVector<C64>)> = self
            .blocks
            .par_iter()
            .map(|b| {
                let x =
                    b.lu.solve(&r.gather(b.idx))
                        .ok_or_else(|| Error::SolveFailed(format!("singular block at index {}", b.idx)))?;
                Ok((b.idx, b.neg, x))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = S::zeros_like(&self.model);
        for (idx, neg, x) in sols {
            if idx == neg {
                out.scatter(idx, &x.map(|z| C64::new(z.re, 0.0)));
            } else {
                out.scatter(idx, &x);
                out.scatter(neg, &x.map(|z| z.conj()));
            }
        }
        Ok(out)
    }

    /// Advances one time step.
    pub fn step(&self, s: &S) -> Result<S> {
        let dt = self.dt;
        let wrap = |e: Error| Error::Step { t: s.time(), source: Box::new(e) };
        let n1 = S::nonlinear(&self.model, self.dynamics, s).map_err(wrap)?;
        let mut next = match self.scheme {
            Scheme::Euler => {
                let mut r = s.clone();
                r.axpy(dt, &n1);
                self.implicit_solve(&r).map_err(wrap)?
            }
            Scheme::Ars222 => {
                let g = self.scheme.gamma();
                let delta = 1.0 - 1.0 / (2.0 * g);
                let mut r1 = s.clone();
                r1.axpy(g * dt, &n1);
                let x2 = self.implicit_solve(&r1).map_err(wrap)?;
                // A X2 recovered from the stage equation
                let mut k2 = x2.clone();
                k2.axpy(-1.0, &r1);
                let n2 = S::nonlinear(&self.model, self.dynamics, &x2).map_err(wrap)?;
                let mut r2 = s.clone();
                r2.axpy((1.0 - g) / g, &k2);
                r2.axpy(dt * delta, &n1);
                r2.axpy(dt * (1.0 - delta), &n2);
                self.implicit_solve(&r2).map_err(wrap)?
            }
        };
        let c = next.restore_invariants(&self.model, self.dynamics, s);
        if c != 0.0 {
            let _ = self
                .correction
                .fetch_update(Ordering::Relaxed, Ordering::Relaxed, |b| Some((f64::from_bits(b) + c).to_bits()));
        }
        next.set_time(s.time() + dt);
        Ok(next)
    }

    /// Accumulated size of the mean-momentum corrections, a measure of the
    /// momentum drift of the velocity-form discretization.
    pub fn momentum_correction(&self) -> f64 {
        f64::from_bits(self.correction.load(Ordering::Relaxed))
    }
}

/// Steps `s0` until `t_final`, calling `observe` on the initial state and
/// after every step. Returns the final state.
pub fn run<S: Evolvable>(
    stepper: &Stepper<S>,
    s0: &S,
    t_final: f64,
    mut observe: impl FnMut(usize, &S) -> Result<()>,
) -> Result<S> {
    let steps = (t_final / stepper.dt).round() as usize;
    let mut s = s0.clone();
    observe(0, &s)?;
    for k in 1..=steps {
        s = stepper.step(&s)?;
        observe(k, &s)?;
    }
    Ok(s)
}

/// Number of steps taken by [`run`] for a horizon.
pub fn step_count(dt: f64, t_final: f64) -> usize {
    (t_final / dt).round() as usize
}
