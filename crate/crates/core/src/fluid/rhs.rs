//! Right-hand sides of the compressible perturbation system and of the
//! incompressible limit system.
//!
//! Each right-hand side is split into the linear part, evaluated mode by mode
//! from the fields, and the nonlinear remainder, formed on the physical grid
//! and dealiased after every product.

use num_complex::Complex64;
use rayon::prelude::*;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::field::{SpectralField, Torus};
use crate::model::Model;
use crate::params::SigmaMode;
use crate::polymer::{stress, FpOperators};
use crate::spectrum::Coupling;
use crate::state::{CoupledState, IncompressibleState, PolymerField};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Switches selecting which terms are evolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dynamics {
    /// Keep the quadratic and higher terms.
    pub nonlinear: bool,
    /// Keep the potential (acoustic) forcing; when off, `eta` is frozen and
    /// every velocity update is Leray-projected.
    pub potential_forcing: bool,
    pub coupling: Coupling,
    /// Restore the mean momentum `int (1 + eta) u dx` after every time step.
    pub conserve_momentum: bool,
}

impl Default for Dynamics {
    fn default() -> Self {
        Self { nonlinear: true, potential_forcing: true, coupling: Coupling::FULL, conserve_momentum: true }
    }
}

impl Dynamics {
    /// Linear part only; the mean velocity is then conserved by the scheme itself.
    pub fn linearized() -> Self {
        Self { nonlinear: false, conserve_momentum: false, ..Self::default() }
    }
}

/// Velocity gradient entering the drift, `G_ij = d_j u_i` or its antisymmetric part.
fn drift_gradient(grad_u: &[Vec<Vec<f64>>], mode: SigmaMode) -> Vec<Vec<Vec<f64>>> {
    let d = grad_u.len();
    match mode {
        SigmaMode::Full => grad_u.to_vec(),
        SigmaMode::Corotational => (0..d)
            .map(|i| {
                (0..d).map(|j| grad_u[i][j].iter().zip(&grad_u[j][i]).map(|(a, b)| 0.5 * (a - b)).collect()).collect()
            })
            .collect(),
    }
}

/// `(div tau)_i = sum_j d_j tau_ij` in spectral form.
fn stress_divergence(torus: &Torus, psi: &PolymerField, ops: &FpOperators) -> Result<SpectralField> {
    let d = torus.dim();
    let tau = stress(psi, ops)?;
    let mut out = SpectralField::zeros(torus.grid(), d);
    for i in 0..d {
        for j in 0..d {
            let dj = torus.derivative(&tau.comps[i * d + j], j);
            for (o, v) in out.comps[i].iter_mut().zip(dj) {
                *o += v;
            }
        }
    }
    Ok(out)
}

/// Physical-grid gradient `[i][j] = d_j u_i` of a vector field.
fn physical_gradient(torus: &Torus, u: &SpectralField) -> Vec<Vec<Vec<f64>>> {
    let d = torus.dim();
    (0..d).map(|i| (0..d).map(|j| torus.inverse(&torus.derivative(&u.comps[i], j))).collect()).collect()
}

/// Polymer terms `-u . grad c + sum_ij G_ij D_ij c` (transport and drift of the perturbation).
fn polymer_nonlinear(
    model: &Model,
    u_phys: &[Vec<f64>],
    grad_u: &[Vec<Vec<f64>>],
    psi: &PolymerField,
    drift: bool,
) -> SpectralField {
    let t = &model.torus;
    let d = t.dim();
    let np = t.len();
    let nb = psi.size();
    let c_phys: Vec<Vec<f64>> = t.to_physical(&psi.field);
    // transport: -u . grad c_n
    let mut out: Vec<Vec<f64>> = psi
        .field
        .comps
        .par_iter()
        .map(|c| {
            let mut acc = vec![0.0; np];
            for b in 0..d {
                let g = t.inverse(&t.derivative(c, b));
                for p in 0..np {
                    acc[p] -= u_phys[b][p] * g[p];
                }
            }
            acc
        })
        .collect();
    if drift {
        let g = drift_gradient(grad_u, model.params.sigma_mode);
        let cm = DMatrix::from_fn(nb, np, |n, p| c_phys[n][p]);
        for i in 0..d {
            for j in 0..d {
                let dc = &model.ops.drift_mat[i][j] * &cm;
                for n in 0..nb {
                    let row = &mut out[n];
                    for p in 0..np {
                        row[p] += g[i][j][p] * dc[(n, p)];
                    }
                }
            }
        }
    }
    SpectralField { grid: t.grid(), comps: out.par_iter().map(|f| t.forward_dealiased(f)).collect() }
}

/// Nonlinear part of the compressible right-hand side.
pub fn compressible_nonlinear(model: &Model, s: &CoupledState, dyn_: Dynamics) -> Result<CoupledState> {
    let t = &model.torus;
    let p = &model.params;
    let d = t.dim();
    let np = t.len();
    let mut out = CoupledState::zeros(model);
    out.t = s.t;
    let eta = t.inverse(&s.eta.comps[0]);
    let min = eta.iter().fold(f64::INFINITY, |m, e| m.min(1.0 + e));
    if !(min > 0.0) {
        return Err(Error::DensityNonPositive { min });
    }
    if !dyn_.nonlinear {
        return Ok(out);
    }
    let u_phys = t.to_physical(&s.u);
    let grad_u = physical_gradient(t, &s.u);
    let grad_eta: Vec<Vec<f64>> = (0..d).map(|b| t.inverse(&t.derivative(&s.eta.comps[0], b))).collect();
    let div_u: Vec<f64> = (0..np).map(|q| (0..d).map(|a| grad_u[a][a][q]).sum()).collect();

    if dyn_.potential_forcing {
        let n_eta: Vec<f64> = (0..np)
            .map(|q| {
                let adv: f64 = (0..d).map(|b| u_phys[b][q] * grad_eta[b][q]).sum();
                -adv - eta[q] * div_u[q]
            })
            .collect();
        out.eta.comps[0] = t.forward_dealiased(&n_eta);
    }

    // viscous and stress forces, multiplied by -eta / rho in R_u
    let div_hat = t.divergence(&s.u);
    let divt = if dyn_.coupling.stress { Some(stress_divergence(t, &s.psi, &model.ops)?) } else { None };
    for a in 0..d {
        let lap = t.laplacian(&s.u.comps[a]);
        let gd = t.derivative(&div_hat, a);
        let mut force: Vec<Complex64> = lap.iter().zip(&gd).map(|(l, g)| l * p.mu + g * (p.mu + p.lambda)).collect();
        if let Some(dt) = &divt {
            for (f, v) in force.iter_mut().zip(&dt.comps[a]) {
                *f += v;
            }
        }
        let force = t.inverse(&force);
        let n_u: Vec<f64> = (0..np)
            .map(|q| {
                let adv: f64 = (0..d).map(|b| u_phys[b][q] * grad_u[a][b][q]).sum();
                let ratio = eta[q] / (1.0 + eta[q]);
                -adv - ratio * force[q] - eta[q] * grad_eta[a][q]
            })
            .collect();
        out.u.comps[a] = t.forward_dealiased(&n_u);
    }
    if !dyn_.potential_forcing {
        out.u = t.project(&out.u);
    }
    out.psi.field = polymer_nonlinear(model, &u_phys, &grad_u, &s.psi, dyn_.coupling.drift);
    Ok(out)
}

/// Drift source of the polymer equation, `sum_ij G_ij D_ij[m]`, for one mode.
fn drift_source(ops: &FpOperators, mode: SigmaMode, xi: &[f64; 3], u: &[Complex64]) -> Vec<Complex64> {
    let d = ops.dim;
    let nb = ops.size();
    let mut out = vec![ZERO; nb];
    for i in 0..d {
        for j in 0..d {
            let g = I * xi[j] * u[i];
            for m in 0..nb {
                let src = match mode {
                    SigmaMode::Full => ops.drift_src[i][j][m],
                    SigmaMode::Corotational => 0.5 * (ops.drift_src[i][j][m] - ops.drift_src[j][i][m]),
                };
                out[m] += g * src;
            }
        }
    }
    out
}

/// Linear part of the compressible right-hand side, evaluated from the fields.
pub fn compressible_linear(model: &Model, s: &CoupledState, dyn_: Dynamics) -> Result<CoupledState> {
    let t = &model.torus;
    let p = &model.params;
    let ops = &model.ops;
    let d = t.dim();
    let nb = ops.size();
    let mut out = CoupledState::zeros(model);
    out.t = s.t;
    let divt = if dyn_.coupling.stress { Some(stress_divergence(t, &s.psi, ops)?) } else { None };
    for idx in 0..t.len() {
        let xi = t.xi(idx);
        let k2 = t.xi2(idx);
        let u: Vec<Complex64> = (0..d).map(|a| s.u.comps[a][idx]).collect();
        let eta = s.eta.comps[0][idx];
        let div: Complex64 = (0..d).map(|a| I * xi[a] * u[a]).sum();
        let mut du: Vec<Complex64> = (0..d)
            .map(|a| {
                let mut v = -p.mu * k2 * u[a] + (p.mu + p.lambda) * I * xi[a] * div - I * xi[a] * eta;
                if let Some(dt) = &divt {
                    v += dt.comps[a][idx];
                }
                v
            })
            .collect();
        if dyn_.potential_forcing {
            out.eta.comps[0][idx] = -div;
        } else if k2 > 0.0 {
            let dot: Complex64 = (0..d).map(|a| du[a] * xi[a]).sum();
            for a in 0..d {
                du[a] -= dot * (xi[a] / k2);
            }
        }
        for a in 0..d {
            out.u.comps[a][idx] = du[a];
        }
        for m in 0..nb {
            let mut v = ZERO;
            for n in 0..nb {
                v += s.psi.field.comps[n][idx] * ops.l_mat[(m, n)];
            }
            out.psi.field.comps[m][idx] = v;
        }
        if dyn_.coupling.drift {
            for (m, v) in drift_source(ops, p.sigma_mode, &xi, &u).into_iter().enumerate() {
                out.psi.field.comps[m][idx] += v;
            }
        }
    }
    Ok(out)
}

/// Full time derivative `(d eta, d u, d psi)` of the compressible perturbation system.
pub fn compressible_rhs(model: &Model, s: &CoupledState) -> Result<CoupledState> {
    compressible_rhs_with(model, s, Dynamics::default())
}

pub fn compressible_rhs_with(model: &Model, s: &CoupledState, dyn_: Dynamics) -> Result<CoupledState> {
    let mut out = compressible_linear(model, s, dyn_)?;
    out.axpy(1.0, &compressible_nonlinear(model, s, dyn_)?);
    Ok(out)
}

/// Largest `|xi . v_hat(xi)|`.
pub fn divergence_defect(torus: &Torus, v: &SpectralField) -> f64 {
    torus.divergence(v).iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// Nonlinear part of the incompressible system: `P(-v . grad v)` and the polymer terms.
pub fn incompressible_nonlinear(model: &Model, s: &IncompressibleState, dyn_: Dynamics) -> Result<IncompressibleState> {
    let t = &model.torus;
    let d = t.dim();
    let np = t.len();
    let mut out = IncompressibleState::zeros(model);
    out.t = s.t;
    if !dyn_.nonlinear {
        return Ok(out);
    }
    let v_phys = t.to_physical(&s.v);
    let grad_v = physical_gradient(t, &s.v);
    let mut adv = SpectralField::zeros(t.grid(), d);
    for a in 0..d {
        let f: Vec<f64> = (0..np).map(|q| -(0..d).map(|b| v_phys[b][q] * grad_v[a][b][q]).sum::<f64>()).collect();
        adv.comps[a] = t.forward_dealiased(&f);
    }
    out.v = t.project(&adv);
    out.phi.field = polymer_nonlinear(model, &v_phys, &grad_v, &s.phi, dyn_.coupling.drift);
    Ok(out)
}

/// Linear part of the incompressible system: `mu Lap v + P div tau` and `L c + drift source`.
pub fn incompressible_linear(model: &Model, s: &IncompressibleState, dyn_: Dynamics) -> Result<IncompressibleState> {
    let t = &model.torus;
    let p = &model.params;
    let ops = &model.ops;
    let d = t.dim();
    let nb = ops.size();
    let mut out = IncompressibleState::zeros(model);
    out.t = s.t;
    let mut force = SpectralField::zeros(t.grid(), d);
    for a in 0..d {
        force.comps[a] = t.laplacian(&s.v.comps[a]).iter().map(|z| z * p.mu).collect();
    }
    if dyn_.coupling.stress {
        let divt = t.project(&stress_divergence(t, &s.phi, ops)?);
        force.axpy(1.0, &divt);
    }
    out.v = force;
    for idx in 0..t.len() {
        let xi = t.xi(idx);
        let v: Vec<Complex64> = (0..d).map(|a| s.v.comps[a][idx]).collect();
        for m in 0..nb {
            let mut acc = ZERO;
            for n in 0..nb {
                acc += s.phi.field.comps[n][idx] * ops.l_mat[(m, n)];
            }
            out.phi.field.comps[m][idx] = acc;
        }
        if dyn_.coupling.drift {
            for (m, val) in drift_source(ops, p.sigma_mode, &xi, &v).into_iter().enumerate() {
                out.phi.field.comps[m][idx] += val;
            }
        }
    }
    Ok(out)
}

/// Time derivative `(dv, dphi)` of the incompressible limit system.
pub fn incompressible_rhs(model: &Model, s: &IncompressibleState, dyn_: Dynamics) -> Result<IncompressibleState> {
    let defect = divergence_defect(&model.torus, &s.v);
    if defect > 1e-12 {
        return Err(Error::NotSolenoidal(defect));
    }
    let mut out = incompressible_linear(model, s, dyn_)?;
    out.axpy(1.0, &incompressible_nonlinear(model, s, dyn_)?);
    Ok(out)
}
