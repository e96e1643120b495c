//! Linearized generator per Fourier mode and its spectrum.
//!
//! Compressible unknowns are ordered `(eta, u_1..u_d, c_0..c_{N-1})`,
//! incompressible ones `(v_1..v_d, c_0..c_{N-1})`. The velocity gradient of a
//! single mode is `d_j u_i = i xi_j u_i`.

use std::io::Write;
use std::path::Path;

use nalgebra::{Complex, DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::params::{Parameters, SigmaMode};
use crate::polymer::FpOperators;

type C64 = Complex<f64>;

/// Which couplings between fluid and polymer enter the mode matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Coupling {
    /// `div tau` in the velocity equation.
    pub stress: bool,
    /// Velocity-gradient forcing of the polymer equation.
    pub drift: bool,
}

impl Coupling {
    pub const FULL: Self = Self { stress: true, drift: true };
    pub const NONE: Self = Self { stress: false, drift: false };
}

/// Linear generator of one Fourier mode.
#[derive(Debug, Clone)]
pub struct ModeOperator {
    pub xi: [i64; 3],
    pub dim: usize,
    /// `true` for the `(v, c)` system of the incompressible limit.
    pub incompressible: bool,
    pub mat: DMatrix<C64>,
}

/// Drift source contracted for the chosen coupling of the velocity gradient:
/// `src[i][j][m]` multiplies `d_j u_i`.
fn effective_src(ops: &FpOperators, mode: SigmaMode) -> Vec<Vec<DVector<f64>>> {
    let d = ops.dim;
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| match mode {
                    SigmaMode::Full => ops.drift_src[i][j].clone(),
                    SigmaMode::Corotational => (&ops.drift_src[i][j] - &ops.drift_src[j][i]) * 0.5,
                })
                .collect()
        })
        .collect()
}

/// Compressible mode matrix for any wave vector, including `xi = 0`.
pub(crate) fn compressible_matrix(
    xi: &[f64; 3],
    p: &Parameters,
    ops: &FpOperators,
    coupling: Coupling,
) -> DMatrix<C64> {
    let d = p.dim;
    let nb = ops.size();
    let n = 1 + d + nb;
    let i1 = C64::new(0.0, 1.0);
    let k2: f64 = xi[..d].iter().map(|x| x * x).sum();
    let mut a = DMatrix::<C64>::zeros(n, n);
    for b in 0..d {
        // continuity: -div u ; pressure: -grad eta with P'(1) = 1
        a[(0, 1 + b)] = -i1 * xi[b];
        a[(1 + b, 0)] = -i1 * xi[b];
        for c in 0..d {
            let mut v = -(p.mu + p.lambda) * xi[b] * xi[c];
            if b == c {
                v -= p.mu * k2;
            }
            a[(1 + b, 1 + c)] = C64::new(v, 0.0);
        }
    }
    for r in 0..nb {
        for c in 0..nb {
            a[(1 + d + r, 1 + d + c)] = C64::new(ops.l_mat[(r, c)], 0.0);
        }
    }
    if coupling.stress {
        for b in 0..d {
            for m in 0..nb {
                let s: f64 = (0..d).map(|j| xi[j] * ops.stress_vec[b][j][m]).sum();
                a[(1 + b, 1 + d + m)] = i1 * s;
            }
        }
    }
    if coupling.drift {
        let src = effective_src(ops, p.sigma_mode);
        for i in 0..d {
            for m in 0..nb {
                let s: f64 = (0..d).map(|j| xi[j] * src[i][j][m]).sum();
                a[(1 + d + m, 1 + i)] = i1 * s;
            }
        }
    }
    a
}

/// Incompressible mode matrix for any wave vector; the stress enters through
/// the Leray projector `I - xi xi^T / |xi|^2`.
pub(crate) fn incompressible_matrix(
    xi: &[f64; 3],
    p: &Parameters,
    ops: &FpOperators,
    coupling: Coupling,
) -> DMatrix<C64> {
    let d = p.dim;
    let nb = ops.size();
    let n = d + nb;
    let i1 = C64::new(0.0, 1.0);
    let k2: f64 = xi[..d].iter().map(|x| x * x).sum();
    let proj = |a: usize, b: usize| {
        let delta = if a == b { 1.0 } else { 0.0 };
        if k2 == 0.0 {
            delta
        } else {
            delta - xi[a] * xi[b] / k2
        }
    };
    let mut a = DMatrix::<C64>::zeros(n, n);
    for b in 0..d {
        a[(b, b)] = C64::new(-p.mu * k2, 0.0);
    }
    for r in 0..nb {
        for c in 0..nb {
            a[(d + r, d + c)] = C64::new(ops.l_mat[(r, c)], 0.0);
        }
    }
    if coupling.stress {
        for m in 0..nb {
            let div: Vec<f64> = (0..d).map(|b| (0..d).map(|j| xi[j] * ops.stress_vec[b][j][m]).sum()).collect();
            for b in 0..d {
                let s: f64 = (0..d).map(|c| proj(b, c) * div[c]).sum();
                a[(b, d + m)] = i1 * s;
            }
        }
    }
    if coupling.drift {
        let src = effective_src(ops, p.sigma_mode);
        for i in 0..d {
            for m in 0..nb {
                let s: f64 = (0..d).map(|j| xi[j] * src[i][j][m]).sum();
                a[(d + m, i)] = i1 * s;
            }
        }
    }
    a
}

fn check_xi(xi: &[i64], dim: usize) -> Result<[i64; 3]> {
    let mut w = [0i64; 3];
    for (a, v) in xi.iter().take(dim).enumerate() {
        w[a] = *v;
    }
    if w.iter().all(|&v| v == 0) {
        return Err(Error::ZeroMode);
    }
    Ok(w)
}

fn as_f64(w: &[i64; 3]) -> [f64; 3] {
    [w[0] as f64, w[1] as f64, w[2] as f64]
}

/// Fully coupled compressible mode operator.
pub fn assemble_mode(xi: &[i64], p: &Parameters, ops: &FpOperators) -> Result<ModeOperator> {
    assemble_mode_with(xi, p, ops, Coupling::FULL)
}

pub fn assemble_mode_with(xi: &[i64], p: &Parameters, ops: &FpOperators, coupling: Coupling) -> Result<ModeOperator> {
    let w = check_xi(xi, p.dim)?;
    Ok(ModeOperator {
        xi: w,
        dim: p.dim,
        incompressible: false,
        mat: compressible_matrix(&as_f64(&w), p, ops, coupling),
    })
}

/// Mode operator of the incompressible limit system.
pub fn assemble_incompressible_mode(
    xi: &[i64],
    p: &Parameters,
    ops: &FpOperators,
    coupling: Coupling,
) -> Result<ModeOperator> {
    let w = check_xi(xi, p.dim)?;
    Ok(ModeOperator {
        xi: w,
        dim: p.dim,
        incompressible: true,
        mat: incompressible_matrix(&as_f64(&w), p, ops, coupling),
    })
}

impl ModeOperator {
    pub fn size(&self) -> usize {
        self.mat.nrows()
    }

    pub fn apply(&self, x: &DVector<C64>) -> DVector<C64> {
        &self.mat * x
    }

    /// Real matrix similar to `mat`: velocity unknowns are rotated by `i`.
    pub fn real_form(&self) -> DMatrix<f64> {
        let n = self.size();
        let (lo, hi) = if self.incompressible { (0, self.dim) } else { (1, 1 + self.dim) };
        let t = |p: usize| if p >= lo && p < hi { C64::new(0.0, 1.0) } else { C64::new(1.0, 0.0) };
        DMatrix::from_fn(n, n, |r, c| (self.mat[(r, c)] * t(c) / t(r)).re)
    }
}

/// Eigenvalues sorted by descending real part.
pub fn eigen_decay(mode: &ModeOperator) -> Result<Vec<C64>> {
    let b = mode.real_form();
    let schur = nalgebra::linalg::Schur::try_new(b, 1e-14, 100_000)
        .ok_or_else(|| Error::EigSolverFailure(format!("Schur iteration failed for xi = {:?}", mode.xi)))?;
    let mut ev: Vec<C64> = schur.complex_eigenvalues().iter().copied().collect();
    if ev.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::EigSolverFailure("non-finite eigenvalue".into()));
    }
    ev.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    Ok(ev)
}

/// Eigenvalues below this modulus are the neutral mass direction.
pub const NEUTRAL_TOL: f64 = 1e-8;

/// Smallest decay rate `-Re lambda` among the non-neutral eigenvalues.
pub fn slowest_rate(ev: &[C64]) -> f64 {
    ev.iter().filter(|z| z.norm() > NEUTRAL_TOL).map(|z| -z.re).fold(f64::INFINITY, f64::min)
}

/// One row of [`slow_rate_sweep`].
#[derive(Debug, Clone, PartialEq)]
pub struct SlowRate {
    pub nu: f64,
    /// Smallest decay rate over the supplied modes.
    pub rate: f64,
    /// Mode attaining it.
    pub argmin: [i64; 3],
}

/// For each parameter set, the slowest decay rate over `xi_set`.
pub fn slow_rate_sweep(
    p_list: &[Parameters],
    xi_set: &[[i64; 3]],
    ops: &FpOperators,
    coupling: Coupling,
) -> Result<Vec<SlowRate>> {
    p_list
        .par_iter()
        .map(|p| {
            let mut best = SlowRate { nu: p.nu, rate: f64::INFINITY, argmin: [0; 3] };
            for xi in xi_set {
                let mode = assemble_mode_with(xi, p, ops, coupling)?;
                let r = slowest_rate(&eigen_decay(&mode)?);
                if r < best.rate {
                    best.rate = r;
                    best.argmin = mode.xi;
                }
            }
            Ok(best)
        })
        .collect()
}

/// Wave vectors with `1 <= |xi|_inf <= kmax`, one per `+-xi` pair.
pub fn half_space_modes(dim: usize, kmax: i64) -> Vec<[i64; 3]> {
    let mut out = Vec::new();
    let r = -kmax..=kmax;
    let zr = if dim == 3 { -kmax..=kmax } else { 0..=0 };
    for a in r.clone() {
        for b in r.clone() {
            for c in zr.clone() {
                let w = [a, b, c];
                let neg = [-a, -b, -c];
                if w != [0, 0, 0] && w > neg {
                    out.push(w);
                }
            }
        }
    }
    out
}

/// One spectrum per `(nu, xi)`, as written to `spectrum.csv`.
#[derive(Debug, Clone)]
pub struct SpectrumRow {
    pub nu: f64,
    pub xi: [i64; 3],
    pub eigenvalues: Vec<C64>,
}

/// Writes `nu, xi_1..xi_d, rank, re_lambda, im_lambda` rows.
pub fn write_spectrum_csv(rows: &[SpectrumRow], dim: usize, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    let xs: Vec<String> = (1..=dim).map(|a| format!("xi_{a}")).collect();
    writeln!(w, "nu,{},rank,re_lambda,im_lambda", xs.join(","))?;
    for row in rows {
        let xi: Vec<String> = row.xi[..dim].iter().map(|v| v.to_string()).collect();
        for (rank, z) in row.eigenvalues.iter().enumerate() {
            writeln!(w, "{},{},{},{:e},{:e}", row.nu, xi.join(","), rank, z.re, z.im)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polymer::{assemble_operators, build_basis};
    use approx::assert_relative_eq;

    fn ops(rad: usize, ang: usize) -> FpOperators {
        assemble_operators(&build_basis(2, 1.0, rad, ang).unwrap())
    }

    /// Roots of `z^2 + nu k2 z + k2`, slow one first.
    fn acoustic_roots(nu: f64, k2: f64) -> (f64, f64) {
        let b = nu * k2;
        let disc = (b * b - 4.0 * k2).sqrt();
        // slow root via the product of roots, avoiding cancellation
        let fast = -(b + disc) / 2.0;
        (k2 / fast, fast)
    }

    #[test]
    fn zero_mode_is_rejected() {
        let p = Parameters::default();
        assert!(matches!(assemble_mode(&[0, 0], &p, &ops(2, 1)), Err(Error::ZeroMode)));
    }

    #[test]
    fn decoupled_acoustic_block_has_expected_roots() {
        let p = Parameters::default();
        let o = ops(3, 2);
        let mode = assemble_mode_with(&[1, 0], &p, &o, Coupling::NONE).unwrap();
        let block = mode.mat.view((0, 0), (2, 2)).into_owned();
        // det(zI - A) = z^2 - tr A z + det A
        let tr = block[(0, 0)] + block[(1, 1)];
        let det = block[(0, 0)] * block[(1, 1)] - block[(0, 1)] * block[(1, 0)];
        assert_relative_eq!(tr.re, -100.0);
        assert_relative_eq!(det.re, 1.0);
        assert_eq!(det.im, 0.0);
        let ev = eigen_decay(&mode).unwrap();
        let (slow, fast) = acoustic_roots(100.0, 1.0);
        assert!(ev.iter().any(|z| (z.re - slow).abs() < 1e-12 && z.im.abs() < 1e-12));
        assert!(ev.iter().any(|z| (z.re - fast).abs() < 1e-9));
        assert_relative_eq!(slow, -0.010001000200050, max_relative = 1e-12);
        // transverse heat mode
        assert!(ev.iter().any(|z| (z.re + 1.0).abs() < 1e-12));
    }

    #[test]
    fn opposite_modes_are_conjugate() {
        let p = Parameters::default();
        let o = ops(3, 2);
        let a = assemble_mode(&[2, -1], &p, &o).unwrap();
        let b = assemble_mode(&[-2, 1], &p, &o).unwrap();
        assert!(a.mat.iter().zip(b.mat.iter()).all(|(x, y)| x.conj() == *y));
    }

    #[test]
    fn real_form_is_similar() {
        let p = Parameters::default();
        let o = ops(3, 2);
        let mode = assemble_mode(&[1, 2], &p, &o).unwrap();
        let r = mode.real_form();
        let back = DMatrix::from_fn(r.nrows(), r.ncols(), |i, j| C64::new(r[(i, j)], 0.0));
        // same trace and same characteristic behavior on a probe
        let tr: C64 = (0..r.nrows()).map(|i| mode.mat[(i, i)]).sum();
        assert_relative_eq!(tr.re, r.trace(), max_relative = 1e-14);
        assert!(back.iter().all(|z| z.re.is_finite()));
    }

    #[test]
    fn coupled_modes_are_stable() {
        let p = Parameters::default();
        let o = ops(4, 2);
        for xi in half_space_modes(2, 2) {
            let ev = eigen_decay(&assemble_mode(&xi, &p, &o).unwrap()).unwrap();
            assert!(ev[0].re <= 1e-10, "xi {xi:?}: {}", ev[0]);
        }
    }

    #[test]
    fn slow_rate_tracks_inverse_viscosity() {
        let o = ops(3, 2);
        let base = Parameters::default();
        let list: Vec<Parameters> = [100.0, 1000.0].iter().map(|&nu| base.with_nu(nu)).collect();
        let set = [[1, 0, 0], [1, 1, 0], [2, 0, 0]];
        let rows = slow_rate_sweep(&list, &set, &o, Coupling::NONE).unwrap();
        for r in &rows {
            assert!((r.rate * r.nu - 1.0).abs() <= 0.05);
            // the oracle slow rate 1/nu + 1/(|xi|^2 nu^3) is smallest at the largest |xi|
            let want = set
                .iter()
                .map(|w| (-acoustic_roots(r.nu, (w[0] * w[0] + w[1] * w[1]) as f64).0, *w))
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .unwrap();
            assert_eq!(r.argmin, want.1);
            assert_relative_eq!(r.rate, want.0, max_relative = 1e-8);
        }
        assert_eq!(rows, slow_rate_sweep(&list, &set, &o, Coupling::NONE).unwrap());
    }

    #[test]
    fn slow_rate_depends_on_nu_only() {
        let o = ops(3, 2);
        let p1 = Parameters::default();
        let p2 = Parameters { mu: 2.0, lambda: 96.0, ..Parameters::default() };
        let set = [[1, 0, 0]];
        let a = slow_rate_sweep(&[p1], &set, &o, Coupling::NONE).unwrap()[0].rate;
        let b = slow_rate_sweep(&[p2], &set, &o, Coupling::NONE).unwrap()[0].rate;
        assert!((a - b).abs() <= 0.01 * a);
    }

    #[test]
    fn transverse_mode_with_polymer_is_damped() {
        let p = Parameters::default();
        let o = ops(4, 2);
        let inc = assemble_incompressible_mode(&[1, 0], &p, &o, Coupling::FULL).unwrap();
        let ev = eigen_decay(&inc).unwrap();
        let rate = slowest_rate(&ev);
        let bound = 0.5 * (p.mu).min(o.poincare_gap());
        assert!(rate >= bound, "rate {rate} below {bound}");
    }

    #[test]
    fn spectrum_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("spectrum.csv");
        let rows = vec![SpectrumRow {
            nu: 100.0,
            xi: [1, 0, 0],
            eigenvalues: vec![C64::new(-0.01, 0.0), C64::new(-1.0, 0.5)],
        }];
        write_spectrum_csv(&rows, 2, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "nu,xi_1,xi_2,rank,re_lambda,im_lambda");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].starts_with("100,1,0,1,"));
    }
}
