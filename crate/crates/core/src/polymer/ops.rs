//! Galerkin operators of the linearized Fokker-Planck equation.
//!
//! For `psi = psi_inf sum_n c_n phi_n` and velocity gradient `G_ij = d_j u_i`,
//! the coefficient equations read
//!
//! ```text
//! dc_m/dt = sum_n L[m][n] c_n + sum_ij G_ij (sum_n D_ij[m][n] c_n + D_ij[m])
//! ```
//!
//! with `L[m][n] = -int psi_inf grad phi_m . grad phi_n`,
//! `D_ij[m][n] = int psi_inf R_j d_i phi_m phi_n` and `D_ij[m] = D_ij[m][0]`.
//! The stress of the perturbation is `tau_ij = sum_n S_ij[n] c_n` with
//! `S_ij[n] = int R_i d_j U psi_inf phi_n`, `U = -k log(1 - |R|^2)`.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::basis::{BasisId, RBasis};
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::state::PolymerField;

/// Assembled operator families for one basis.
#[derive(Debug, Clone)]
pub struct FpOperators {
    pub id: BasisId,
    pub dim: usize,
    pub k: f64,
    /// Stiffness `L[m][n]`, symmetric negative semidefinite.
    pub l_mat: DMatrix<f64>,
    /// `drift_mat[i][j]`: action of `d_j u_i` on the coefficients.
    pub drift_mat: Vec<Vec<DMatrix<f64>>>,
    /// `drift_src[i][j]`: forcing from `d_j u_i` acting on the equilibrium.
    pub drift_src: Vec<Vec<DVector<f64>>>,
    /// `stress_vec[i][j][n] = int R_i d_j U psi_inf phi_n dR`.
    pub stress_vec: Vec<Vec<DVector<f64>>>,
}

impl FpOperators {
    pub fn size(&self) -> usize {
        self.l_mat.nrows()
    }

    /// Smallest non-zero eigenvalue of `-L`.
    pub fn poincare_gap(&self) -> f64 {
        let mut ev: Vec<f64> = (-&self.l_mat).symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev.get(1).copied().unwrap_or(f64::INFINITY)
    }

    /// Stress tensor `tau_ij = sum_n S_ij[n] c_n` of one coefficient vector.
    pub fn stress_of(&self, c: &[f64]) -> Result<Vec<Vec<f64>>> {
        if c.len() != self.size() {
            return Err(Error::BasisMismatch(format!("{} coefficients for a basis of size {}", c.len(), self.size())));
        }
        Ok(self
            .stress_vec
            .iter()
            .map(|row| row.iter().map(|s| s.iter().zip(c).map(|(a, b)| a * b).sum()).collect())
            .collect())
    }

    /// Writes every operator to a CSV file.
    ///
    /// The first line is `# fene-operators dim=<d> k=<k> size=<N>`, followed by
    /// the header `block,i,j,row,col,value`. Blocks are `L` (i = j = 0),
    /// `drift` (matrix), `drift_src` and `stress` (col = 0). Entries are row-major.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "# fene-operators dim={} k={} size={}", self.dim, self.k, self.size())?;
        writeln!(w, "block,i,j,row,col,value")?;
        let n = self.size();
        for r in 0..n {
            for c in 0..n {
                writeln!(w, "L,0,0,{r},{c},{:e}", self.l_mat[(r, c)])?;
            }
        }
        for i in 0..self.dim {
            for j in 0..self.dim {
                for r in 0..n {
                    for c in 0..n {
                        writeln!(w, "drift,{i},{j},{r},{c},{:e}", self.drift_mat[i][j][(r, c)])?;
                    }
                }
                for r in 0..n {
                    writeln!(w, "drift_src,{i},{j},{r},0,{:e}", self.drift_src[i][j][r])?;
                }
                for r in 0..n {
                    writeln!(w, "stress,{i},{j},{r},0,{:e}", self.stress_vec[i][j][r])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn scale_columns(m: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut out = m.clone();
    for (q, wq) in w.iter().enumerate() {
        out.column_mut(q).scale_mut(*wq);
    }
    out
}

/// Assembles `L`, the drift matrices and sources, and the stress vectors by quadrature.
pub fn assemble_operators(b: &RBasis) -> FpOperators {
    let d = b.dim;
    let nq = b.quad.len();
    let wpsi: Vec<f64> = b.psi_weights().iter().copied().collect();
    let whardy: Vec<f64> = b.hardy_weights().iter().copied().collect();
    let v = b.values();
    let vt = v.transpose();

    let mut l_mat = DMatrix::zeros(b.size(), b.size());
    for a in 0..d {
        let g = b.grads(a);
        l_mat -= scale_columns(g, &wpsi) * g.transpose();
    }
    // the weak form is symmetric; remove the rounding asymmetry of the products
    let l_mat = (&l_mat + l_mat.transpose()) * 0.5;

    let mut drift_mat = Vec::with_capacity(d);
    let mut drift_src = Vec::with_capacity(d);
    for i in 0..d {
        let mut mrow = Vec::with_capacity(d);
        let mut srow = Vec::with_capacity(d);
        for j in 0..d {
            let w: Vec<f64> = (0..nq).map(|q| wpsi[q] * b.quad.nodes[q][j]).collect();
            let gw = scale_columns(b.grads(i), &w);
            srow.push(DVector::from_iterator(b.size(), gw.row_iter().map(|r| r.sum())));
            mrow.push(&gw * &vt);
        }
        drift_mat.push(mrow);
        drift_src.push(srow);
    }

    let mut stress_vec = Vec::with_capacity(d);
    for i in 0..d {
        let mut row = Vec::with_capacity(d);
        for j in 0..d {
            // R_i d_j U psi_inf = 2k R_i R_j psi_inf / (1 - |R|^2)
            let w = DVector::from_iterator(
                nq,
                (0..nq).map(|q| whardy[q] * 2.0 * b.k * b.quad.nodes[q][i] * b.quad.nodes[q][j]),
            );
            row.push(v * w);
        }
        stress_vec.push(row);
    }

    FpOperators { id: b.id(), dim: d, k: b.k, l_mat, drift_mat, drift_src, stress_vec }
}

/// Stress field `tau_ij(x) = sum_n S_ij[n] c_n(x)`, component `i * d + j`.
pub fn stress(psi: &PolymerField, ops: &FpOperators) -> Result<SpectralField> {
    if psi.basis != ops.id || psi.size() != ops.size() {
        return Err(Error::BasisMismatch(format!(
            "polymer field in {:?} but operators built for {:?}",
            psi.basis, ops.id
        )));
    }
    let d = ops.dim;
    let grid = psi.field.grid;
    let mut out = SpectralField::zeros(grid, d * d);
    for i in 0..d {
        for j in 0..d {
            let comp = &mut out.comps[i * d + j];
            for (n, s) in ops.stress_vec[i][j].iter().enumerate() {
                if *s == 0.0 {
                    continue;
                }
                for (z, c) in comp.iter_mut().zip(&psi.field.comps[n]) {
                    *z += c * *s;
                }
            }
        }
    }
    Ok(out)
}

/// `S_ij[n] - D_ij[n]` for every `(i, j, n)`, laid out as `[i][j][n]`.
///
/// Integration by parts gives `S_ij[n] - D_ij[n] = delta_ij delta_n0`: the
/// stress functional is the adjoint of the equilibrium drift up to the
/// trace term carried by the mass mode.
pub fn adjointness_defect(ops: &FpOperators) -> Vec<Vec<Vec<f64>>> {
    (0..ops.dim)
        .map(|i| {
            (0..ops.dim).map(|j| (&ops.stress_vec[i][j] - &ops.drift_src[i][j]).iter().copied().collect()).collect()
        })
        .collect()
}

/// `max |S_ij[n] - D_ij[n] - delta_ij delta_n0|`.
pub fn adjointness_residual(ops: &FpOperators) -> f64 {
    let mut r: f64 = 0.0;
    for (i, row) in adjointness_defect(ops).iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            for (n, x) in v.iter().enumerate() {
                let expect = if i == j && n == 0 { 1.0 } else { 0.0 };
                r = r.max((x - expect).abs());
            }
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::super::basis::{build_basis, BasisLabel};
    use super::super::quadrature::BallQuadrature;
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn stiffness_is_symmetric_and_annihilates_constants() {
        let b = build_basis(2, 1.0, 6, 4).unwrap();
        let ops = assemble_operators(&b);
        assert!((&ops.l_mat - ops.l_mat.transpose()).amax() <= 1e-13);
        assert!(ops.l_mat.column(0).amax() <= 1e-13);
        assert!(ops.l_mat.row(0).amax() <= 1e-13);
        for i in 0..2 {
            for j in 0..2 {
                assert!(ops.drift_mat[i][j].row(0).amax() == 0.0);
                assert_eq!(ops.drift_src[i][j][0], 0.0);
            }
        }
    }

    #[test]
    fn stiffness_kernel_is_exactly_the_constant() {
        let b = build_basis(2, 1.0, 5, 3).unwrap();
        let ops = assemble_operators(&b);
        let ev = (-&ops.l_mat).symmetric_eigen().eigenvalues;
        let zeros = ev.iter().filter(|e| e.abs() < 1e-10).count();
        assert_eq!(zeros, 1);
        assert!(ev.min() > -1e-12);
        assert!(ops.poincare_gap() > 0.1);
    }

    #[test]
    fn constant_mode_stress_is_identity() {
        // int R_j d_k U psi_inf = -int R_j d_k psi_inf = delta_jk int psi_inf
        for (dim, k) in [(2, 1.0), (2, 2.0), (3, 1.0)] {
            let b = build_basis(dim, k, 3, 2).unwrap();
            let ops = assemble_operators(&b);
            let mut c = vec![0.0; b.size()];
            c[0] = 1.0;
            let tau = ops.stress_of(&c).unwrap();
            for i in 0..dim {
                for j in 0..dim {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((tau[i][j] - want).abs() <= 1e-8);
                }
            }
        }
    }

    #[test]
    fn pure_l2_mode_has_traceless_symmetric_stress() {
        let b = build_basis(2, 1.0, 6, 4).unwrap();
        let ops = assemble_operators(&b);
        let n = b.index_of(BasisLabel { l: 2, m: 2, j: 0 }).unwrap();
        let mut c = vec![0.0; b.size()];
        c[n] = 1.0;
        let tau = ops.stress_of(&c).unwrap();
        // brute force: the defining integral on a rule with four times the nodes
        let fine = BallQuadrature::new(2, 1.0, 4 * 17, 4 * 32, 30).unwrap();
        let brute = |i: usize, j: usize| {
            fine.nodes.iter().zip(&fine.weights).map(|(x, w)| w * 2.0 * x[i] * x[j] * b.eval(x)[n] / b.z).sum::<f64>()
        };
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(tau[i][j], brute(i, j), epsilon = 1e-11);
            }
        }
        assert!((tau[0][0] + tau[1][1]).abs() <= 1e-12);
        assert!((tau[0][1] - tau[1][0]).abs() <= 1e-12);
        assert!(tau[0][0].abs() > 1e-3);
    }

    #[test]
    fn adjointness_holds_for_several_k() {
        for k in [1.0, 2.0] {
            let b = build_basis(2, k, 4, 3).unwrap();
            let ops = assemble_operators(&b);
            assert!(adjointness_residual(&ops) <= 1e-10);
        }
        let b = build_basis(3, 1.0, 4, 2).unwrap();
        assert!(adjointness_residual(&assemble_operators(&b)) <= 1e-10);
    }

    #[test]
    fn constant_only_basis_leaves_unit_diagonal_defect() {
        let b = build_basis(2, 1.0, 1, 0).unwrap();
        assert_eq!(b.size(), 1);
        let ops = assemble_operators(&b);
        let defect = adjointness_defect(&ops);
        assert_relative_eq!(defect[0][0][0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(defect[1][1][0], 1.0, epsilon = 1e-12);
        assert!(defect[0][1][0].abs() < 1e-14);
    }

    #[test]
    fn gap_stabilizes_under_radial_refinement() {
        let gaps: Vec<f64> =
            (3..=7).map(|r| assemble_operators(&build_basis(2, 1.0, r, 4).unwrap()).poincare_gap()).collect();
        for w in gaps.windows(2) {
            assert!(w[1] > 0.0);
            assert!((w[1] - w[0]).abs() <= 0.05 * w[0], "gaps {gaps:?}");
        }
    }

    #[test]
    fn hardy_integrals_are_controlled_by_the_energy() {
        let b = build_basis(2, 1.0, 6, 4).unwrap();
        let ops = assemble_operators(&b);
        let h = b.hardy_integrals();
        let ratios: Vec<f64> = (0..b.size()).map(|n| h[n] / (1.0 + (-ops.l_mat[(n, n)]).sqrt())).collect();
        let c = ratios.iter().cloned().fold(0.0, f64::max);
        assert!(h.iter().all(|x| x.is_finite()));
        assert!(c < 10.0, "calibration constant {c}");
    }

    #[test]
    fn csv_export_has_header_and_all_entries() {
        let b = build_basis(2, 1.0, 2, 1).unwrap();
        let ops = assemble_operators(&b);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ops.csv");
        ops.write_csv(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let n = ops.size();
        assert!(text.starts_with("# fene-operators dim=2"));
        assert_eq!(text.lines().count(), 2 + n * n + 4 * (n * n + 2 * n));
    }
}
