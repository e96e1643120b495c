//! Weighted orthonormal polynomial basis on the configuration ball.
//!
//! Basis functions represent `phi = psi / psi_inf` and are orthonormal in
//! `int_B phi_m phi_n psi_inf dR`, where `psi_inf = (1 - |R|^2)^k / Z`.

use nalgebra::{DMatrix, DVector};

use super::poly::{harmonics, Poly};
use super::quadrature::BallQuadrature;
use crate::error::{Error, Result};

/// Quantum numbers of a basis function: harmonic degree `l`, azimuthal
/// index `m` and radial index `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisLabel {
    pub l: usize,
    pub m: i32,
    pub j: usize,
}

impl BasisLabel {
    /// Total polynomial degree in `R`.
    pub fn degree(&self) -> usize {
        self.l + 2 * self.j
    }
}

/// Identifies the basis a coefficient array is expressed in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisId {
    pub dim: usize,
    pub k: f64,
    pub rad_order: usize,
    pub ang_order: usize,
}

/// Jacobi polynomial `P_n^(a, b)(x)` by the three-term recurrence.
pub fn jacobi(n: usize, a: f64, b: f64, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut p0 = 1.0;
    let mut p1 = (a + 1.0) + 0.5 * (a + b + 2.0) * (x - 1.0);
    for i in 2..=n {
        let nf = i as f64;
        let c = 2.0 * nf + a + b;
        let a1 = 2.0 * nf * (nf + a + b) * (c - 2.0);
        let a2 = (c - 1.0) * (c * (c - 2.0) * x + a * a - b * b);
        let a3 = 2.0 * (nf + a - 1.0) * (nf + b - 1.0) * c;
        let p2 = (a2 * p1 - a3 * p0) / a1;
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Derivative of [`jacobi`] with respect to `x`.
pub fn jacobi_deriv(n: usize, a: f64, b: f64, x: f64) -> f64 {
    if n == 0 {
        0.0
    } else {
        0.5 * (n as f64 + a + b + 1.0) * jacobi(n - 1, a + 1.0, b + 1.0, x)
    }
}

#[derive(Debug, Clone)]
struct RawFunction {
    harmonic: Poly,
    grad: [Poly; 3],
    j: usize,
    beta: f64,
}

/// Orthonormal basis with its quadrature and tabulated values.
#[derive(Debug, Clone)]
pub struct RBasis {
    pub dim: usize,
    pub k: f64,
    pub rad_order: usize,
    pub ang_order: usize,
    pub labels: Vec<BasisLabel>,
    pub quad: BallQuadrature,
    /// Normalization `Z = int_B (1 - |R|^2)^k dR`.
    pub z: f64,
    raw: Vec<RawFunction>,
    /// `phi = transform * raw`, lower triangular.
    transform: DMatrix<f64>,
    values: DMatrix<f64>,
    grads: Vec<DMatrix<f64>>,
}

/// Builds the basis with `rad_order` radial functions per harmonic and
/// harmonics of degree `0..=ang_order`.
pub fn build_basis(dim: usize, k: f64, rad_order: usize, ang_order: usize) -> Result<RBasis> {
    if dim != 2 && dim != 3 {
        return Err(Error::BadParameter(format!("basis dimension {dim} must be 2 or 3")));
    }
    if !(k > 0.0) {
        return Err(Error::BadParameter(format!("k = {k} must be > 0")));
    }
    if rad_order < 1 {
        return Err(Error::BadParameter("rad_order must be >= 1".into()));
    }
    let max_degree = ang_order + 2 * (rad_order - 1);
    let quad = BallQuadrature::for_degree(dim, k, 2 * max_degree + 2)?;
    build_basis_with(dim, k, rad_order, ang_order, quad)
}

/// Same as [`build_basis`] on a caller-supplied quadrature rule.
pub fn build_basis_with(
    dim: usize,
    k: f64,
    rad_order: usize,
    ang_order: usize,
    quad: BallQuadrature,
) -> Result<RBasis> {
    let max_degree = ang_order + 2 * (rad_order.max(1) - 1);
    if quad.degree < 2 * max_degree + 2 {
        return Err(Error::QuadratureOrderTooLow(format!(
            "rule exact to degree {} but the basis needs {}",
            quad.degree,
            2 * max_degree + 2
        )));
    }
    let half = 0.5 * (dim as f64 - 2.0);
    let mut labels = Vec::new();
    let mut raw = Vec::new();
    for h in harmonics(dim, ang_order) {
        let grad = [h.poly.deriv(0), h.poly.deriv(1), h.poly.deriv(2)];
        for j in 0..rad_order {
            labels.push(BasisLabel { l: h.l, m: h.m, j });
            raw.push(RawFunction { harmonic: h.poly.clone(), grad: grad.clone(), j, beta: h.l as f64 + half });
        }
    }
    let z = quad.integrate(|x| 1.0 - (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]));
    let n = raw.len();
    let nq = quad.len();
    let mut values = DMatrix::zeros(n, nq);
    let mut grads = vec![DMatrix::zeros(n, nq); dim];
    for (q, x) in quad.nodes.iter().enumerate() {
        let (v, g) = raw_eval(&raw, k, x);
        for i in 0..n {
            values[(i, q)] = v[i];
            for a in 0..dim {
                grads[a][(i, q)] = g[i][a];
            }
        }
    }
    let mut basis = RBasis {
        dim,
        k,
        rad_order,
        ang_order,
        labels,
        quad,
        z,
        raw,
        transform: DMatrix::identity(n, n),
        values,
        grads,
    };
    // two Cholesky passes remove the rounding left by the first one
    for _ in 0..2 {
        let gram = basis.gram();
        let chol = gram
            .cholesky()
            .ok_or_else(|| Error::QuadratureOrderTooLow("Gram matrix is not positive definite".into()))?;
        let l = chol.l();
        let linv = l
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .ok_or_else(|| Error::QuadratureOrderTooLow("singular Gram factor".into()))?;
        basis.transform = &linv * &basis.transform;
        basis.values = &linv * &basis.values;
        for g in basis.grads.iter_mut() {
            *g = &linv * &*g;
        }
    }
    Ok(basis)
}

fn raw_eval(raw: &[RawFunction], k: f64, x: &[f64; 3]) -> (Vec<f64>, Vec<[f64; 3]>) {
    let s = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    let t = 2.0 * s - 1.0;
    let mut v = Vec::with_capacity(raw.len());
    let mut g = Vec::with_capacity(raw.len());
    for f in raw {
        let h = f.harmonic.eval(x);
        let p = jacobi(f.j, k, f.beta, t);
        let dp = jacobi_deriv(f.j, k, f.beta, t);
        v.push(h * p);
        let mut gr = [0.0; 3];
        for a in 0..3 {
            // d t / d R_a = 4 R_a
            gr[a] = f.grad[a].eval(x) * p + h * dp * 4.0 * x[a];
        }
        g.push(gr);
    }
    (v, g)
}

impl RBasis {
    pub fn id(&self) -> BasisId {
        BasisId { dim: self.dim, k: self.k, rad_order: self.rad_order, ang_order: self.ang_order }
    }

    /// Number of basis functions `N_R`.
    pub fn size(&self) -> usize {
        self.labels.len()
    }

    /// Largest total polynomial degree in the basis.
    pub fn max_degree(&self) -> usize {
        self.labels.iter().map(BasisLabel::degree).max().unwrap_or(0)
    }

    /// Basis values at the quadrature nodes, `N_R x Q`.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Component `a` of the basis gradients at the quadrature nodes.
    pub fn grads(&self, a: usize) -> &DMatrix<f64> {
        &self.grads[a]
    }

    /// Node weights of `int_B f psi_inf dR`.
    pub fn psi_weights(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.quad.len(),
            self.quad.weights.iter().zip(&self.quad.s).map(|(w, s)| w * (1.0 - s) / self.z),
        )
    }

    /// Node weights of `int_B f psi_inf / (1 - |R|^2) dR`.
    pub fn hardy_weights(&self) -> DVector<f64> {
        DVector::from_iterator(self.quad.len(), self.quad.weights.iter().map(|w| w / self.z))
    }

    /// `psi_inf(R)`.
    pub fn psi_inf(&self, x: &[f64; 3]) -> f64 {
        let s = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        (1.0 - s).max(0.0).powf(self.k) / self.z
    }

    /// Weighted Gram matrix `int_B phi_m phi_n psi_inf dR` of the tabulated functions.
    pub fn gram(&self) -> DMatrix<f64> {
        let w = self.psi_weights();
        let mut vw = self.values.clone();
        for (q, wq) in w.iter().enumerate() {
            vw.column_mut(q).scale_mut(*wq);
        }
        &vw * self.values.transpose()
    }

    /// `max |Gram - I|`.
    pub fn gram_defect(&self) -> f64 {
        let n = self.size();
        (self.gram() - DMatrix::<f64>::identity(n, n)).amax()
    }

    /// All basis functions at an arbitrary point of the ball.
    pub fn eval(&self, x: &[f64; 3]) -> DVector<f64> {
        let (v, _) = raw_eval(&self.raw, self.k, x);
        &self.transform * DVector::from_vec(v)
    }

    /// Gradients of all basis functions at `x`, one column per direction.
    pub fn eval_grad(&self, x: &[f64; 3]) -> DMatrix<f64> {
        let (_, g) = raw_eval(&self.raw, self.k, x);
        let n = self.size();
        let raw = DMatrix::from_fn(n, self.dim, |i, a| g[i][a]);
        &self.transform * raw
    }

    /// Index of the basis function with the given label.
    pub fn index_of(&self, label: BasisLabel) -> Option<usize> {
        self.labels.iter().position(|l| *l == label)
    }

    /// `int_B |phi_n psi_inf| / (1 - |R|) dR` for every basis function.
    pub fn hardy_integrals(&self) -> Vec<f64> {
        let w = self.hardy_weights();
        (0..self.size())
            .map(|n| {
                (0..self.quad.len())
                    .map(|q| {
                        // 1 / (1 - |R|) = (1 + |R|) / (1 - |R|^2)
                        let r = self.quad.s[q].sqrt();
                        w[q] * self.values[(n, q)].abs() * (1.0 + r)
                    })
                    .sum()
            })
            .collect()
    }
}
