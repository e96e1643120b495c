//! Gauss-Jacobi rules and product quadrature on the unit ball.
//!
//! The ball rule integrates `g(R) (1 - |R|^2)^(k-1)` exactly whenever `g` is a
//! polynomial of total degree up to the requested order. In the radial
//! variable `s = |R|^2` this is a Gauss-Jacobi rule; angles use the
//! trapezoid rule (disk) or Gauss-Legendre times trapezoid (sphere).

use std::f64::consts::PI;

use nalgebra::DMatrix;
use statrs::function::beta::beta;

use crate::error::{Error, Result};

/// Gauss-Jacobi nodes and weights for `(1 - x)^alpha (1 + x)^beta` on `[-1, 1]`,
/// by the Golub-Welsch eigenvalue method.
pub fn gauss_jacobi(n: usize, alpha: f64, beta_: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 || !(alpha > -1.0) || !(beta_ > -1.0) {
        return Err(Error::QuadratureOrderTooLow(format!(
            "Gauss-Jacobi needs n >= 1, alpha, beta > -1 (got n={n}, alpha={alpha}, beta={beta_})"
        )));
    }
    let ab = alpha + beta_;
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let nf = i as f64;
        let diag = if i == 0 {
            (beta_ - alpha) / (ab + 2.0)
        } else {
            (beta_ * beta_ - alpha * alpha) / ((2.0 * nf + ab) * (2.0 * nf + ab + 2.0))
        };
        jac[(i, i)] = diag;
        if i + 1 < n {
            let m = nf + 1.0;
            let s = 2.0 * m + ab;
            let num = 4.0 * m * (m + alpha) * (m + beta_) * (m + ab);
            let den = s * s * (s + 1.0) * (s - 1.0);
            let off = (num / den).sqrt();
            jac[(i, i + 1)] = off;
            jac[(i + 1, i)] = off;
        }
    }
    let mu0 = 2f64.powf(ab + 1.0) * beta(alpha + 1.0, beta_ + 1.0);
    let eig = jac.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pairs.into_iter().unzip())
}

/// Product quadrature on the unit ball `B(0, 1)` of dimension 2 or 3.
#[derive(Debug, Clone)]
pub struct BallQuadrature {
    pub dim: usize,
    /// Exponent `k` of the equilibrium `(1 - |R|^2)^k`; the rule weight is `(1 - |R|^2)^(k-1)`.
    pub k: f64,
    /// Quadrature points (unused trailing coordinates are zero).
    pub nodes: Vec<[f64; 3]>,
    /// `|R|^2` at each node.
    pub s: Vec<f64>,
    /// `sum_q weights[q] g(R_q) ~ int_B g(R) (1 - |R|^2)^(k-1) dR`.
    pub weights: Vec<f64>,
    /// Polynomial degree for which exactness was verified.
    pub degree: usize,
}

/// Area of the unit sphere `S^(d-1)`.
pub fn sphere_area(dim: usize) -> f64 {
    match dim {
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => panic!("unsupported dimension {dim}"),
    }
}

impl BallQuadrature {
    /// Rule with `n_radial` Gauss-Jacobi points in `s` and `n_angular` points
    /// per angular direction, checked for exactness up to total degree `degree`.
    pub fn new(dim: usize, k: f64, n_radial: usize, n_angular: usize, degree: usize) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::BadParameter(format!("ball dimension {dim}")));
        }
        let half = 0.5 * (dim as f64 - 2.0);
        let (x, w) = gauss_jacobi(n_radial, k - 1.0, half)?;
        // map x in [-1,1] to s in [0,1]: (1-s)^(k-1) s^half ds = 2^-(k+half) (1-x)^(k-1) (1+x)^half dx
        let jac = 2f64.powf(-(k + half));
        let radial: Vec<(f64, f64)> = x.iter().zip(&w).map(|(&xi, &wi)| (0.5 * (1.0 + xi), wi * jac)).collect();
        let mut nodes = Vec::new();
        let mut s = Vec::new();
        let mut weights = Vec::new();
        match dim {
            2 => {
                let h = 2.0 * PI / n_angular as f64;
                for &(sq, wr) in &radial {
                    let r = sq.sqrt();
                    for a in 0..n_angular {
                        let th = h * a as f64;
                        nodes.push([r * th.cos(), r * th.sin(), 0.0]);
                        s.push(sq);
                        // dR = (1/2) ds dtheta
                        weights.push(0.5 * wr * h);
                    }
                }
            }
            _ => {
                let (ct, wt) = gauss_jacobi(n_angular.div_ceil(2).max(1), 0.0, 0.0)?;
                let h = 2.0 * PI / n_angular as f64;
                for &(sq, wr) in &radial {
                    let r = sq.sqrt();
                    for (&c, &wc) in ct.iter().zip(&wt) {
                        let st = (1.0 - c * c).max(0.0).sqrt();
                        for a in 0..n_angular {
                            let ph = h * a as f64;
                            nodes.push([r * st * ph.cos(), r * st * ph.sin(), r * c]);
                            s.push(sq);
                            // dR = (1/2) s^(1/2) ds dOmega, s^(1/2) is in the Jacobi weight
                            weights.push(0.5 * wr * wc * h);
                        }
                    }
                }
            }
        }
        let q = Self { dim, k, nodes, s, weights, degree };
        q.check_exactness(degree)?;
        Ok(q)
    }

    /// Rule sized for exactness up to total polynomial degree `degree`.
    pub fn for_degree(dim: usize, k: f64, degree: usize) -> Result<Self> {
        let n_radial = degree / 2 + 2;
        let n_angular = degree + 2;
        Self::new(dim, k, n_radial, n_angular, degree)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(&[f64; 3]) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(x)).sum()
    }

    /// Compares radial and axial moments against their Beta-function values.
    fn check_exactness(&self, degree: usize) -> Result<()> {
        let k = self.k;
        let d = self.dim as f64;
        let area = sphere_area(self.dim);
        for j in 0..=degree / 2 {
            let jf = j as f64;
            let got = self.integrate(|x| (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).powi(j as i32));
            let want = 0.5 * area * beta(jf + 0.5 * d, k);
            check_probe(got, want, &format!("|R|^{}", 2 * j))?;
            // axial moment int x_last^(2j) (1-|R|^2)^(k-1)
            let axis = self.dim - 1;
            let got = self.integrate(|x| x[axis].powi(2 * j as i32));
            let ang = if self.dim == 2 {
                // int cos^(2j) = 2 pi (2j-1)!! / (2j)!!
                2.0 * PI * double_factorial_ratio(j)
            } else {
                4.0 * PI / (2.0 * jf + 1.0)
            };
            let want = ang * 0.5 * beta(jf + 0.5 * d, k);
            check_probe(got, want, &format!("x_{axis}^{}", 2 * j))?;
        }
        // odd angular content must vanish
        for p in 1..=degree {
            let got = self.integrate(|x| x[0].powi(p as i32) * if p % 2 == 1 { 1.0 } else { x[1] });
            if got.abs() > 1e-13 {
                return Err(Error::QuadratureOrderTooLow(format!("odd moment of degree {p} integrates to {got:e}")));
            }
        }
        Ok(())
    }
}

fn double_factorial_ratio(j: usize) -> f64 {
    (1..=j).fold(1.0, |acc, i| acc * (2 * i - 1) as f64 / (2 * i) as f64)
}

fn check_probe(got: f64, want: f64, what: &str) -> Result<()> {
    if (got - want).abs() > 1e-12 * want.abs().max(1e-300) {
        return Err(Error::QuadratureOrderTooLow(format!("probe {what}: quadrature {got:e} vs exact {want:e}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_weights_sum_to_two() {
        let (x, w) = gauss_jacobi(7, 0.0, 0.0).unwrap();
        assert_relative_eq!(w.iter().sum::<f64>(), 2.0, max_relative = 1e-14);
        assert_relative_eq!(x[3], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn jacobi_rule_is_exact_for_polynomials() {
        // int_{-1}^{1} (1-x)^a (1+x)^b x^2 dx vs the Beta-function value
        let (a, b) = (0.7, 0.5);
        let (x, w) = gauss_jacobi(5, a, b).unwrap();
        let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        // x^2 = (1+x)^2 - 2(1+x) + 1
        let m = |p: f64| 2f64.powf(a + b + p + 1.0) * beta(a + 1.0, b + p + 1.0);
        let want = m(2.0) - 2.0 * m(1.0) + m(0.0);
        assert_relative_eq!(got, want, max_relative = 1e-12);
    }

    #[test]
    fn disk_and_ball_rules_pass_probes() {
        for k in [0.5, 1.0, 2.0, 3.5] {
            BallQuadrature::for_degree(2, k, 20).unwrap();
            BallQuadrature::for_degree(3, k, 12).unwrap();
        }
    }

    #[test]
    fn too_few_nodes_is_reported() {
        let err = BallQuadrature::new(2, 1.0, 2, 30, 12).unwrap_err();
        assert!(matches!(err, Error::QuadratureOrderTooLow(_)));
        let err = BallQuadrature::new(2, 1.0, 12, 4, 12).unwrap_err();
        assert!(matches!(err, Error::QuadratureOrderTooLow(_)));
    }

    #[test]
    fn second_moment_of_equilibrium_k1_disk() {
        // int |R|^2 psi_inf dR with psi_inf ~ (1 - s): (1/2 - 1/3) / (1/2) = 1/3
        let q = BallQuadrature::for_degree(2, 1.0, 8).unwrap();
        let z = q.integrate(|x| 1.0 - (x[0] * x[0] + x[1] * x[1]));
        let m2 = q.integrate(|x| {
            let s = x[0] * x[0] + x[1] * x[1];
            s * (1.0 - s)
        });
        assert_relative_eq!(m2 / z, 1.0 / 3.0, max_relative = 1e-13);
    }
}
