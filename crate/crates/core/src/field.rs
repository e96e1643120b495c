//! Periodic torus `[-pi, pi]^d`: grids, FFTs, spectral fields and the
//! Fourier multipliers used throughout the solver (derivatives, Leray
//! projection, Sobolev norms, two-thirds dealiasing).
//!
//! Fourier coefficients use the convention `f(x) = sum_xi f_hat(xi) e^{i xi.x}`,
//! so `||f||_{L^2}^2 = (2 pi)^d sum |f_hat|^2`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Shape of a `dim`-dimensional grid with `n` points per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    pub dim: usize,
    pub n: usize,
}

impl Grid {
    pub fn new(dim: usize, n: usize) -> Self {
        Self { dim, n }
    }

    /// Number of grid points (equal to the number of Fourier modes).
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Signed wavenumber stored at FFT index `i`.
    pub fn wavenumber(&self, i: usize) -> i64 {
        if i < self.n.div_ceil(2) {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Flat index of the signed wave vector `xi` (first `dim` entries used).
    pub fn index_of(&self, xi: &[i64]) -> usize {
        let n = self.n as i64;
        xi[..self.dim].iter().fold(0usize, |acc, &k| acc * self.n + k.rem_euclid(n) as usize)
    }

    /// Signed wave vector of flat index `idx`, padded with zeros to length 3.
    pub fn wavevector(&self, idx: usize) -> [i64; 3] {
        let mut out = [0i64; 3];
        let mut rem = idx;
        for a in (0..self.dim).rev() {
            out[a] = self.wavenumber(rem % self.n);
            rem /= self.n;
        }
        out
    }

    /// Physical coordinate of grid point `idx` along every axis, in `[-pi, pi)`.
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let h = 2.0 * PI / self.n as f64;
        let mut out = [0.0; 3];
        let mut rem = idx;
        for a in (0..self.dim).rev() {
            out[a] = -PI + h * (rem % self.n) as f64;
            rem /= self.n;
        }
        out
    }
}

/// Scalar or vector field stored by its Fourier coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub grid: Grid,
    /// One coefficient array per component, indexed by flat FFT index.
    pub comps: Vec<Vec<Complex64>>,
}

impl SpectralField {
    pub fn zeros(grid: Grid, ncomp: usize) -> Self {
        Self { grid, comps: vec![vec![ZERO; grid.len()]; ncomp] }
    }

    pub fn ncomp(&self) -> usize {
        self.comps.len()
    }

    pub fn scale(&mut self, a: f64) {
        for c in &mut self.comps {
            c.iter_mut().for_each(|z| *z *= a);
        }
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &SpectralField) {
        debug_assert_eq!(self.ncomp(), other.ncomp());
        for (c, o) in self.comps.iter_mut().zip(&other.comps) {
            c.iter_mut().zip(o).for_each(|(z, w)| *z += w * a);
        }
    }

    pub fn sub(&self, other: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Largest coefficient modulus over all components.
    pub fn max_abs(&self) -> f64 {
        self.comps.iter().flat_map(|c| c.iter()).fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn component(&self, i: usize) -> SpectralField {
        SpectralField { grid: self.grid, comps: vec![self.comps[i].clone()] }
    }
}

/// FFT plans and wave-vector tables for one grid.
#[derive(Clone)]
pub struct Torus {
    grid: Grid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    xi: Vec<[f64; 3]>,
    xi2: Vec<f64>,
    kept: Vec<bool>,
    neg: Vec<usize>,
    kept_indices: Vec<usize>,
    canonical: Vec<usize>,
}

impl std::fmt::Debug for Torus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Torus").field("grid", &self.grid).finish()
    }
}

impl Torus {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(grid.n);
        let inv = planner.plan_fft_inverse(grid.n);
        let len = grid.len();
        let n = grid.n as i64;
        let mut xi = Vec::with_capacity(len);
        let mut xi2 = Vec::with_capacity(len);
        let mut kept = Vec::with_capacity(len);
        let mut neg = Vec::with_capacity(len);
        for idx in 0..len {
            let w = grid.wavevector(idx);
            xi.push([w[0] as f64, w[1] as f64, w[2] as f64]);
            xi2.push(w.iter().map(|v| (v * v) as f64).sum());
            // two-thirds rule: keep |xi_i| < n/3 on every axis
            kept.push(w[..grid.dim].iter().all(|&v| 3 * v.abs() < n));
            let m = [-w[0], -w[1], -w[2]];
            neg.push(grid.index_of(&m));
        }
        let kept_indices: Vec<usize> = (0..len).filter(|&i| kept[i]).collect();
        let canonical = kept_indices
            .iter()
            .copied()
            .filter(|&i| {
                let w = grid.wavevector(i);
                let m = [-w[0], -w[1], -w[2]];
                w >= m
            })
            .collect();
        Self { grid, fwd, inv, xi, xi2, kept, neg, kept_indices, canonical }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Real wave vector of flat index `idx` (padded to length 3).
    pub fn xi(&self, idx: usize) -> [f64; 3] {
        self.xi[idx]
    }

    pub fn xi2(&self, idx: usize) -> f64 {
        self.xi2[idx]
    }

    /// Whether mode `idx` survives two-thirds dealiasing.
    pub fn is_kept(&self, idx: usize) -> bool {
        self.kept[idx]
    }

    /// Flat index of `-xi`.
    pub fn neg_index(&self, idx: usize) -> usize {
        self.neg[idx]
    }

    pub fn kept_indices(&self) -> &[usize] {
        &self.kept_indices
    }

    /// One representative of every `{xi, -xi}` pair among the kept modes.
    pub fn canonical_indices(&self) -> &[usize] {
        &self.canonical
    }

    /// Lebesgue measure of the torus, `(2 pi)^d`.
    pub fn volume(&self) -> f64 {
        (2.0 * PI).powi(self.grid.dim as i32)
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.grid.n;
        let d = self.grid.dim;
        let fft = if inverse { &self.inv } else { &self.fwd };
        let mut scratch = vec![ZERO; fft.get_inplace_scratch_len()];
        let total = data.len();
        let mut lines = vec![ZERO; total];
        for axis in 0..d {
            let stride = n.pow((d - 1 - axis) as u32);
            if stride == 1 {
                fft.process_with_scratch(data, &mut scratch);
                continue;
            }
            let block = stride * n;
            let mut li = 0;
            for outer in 0..total / block {
                for inner in 0..stride {
                    let base = outer * block + inner;
                    for j in 0..n {
                        lines[li * n + j] = data[base + j * stride];
                    }
                    li += 1;
                }
            }
            fft.process_with_scratch(&mut lines, &mut scratch);
            li = 0;
            for outer in 0..total / block {
                for inner in 0..stride {
                    let base = outer * block + inner;
                    for j in 0..n {
                        data[base + j * stride] = lines[li * n + j];
                    }
                    li += 1;
                }
            }
        }
    }

    /// Fourier coefficients of a real grid function.
    pub fn forward(&self, phys: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = phys.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, false);
        let s = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|z| *z *= s);
        data
    }

    /// Grid values of a coefficient array (real part of the synthesis).
    pub fn inverse(&self, spec: &[Complex64]) -> Vec<f64> {
        let mut data = spec.to_vec();
        self.transform(&mut data, true);
        data.iter().map(|z| z.re).collect()
    }

    /// Forward transform followed by two-thirds dealiasing.
    pub fn forward_dealiased(&self, phys: &[f64]) -> Vec<Complex64> {
        let mut c = self.forward(phys);
        self.dealias_slice(&mut c);
        c
    }

    pub fn to_spectral(&self, phys: &[Vec<f64>]) -> SpectralField {
        SpectralField { grid: self.grid, comps: phys.par_iter().map(|p| self.forward(p)).collect() }
    }

    pub fn to_physical(&self, f: &SpectralField) -> Vec<Vec<f64>> {
        f.comps.par_iter().map(|c| self.inverse(c)).collect()
    }

    pub fn dealias_slice(&self, c: &mut [Complex64]) {
        for (z, &k) in c.iter_mut().zip(&self.kept) {
            if !k {
                *z = ZERO;
            }
        }
    }

    pub fn dealias(&self, f: &mut SpectralField) {
        for c in &mut f.comps {
            self.dealias_slice(c);
        }
    }

    /// Replaces `c(xi)` by `(c(xi) + conj c(-xi)) / 2`, the coefficients of the real part.
    pub fn hermitian_symmetrize_slice(&self, c: &mut [Complex64]) {
        for i in 0..c.len() {
            let j = self.neg[i];
            if j < i {
                continue;
            }
            let avg = (c[i] + c[j].conj()) * 0.5;
            c[i] = avg;
            c[j] = avg.conj();
        }
    }

    pub fn hermitian_symmetrize(&self, f: &mut SpectralField) {
        for c in &mut f.comps {
            self.hermitian_symmetrize_slice(c);
        }
    }

    /// Largest `|c(xi) - conj c(-xi)|`.
    pub fn hermitian_defect(&self, f: &SpectralField) -> f64 {
        f.comps
            .iter()
            .flat_map(|c| (0..c.len()).map(move |i| (i, c)))
            .map(|(i, c)| (c[i] - c[self.neg[i]].conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Spectral partial derivative along `axis`.
    pub fn derivative(&self, c: &[Complex64], axis: usize) -> Vec<Complex64> {
        c.iter().zip(&self.xi).map(|(z, xi)| z * Complex64::new(0.0, xi[axis])).collect()
    }

    pub fn gradient(&self, scalar: &[Complex64]) -> SpectralField {
        SpectralField { grid: self.grid, comps: (0..self.dim()).map(|a| self.derivative(scalar, a)).collect() }
    }

    pub fn divergence(&self, v: &SpectralField) -> Vec<Complex64> {
        let mut out = vec![ZERO; self.len()];
        for (a, c) in v.comps.iter().enumerate() {
            for (i, z) in c.iter().enumerate() {
                out[i] += z * Complex64::new(0.0, self.xi[i][a]);
            }
        }
        out
    }

    pub fn laplacian(&self, c: &[Complex64]) -> Vec<Complex64> {
        c.iter().zip(&self.xi2).map(|(z, k2)| -z * *k2).collect()
    }

    /// Leray decomposition `f = P f + Q f`; the zero mode belongs to `P f`.
    pub fn leray(&self, f: &SpectralField) -> (SpectralField, SpectralField) {
        let d = self.dim();
        assert_eq!(f.ncomp(), d, "Leray projection needs a vector field");
        let mut p = f.clone();
        let mut q = SpectralField::zeros(self.grid, d);
        for i in 0..self.len() {
            let k2 = self.xi2[i];
            if k2 == 0.0 {
                continue;
            }
            let xi = self.xi[i];
            let mut dot = ZERO;
            for a in 0..d {
                dot += f.comps[a][i] * xi[a];
            }
            for a in 0..d {
                let qa = dot * (xi[a] / k2);
                q.comps[a][i] = qa;
                p.comps[a][i] = f.comps[a][i] - qa;
            }
        }
        (p, q)
    }

    /// `P f` only.
    pub fn project(&self, f: &SpectralField) -> SpectralField {
        self.leray(f).0
    }

    /// `sum_xi (1 + |xi|^2)^m |xi|^(2 g) |f_hat(xi)|^2 (2 pi)^d` summed over components.
    fn weighted_sq(&self, f: &SpectralField, m: i32, grad: bool) -> f64 {
        let mut acc = 0.0;
        for c in &f.comps {
            for (i, z) in c.iter().enumerate() {
                let k2 = self.xi2[i];
                let mut w = (1.0 + k2).powi(m);
                if grad {
                    w *= k2;
                }
                acc += w * z.norm_sqr();
            }
        }
        acc * self.volume()
    }

    /// `||f||_{H^m}` through the multiplier `(1 + |xi|^2)^m`.
    pub fn sobolev_norm(&self, f: &SpectralField, m: i32) -> f64 {
        self.weighted_sq(f, m, false).sqrt()
    }

    /// `||grad f||_{H^m}`.
    pub fn sobolev_norm_grad(&self, f: &SpectralField, m: i32) -> f64 {
        self.weighted_sq(f, m, true).sqrt()
    }

    pub fn l2_norm(&self, f: &SpectralField) -> f64 {
        self.sobolev_norm(f, 0)
    }

    /// Real inner product `int f . g dx` of two real fields.
    pub fn inner(&self, f: &SpectralField, g: &SpectralField) -> f64 {
        let mut acc = 0.0;
        for (a, b) in f.comps.iter().zip(&g.comps) {
            for (x, y) in a.iter().zip(b) {
                acc += (x * y.conj()).re;
            }
        }
        acc * self.volume()
    }

    /// Spatial mean of component `comp`.
    pub fn mean(&self, f: &SpectralField, comp: usize) -> f64 {
        f.comps[comp][0].re
    }

    /// Dealiased spectral coefficients of the pointwise product of two grid functions.
    pub fn product(&self, a: &[f64], b: &[f64]) -> Vec<Complex64> {
        let prod: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
        self.forward_dealiased(&prod)
    }
}
