//! Simulator states, the momentum, and synthesis of small initial data.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::field::{SpectralField, Torus};
use crate::model::Model;
use crate::polymer::{BasisId, FpOperators};

/// Coefficients of `phi = psi / psi_inf` in the configuration basis, one
/// spectral scalar field per basis function.
#[derive(Debug, Clone, PartialEq)]
pub struct PolymerField {
    pub basis: BasisId,
    /// Component `n` holds the Fourier coefficients of `c_n(x)`.
    pub field: SpectralField,
}

impl PolymerField {
    pub fn zeros(model: &Model) -> Self {
        Self { basis: model.basis.id(), field: SpectralField::zeros(model.torus.grid(), model.n_basis()) }
    }

    pub fn size(&self) -> usize {
        self.field.ncomp()
    }

    /// `||psi||_{m, L^2}`: the `H^m` norm in `x` of the weighted `L^2` norm in `R`.
    pub fn norm_l2(&self, torus: &Torus, m: i32) -> f64 {
        torus.sobolev_norm(&self.field, m)
    }

    /// `||psi||_{m, H^1}`: the `H^m` norm in `x` of `(int psi_inf |grad_R phi|^2)^(1/2)`.
    pub fn norm_h1(&self, torus: &Torus, ops: &FpOperators, m: i32) -> f64 {
        let n = self.size();
        let mut acc = 0.0;
        for idx in 0..torus.len() {
            let w = (1.0 + torus.xi2(idx)).powi(m);
            let mut q = 0.0;
            for a in 0..n {
                let ca = self.field.comps[a][idx];
                if ca == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for b in 0..n {
                    q -= ops.l_mat[(a, b)] * (ca.conj() * self.field.comps[b][idx]).re;
                }
            }
            acc += w * q;
        }
        (acc.max(0.0) * torus.volume()).sqrt()
    }
}

/// Perturbation state `(eta, u, psi)` of the compressible system at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledState {
    pub t: f64,
    pub eta: SpectralField,
    pub u: SpectralField,
    pub psi: PolymerField,
}

/// State `(v, phi)` of the incompressible limit system.
#[derive(Debug, Clone, PartialEq)]
pub struct IncompressibleState {
    pub t: f64,
    pub v: SpectralField,
    pub phi: PolymerField,
}

impl CoupledState {
    pub fn zeros(model: &Model) -> Self {
        let g = model.torus.grid();
        Self {
            t: 0.0,
            eta: SpectralField::zeros(g, 1),
            u: SpectralField::zeros(g, model.dim()),
            psi: PolymerField::zeros(model),
        }
    }

    /// `self += a * other` on all fields (time untouched).
    pub fn axpy(&mut self, a: f64, other: &Self) {
        self.eta.axpy(a, &other.eta);
        self.u.axpy(a, &other.u);
        self.psi.field.axpy(a, &other.psi.field);
    }

    pub fn scale(&mut self, a: f64) {
        self.eta.scale(a);
        self.u.scale(a);
        self.psi.field.scale(a);
    }

    /// `1/2 (||eta||^2 + ||u||^2 + ||psi||_{L^2}^2)`.
    pub fn quadratic_energy(&self, torus: &Torus) -> f64 {
        0.5 * (torus.l2_norm(&self.eta).powi(2) + torus.l2_norm(&self.u).powi(2) + self.psi.norm_l2(torus, 0).powi(2))
    }

    /// Smallest value of `1 + eta` on the physical grid.
    pub fn min_density(&self, torus: &Torus) -> f64 {
        torus.inverse(&self.eta.comps[0]).iter().fold(f64::INFINITY, |m, v| m.min(1.0 + v))
    }

    /// Fails with [`Error::DensityNonPositive`] when `1 + eta <= 0` somewhere.
    pub fn check_density(&self, torus: &Torus) -> Result<()> {
        let min = self.min_density(torus);
        if !(min > 0.0) {
            return Err(Error::DensityNonPositive { min });
        }
        Ok(())
    }
}

impl IncompressibleState {
    pub fn zeros(model: &Model) -> Self {
        Self { t: 0.0, v: SpectralField::zeros(model.torus.grid(), model.dim()), phi: PolymerField::zeros(model) }
    }

    pub fn axpy(&mut self, a: f64, other: &Self) {
        self.v.axpy(a, &other.v);
        self.phi.field.axpy(a, &other.phi.field);
    }
}

/// Momentum `(1 + eta) u`, formed on the grid and dealiased.
pub fn momentum(torus: &Torus, s: &CoupledState) -> SpectralField {
    let eta = torus.inverse(&s.eta.comps[0]);
    let rho: Vec<f64> = eta.iter().map(|e| 1.0 + e).collect();
    let comps = s.u.comps.iter().map(|c| torus.product(&rho, &torus.inverse(c))).collect();
    SpectralField { grid: torus.grid(), comps }
}

/// `||u||_m + nu^(1/2) ||Q u||_m + nu^(1/2) ||eta||_m + ||psi||_{m, L^2}`.
pub fn smallness_norm(model: &Model, s: &CoupledState) -> f64 {
    let t = &model.torus;
    let m = model.params.sobolev_m as i32;
    let sq = model.params.nu.sqrt();
    let (_, q) = t.leray(&s.u);
    t.sobolev_norm(&s.u, m) + sq * t.sobolev_norm(&q, m) + sq * t.sobolev_norm(&s.eta, m) + s.psi.norm_l2(t, m)
}

/// Unscaled random fields shared by every member of a parameter sweep.
#[derive(Debug, Clone)]
pub struct InitialDraw {
    pub eta: SpectralField,
    pub u: SpectralField,
    pub psi: SpectralField,
    /// An extra solenoidal field, used to perturb matched initial data.
    pub w: SpectralField,
}

/// Draws the random fields of the initial data. Fourier amplitudes decay
/// like `|xi|^-(m+2)`, polymer coefficients additionally like
/// `(1 + deg)^-2`; the mass coefficient and all means are zero.
pub fn draw_initial(model: &Model, seed: u64) -> InitialDraw {
    let t = &model.torus;
    let d = model.dim();
    let m = model.params.sobolev_m as i32;
    let nb = model.n_basis();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut eta = SpectralField::zeros(t.grid(), 1);
    let mut u = SpectralField::zeros(t.grid(), d);
    let mut psi = SpectralField::zeros(t.grid(), nb);
    let mut w = SpectralField::zeros(t.grid(), d);
    let gauss = |rng: &mut ChaCha8Rng| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    };
    for &idx in t.canonical_indices() {
        let k2 = t.xi2(idx);
        if k2 == 0.0 {
            continue;
        }
        let amp = k2.sqrt().powi(-(m + 2));
        let neg = t.neg_index(idx);
        let put = |f: &mut SpectralField, c: usize, z: Complex64| {
            f.comps[c][idx] = z;
            f.comps[c][neg] = z.conj();
            if neg == idx {
                f.comps[c][idx] = Complex64::new(z.re, 0.0);
            }
        };
        let z = gauss(&mut rng) * amp;
        put(&mut eta, 0, z);
        for a in 0..d {
            let z = gauss(&mut rng) * amp;
            put(&mut u, a, z);
        }
        for n in 1..nb {
            let deg = model.basis.labels[n].degree() as f64;
            let z = gauss(&mut rng) * amp / (1.0 + deg).powi(2);
            put(&mut psi, n, z);
        }
        for a in 0..d {
            let z = gauss(&mut rng) * amp;
            put(&mut w, a, z);
        }
    }
    let w = t.project(&w);
    InitialDraw { eta, u, psi, w }
}

/// State `alpha (P u~ + nu^-1/2 Q u~, nu^-1/2 eta~, psi~)` with the mean of
/// `u` fixed so that the momentum has zero mean.
fn compose(model: &Model, draw: &InitialDraw, alpha: f64) -> CoupledState {
    let t = &model.torus;
    let s = model.params.nu.sqrt().recip();
    let (p, q) = t.leray(&draw.u);
    let mut u = p;
    u.axpy(s, &q);
    u.scale(alpha);
    let mut eta = draw.eta.clone();
    eta.scale(alpha * s);
    let mut psi = PolymerField { basis: model.basis.id(), field: draw.psi.clone() };
    psi.field.scale(alpha);
    let mut state = CoupledState { t: 0.0, eta, u, psi };
    fix_momentum_mean(t, &mut state);
    state
}

/// Sets the mean of `u` so that `int (1 + eta) u dx = 0`; requires `mean(eta) = 0`.
pub fn fix_momentum_mean(t: &Torus, s: &mut CoupledState) {
    for a in 0..s.u.ncomp() {
        s.u.comps[a][0] = Complex64::new(0.0, 0.0);
    }
    let m = momentum(t, s);
    for a in 0..s.u.ncomp() {
        s.u.comps[a][0] = Complex64::new(-m.comps[a][0].re, 0.0);
    }
}

/// Largest `alpha` with `f(alpha) <= target` for an increasing `f` with `f(0) = 0`.
fn solve_increasing(target: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (0.0, hi);
    while f(hi) < target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (f(hi) - target).abs() < (f(lo) - target).abs() {
        hi
    } else {
        lo
    }
}

/// Amplitude `alpha` for which the composed state has [`smallness_norm`] `eps`.
pub fn initial_amplitude(model: &Model, draw: &InitialDraw, eps: f64) -> f64 {
    if eps == 0.0 {
        return 0.0;
    }
    let unit = smallness_norm(model, &compose(model, draw, 1.0));
    if unit == 0.0 {
        return 0.0;
    }
    solve_increasing(eps, eps / unit, |a| smallness_norm(model, &compose(model, draw, a)))
}

/// Initial state from a given draw, scaled so that [`smallness_norm`] equals `eps`.
pub fn initial_from_draw(model: &Model, draw: &InitialDraw, eps: f64) -> CoupledState {
    let alpha = initial_amplitude(model, draw, eps);
    if alpha == 0.0 {
        return CoupledState::zeros(model);
    }
    compose(model, draw, alpha)
}

/// Random smooth initial data of size `eps` with seed `model.params.seed`.
pub fn make_initial_data(model: &Model, eps: f64) -> CoupledState {
    initial_from_draw(model, &draw_initial(model, model.params.seed), eps)
}

/// Matched initial data for the incompressible-limit comparison.
///
/// The draw is scaled by the fixed amplitude `alpha` (see
/// [`initial_amplitude`]), so `(v(0), phi(0))` does not depend on `nu`. The
/// compressible state keeps `eta` and `Q u` of that scaling; its solenoidal
/// velocity is chosen so that `P M(0) = v(0) + w0` with a solenoidal mismatch
/// `w0` of size `||w0||_{m-1} = mismatch * eps * nu^-1/2`. Both polymer
/// fields coincide.
pub fn make_limit_pair(
    model: &Model,
    draw: &InitialDraw,
    alpha: f64,
    eps: f64,
    mismatch: f64,
) -> Result<(CoupledState, IncompressibleState)> {
    let t = &model.torus;
    let m = model.params.sobolev_m as i32;
    let base = compose(model, draw, alpha);
    let (mut v0, q0) = t.leray(&base.u);
    for a in 0..v0.ncomp() {
        v0.comps[a][0] = Complex64::new(0.0, 0.0);
    }
    let wn = t.sobolev_norm(&draw.w, m - 1);
    let mut target = v0.clone();
    if wn > 0.0 && eps > 0.0 {
        target.axpy(mismatch * eps / (model.params.nu.sqrt() * wn), &draw.w);
    }
    // fixed point for P u + P(eta u) = target
    let mut s = base.clone();
    let mut pu = target.clone();
    let tnorm = t.l2_norm(&target).max(f64::MIN_POSITIVE);
    let mut last = f64::INFINITY;
    for it in 0.. {
        let mut u = pu.clone();
        u.axpy(1.0, &q0);
        s.u = u;
        let mut eu = momentum(t, &s);
        eu.axpy(-1.0, &s.u);
        let mut next = target.sub(&t.project(&eu));
        t.hermitian_symmetrize(&mut next);
        let change = t.l2_norm(&next.sub(&pu));
        pu = next;
        // the map contracts with factor ~ |eta|; stop once rounding dominates
        if change <= 1e-15 * tnorm || (change >= last && change <= 1e-12 * tnorm) {
            break;
        }
        last = change;
        if it == 200 {
            return Err(Error::SolveFailed("matched momentum iteration did not converge".into()));
        }
    }
    let mut u = pu;
    u.axpy(1.0, &q0);
    s.u = u;
    let inc = IncompressibleState { t: 0.0, v: v0, phi: base.psi.clone() };
    Ok((s, inc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Parameters;
    use approx::assert_relative_eq;

    fn model() -> Model {
        Model::new(&Parameters { grid_n: 16, rad_order: 3, ang_order: 2, ..Parameters::default() }).unwrap()
    }

    #[test]
    fn zero_amplitude_gives_zero_state() {
        let m = model();
        assert_eq!(make_initial_data(&m, 0.0), CoupledState::zeros(&m));
    }

    #[test]
    fn initial_data_is_deterministic() {
        let m = model();
        assert_eq!(make_initial_data(&m, 0.01), make_initial_data(&m, 0.01));
    }

    #[test]
    fn initial_data_meets_smallness_and_mean_conditions() {
        let m = model();
        for eps in [1e-3, 0.01, 0.2] {
            let s = make_initial_data(&m, eps);
            let n = smallness_norm(&m, &s);
            assert!((n - eps).abs() <= 1e-12 * eps, "norm {n} vs {eps}");
            assert!(m.torus.mean(&s.eta, 0).abs() <= 1e-14);
            let mom = momentum(&m.torus, &s);
            for a in 0..2 {
                assert!(m.torus.mean(&mom, a).abs() <= 1e-14);
            }
            assert!(s.psi.field.comps[0].iter().all(|z| z.norm() == 0.0));
            assert!(m.torus.hermitian_defect(&s.u) == 0.0);
        }
    }

    #[test]
    fn momentum_of_product_example() {
        // eta = 0.1 cos x1, u = (sin x1, 0): M1 = sin x1 + 0.05 sin 2 x1
        let m = model();
        let t = &m.torus;
        let grid = t.grid();
        let pts: Vec<[f64; 3]> = (0..t.len()).map(|i| grid.point(i)).collect();
        let mut s = CoupledState::zeros(&m);
        s.eta = t.to_spectral(&[pts.iter().map(|p| 0.1 * p[0].cos()).collect()]);
        s.u = t.to_spectral(&[pts.iter().map(|p| p[0].sin()).collect(), vec![0.0; t.len()]]);
        let mom = momentum(t, &s);
        let i2 = grid.index_of(&[2, 0]);
        let i1 = grid.index_of(&[1, 0]);
        assert_relative_eq!(mom.comps[0][i2].norm(), 0.025, epsilon = 1e-14);
        assert_relative_eq!(mom.comps[0][i1].norm(), 0.5, epsilon = 1e-14);
        // eta = 0 gives u back
        s.eta = SpectralField::zeros(grid, 1);
        assert!(momentum(t, &s).sub(&s.u).max_abs() < 1e-15);
    }

    #[test]
    fn limit_pair_has_requested_mismatch() {
        let m = model();
        let draw = draw_initial(&m, 3);
        let (c, i) = make_limit_pair(&m, &draw, initial_amplitude(&m, &draw, 0.01), 0.01, 0.5).unwrap();
        let t = &m.torus;
        let pm = t.project(&momentum(t, &c));
        let mism = t.sobolev_norm(&pm.sub(&i.v), 2);
        assert_relative_eq!(mism, 0.5 * 0.01 / 10.0, max_relative = 1e-10);
        assert_eq!(c.psi, i.phi);
        assert!(t.mean(&momentum(t, &c), 0).abs() < 1e-15);
        let alpha = initial_amplitude(&m, &draw, 0.01);
        let other = m.with_params(&m.params.with_nu(400.0)).unwrap();
        let (_, j) = make_limit_pair(&other, &draw, alpha, 0.01, 0.5).unwrap();
        assert!(j.v.sub(&i.v).max_abs() <= 1e-15 * i.v.max_abs());
        assert_eq!(j.phi, i.phi);
    }

    #[test]
    fn h1_norm_of_constant_mode_is_zero() {
        let m = model();
        let mut p = PolymerField::zeros(&m);
        p.field.comps[0][0] = Complex64::new(1.0, 0.0);
        assert!(p.norm_h1(&m.torus, &m.ops, 3) < 1e-6);
        p.field.comps[1][0] = Complex64::new(1.0, 0.0);
        let want = (-m.ops.l_mat[(1, 1)] * t_vol(&m)).sqrt();
        assert_relative_eq!(p.norm_h1(&m.torus, &m.ops, 3), want, max_relative = 1e-10);
    }

    fn t_vol(m: &Model) -> f64 {
        m.torus.volume()
    }
}
