//! Norms sampled along a run, the time-weighted energy functionals built
//! from them, the envelopes `a(t)`, `b(t)`, and rate fits.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::Torus;
use crate::model::Model;
use crate::params::Parameters;
use crate::state::{momentum, CoupledState};

/// Norms of one state. Suffix `_m` is the `H^m` index, `_m1` is `H^(m-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize)]
pub struct Sample {
    pub t: f64,
    pub eta_m: f64,
    pub eta_m1: f64,
    pub u_m: f64,
    pub u_m1: f64,
    pub qu_m: f64,
    pub pu_m: f64,
    pub pu_m1: f64,
    /// Solenoidal part of the momentum `(1 + eta) u`.
    pub pm_m1: f64,
    pub pm_m: f64,
    pub grad_pm_m1: f64,
    pub psi_l2_m: f64,
    pub psi_l2_m1: f64,
    pub psi_h1_m: f64,
    pub psi_h1_m1: f64,
    pub grad_u_m: f64,
    pub grad_qu_m: f64,
    pub grad_eta_m1: f64,
}

/// Column names of [`Sample::values`], in order.
pub const SAMPLE_COLUMNS: [&str; 18] = [
    "t",
    "eta_m",
    "eta_m1",
    "u_m",
    "u_m1",
    "qu_m",
    "pu_m",
    "pu_m1",
    "pm_m1",
    "pm_m",
    "grad_pm_m1",
    "psi_l2_m",
    "psi_l2_m1",
    "psi_h1_m",
    "psi_h1_m1",
    "grad_u_m",
    "grad_qu_m",
    "grad_eta_m1",
];

impl Sample {
    pub fn values(&self) -> [f64; 18] {
        [
            self.t,
            self.eta_m,
            self.eta_m1,
            self.u_m,
            self.u_m1,
            self.qu_m,
            self.pu_m,
            self.pu_m1,
            self.pm_m1,
            self.pm_m,
            self.grad_pm_m1,
            self.psi_l2_m,
            self.psi_l2_m1,
            self.psi_h1_m,
            self.psi_h1_m1,
            self.grad_u_m,
            self.grad_qu_m,
            self.grad_eta_m1,
        ]
    }
}

/// Measures every monitored norm of `s`.
pub fn sample(model: &Model, s: &CoupledState) -> Sample {
    let t = &model.torus;
    let m = model.params.sobolev_m as i32;
    let (pu, qu) = t.leray(&s.u);
    let pm = t.project(&momentum(t, s));
    Sample {
        t: s.t,
        eta_m: t.sobolev_norm(&s.eta, m),
        eta_m1: t.sobolev_norm(&s.eta, m - 1),
        u_m: t.sobolev_norm(&s.u, m),
        u_m1: t.sobolev_norm(&s.u, m - 1),
        qu_m: t.sobolev_norm(&qu, m),
        pu_m: t.sobolev_norm(&pu, m),
        pu_m1: t.sobolev_norm(&pu, m - 1),
        pm_m1: t.sobolev_norm(&pm, m - 1),
        pm_m: t.sobolev_norm(&pm, m),
        grad_pm_m1: t.sobolev_norm_grad(&pm, m - 1),
        psi_l2_m: s.psi.norm_l2(t, m),
        psi_l2_m1: s.psi.norm_l2(t, m - 1),
        psi_h1_m: s.psi.norm_h1(t, &model.ops, m),
        psi_h1_m1: s.psi.norm_h1(t, &model.ops, m - 1),
        grad_u_m: t.sobolev_norm_grad(&s.u, m),
        grad_qu_m: t.sobolev_norm_grad(&qu, m),
        grad_eta_m1: t.sobolev_norm_grad(&s.eta, m - 1),
    }
}

/// Time series of [`Sample`]s together with the parameters fixing the weights.
#[derive(Debug, Clone)]
pub struct EnergyTrace {
    pub params: Parameters,
    pub samples: Vec<Sample>,
}

impl EnergyTrace {
    pub fn new(params: &Parameters) -> Self {
        Self { params: params.clone(), samples: Vec::new() }
    }

    /// Appends a sample; times must increase strictly and norms be finite and non-negative.
    pub fn push(&mut self, s: Sample) -> Result<()> {
        if let Some(last) = self.samples.last() {
            if !(s.t > last.t) {
                return Err(Error::BadParameter(format!("sample time {} does not exceed {}", s.t, last.t)));
            }
        }
        if s.values()[1..].iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::BadParameter(format!("invalid norm in sample at t = {}", s.t)));
        }
        self.samples.push(s);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn column(&self, f: impl Fn(&Sample) -> f64) -> Vec<f64> {
        self.samples.iter().map(f).collect()
    }
}

/// `e^(2 c t / nu)`.
pub fn exp_weight(t: f64, p: &Parameters) -> f64 {
    (2.0 * p.c_tilde * t / p.nu).exp()
}

/// Algebraic-then-exponential envelope: `(1 + delta t)^2` up to `t = nu`,
/// `C_delta nu^2 e^(2 c t / nu)` after, with `C_delta = (1 + delta nu)^2 / (nu^2 e^(2 c))`.
pub fn weight_a(t: f64, p: &Parameters) -> f64 {
    let nu = p.nu;
    if t <= nu {
        (1.0 + p.delta * t).powi(2)
    } else {
        // C_delta nu^2 e^(2ct/nu), with the nu^2 cancelled
        (1.0 + p.delta * nu).powi(2) * (2.0 * p.c_tilde * (t / nu - 1.0)).exp()
    }
}

/// `nu (1 + delta t)` up to `t = nu`, then `C_b nu^2 e^(2 c t / nu)` with
/// `C_b = nu (1 + delta nu) / (nu^2 e^(2 c))` so that `b` is continuous.
pub fn weight_b(t: f64, p: &Parameters) -> f64 {
    let nu = p.nu;
    if t <= nu {
        nu * (1.0 + p.delta * t)
    } else {
        nu * (1.0 + p.delta * nu) * (2.0 * p.c_tilde * (t / nu - 1.0)).exp()
    }
}

/// Values of the energy functionals at one time.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize)]
pub struct Functionals {
    pub e_b: f64,
    pub e_p: f64,
    /// Dissipation of the momentum measured by `||grad PM||_{m-1}`.
    pub e_i: f64,
    /// Same with `||PM||_m` in the dissipation integral.
    pub e_i_m: f64,
    pub e_eta: f64,
}

/// Running values of the functionals after every sample.
pub fn functional_history(trace: &EnergyTrace) -> Result<Vec<Functionals>> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let p = &trace.params;
    let mut out = Vec::with_capacity(trace.len());
    let mut sup = [0.0f64; 3];
    let mut int = [0.0f64; 5];
    let mut prev: Option<(f64, [f64; 5])> = None;
    for s in &trace.samples {
        let e = exp_weight(s.t, p);
        let a = weight_a(s.t, p);
        sup[0] = sup[0].max(e * (s.eta_m.powi(2) + s.u_m.powi(2) + s.psi_l2_m.powi(2)));
        sup[1] = sup[1].max(p.nu * e * (s.qu_m.powi(2) + s.eta_m.powi(2)));
        sup[2] = sup[2].max(a * (s.pm_m1.powi(2) + s.psi_l2_m1.powi(2)));
        let dens = [
            e * (p.mu * s.grad_u_m.powi(2) + s.psi_h1_m.powi(2)),
            p.nu * p.nu * e * s.grad_qu_m.powi(2),
            a * (s.grad_pm_m1.powi(2) + s.psi_h1_m1.powi(2)),
            a * (s.pm_m.powi(2) + s.psi_h1_m1.powi(2)),
            e * s.grad_eta_m1.powi(2),
        ];
        if let Some((t0, d0)) = prev {
            let h = s.t - t0;
            for k in 0..5 {
                int[k] += 0.5 * h * (d0[k] + dens[k]);
            }
        }
        prev = Some((s.t, dens));
        out.push(Functionals {
            e_b: sup[0] + int[0],
            e_p: sup[1] + int[1],
            e_i: sup[2] + int[2],
            e_i_m: sup[2] + int[3],
            e_eta: int[4],
        });
    }
    Ok(out)
}

/// Functionals at the final sample.
pub fn compute_functionals(trace: &EnergyTrace) -> Result<Functionals> {
    Ok(*functional_history(trace)?.last().expect("non-empty"))
}

/// Least-squares line `y = a + b x`; returns `b`.
fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Exponential decay rate `-d log y / dt` fitted by least squares on the
/// trailing fraction `window` of the samples (by count).
pub fn fit_decay(t: &[f64], y: &[f64], window: f64) -> Result<f64> {
    if t.len() != y.len() {
        return Err(Error::BadParameter("time and value lengths differ".into()));
    }
    if t.len() < 10 {
        return Err(Error::BadParameter(format!("{} samples, need at least 10", t.len())));
    }
    if !(window > 0.0 && window <= 1.0) {
        return Err(Error::BadParameter(format!("window {window} outside (0, 1]")));
    }
    if let Some(i) = y.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::NonPositiveSeries(i));
    }
    let n = t.len();
    let start = n - ((window * n as f64).round() as usize).clamp(2, n);
    let logs: Vec<f64> = y[start..].iter().map(|v| v.ln()).collect();
    Ok(-slope(&t[start..], &logs))
}

/// Log-log least-squares slope of `value` against `x`.
pub fn fit_power(x: &[f64], value: &[f64]) -> Result<f64> {
    if x.len() != value.len() {
        return Err(Error::BadParameter("abscissa and value lengths differ".into()));
    }
    let mut distinct: Vec<f64> = x.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 || x.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::DegenerateAbscissa(format!("need three distinct positive abscissae, got {x:?}")));
    }
    if let Some(i) = value.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::NonPositiveSeries(i));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = value.iter().map(|v| v.ln()).collect();
    Ok(slope(&lx, &ly))
}

/// Constant `C` of the product estimate `||f g||_s <= C ||f||_s ||g||_s` for
/// fields supported on the resolved modes, `s >= 1`:
/// `2^s (sum (1 + |xi|^2)^-s)^(1/2) (2 pi)^(-d/2)`.
pub fn embedding_constant(torus: &Torus, s: u32) -> f64 {
    let sum: f64 = torus.kept_indices().iter().map(|&i| (1.0 + torus.xi2(i)).powi(-(s as i32))).sum();
    2f64.powi(s as i32) * sum.sqrt() * torus.volume().powf(-0.5)
}

/// Writes one row per sample: the norms, `a`, `b` and the running functionals.
pub fn write_energy_csv(trace: &EnergyTrace, path: &Path) -> Result<()> {
    let hist = functional_history(trace)?;
    let mut w = BufWriter::new(File::create(path)?);
    let mut header: Vec<&str> = SAMPLE_COLUMNS.to_vec();
    header.extend(["a", "b", "E_B", "E_P", "E_I", "E_I_m", "E_eta"]);
    writeln!(w, "{}", header.join(","))?;
    for (s, f) in trace.samples.iter().zip(&hist) {
        let mut row: Vec<f64> = s.values().to_vec();
        row.extend([weight_a(s.t, &trace.params), weight_b(s.t, &trace.params), f.e_b, f.e_p, f.e_i, f.e_i_m, f.e_eta]);
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::make_initial_data;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn params() -> Parameters {
        Parameters { nu: 100.0, delta: 0.1, c_tilde: 0.5, ..Parameters::default() }
    }

    fn trace_from(p: &Parameters, ts: &[f64], f: impl Fn(f64) -> Sample) -> EnergyTrace {
        let mut tr = EnergyTrace::new(p);
        for &t in ts {
            tr.push(Sample { t, ..f(t) }).unwrap();
        }
        tr
    }

    #[test]
    fn weight_a_values() {
        let p = params();
        assert_eq!(weight_a(0.0, &p), 1.0);
        assert!((weight_a(100.0, &p) - 121.0).abs() <= 1e-12 * 121.0);
        let c_delta = 121.0 / (1e4 * (2.0 * 0.5f64).exp());
        let right = c_delta * 1e4 * (2.0 * 0.5 * 100.0f64 / 100.0).exp();
        assert!((right - 121.0).abs() <= 1e-12 * 121.0);
        let above = weight_a(100.0 * (1.0 + 1e-15), &p);
        assert!((above - weight_a(100.0, &p)).abs() <= 1e-12 * 121.0);
        let t2: f64 = 250.0;
        let want = c_delta * 1e4 * (2.0 * 0.5 * t2 / 100.0).exp();
        assert!((weight_a(t2, &p) - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn weights_increase() {
        let p = params();
        let mut last = (0.0, 0.0);
        for i in 0..1000 {
            let t = i as f64 * 0.3;
            let (a, b) = (weight_a(t, &p), weight_b(t, &p));
            if i > 0 {
                assert!(a > last.0 && b > last.1, "t = {t}");
            }
            last = (a, b);
        }
    }

    #[test]
    fn weight_b_values() {
        let p = params();
        assert_eq!(weight_b(0.0, &p), 100.0);
        assert!((weight_b(50.0, &p) - 600.0).abs() <= 1e-12 * 600.0);
        for t in [0.0, 1.0, 33.3, 100.0] {
            let want = p.nu * weight_a(t, &p).sqrt();
            assert!((weight_b(t, &p) - want).abs() <= 1e-12 * want);
        }
        let l = weight_b(100.0, &p);
        let r = weight_b(100.0 * (1.0 + 1e-15), &p);
        assert!((l - r).abs() <= 1e-12 * l);
    }

    #[test]
    fn zero_and_single_sample_traces() {
        let p = params();
        let tr = trace_from(&p, &[0.0, 1.0, 2.0], |_| Sample::default());
        assert_eq!(compute_functionals(&tr).unwrap(), Functionals::default());
        let one = trace_from(&p, &[0.0], |_| Sample {
            u_m: 2.0,
            qu_m: 1.0,
            pm_m1: 3.0,
            grad_eta_m1: 5.0,
            ..Sample::default()
        });
        let f = compute_functionals(&one).unwrap();
        assert_eq!(f.e_b, 4.0);
        assert_eq!(f.e_p, 100.0);
        assert_eq!(f.e_i, 9.0);
        assert_eq!(f.e_eta, 0.0);
        assert!(matches!(compute_functionals(&EnergyTrace::new(&p)), Err(Error::EmptyTrace)));
    }

    #[test]
    fn acoustic_envelope_gives_unit_sup() {
        let p = params();
        let ts: Vec<f64> = (0..=1000).map(|i| i as f64 * 0.1).collect();
        let tr = trace_from(&p, &ts, |t| Sample { qu_m: (-t / 100.0).exp() / 10.0, ..Sample::default() });
        let f = compute_functionals(&tr).unwrap();
        assert!((f.e_p - 1.0).abs() <= 1e-12, "{}", f.e_p);
    }

    #[test]
    fn trapezoid_integral_of_energy_dissipation() {
        // E_eta with ||grad eta||_{m-1} = e^{-c t / nu} integrates e^0 = 1 exactly
        let p = params();
        let ts: Vec<f64> = (0..=50).map(|i| i as f64 * 0.2).collect();
        let tr = trace_from(&p, &ts, |t| Sample { grad_eta_m1: (-p.c_tilde * t / p.nu).exp(), ..Sample::default() });
        assert!((compute_functionals(&tr).unwrap().e_eta - 10.0).abs() <= 1e-12);
    }

    #[test]
    fn rejects_non_increasing_times() {
        let p = params();
        let mut tr = EnergyTrace::new(&p);
        tr.push(Sample { t: 1.0, ..Sample::default() }).unwrap();
        assert!(tr.push(Sample { t: 1.0, ..Sample::default() }).is_err());
        assert!(tr.push(Sample { t: 2.0, u_m: -1.0, ..Sample::default() }).is_err());
    }

    #[test]
    fn fit_decay_examples() {
        let t: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let y: Vec<f64> = t.iter().map(|t| (-0.01 * t).exp()).collect();
        assert!((fit_decay(&t, &y, 0.5).unwrap() - 0.01).abs() <= 1e-6);
        let y: Vec<f64> = t.iter().map(|t| 5.0 * (-0.25 * t).exp()).collect();
        assert!((fit_decay(&t, &y, 0.5).unwrap() - 0.25).abs() <= 1e-6);
        let t: Vec<f64> = (0..=100).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|t| 1.0 / (1.0 + 0.1 * t)).collect();
        for w in [0.5, 1.0] {
            let r = fit_decay(&t, &y, w).unwrap();
            assert!(r > 0.05 && r < 0.1, "{r}");
        }
        let mut bad = y.clone();
        bad[7] = 0.0;
        assert!(matches!(fit_decay(&t, &bad, 1.0), Err(Error::NonPositiveSeries(7))));
        assert!(fit_decay(&t[..5], &y[..5], 1.0).is_err());
    }

    #[test]
    fn fit_power_examples() {
        let nu = [50.0, 100.0, 200.0, 400.0];
        let v: Vec<f64> = nu.iter().map(|n: &f64| n.powf(-0.5)).collect();
        assert!((fit_power(&nu, &v).unwrap() + 0.5).abs() <= 1e-9);
        assert!(fit_power(&nu, &[7.0; 4]).unwrap().abs() <= 1e-9);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let noisy: Vec<f64> =
            nu.iter().map(|n: &f64| n.powf(-0.5) * (1.0 + 0.05 * rng.random_range(-1.0..1.0))).collect();
        let s = fit_power(&nu, &noisy).unwrap();
        assert!((-0.56..=-0.44).contains(&s), "{s}");
        assert!(matches!(fit_power(&[1.0, 1.0, 2.0], &[1.0, 1.0, 2.0]), Err(Error::DegenerateAbscissa(_))));
    }

    #[test]
    fn momentum_decomposition_and_poincare() {
        let model =
            Model::new(&Parameters { grid_n: 16, rad_order: 3, ang_order: 2, ..Parameters::default() }).unwrap();
        let t = &model.torus;
        let c = embedding_constant(t, model.params.sobolev_m - 1);
        for eps in [0.01, 0.3] {
            let s = make_initial_data(&model, eps);
            let pm = t.project(&momentum(t, &s));
            let pu = t.project(&s.u);
            let eta_u = momentum(t, &s).sub(&s.u);
            let mut resid = pu.sub(&pm);
            resid.axpy(1.0, &t.project(&eta_u));
            assert!(resid.max_abs() <= 1e-12);
            let smp = sample(&model, &s);
            assert!(smp.pu_m1 <= smp.pm_m1 + c * smp.eta_m1 * smp.u_m1);
            assert!(t.l2_norm(&s.eta) <= t.sobolev_norm_grad(&s.eta, 0));
        }
    }

    #[test]
    fn product_constant_bounds_random_products() {
        let model =
            Model::new(&Parameters { grid_n: 16, rad_order: 2, ang_order: 1, ..Parameters::default() }).unwrap();
        let t = &model.torus;
        let c = embedding_constant(t, 2);
        for seed in 0..5 {
            let a = make_initial_data(&model.with_params(&Parameters { seed, ..model.params.clone() }).unwrap(), 0.1);
            let f = t.inverse(&a.u.comps[0]);
            let g = t.inverse(&a.u.comps[1]);
            let fg = crate::field::SpectralField { grid: t.grid(), comps: vec![t.product(&f, &g)] };
            let lhs = t.sobolev_norm(&fg, 2);
            let rhs = c * t.sobolev_norm(&a.u.component(0), 2) * t.sobolev_norm(&a.u.component(1), 2);
            assert!(lhs <= rhs, "{lhs} > {rhs}");
        }
    }

    #[test]
    fn energy_csv_layout() {
        let p = params();
        let tr = trace_from(&p, &[0.0, 0.5, 1.0], |t| Sample { u_m: 1.0 + t, ..Sample::default() });
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("energy.csv");
        write_energy_csv(&tr, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0].split(',').count(), 25);
        assert!(lines[0].starts_with("t,eta_m,"));
    }

    proptest! {
        #[test]
        fn functionals_grow_with_the_prefix(vals in proptest::collection::vec(0.0f64..2.0, 3..40), dt in 0.01f64..5.0) {
            let p = params();
            let ts: Vec<f64> = (0..vals.len()).map(|i| i as f64 * dt).collect();
            let tr = trace_from(&p, &ts, |t| {
                let v = vals[(t / dt).round() as usize];
                Sample { eta_m: v, u_m: v * 0.5, qu_m: v, pm_m1: v, pm_m: v, grad_pm_m1: v, psi_l2_m: v, psi_h1_m1: v,
                         grad_u_m: v, grad_qu_m: v, grad_eta_m1: v, ..Sample::default() }
            });
            let h = functional_history(&tr).unwrap();
            for w in h.windows(2) {
                prop_assert!(w[1].e_b >= w[0].e_b && w[1].e_p >= w[0].e_p && w[1].e_i >= w[0].e_i);
                prop_assert!(w[1].e_i_m >= w[0].e_i_m && w[1].e_eta >= w[0].e_eta);
            }
        }

        #[test]
        fn weights_are_continuous_at_nu(nu in 10.0f64..1e4, delta in 0.0f64..0.25, c in 0.01f64..1.0) {
            let p = Parameters { nu, delta, c_tilde: c, ..Parameters::default() };
            let above = nu * (1.0 + f64::EPSILON);
            prop_assert!((weight_a(nu, &p) - weight_a(above, &p)).abs() <= 1e-12 * weight_a(nu, &p));
            prop_assert!((weight_b(nu, &p) - weight_b(above, &p)).abs() <= 1e-12 * weight_b(nu, &p));
        }
    }
}
