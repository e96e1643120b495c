//! Experiment drivers: single runs, spectral scans, `nu` sweeps and the
//! incompressible-limit comparison.

use fene_core::fluid::{run, step_count, Dynamics, Scheme, Stepper};
use fene_core::monitor::{
    compute_functionals, embedding_constant, fit_decay, fit_power, sample, weight_b, EnergyTrace, Sample,
};
use fene_core::spectrum::{
    assemble_mode_with, eigen_decay, half_space_modes, slowest_rate, Coupling, SpectrumRow, NEUTRAL_TOL,
};
use fene_core::state::{draw_initial, initial_amplitude, make_initial_data, make_limit_pair, momentum};
use fene_core::{CoupledState, IncompressibleState, Model, Parameters};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentKind, ExperimentSpec};
use crate::report::{Check, Report, WideTable};
use crate::HarnessError;

/// Runs `spec` on a pool of `workers` threads.
pub fn run_experiment(spec: &ExperimentSpec, workers: usize) -> Result<Report, HarnessError> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    pool.install(|| match spec.kind {
        ExperimentKind::Simulate => run_simulate(spec),
        ExperimentKind::Spectrum => run_spectrum(spec),
        ExperimentKind::SweepNu => run_sweep_nu(spec),
        ExperimentKind::LimitCompare => run_limit_compare(spec),
    })
}

fn label(name: &str, nu: f64) -> String {
    format!("{name}[nu={nu}]")
}

/// Diagnostics of one compressible run.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub nu: f64,
    pub trace: EnergyTrace,
    /// Largest `|mean eta(t) - mean eta(0)|`.
    pub mass_drift: f64,
    /// Largest change of the `x`-integral of the mass coefficient `c_0`.
    pub polymer_mass_drift: f64,
    /// Accumulated mean-velocity correction restoring the mean momentum.
    pub momentum_correction: f64,
    /// Largest `||P u||_{m-1} - ||P M||_{m-1} - C ||eta||_{m-1} ||u||_{m-1}` over samples.
    pub decomposition_excess: f64,
    /// Largest `||eta||_{m-1} - ||grad eta||_{m-1}` over samples.
    pub poincare_excess: f64,
}

/// Evolves `s0` with `model.params` and samples every `stride` steps.
pub fn run_coupled(
    model: &Model,
    s0: &CoupledState,
    scheme: Scheme,
    dynamics: Dynamics,
    stride: usize,
) -> Result<RunRecord, HarnessError> {
    let t = &model.torus;
    let p = &model.params;
    let stepper = Stepper::<CoupledState>::new(model, scheme, dynamics)?;
    let last = step_count(p.dt, p.t_final);
    let c_emb = embedding_constant(t, p.sobolev_m - 1);
    let eta0 = t.mean(&s0.eta, 0);
    let mass0 = t.mean(&s0.psi.field, 0) * t.volume();
    let mut rec = RunRecord {
        nu: p.nu,
        trace: EnergyTrace::new(p),
        mass_drift: 0.0,
        polymer_mass_drift: 0.0,
        momentum_correction: 0.0,
        decomposition_excess: f64::NEG_INFINITY,
        poincare_excess: f64::NEG_INFINITY,
    };
    run(&stepper, s0, p.t_final, |k, s| {
        rec.mass_drift = rec.mass_drift.max((t.mean(&s.eta, 0) - eta0).abs());
        let mass = t.mean(&s.psi.field, 0) * t.volume();
        rec.polymer_mass_drift = rec.polymer_mass_drift.max((mass - mass0).abs());
        if k % stride == 0 || k == last {
            let smp = sample(model, s);
            rec.decomposition_excess =
                rec.decomposition_excess.max(smp.pu_m1 - smp.pm_m1 - c_emb * smp.eta_m1 * smp.u_m1);
            rec.poincare_excess = rec.poincare_excess.max(smp.eta_m1 - smp.grad_eta_m1);
            rec.trace.push(smp)?;
        }
        Ok(())
    })?;
    rec.momentum_correction = stepper.momentum_correction();
    Ok(rec)
}

fn conservation_checks(rec: &RunRecord, checks: &mut Vec<Check>) {
    let nu = rec.nu;
    checks.push(Check::at_most(label("mass_drift", nu), rec.mass_drift, 1e-12));
    checks.push(Check::at_most(label("polymer_mass_drift", nu), rec.polymer_mass_drift, 1e-11));
    checks.push(Check::at_most(label("momentum_decomposition_excess", nu), rec.decomposition_excess, 1e-14));
    checks.push(Check::at_most(label("poincare_excess", nu), rec.poincare_excess, 1e-14));
}

fn sup(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

fn run_simulate(spec: &ExperimentSpec) -> Result<Report, HarnessError> {
    let base = Model::new(&spec.params_for(spec.nus()[0]))?;
    let records: Vec<RunRecord> = spec
        .nus()
        .par_iter()
        .map(|&nu| {
            let model = base.with_params(&spec.params_for(nu))?;
            let s0 = make_initial_data(&model, spec.eps);
            run_coupled(&model, &s0, spec.scheme, Dynamics::default(), spec.stride)
        })
        .collect::<Result<_, _>>()?;
    let mut checks = Vec::new();
    let mut results = Vec::new();
    let mut wide = WideTable::new("t");
    for rec in &records {
        conservation_checks(rec, &mut checks);
        let f = compute_functionals(&rec.trace)?;
        let finite = [f.e_b, f.e_p, f.e_i, f.e_i_m, f.e_eta].iter().all(|v| v.is_finite());
        checks.push(Check::at_least(label("functionals_finite", rec.nu), finite as u8 as f64, 1.0));
        let ts = rec.trace.times();
        let u = rec.trace.column(|s| s.u_m);
        let rate_u = if ts.len() >= 10 { fit_decay(&ts, &u, spec.fit_window).ok() } else { None };
        results.push(json!({
            "nu": rec.nu,
            "samples": rec.trace.len(),
            "functionals": f,
            "rate_u_m": rate_u,
            "momentum_correction": rec.momentum_correction,
            "mass_drift": rec.mass_drift,
            "polymer_mass_drift": rec.polymer_mass_drift,
            "final": rec.trace.samples.last(),
        }));
        for (name, col) in [("eta_m", 1), ("u_m", 3), ("qu_m", 5), ("pm_m1", 8), ("psi_l2_m", 11)] {
            wide.add_column(format!("{name}@{}", rec.nu), rec.trace.samples.iter().map(|s| (s.t, s.values()[col])));
        }
    }
    Ok(Report {
        kind: spec.kind,
        spec: spec.clone(),
        checks,
        notes: Vec::new(),
        results: json!({ "runs": results }),
        traces: records.into_iter().map(|r| (r.nu, r.trace)).collect(),
        spectrum: Vec::new(),
        dim: base.dim(),
        wide,
    })
}

/// Spectral summary for one `nu`.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumSummary {
    pub nu: f64,
    pub max_re: f64,
    pub slow_rate_coupled: f64,
    pub argmin_coupled: Vec<i64>,
    pub slow_rate_decoupled: f64,
    pub argmin_decoupled: Vec<i64>,
    /// Decoupled slow rate at `xi = e_1`, times `nu`.
    pub unit_slow_rate_times_nu: f64,
    /// Smallest fast rate over largest slow rate, slow meaning `Re >= -2/nu`.
    pub gap_ratio: f64,
}

/// Summary, per-mode spectra and `(|xi|, coupled rate, decoupled rate)` per mode.
pub type SpectrumScan = (SpectrumSummary, Vec<SpectrumRow>, Vec<(f64, f64, f64)>);

/// Spectra of every mode with `1 <= |xi|_inf <= xi_max` for one parameter set.
pub fn scan_spectrum(
    p: &Parameters,
    ops: &fene_core::polymer::FpOperators,
    xi_max: i64,
) -> Result<SpectrumScan, HarnessError> {
    let modes = half_space_modes(p.dim, xi_max);
    let per_mode: Vec<_> = modes
        .par_iter()
        .map(|xi| {
            let full = eigen_decay(&assemble_mode_with(xi, p, ops, Coupling::FULL)?)?;
            let bare = eigen_decay(&assemble_mode_with(xi, p, ops, Coupling::NONE)?)?;
            Ok::<_, fene_core::Error>((*xi, full, bare))
        })
        .collect::<Result<_, _>>()?;
    let nu = p.nu;
    let mut s = SpectrumSummary {
        nu,
        max_re: f64::NEG_INFINITY,
        slow_rate_coupled: f64::INFINITY,
        argmin_coupled: vec![],
        slow_rate_decoupled: f64::INFINITY,
        argmin_decoupled: vec![],
        unit_slow_rate_times_nu: f64::NAN,
        gap_ratio: f64::NAN,
    };
    let (mut slow_max, mut fast_min) = (0.0f64, f64::INFINITY);
    let mut rows = Vec::new();
    let mut per_xi = Vec::new();
    for (xi, full, bare) in per_mode {
        let w = xi[..p.dim].to_vec();
        s.max_re = s.max_re.max(full[0].re);
        let rc = slowest_rate(&full);
        let rd = slowest_rate(&bare);
        if rc < s.slow_rate_coupled {
            s.slow_rate_coupled = rc;
            s.argmin_coupled = w.clone();
        }
        if rd < s.slow_rate_decoupled {
            s.slow_rate_decoupled = rd;
            s.argmin_decoupled = w.clone();
        }
        let k2: i64 = w.iter().map(|v| v * v).sum();
        if k2 == 1 && w[0] == 1 {
            s.unit_slow_rate_times_nu = rd * nu;
        }
        for z in full.iter().filter(|z| z.norm() > NEUTRAL_TOL) {
            if -z.re <= 2.0 / nu {
                slow_max = slow_max.max(-z.re);
            } else {
                fast_min = fast_min.min(-z.re);
            }
        }
        per_xi.push(((k2 as f64).sqrt(), rc, rd));
        rows.push(SpectrumRow { nu, xi, eigenvalues: full });
    }
    s.gap_ratio = fast_min / slow_max;
    Ok((s, rows, per_xi))
}

fn run_spectrum(spec: &ExperimentSpec) -> Result<Report, HarnessError> {
    let base = Model::new(&spec.params_for(spec.nus()[0]))?;
    let mut checks = Vec::new();
    let mut summaries = Vec::new();
    let mut rows = Vec::new();
    let mut wide = WideTable::new("abs_xi");
    for nu in spec.nus() {
        let p = spec.params_for(nu);
        let (s, r, per_xi) = scan_spectrum(&fene_core::validate_params(&p)?, &base.ops, spec.xi_max)?;
        checks.push(Check::at_most(label("max_re_lambda", nu), s.max_re, 1e-10));
        checks.push(Check::within(label("unit_slow_rate_times_nu", nu), s.unit_slow_rate_times_nu, 0.95, 1.05));
        if nu >= 100.0 {
            checks.push(Check::at_least(label("slow_fast_gap_ratio", nu), s.gap_ratio, 10.0));
        }
        // slowest rate per |xi|, for plotting
        let mut by_k: std::collections::BTreeMap<u64, (f64, f64)> = Default::default();
        for (k, rc, rd) in per_xi {
            let e = by_k.entry(k.to_bits()).or_insert((f64::INFINITY, f64::INFINITY));
            e.0 = e.0.min(rc);
            e.1 = e.1.min(rd);
        }
        wide.add_column(format!("coupled@{nu}"), by_k.iter().map(|(k, v)| (f64::from_bits(*k), v.0)));
        wide.add_column(format!("decoupled@{nu}"), by_k.iter().map(|(k, v)| (f64::from_bits(*k), v.1)));
        summaries.push(s);
        rows.extend(r);
    }
    Ok(Report {
        kind: spec.kind,
        spec: spec.clone(),
        checks,
        notes: Vec::new(),
        results: json!({ "spectra": summaries }),
        traces: Vec::new(),
        spectrum: rows,
        dim: base.dim(),
        wide,
    })
}

/// Per-`nu` outcome of a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub nu: f64,
    pub sup_eta_m: f64,
    pub sup_qu_m: f64,
    /// Decay rate of `||u||_m` on the trailing fit window.
    pub rate_u_m: f64,
    /// Decay rates of `||u||_m` and `||PM||_{m-1}` fitted on `t <= nu/2`.
    pub rate_u_m_half: f64,
    pub rate_pm_m1_half: f64,
}

/// Manufactured trace: `nu^-1/2 e^(-t/nu)` for every monitored norm except
/// `||PM||_{m-1}`, which decays like `nu^-1/2 e^(-3t/nu)`.
pub fn synthetic_trace(p: &Parameters) -> Result<EnergyTrace, HarnessError> {
    let mut tr = EnergyTrace::new(p);
    let n = 101;
    let horizon = if p.t_final > 0.0 { p.t_final } else { p.nu };
    for i in 0..n {
        let t = horizon * i as f64 / (n - 1) as f64;
        let y = p.nu.powf(-0.5) * (-t / p.nu).exp();
        let y3 = p.nu.powf(-0.5) * (-3.0 * t / p.nu).exp();
        tr.push(Sample { t, eta_m: y, u_m: y, qu_m: y, pu_m: y, pm_m1: y3, ..Sample::default() })?;
    }
    Ok(tr)
}

fn sweep_point(nu: f64, tr: &EnergyTrace, window: f64) -> Result<SweepPoint, HarnessError> {
    let ts = tr.times();
    let half: Vec<usize> = (0..ts.len()).filter(|&i| ts[i] <= 0.5 * nu).collect();
    let pick = |v: &[f64]| -> (Vec<f64>, Vec<f64>) {
        (half.iter().map(|&i| ts[i]).collect(), half.iter().map(|&i| v[i]).collect())
    };
    let u = tr.column(|s| s.u_m);
    let pm = tr.column(|s| s.pm_m1);
    let (th, uh) = pick(&u);
    let (_, pmh) = pick(&pm);
    Ok(SweepPoint {
        nu,
        sup_eta_m: sup(&tr.column(|s| s.eta_m)),
        sup_qu_m: sup(&tr.column(|s| s.qu_m)),
        rate_u_m: fit_decay(&ts, &u, window)?,
        rate_u_m_half: fit_decay(&th, &uh, 1.0)?,
        rate_pm_m1_half: fit_decay(&th, &pmh, 1.0)?,
    })
}

fn run_sweep_nu(spec: &ExperimentSpec) -> Result<Report, HarnessError> {
    let nus = spec.nus();
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    let (traces, records): (Vec<EnergyTrace>, Vec<Option<RunRecord>>) = if spec.synthetic {
        notes.push("synthetic traces; no simulation was run".to_string());
        let t = nus.iter().map(|&nu| synthetic_trace(&spec.params_for(nu))).collect::<Result<_, _>>()?;
        (t, vec![None; nus.len()])
    } else {
        let base = Model::new(&spec.params_for(nus[0]))?;
        let recs: Vec<RunRecord> = nus
            .par_iter()
            .map(|&nu| {
                let model = base.with_params(&spec.params_for(nu))?;
                let s0 = make_initial_data(&model, spec.eps);
                run_coupled(&model, &s0, spec.scheme, Dynamics::default(), spec.stride)
            })
            .collect::<Result<_, _>>()?;
        (recs.iter().map(|r| r.trace.clone()).collect(), recs.into_iter().map(Some).collect())
    };
    let points: Vec<SweepPoint> =
        nus.iter().zip(&traces).map(|(&nu, tr)| sweep_point(nu, tr, spec.fit_window)).collect::<Result<_, _>>()?;
    for rec in records.iter().flatten() {
        conservation_checks(rec, &mut checks);
    }
    let mu = spec.base.mu;
    for pt in &points {
        if pt.nu >= 100.0 && mu >= 4.0 / pt.nu {
            let ratio = pt.rate_pm_m1_half / pt.rate_u_m_half;
            checks.push(Check::at_least(label("momentum_rate_ratio", pt.nu), ratio, 2.0));
        }
    }
    let mut slopes = json!(null);
    if nus.len() >= 3 {
        let eta: Vec<f64> = points.iter().map(|p| p.sup_eta_m).collect();
        let qu: Vec<f64> = points.iter().map(|p| p.sup_qu_m).collect();
        let se = fit_power(&nus, &eta)?;
        let sq = fit_power(&nus, &qu)?;
        checks.push(Check::within("slope_sup_eta_m", se, -0.65, -0.35));
        checks.push(Check::within("slope_sup_qu_m", sq, -0.65, -0.35));
        slopes = json!({ "sup_eta_m": se, "sup_qu_m": sq });
    } else {
        notes.push("insufficient for power fit".to_string());
    }
    let mut wide = WideTable::new("t");
    for (nu, tr) in nus.iter().zip(&traces) {
        for (name, col) in [("eta_m", 1), ("u_m", 3), ("qu_m", 5), ("pm_m1", 8)] {
            wide.add_column(format!("{name}@{nu}"), tr.samples.iter().map(|s| (s.t, s.values()[col])));
        }
    }
    let functionals: Vec<Value> =
        traces.iter().map(|tr| compute_functionals(tr).map(|f| json!(f))).collect::<Result<_, _>>()?;
    let corrections: Vec<Option<f64>> = records.iter().map(|r| r.as_ref().map(|r| r.momentum_correction)).collect();
    Ok(Report {
        kind: spec.kind,
        spec: spec.clone(),
        checks,
        notes,
        results: json!({
            "points": points,
            "slopes": slopes,
            "functionals": functionals,
            "momentum_correction": corrections,
        }),
        traces: nus.iter().copied().zip(traces).collect(),
        spectrum: Vec::new(),
        dim: spec.base.dim,
        wide,
    })
}

/// Co-evolution of the compressible and the incompressible systems.
#[derive(Debug, Clone, Serialize)]
pub struct LimitRecord {
    pub nu: f64,
    pub times: Vec<f64>,
    /// `||PM - v||_{m-1}^2 + ||psi - phi||_{m-1, L^2}^2`.
    pub err: Vec<f64>,
    /// `b(t) err(t)`.
    pub weighted: Vec<f64>,
    /// `err` at the probe times.
    pub probes: Vec<(f64, f64)>,
}

/// Limit error between the two states.
pub fn limit_error(model: &Model, c: &CoupledState, i: &IncompressibleState) -> f64 {
    let t = &model.torus;
    let m = model.params.sobolev_m as i32 - 1;
    let pm = t.project(&momentum(t, c));
    let dv = pm.sub(&i.v);
    let dpsi = c.psi.field.sub(&i.phi.field);
    t.sobolev_norm(&dv, m).powi(2) + t.sobolev_norm(&dpsi, m).powi(2)
}

/// Evolves both systems to `model.params.t_final`, recording the error
/// every `stride` steps and at every probe time.
pub fn compare_limit(
    model: &Model,
    c0: &CoupledState,
    i0: &IncompressibleState,
    scheme: Scheme,
    compressible: Dynamics,
    stride: usize,
    probes: &[f64],
) -> Result<LimitRecord, HarnessError> {
    let p = &model.params;
    let sc = Stepper::<CoupledState>::new(model, scheme, compressible)?;
    let si = Stepper::<IncompressibleState>::new(model, scheme, Dynamics::default())?;
    let steps = step_count(p.dt, p.t_final);
    let probe_steps: Vec<usize> = probes.iter().map(|t| step_count(p.dt, *t)).collect();
    let mut rec = LimitRecord { nu: p.nu, times: vec![], err: vec![], weighted: vec![], probes: vec![] };
    let (mut c, mut i) = (c0.clone(), i0.clone());
    for k in 0..=steps {
        if k > 0 {
            c = sc.step(&c)?;
            i = si.step(&i)?;
        }
        let is_probe = probe_steps.contains(&k);
        if k % stride == 0 || k == steps || is_probe {
            let e = limit_error(model, &c, &i);
            rec.times.push(c.t);
            rec.err.push(e);
            rec.weighted.push(weight_b(c.t, p) * e);
        }
        for (j, &ps) in probe_steps.iter().enumerate() {
            if ps == k {
                rec.probes.push((probes[j], *rec.err.last().expect("sampled")));
            }
        }
    }
    Ok(rec)
}

fn run_limit_compare(spec: &ExperimentSpec) -> Result<Report, HarnessError> {
    let nus = spec.nus();
    let horizon = spec.probes.iter().copied().fold(spec.base.t_final, f64::max);
    let with_horizon = |nu: f64| {
        let mut p = spec.params_for(nu);
        p.t_final = p.t_final.max(horizon);
        p
    };
    let reference = Model::new(&with_horizon(spec.base.nu))?;
    let draw = draw_initial(&reference, spec.base.seed);
    let alpha = initial_amplitude(&reference, &draw, spec.eps);
    let records: Vec<LimitRecord> = nus
        .par_iter()
        .map(|&nu| {
            let model = reference.with_params(&with_horizon(nu))?;
            let (c0, i0) = make_limit_pair(&model, &draw, alpha, spec.eps, spec.mismatch)?;
            compare_limit(&model, &c0, &i0, spec.scheme, Dynamics::default(), spec.stride, &spec.probes)
        })
        .collect::<Result<_, _>>()?;
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    for r in &records {
        let w0 = r.weighted[0];
        let ratio = sup(&r.weighted) / w0;
        checks.push(Check::at_most(label("weighted_error_growth", r.nu), ratio, 10.0));
    }
    let mut slopes = Vec::new();
    if nus.len() >= 3 {
        for (j, &t) in spec.probes.iter().enumerate() {
            let errs: Vec<f64> = records.iter().map(|r| r.probes[j].1).collect();
            let s = fit_power(&nus, &errs)?;
            checks.push(Check::within(format!("err_slope[t={t}]"), s, -1.3, -0.7));
            slopes.push(json!({ "t": t, "slope": s }));
        }
    } else {
        notes.push("insufficient for power fit".to_string());
    }
    let mut wide = WideTable::new("t");
    for r in &records {
        wide.add_column(format!("err@{}", r.nu), r.times.iter().copied().zip(r.err.iter().copied()));
        wide.add_column(format!("b_err@{}", r.nu), r.times.iter().copied().zip(r.weighted.iter().copied()));
    }
    let summary: Vec<Value> = records
        .iter()
        .map(|r| json!({ "nu": r.nu, "err0": r.err[0], "probes": r.probes, "sup_weighted": sup(&r.weighted) }))
        .collect();
    Ok(Report {
        kind: spec.kind,
        spec: spec.clone(),
        checks,
        notes,
        results: json!({ "alpha": alpha, "runs": summary, "slopes": slopes }),
        traces: Vec::new(),
        spectrum: Vec::new(),
        dim: reference.dim(),
        wide,
    })
}
