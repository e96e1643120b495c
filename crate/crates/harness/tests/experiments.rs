use fene_core::fluid::{Dynamics, Scheme};
use fene_core::state::{draw_initial, make_limit_pair};
use fene_core::{CoupledState, IncompressibleState, Model, Parameters};
use fene_harness::experiments::{compare_limit, synthetic_trace};
use fene_harness::{emit_reports, load_config, run_experiment, ExperimentKind, ExperimentSpec};

fn small(kind: ExperimentKind, dir: &std::path::Path) -> ExperimentSpec {
    let mut s = ExperimentSpec::new(kind, 0.01, dir);
    s.base = Parameters { grid_n: 16, rad_order: 3, ang_order: 2, dt: 0.05, t_final: 1.0, ..Parameters::default() };
    s.stride = 1;
    s
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = small(ExperimentKind::LimitCompare, dir.path());
    spec.nu_list = vec![50.0, 100.0];
    spec.probes = vec![0.25, 0.5];
    let path = dir.path().join("spec.toml");
    std::fs::write(&path, spec.to_toml()).unwrap();
    assert_eq!(load_config(&path).unwrap(), spec);
}

#[test]
fn summary_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        let spec = small(ExperimentKind::Simulate, dir);
        let report = run_experiment(&spec, 2).unwrap();
        emit_reports(&report, dir, &[]).unwrap();
    }
    for file in ["summary.json", "energy.csv", "wide.csv"] {
        let x = std::fs::read(a.path().join(file)).unwrap();
        let y = std::fs::read(b.path().join(file)).unwrap();
        assert!(x == y, "{file} differs");
    }
}

#[test]
fn simulate_reports_conservation() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&small(ExperimentKind::Simulate, dir.path()), 1).unwrap();
    assert!(report.all_pass(), "{:#?}", report.checks);
    assert_eq!(report.traces.len(), 1);
    assert_eq!(report.traces[0].1.len(), 21);
}

#[test]
fn removing_a_nu_leaves_other_runs_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let mut both = small(ExperimentKind::SweepNu, dir.path());
    both.nu_list = vec![50.0, 100.0];
    let mut one = both.clone();
    one.nu_list = vec![100.0];
    let rb = run_experiment(&both, 2).unwrap();
    let ro = run_experiment(&one, 1).unwrap();
    assert_eq!(rb.results["points"][1], ro.results["points"][0]);
    assert_eq!(rb.traces[1].1.samples, ro.traces[0].1.samples);
    assert!(ro.notes.iter().any(|n| n == "insufficient for power fit"));
    assert!(ro.results["slopes"].is_null());
    assert!(ro.results["points"][0]["rate_u_m"].as_f64().unwrap() > 0.0);
}

#[test]
fn synthetic_sweep_recovers_exponents() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = ExperimentSpec::new(ExperimentKind::SweepNu, 0.01, dir.path());
    spec.nu_list = vec![50.0, 100.0, 200.0, 400.0];
    spec.synthetic = true;
    let report = run_experiment(&spec, 1).unwrap();
    let slopes = &report.results["slopes"];
    for key in ["sup_eta_m", "sup_qu_m"] {
        let s = slopes[key].as_f64().unwrap();
        assert!((s + 0.5).abs() <= 1e-6, "{key}: {s}");
    }
    for (pt, nu) in report.results["points"].as_array().unwrap().iter().zip(&spec.nu_list) {
        let r = pt["rate_u_m"].as_f64().unwrap();
        assert!((r - 1.0 / nu).abs() <= 1e-6 / nu, "{r} vs {}", 1.0 / nu);
        let ratio = pt["rate_pm_m1_half"].as_f64().unwrap() / pt["rate_u_m_half"].as_f64().unwrap();
        assert!((ratio - 3.0).abs() < 1e-9);
    }
    assert!(report.all_pass(), "{:#?}", report.checks);
}

#[test]
fn synthetic_trace_matches_formula() {
    let p = Parameters::default().with_nu(200.0);
    let tr = synthetic_trace(&p).unwrap();
    let s = &tr.samples[40];
    assert!((s.eta_m - 200f64.powf(-0.5) * (-s.t / 200.0).exp()).abs() < 1e-15);
}

fn limit_model(nu: f64) -> Model {
    let p = Parameters { grid_n: 16, rad_order: 3, ang_order: 2, dt: 0.05, t_final: 1.0, ..Parameters::default() };
    Model::new(&p.with_nu(nu)).unwrap()
}

#[test]
fn zero_amplitude_gives_zero_error() {
    let model = limit_model(100.0);
    let draw = draw_initial(&model, 3);
    let (c0, i0) = make_limit_pair(&model, &draw, 0.0, 0.0, 0.5).unwrap();
    let rec = compare_limit(&model, &c0, &i0, Scheme::Ars222, Dynamics::default(), 1, &[0.5]).unwrap();
    assert!(rec.err.iter().all(|e| *e == 0.0), "{:?}", rec.err);
}

#[test]
fn surrogate_without_potential_forcing_tracks_the_limit() {
    let model = limit_model(100.0);
    let draw = draw_initial(&model, 5);
    let (_, i0): (CoupledState, IncompressibleState) = make_limit_pair(&model, &draw, 0.05, 0.01, 0.0).unwrap();
    let mut c0 = CoupledState::zeros(&model);
    c0.u = i0.v.clone();
    c0.psi = i0.phi.clone();
    let dynamics = Dynamics { potential_forcing: false, ..Dynamics::default() };
    let rec = compare_limit(&model, &c0, &i0, Scheme::Ars222, dynamics, 1, &[0.5, 1.0]).unwrap();
    let worst = rec.err.iter().copied().fold(0.0, f64::max);
    assert!(worst <= 1e-10, "{worst}");
    assert_eq!(rec.probes.len(), 2);
}

#[test]
fn limit_compare_reports_probe_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = small(ExperimentKind::LimitCompare, dir.path());
    spec.nu_list = vec![50.0, 100.0, 200.0];
    let report = run_experiment(&spec, 2).unwrap();
    for t in ["0.5", "1", "2"] {
        let c = report.check(&format!("err_slope[t={t}]")).expect("slope check");
        assert!(c.value.is_finite());
    }
    assert_eq!(report.results["runs"].as_array().unwrap().len(), 3);
}

#[test]
fn shipped_configs_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut kinds = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let spec = load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(path.file_stem().unwrap().to_str().unwrap(), spec.kind.name());
        kinds.push(spec.kind);
    }
    assert_eq!(kinds.len(), 4);
}
