//! Report assembly and the files written for every experiment.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use fene_core::monitor::{functional_history, weight_a, weight_b, EnergyTrace, SAMPLE_COLUMNS};
use fene_core::spectrum::{write_spectrum_csv, SpectrumRow};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentKind, ExperimentSpec};
use crate::HarnessError;

/// One pass/fail flag.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Human-readable acceptance condition.
    pub bound: String,
    pub pass: bool,
}

impl Check {
    pub fn within(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self { name: name.into(), value, bound: format!("[{lo}, {hi}]"), pass: value >= lo && value <= hi }
    }

    pub fn at_most(name: impl Into<String>, value: f64, hi: f64) -> Self {
        Self { name: name.into(), value, bound: format!("<= {hi:e}"), pass: value <= hi }
    }

    pub fn at_least(name: impl Into<String>, value: f64, lo: f64) -> Self {
        Self { name: name.into(), value, bound: format!(">= {lo}"), pass: value >= lo }
    }
}

/// Columns keyed by time; missing cells are left empty.
#[derive(Debug, Clone, Default)]
pub struct WideTable {
    pub key: String,
    pub columns: Vec<String>,
    rows: BTreeMap<u64, Vec<Option<f64>>>,
}

impl WideTable {
    pub fn new(key: &str) -> Self {
        Self { key: key.into(), ..Self::default() }
    }

    /// Adds a column with values at non-negative keys.
    pub fn add_column(&mut self, name: String, points: impl IntoIterator<Item = (f64, f64)>) {
        let col = self.columns.len();
        self.columns.push(name);
        for row in self.rows.values_mut() {
            row.push(None);
        }
        let width = self.columns.len();
        for (k, v) in points {
            // non-negative floats order like their bit patterns
            let row = self.rows.entry(k.to_bits()).or_insert_with(|| vec![None; width]);
            row.resize(width, None);
            row[col] = Some(v);
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        let mut header = vec![self.key.clone()];
        header.extend(self.columns.iter().cloned());
        writeln!(w, "{}", header.join(","))?;
        for (k, row) in &self.rows {
            let mut cells = vec![format!("{:e}", f64::from_bits(*k))];
            cells.extend(row.iter().map(|c| c.map(|v| format!("{v:e}")).unwrap_or_default()));
            writeln!(w, "{}", cells.join(","))?;
        }
        w.flush()
    }
}

/// Everything an experiment produces.
#[derive(Debug, Clone)]
pub struct Report {
    pub kind: ExperimentKind,
    pub spec: ExperimentSpec,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    /// Experiment-specific numbers, written to `summary.json`.
    pub results: Value,
    /// Sampled runs labelled by `nu`.
    pub traces: Vec<(f64, EnergyTrace)>,
    pub spectrum: Vec<SpectrumRow>,
    pub dim: usize,
    pub wide: WideTable,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Contents of `summary.json`; free of timestamps and paths.
    pub fn summary(&self) -> Value {
        let mut spec = serde_json::to_value(&self.spec).expect("spec serializes");
        if let Some(obj) = spec.as_object_mut() {
            obj.remove("output_dir");
        }
        json!({
            "kind": self.kind.name(),
            "all_pass": self.all_pass(),
            "checks": self.checks,
            "notes": self.notes,
            "results": self.results,
            "spec": spec,
        })
    }
}

/// Header of `energy.csv`.
pub fn energy_columns() -> Vec<String> {
    let mut cols = vec!["nu".to_string()];
    cols.extend(SAMPLE_COLUMNS.iter().map(|s| s.to_string()));
    cols.extend(["a", "b", "E_B", "E_P", "E_I", "E_I_m", "E_eta"].map(String::from));
    cols
}

/// Column documentation shipped with every output directory.
pub fn schema(dim: usize) -> Value {
    let mut spectrum = vec!["nu".to_string()];
    spectrum.extend((1..=dim).map(|a| format!("xi_{a}")));
    spectrum.extend(["rank", "re_lambda", "im_lambda"].map(String::from));
    json!({
        "energy.csv": {
            "columns": energy_columns(),
            "notes": "one row per monitor sample; suffix _m is the H^m index and _m1 is H^(m-1); pm is the solenoidal part of the momentum (1 + eta) u; a, b are the time weights; E_* are the running energy functionals",
        },
        "spectrum.csv": {
            "columns": spectrum,
            "notes": "eigenvalues of the coupled mode operator, sorted by descending real part (rank 0 first)",
        },
        "wide.csv": {
            "columns": "first column is the key (t, or |xi| for spectrum runs); every other column is quantity@nu",
        },
        "summary.json": {
            "fields": ["kind", "all_pass", "checks", "notes", "results", "spec"],
            "notes": "deterministic for a fixed spec and seed",
        },
        "metadata.json": {
            "fields": ["created_unix", "version", "command"],
        },
    })
}

fn write_energy(traces: &[(f64, EnergyTrace)], path: &Path) -> Result<(), HarnessError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", energy_columns().join(","))?;
    for (nu, tr) in traces {
        if tr.is_empty() {
            continue;
        }
        let hist = functional_history(tr)?;
        for (s, f) in tr.samples.iter().zip(&hist) {
            let mut row = vec![*nu];
            row.extend(s.values());
            row.extend([weight_a(s.t, &tr.params), weight_b(s.t, &tr.params), f.e_b, f.e_p, f.e_i, f.e_i_m, f.e_eta]);
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `summary.json`, `energy.csv`, `spectrum.csv`, `wide.csv`,
/// `schema.json` and `metadata.json` into `dir`.
pub fn emit_reports(report: &Report, dir: &Path, command: &[String]) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    let summary = serde_json::to_string_pretty(&report.summary())?;
    std::fs::write(dir.join("summary.json"), summary + "\n")?;
    write_energy(&report.traces, &dir.join("energy.csv"))?;
    write_spectrum_csv(&report.spectrum, report.dim, &dir.join("spectrum.csv"))?;
    report.wide.write(&dir.join("wide.csv"))?;
    std::fs::write(dir.join("schema.json"), serde_json::to_string_pretty(&schema(report.dim))? + "\n")?;
    let created = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let meta = json!({
        "created_unix": created,
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
    });
    std::fs::write(dir.join("metadata.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}
