//! Experiment specifications read from TOML.

use std::path::{Path, PathBuf};

use fene_core::fluid::Scheme;
use fene_core::{validate_params, Parameters};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    /// Malformed TOML, a missing required field or an unknown key.
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    Spectrum,
    SweepNu,
    LimitCompare,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::SweepNu => "sweep-nu",
            ExperimentKind::LimitCompare => "limit-compare",
        }
    }

    fn is_dynamic(self) -> bool {
        self != ExperimentKind::Spectrum
    }
}

fn default_stride() -> usize {
    5
}

fn default_scheme() -> Scheme {
    Scheme::Ars222
}

fn default_probes() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}

fn default_mismatch() -> f64 {
    0.5
}

fn default_xi_max() -> i64 {
    4
}

fn default_window() -> f64 {
    0.5
}

/// One experiment. `kind`, `eps` and `output_dir` are required.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    /// Amplitude of the initial data in the smallness norm.
    pub eps: f64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub base: Parameters,
    /// Values of `nu = 2 mu + lambda`; empty means the base value only.
    #[serde(default)]
    pub nu_list: Vec<f64>,
    /// Monitor stride in steps.
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    /// When set, each run lasts `horizon_over_nu * nu` instead of `base.t_final`.
    #[serde(default)]
    pub horizon_over_nu: Option<f64>,
    /// Probe times of the limit comparison.
    #[serde(default = "default_probes")]
    pub probes: Vec<f64>,
    /// Initial momentum mismatch of the limit comparison, in units of `eps nu^-1/2`.
    #[serde(default = "default_mismatch")]
    pub mismatch: f64,
    /// Largest `|xi|_inf` of the spectral scan.
    #[serde(default = "default_xi_max")]
    pub xi_max: i64,
    /// Trailing fraction of samples used by decay fits.
    #[serde(default = "default_window")]
    pub fit_window: f64,
    /// Replace simulations of a sweep by manufactured traces.
    #[serde(default)]
    pub synthetic: bool,
}

impl ExperimentSpec {
    /// A runnable spec of the given kind with default numerics.
    pub fn new(kind: ExperimentKind, eps: f64, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            kind,
            eps,
            output_dir: output_dir.into(),
            base: Parameters::default(),
            nu_list: Vec::new(),
            stride: default_stride(),
            scheme: default_scheme(),
            horizon_over_nu: None,
            probes: default_probes(),
            mismatch: default_mismatch(),
            xi_max: default_xi_max(),
            fit_window: default_window(),
            synthetic: false,
        }
    }

    /// The swept `nu` values, or the base value when the list is empty.
    pub fn nus(&self) -> Vec<f64> {
        if self.nu_list.is_empty() {
            vec![self.base.nu]
        } else {
            self.nu_list.clone()
        }
    }

    /// Base parameters for one `nu`, with the horizon applied.
    pub fn params_for(&self, nu: f64) -> Parameters {
        let mut p = self.base.with_nu(nu);
        if let Some(h) = self.horizon_over_nu {
            p.t_final = h * nu;
        }
        p
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.nu_list.windows(2).any(|w| !(w[1] > w[0])) {
            return bad(format!("nu_list {:?} must be strictly increasing", self.nu_list));
        }
        if self.kind.is_dynamic() && !(self.eps > 0.0) {
            return bad(format!("eps = {} must be > 0 for {}", self.eps, self.kind.name()));
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return bad(format!("eps = {} must be finite and >= 0", self.eps));
        }
        if self.stride == 0 {
            return bad("stride must be >= 1".into());
        }
        if !(self.fit_window > 0.0 && self.fit_window <= 1.0) {
            return bad(format!("fit_window = {} must lie in (0, 1]", self.fit_window));
        }
        if self.xi_max < 1 {
            return bad("xi_max must be >= 1".into());
        }
        if !(self.mismatch >= 0.0) {
            return bad("mismatch must be >= 0".into());
        }
        if self.probes.iter().any(|t| !(*t >= 0.0)) {
            return bad("probe times must be >= 0".into());
        }
        if let Some(h) = self.horizon_over_nu {
            if !(h > 0.0) {
                return bad("horizon_over_nu must be > 0".into());
            }
        }
        for nu in self.nus() {
            let p = self.params_for(nu);
            validate_params(&p).map_err(|e| ConfigError::Invalid(format!("nu = {nu}: {e}")))?;
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }
}

/// Parses and validates a spec. In `base`, giving `nu` without `lambda`
/// sets `lambda = nu - 2 mu`; giving both requires `nu = 2 mu + lambda`.
pub fn parse_config(text: &str) -> Result<ExperimentSpec, ConfigError> {
    let mut spec: ExperimentSpec = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let raw: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let base = raw.get("base").and_then(|b| b.as_table());
    let has = |k: &str| base.is_some_and(|b| b.contains_key(k));
    let b = &mut spec.base;
    if has("nu") && !has("lambda") {
        b.lambda = b.nu - 2.0 * b.mu;
    } else if has("nu") && (b.nu - (2.0 * b.mu + b.lambda)).abs() > 1e-12 * b.nu.abs() {
        return Err(ConfigError::Invalid(format!(
            "base.nu = {} differs from 2 mu + lambda = {}",
            b.nu,
            2.0 * b.mu + b.lambda
        )));
    } else {
        b.nu = 2.0 * b.mu + b.lambda;
    }
    spec.validate()?;
    Ok(spec)
}

pub fn load_config(path: &Path) -> Result<ExperimentSpec, ConfigError> {
    parse_config(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_names_first_missing_field() {
        match parse_config("") {
            Err(ConfigError::Parse(m)) => assert!(m.contains("kind"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn default_spec_round_trips() {
        let spec = ExperimentSpec::new(ExperimentKind::SweepNu, 0.01, "out");
        assert_eq!(parse_config(&spec.to_toml()).unwrap(), spec);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let text = "kind = \"simulate\"\neps = 0.01\noutput_dir = \"o\"\ncolour = 1\n";
        assert!(matches!(parse_config(text), Err(ConfigError::Parse(_))));
        let text = "kind = \"simulate\"\neps = 0.01\noutput_dir = \"o\"\n[base]\nviscosity = 1\n";
        assert!(matches!(parse_config(text), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn nu_sets_lambda() {
        let text = "kind = \"simulate\"\neps = 0.01\noutput_dir = \"o\"\n[base]\nmu = 2.0\nnu = 50.0\n";
        let s = parse_config(text).unwrap();
        assert_eq!(s.base.lambda, 46.0);
        let text = "kind = \"simulate\"\neps = 0.01\noutput_dir = \"o\"\n[base]\nnu = 50.0\nlambda = 3.0\n";
        assert!(matches!(parse_config(text), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn rejects_bad_lists_and_amplitudes() {
        let mut s = ExperimentSpec::new(ExperimentKind::SweepNu, 0.01, "o");
        s.nu_list = vec![100.0, 50.0];
        assert!(matches!(s.validate(), Err(ConfigError::Invalid(_))));
        let s = ExperimentSpec::new(ExperimentKind::Simulate, 0.0, "o");
        assert!(matches!(s.validate(), Err(ConfigError::Invalid(_))));
        assert!(ExperimentSpec::new(ExperimentKind::Spectrum, 0.0, "o").validate().is_ok());
    }
}
