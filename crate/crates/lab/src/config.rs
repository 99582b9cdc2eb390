//! Experiment configuration: one JSON document, unknown keys rejected.
//!
//! Precedence is built-in defaults, then the file, then `key=value`
//! overrides.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use ewens_pitman_core::CrpParams;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    CrpLln,
    CltWQuenched,
    CltY,
    JointClt,
    KernelIdentity,
    PoissonizationCoupling,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::CrpLln => "crp-lln",
            ExperimentKind::CltWQuenched => "clt-w-quenched",
            ExperimentKind::CltY => "clt-y",
            ExperimentKind::JointClt => "joint-clt",
            ExperimentKind::KernelIdentity => "kernel-identity",
            ExperimentKind::PoissonizationCoupling => "poissonization-coupling",
        }
    }

    /// Kinds whose frequency realizations may come from the GEM route and
    /// therefore need an explicit truncation when `θ ≠ 0`.
    fn samples_gem(self) -> bool {
        matches!(self, ExperimentKind::CrpLln | ExperimentKind::CltWQuenched)
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A single sample size or a list of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SampleSizes {
    One(u64),
    Many(Vec<u64>),
}

impl SampleSizes {
    pub fn values(&self) -> Vec<u64> {
        match self {
            SampleSizes::One(n) => vec![*n],
            SampleSizes::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub alpha: f64,
    #[serde(default)]
    pub theta: f64,
    pub n: SampleSizes,
    #[serde(default = "default_replicates")]
    pub replicates: u64,
    /// Index of the first replicate; replicate `r` always uses the stream
    /// `derive_seed(seed, r)`, so split runs merge exactly.
    #[serde(default)]
    pub replicate_offset: u64,
    /// Number of frequencies `J`; chosen from the tail-mass tolerance when
    /// absent.
    #[serde(default)]
    pub truncation: Option<usize>,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    /// Constant `c` of the window schedule `ε_n = c / log log n`.
    #[serde(default = "default_epsilon_c")]
    pub epsilon_c: f64,
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Write full trajectories, not only replicate summaries.
    #[serde(default)]
    pub trajectories: bool,
    /// Pinned realization for quenched designs.
    #[serde(default)]
    pub realization: Option<PathBuf>,
}

fn default_replicates() -> u64 {
    1000
}

fn default_grid_size() -> usize {
    100
}

fn default_epsilon_c() -> f64 {
    1.0
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    /// Parses a document, applying overrides on top of it.
    pub fn from_value(mut doc: Value, overrides: &[String]) -> Result<Self> {
        let obj = doc
            .as_object_mut()
            .ok_or_else(|| LabError::Config("top level must be a JSON object".into()))?;
        apply_overrides(obj, overrides)?;
        let config: ExperimentConfig =
            serde_json::from_value(doc).map_err(|e| LabError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_str(text: &str, overrides: &[String]) -> Result<Self> {
        let doc: Value = serde_json::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        Self::from_value(doc, overrides)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        Self::from_str(&text, overrides)
            .map_err(|e| match e {
                LabError::Config(m) => LabError::Config(format!("{}: {m}", path.display())),
                other => other,
            })
    }

    pub fn sample_sizes(&self) -> Vec<u64> {
        self.n.values()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(LabError::Config(m));
        if let Err(e) = CrpParams::new(self.alpha, self.theta) {
            return bad(e.to_string());
        }
        let ns = self.sample_sizes();
        if ns.is_empty() {
            return bad("n must not be empty".into());
        }
        if ns.contains(&0) {
            return bad("n must be at least 1".into());
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if self.replicate_offset.checked_add(self.replicates).is_none() {
            return bad("replicate_offset + replicates overflows".into());
        }
        if self.truncation == Some(0) {
            return bad("truncation must be at least 1".into());
        }
        if self.grid_size == 0 {
            return bad("grid_size must be at least 1".into());
        }
        if !(self.epsilon_c > 0.0 && self.epsilon_c.is_finite()) {
            return bad("epsilon_c must be positive".into());
        }
        if self.kind == ExperimentKind::CltY && ns.iter().any(|&n| n < 16) {
            return bad("clt-y needs n >= 16 for the window schedule".into());
        }
        if self.kind.samples_gem() && self.theta != 0.0 && self.truncation.is_none() && self.realization.is_none() {
            return bad(format!("{} with theta != 0 needs an explicit truncation", self.kind));
        }
        Ok(())
    }
}

fn apply_overrides(obj: &mut Map<String, Value>, overrides: &[String]) -> Result<()> {
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| LabError::Config(format!("override `{item}` is not key=value")))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(LabError::Config(format!("override `{item}` has an empty key")));
        }
        // bare words are taken as strings
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        obj.insert(key.to_string(), value);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"kind": "crp-lln", "alpha": 0.5, "n": 100, "seed": 1}"#;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::from_str(MINIMAL, &[]).unwrap();
        assert_eq!(c.theta, 0.0);
        assert_eq!(c.replicates, 1000);
        assert_eq!(c.grid_size, 100);
        assert_eq!(c.sample_sizes(), vec![100]);
        assert_eq!(c.truncation, None);
    }

    #[test]
    fn overrides_take_precedence() {
        let c = ExperimentConfig::from_str(
            MINIMAL,
            &["replicates=7".into(), "n=[10,20]".into(), "output_dir=runs/a".into()],
        )
        .unwrap();
        assert_eq!(c.replicates, 7);
        assert_eq!(c.sample_sizes(), vec![10, 20]);
        assert_eq!(c.output_dir, PathBuf::from("runs/a"));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_domains() {
        let typo = r#"{"kind": "crp-lln", "alpha": 0.5, "n": 100, "seed": 1, "replicate": 5}"#;
        assert!(matches!(ExperimentConfig::from_str(typo, &[]), Err(LabError::Config(_))));
        assert!(ExperimentConfig::from_str(MINIMAL, &["alpha=1.0".into()]).is_err());
        assert!(ExperimentConfig::from_str(MINIMAL, &["theta=-0.5".into()]).is_err());
        assert!(ExperimentConfig::from_str(MINIMAL, &["replicates=0".into()]).is_err());
        assert!(ExperimentConfig::from_str(MINIMAL, &["bogus=1".into()]).is_err());
        assert!(ExperimentConfig::from_str(MINIMAL, &["noequals".into()]).is_err());
        assert!(ExperimentConfig::from_str(MINIMAL, &["theta=0.5".into()]).is_err());
        assert!(ExperimentConfig::from_str(MINIMAL, &["theta=0.5".into(), "truncation=500".into()]).is_ok());
    }

    #[test]
    fn round_trips_through_json() {
        let c = ExperimentConfig::from_str(MINIMAL, &["n=[5,6]".into()]).unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_str(&text, &[]).unwrap(), c);
    }
}
