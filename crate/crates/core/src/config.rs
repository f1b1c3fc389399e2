//! The harness configuration file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forge::Category;
use crate::orchestrator::{AnchorPolicy, PlannerSpec, RunConfig, DEFAULT_TRIALS};
use crate::sim::{NoiseConfig, ObservationMode};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {message}")]
    Invalid { path: PathBuf, message: String },
    #[error("{0}")]
    Unresolved(String),
}

fn default_trials() -> u32 {
    DEFAULT_TRIALS
}

fn yes() -> bool {
    true
}

/// One JSON file describing a benchmark run. Relative paths resolve against
/// the file's directory; unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnessConfig {
    /// Scene registry used by `gen`; the built-in kitchen when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub registry: Option<PathBuf>,
    pub suite: PathBuf,
    pub archive: PathBuf,
    pub planner: PlannerSpec,
    #[serde(default = "NoiseConfig::benchmark")]
    pub noise: NoiseConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<AnchorPolicy>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub modes: BTreeMap<Category, ObservationMode>,
    #[serde(default = "default_trials")]
    pub trials: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub parallelism: usize,
    #[serde(default = "yes")]
    pub perturbations: bool,
    #[serde(default)]
    pub multiset_plan_match: bool,
}

impl HarnessConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Invalid { path: origin.to_owned(), message: e.to_string() })
    }

    /// Reads, resolves relative paths and checks that inputs exist.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
        let mut cfg = Self::parse(&text, path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        cfg.check_paths()?;
        Ok(cfg)
    }

    pub fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.suite);
        fix(&mut self.archive);
        if let Some(r) = &mut self.registry {
            fix(r);
        }
    }

    pub fn check_paths(&self) -> Result<(), ConfigError> {
        if let Some(r) = &self.registry {
            if !r.is_file() {
                return Err(ConfigError::Unresolved(format!("registry {} not found", r.display())));
            }
        }
        if !self.suite.join("manifest.json").is_file() {
            return Err(ConfigError::Unresolved(format!("suite {} has no manifest.json", self.suite.display())));
        }
        Ok(())
    }

    pub fn run_config(&self, seed: u64) -> RunConfig {
        RunConfig {
            planner: self.planner.clone(),
            noise: self.noise,
            modes: self.modes.clone(),
            trials: self.trials,
            seed,
            parallelism: self.parallelism,
            perturbations: self.perturbations,
            anchor: self.anchor,
            multiset_plan_match: self.multiset_plan_match,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        let text = r#"{"suite": "s", "archive": "a", "planner": "gt", "bogus": 1}"#;
        assert!(HarnessConfig::parse(text, Path::new("c.json")).is_err());
    }

    #[test]
    fn defaults_and_resolution() {
        let text = r#"{"suite": "s", "archive": "/abs/a", "planner": "scripted"}"#;
        let mut cfg = HarnessConfig::parse(text, Path::new("c.json")).unwrap();
        cfg.resolve(Path::new("/base"));
        assert_eq!(cfg.suite, PathBuf::from("/base/s"));
        assert_eq!(cfg.archive, PathBuf::from("/abs/a"));
        assert_eq!(cfg.trials, DEFAULT_TRIALS);
        assert!(cfg.perturbations);
        assert_eq!(cfg.run_config(7).seed, 7);
        assert!(cfg.check_paths().is_err());
    }

    #[test]
    fn bad_planner_rejected() {
        let text = r#"{"suite": "s", "archive": "a", "planner": "oracle"}"#;
        assert!(HarnessConfig::parse(text, Path::new("c.json")).is_err());
    }
}
