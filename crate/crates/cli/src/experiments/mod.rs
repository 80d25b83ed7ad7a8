//! Config-driven experiments. Each acceptance criterion maps to exactly one
//! experiment name.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};
use crate::report::ReportBundle;
use crate::seeds::SeedSplitter;

mod cantor_growth;
mod compare_tr;
mod criterion;
mod dini_calculus;
mod kernel_identities;
mod mollify_check;
mod opnorm_sweep;
mod oscillation_profile;
mod sph_decay;

pub use compare_tr::plane_patch_on_cube;

/// Experiment names with the acceptance criteria they cover.
pub const EXPERIMENTS: &[(&str, &[u8])] = &[
    ("kernel-identities", &[1]),
    ("dini-calculus", &[2]),
    ("oscillation-profile", &[3]),
    ("compare-TR", &[4]),
    ("cantor-growth", &[5]),
    ("sph-decay", &[6]),
    ("opnorm-sweep", &[7, 9]),
    ("mollify-check", &[8]),
    ("criterion", &[10]),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub inputs: BTreeMap<String, PathBuf>,
    #[serde(default = "empty_object")]
    pub params: Value,
}

fn empty_object() -> Value {
    Value::Object(Map::new())
}

impl ExperimentConfig {
    pub fn new(experiment: &str) -> Self {
        Self { experiment: experiment.into(), seed: 0, out_dir: None, inputs: BTreeMap::new(), params: empty_object() }
    }

    /// Applies a `key=value` override; the value is parsed as JSON when
    /// possible and kept as a string otherwise.
    pub fn set_param(&mut self, assignment: &str) -> CliResult<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("parameter override must be key=value, got {assignment:?}")))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.into()));
        self.params_mut()?.insert(key.trim().into(), value);
        Ok(())
    }

    fn params_mut(&mut self) -> CliResult<&mut Map<String, Value>> {
        if self.params.is_null() {
            self.params = empty_object();
        }
        self.params.as_object_mut().ok_or_else(|| CliError::Config("params must be a JSON object".into()))
    }

    pub fn validate(&self) -> CliResult<()> {
        if !EXPERIMENTS.iter().any(|(name, _)| *name == self.experiment) {
            let names: Vec<&str> = EXPERIMENTS.iter().map(|(n, _)| *n).collect();
            return Err(CliError::Config(format!(
                "unknown experiment {:?}; expected one of {}",
                self.experiment,
                names.join(", ")
            )));
        }
        if !(self.params.is_object() || self.params.is_null()) {
            return Err(CliError::Config("params must be a JSON object".into()));
        }
        for (key, path) in &self.inputs {
            if !path.exists() {
                return Err(CliError::Config(format!("input {key:?} refers to missing file {}", path.display())));
            }
        }
        Ok(())
    }

    pub(crate) fn params(&self) -> Params<'_> {
        Params { map: self.params.as_object() }
    }
}

/// Typed access to the `params` object with defaults.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Params<'a> {
    map: Option<&'a Map<String, Value>>,
}

impl Params<'_> {
    fn get(&self, key: &str) -> Option<&Value> {
        self.map.and_then(|m| m.get(key))
    }

    pub fn f64(&self, key: &str, default: f64) -> CliResult<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.as_f64().ok_or_else(|| bad(key, "a number", v)),
        }
    }

    pub fn usize(&self, key: &str, default: usize) -> CliResult<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.as_u64().map(|u| u as usize).ok_or_else(|| bad(key, "a nonnegative integer", v)),
        }
    }

    pub fn list_f64(&self, key: &str, default: &[f64]) -> CliResult<Vec<f64>> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => serde_json::from_value(v.clone()).map_err(|_| bad(key, "an array of numbers", v)),
        }
    }

    pub fn list_usize(&self, key: &str, default: &[usize]) -> CliResult<Vec<usize>> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => serde_json::from_value(v.clone()).map_err(|_| bad(key, "an array of integers", v)),
        }
    }

    pub fn parse<T: serde::de::DeserializeOwned>(&self, key: &str) -> CliResult<Option<T>> {
        self.get(key)
            .map(|v| serde_json::from_value(v.clone()).map_err(|e| CliError::Config(format!("param {key:?}: {e}"))))
            .transpose()
    }
}

fn bad(key: &str, what: &str, v: &Value) -> CliError {
    CliError::Config(format!("param {key:?} must be {what}, got {v}"))
}

/// Runs one experiment. Deterministic in `(config, seed)`.
pub fn run_experiment(cfg: &ExperimentConfig) -> CliResult<ReportBundle> {
    cfg.validate()?;
    let seeds = SeedSplitter::new(cfg.seed);
    let mut report = match cfg.experiment.as_str() {
        "kernel-identities" => kernel_identities::run(cfg, &seeds)?,
        "dini-calculus" => dini_calculus::run(cfg, &seeds)?,
        "oscillation-profile" => oscillation_profile::run(cfg, &seeds)?,
        "compare-TR" => compare_tr::run(cfg, &seeds)?,
        "cantor-growth" => cantor_growth::run(cfg, &seeds)?,
        "sph-decay" => sph_decay::run(cfg, &seeds)?,
        "opnorm-sweep" => opnorm_sweep::run(cfg, &seeds)?,
        "mollify-check" => mollify_check::run(cfg, &seeds)?,
        "criterion" => criterion::run(cfg, &seeds)?,
        other => return Err(CliError::Config(format!("unknown experiment {other:?}"))),
    };
    report.params = cfg.params.clone();
    Ok(report)
}

/// `true` iff `values` is strictly decreasing.
pub(crate) fn strictly_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0])
}

pub(crate) fn strictly_increasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] > w[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_experiment_is_a_config_error() {
        let err = run_experiment(&ExperimentConfig::new("warp-drive")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("kernel-identities"));
    }

    #[test]
    fn missing_inputs_are_reported() {
        let mut cfg = ExperimentConfig::new("criterion");
        cfg.inputs.insert("measure".into(), "/nonexistent/m.json".into());
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("/nonexistent/m.json"));
    }

    #[test]
    fn overrides_parse_json_or_strings() {
        let mut cfg = ExperimentConfig::new("criterion");
        cfg.set_param("levels=[1,2]").unwrap();
        cfg.set_param("name=plane").unwrap();
        let p = cfg.params();
        assert_eq!(p.list_usize("levels", &[]).unwrap(), vec![1, 2]);
        assert!(p.f64("name", 0.0).is_err());
        assert!(cfg.set_param("novalue").is_err());
    }

    #[test]
    fn every_criterion_maps_to_one_experiment() {
        for c in 1..=10u8 {
            assert_eq!(EXPERIMENTS.iter().filter(|(_, cs)| cs.contains(&c)).count(), 1, "criterion {c}");
        }
    }
}
