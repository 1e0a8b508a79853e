//! Versioned JSON configuration for `sample-basis` and `verify`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thinbasis_core::{BasisParams, DeltaSpec, ExperimentConfig, Growth, Interval};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Upper-bound monitor over [2, n_max] with its own ψ (normally o(log n)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorSpec {
    pub psi: Growth,
    pub n_max: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    pub k: u32,
    pub s: u32,
    pub eta: f64,
    pub psi: Growth,
    #[serde(default = "Growth::log")]
    pub phi: Growth,
    pub delta: DeltaSpec,
    pub seed: u64,
    #[serde(rename = "X_max")]
    pub x_max: u64,
    pub interval: Interval,
    #[serde(default = "default_big_c")]
    pub big_c: f64,
    #[serde(default = "default_small_c")]
    pub small_c: f64,
    #[serde(default = "default_q_max")]
    pub q_max: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monitor: Option<MonitorSpec>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

fn default_big_c() -> f64 {
    1.0
}

fn default_small_c() -> f64 {
    0.5
}

fn default_q_max() -> u64 {
    60
}

impl RunConfig {
    pub fn params(&self) -> BasisParams {
        BasisParams { k: self.k, s: self.s, eta: self.eta, psi: self.psi, phi: self.phi }
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            params: self.params(),
            seed: self.seed,
            interval: self.interval,
            delta: self.delta,
            big_c: self.big_c,
            small_c: self.small_c,
            q_max: self.q_max,
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(CliError::Config(format!("unsupported schema {}, expected {SCHEMA_VERSION}", self.schema)));
        }
        self.params().validate()?;
        let (_, hi) = self.interval.bounds()?;
        if self.x_max < hi {
            return Err(CliError::Config(format!("X_max = {} is below the interval end {hi}", self.x_max)));
        }
        if self.q_max == 0 {
            return Err(CliError::Config("q_max must be positive".into()));
        }
        if let Some(m) = &self.monitor {
            m.psi.validate()?;
            if m.n_max < 2 || m.n_max > self.x_max {
                return Err(CliError::Config(format!("monitor n_max must lie in [2, X_max], got {}", m.n_max)));
            }
        }
        if self.workers == Some(0) {
            return Err(CliError::Config("workers must be positive".into()));
        }
        Ok(())
    }

    /// Parses and validates; the schema version is checked before any other key.
    pub fn from_json(text: &str) -> CliResult<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
        match value.get("schema").and_then(|v| v.as_u64()) {
            Some(v) if v == SCHEMA_VERSION as u64 => {}
            Some(v) => return Err(CliError::Config(format!("unsupported schema {v}, expected {SCHEMA_VERSION}"))),
            None => return Err(CliError::Config("missing integer \"schema\" key".into())),
        }
        let cfg: RunConfig =
            serde_json::from_value(value).map_err(|e| CliError::Config(format!("schema {SCHEMA_VERSION}: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn preset(name: &str) -> CliResult<Self> {
        let x = 1_000_000;
        let base = RunConfig {
            schema: SCHEMA_VERSION,
            k: 2,
            s: 9,
            eta: 0.5,
            psi: Growth::log(),
            phi: Growth::log(),
            delta: DeltaSpec::Constant { delta: 0.5 },
            seed: 42,
            x_max: x + 13,
            interval: Interval::Short { x, width: None },
            big_c: 1.0,
            small_c: 0.5,
            q_max: 60,
            monitor: Some(MonitorSpec { psi: Growth::SqrtLog { c: 1.0 }, n_max: x }),
            output: OutputSpec::default(),
            workers: None,
        };
        match name {
            "k2s9-thm13" => Ok(base),
            "k3s13" => Ok(RunConfig {
                k: 3,
                s: 13,
                ..base
            }),
            other => Err(CliError::Config(format!("unknown preset {other:?}; known: {}", PRESETS.join(", ")))),
        }
    }
}

pub const PRESETS: [&str; 2] = ["k2s9-thm13", "k3s13"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip_and_validate() {
        for name in PRESETS {
            let cfg = RunConfig::preset(name).unwrap();
            cfg.validate().unwrap();
            let text = serde_json::to_string(&cfg).unwrap();
            assert_eq!(RunConfig::from_json(&text).unwrap(), cfg);
        }
    }

    #[test]
    fn rejects_unknown_keys_and_versions() {
        let mut v = serde_json::to_value(RunConfig::preset("k2s9-thm13").unwrap()).unwrap();
        v["bogus"] = 1.into();
        let err = RunConfig::from_json(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
        assert_eq!(err.exit_code(), 2);

        let mut v = serde_json::to_value(RunConfig::preset("k2s9-thm13").unwrap()).unwrap();
        v["schema"] = 2.into();
        assert!(RunConfig::from_json(&v.to_string()).unwrap_err().to_string().contains("schema 2"));
        v.as_object_mut().unwrap().remove("schema");
        assert!(RunConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn nested_unknown_keys_rejected() {
        let mut v = serde_json::to_value(RunConfig::preset("k2s9-thm13").unwrap()).unwrap();
        v["psi"]["extra"] = 1.into();
        assert!(RunConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn x_max_must_cover_interval() {
        let mut cfg = RunConfig::preset("k2s9-thm13").unwrap();
        cfg.x_max = 10;
        assert!(cfg.validate().is_err());
    }
}
