//! Experiment configuration files.
//!
//! A config is a flat TOML document (`key = value` lines). Unknown keys are
//! rejected so that a misspelt knob such as `lamda` fails loudly. An optional
//! `kind = "ellipse"` line selects the classification experiment; anything
//! else is a particle experiment.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{DynamicsError, HyperParams, Method};
use crate::objectives::{build_objective, Objective, ObjectiveError, ObjectiveParams};
use crate::resnet::{EllipseSpec, LossScale, Scheme, TrainOptions};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("invalid {key}: {reason}")]
    Invalid { key: &'static str, reason: String },
    #[error("unknown preset {0:?} (see `presets list`)")]
    UnknownPreset(String),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Params(#[from] DynamicsError),
}

/// An initialization bound: one value for every axis, or one per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bound {
    All(f64),
    PerAxis(Vec<f64>),
}

impl Bound {
    fn expand(&self, key: &'static str, dim: usize) -> Result<Vec<f64>, ConfigError> {
        match self {
            Bound::All(v) => Ok(vec![*v; dim]),
            Bound::PerAxis(v) if v.len() == dim => Ok(v.clone()),
            Bound::PerAxis(v) => Err(ConfigError::Invalid {
                key,
                reason: format!("{} entries for dimension {dim}", v.len()),
            }),
        }
    }
}

fn default_osc_delta() -> f64 {
    ObjectiveParams::default().osc_delta
}
fn default_curvature() -> f64 {
    ObjectiveParams::default().curvature
}
fn default_one() -> usize {
    1
}
fn default_epsilon() -> f64 {
    1.0
}

/// A replicated particle experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub method: Method,
    pub objective: String,
    pub dim: usize,
    #[serde(default = "default_osc_delta")]
    pub osc_delta: f64,
    #[serde(default = "default_curvature")]
    pub curvature: f64,
    pub beta: f64,
    #[serde(default)]
    pub lambda: f64,
    pub gamma: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub outer_dt: f64,
    /// Optional; must equal `outer_dt / inner_steps` when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_dt: Option<f64>,
    pub inner_steps: usize,
    #[serde(default = "default_one")]
    pub burn_in: usize,
    pub agents: usize,
    pub iters: usize,
    #[serde(default)]
    pub smoothing_h: f64,
    #[serde(default = "default_one")]
    pub smoothing_samples: usize,
    pub runs: usize,
    /// At most `i64::MAX`, the largest TOML integer.
    pub seed: u64,
    pub init_lo: Bound,
    pub init_hi: Bound,
    /// Defaults to on for `dim <= 2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_traces: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

impl ExperimentConfig {
    pub fn hyper_params(&self) -> Result<HyperParams, ConfigError> {
        let mut b = HyperParams::builder()
            .beta(self.beta)
            .lambda(self.lambda)
            .gamma(self.gamma)
            .epsilon(self.epsilon)
            .outer_dt(self.outer_dt)
            .inner_steps(self.inner_steps)
            .burn_in(self.burn_in)
            .agents(self.agents)
            .iters(self.iters)
            .smoothing_h(self.smoothing_h)
            .smoothing_samples(self.smoothing_samples);
        if let Some(dt) = self.inner_dt {
            b = b.inner_dt(dt);
        }
        Ok(b.build()?)
    }

    pub fn build_objective(&self) -> Result<Arc<dyn Objective>, ConfigError> {
        let params = ObjectiveParams {
            osc_delta: self.osc_delta,
            curvature: self.curvature,
        };
        Ok(build_objective(&self.objective, self.dim, params)?)
    }

    /// Per-axis `(lo, hi)` of the initial uniform distribution.
    pub fn init_box(&self) -> Result<Vec<(f64, f64)>, ConfigError> {
        let lo = self.init_lo.expand("init_lo", self.dim)?;
        let hi = self.init_hi.expand("init_hi", self.dim)?;
        lo.into_iter()
            .zip(hi)
            .map(|(l, h)| {
                if l.is_finite() && h.is_finite() && l <= h {
                    Ok((l, h))
                } else {
                    Err(ConfigError::Invalid {
                        key: "init_lo",
                        reason: format!("malformed box [{l}, {h}]"),
                    })
                }
            })
            .collect()
    }

    pub fn traces_enabled(&self) -> bool {
        self.record_traces.unwrap_or(self.dim <= 2)
    }

    /// Checks everything that can be checked without running.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.runs == 0 {
            return Err(ConfigError::Invalid {
                key: "runs",
                reason: "must be at least 1".into(),
            });
        }
        self.hyper_params()?;
        self.build_objective()?;
        self.init_box()?;
        Ok(())
    }
}

fn default_grid_x() -> [f64; 2] {
    [-2.0, 2.0]
}
fn default_grid_y() -> [f64; 2] {
    [-4.0, 4.0]
}
fn default_grid_resolution() -> usize {
    161
}

/// The ellipse classification experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EllipseConfig {
    pub name: String,
    pub scheme: Scheme,
    pub method: Method,
    pub seed: u64,
    /// Seed of the dataset; defaults to `seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_seed: Option<u64>,
    pub epochs: usize,
    pub iters_per_epoch: usize,
    pub init_sd: f64,
    pub loss_scale: LossScale,
    pub beta: f64,
    #[serde(default)]
    pub lambda: f64,
    pub gamma: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub outer_dt: f64,
    pub inner_steps: usize,
    #[serde(default = "default_one")]
    pub burn_in: usize,
    #[serde(default = "default_one")]
    pub agents: usize,
    pub n_per_class: usize,
    pub noise_sigma: f64,
    pub train_fraction: f64,
    #[serde(default = "default_grid_x")]
    pub grid_x: [f64; 2],
    #[serde(default = "default_grid_y")]
    pub grid_y: [f64; 2],
    #[serde(default = "default_grid_resolution")]
    pub grid_resolution: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

impl EllipseConfig {
    pub fn hyper_params(&self) -> Result<HyperParams, ConfigError> {
        Ok(HyperParams::builder()
            .beta(self.beta)
            .lambda(self.lambda)
            .gamma(self.gamma)
            .epsilon(self.epsilon)
            .outer_dt(self.outer_dt)
            .inner_steps(self.inner_steps)
            .burn_in(self.burn_in)
            .agents(self.agents)
            .iters(self.iters_per_epoch.max(1))
            .build()?)
    }

    pub fn dataset_spec(&self) -> EllipseSpec {
        EllipseSpec {
            n_per_class: self.n_per_class,
            noise_sigma: self.noise_sigma,
            train_fraction: self.train_fraction,
            ..EllipseSpec::default()
        }
    }

    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            epochs: self.epochs,
            iters_per_epoch: self.iters_per_epoch,
            init_sd: self.init_sd,
            loss_scale: self.loss_scale,
        }
    }

    pub fn data_seed(&self) -> u64 {
        self.data_seed.unwrap_or(self.seed)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.hyper_params()?;
        let invalid = |key, reason: &str| {
            Err(ConfigError::Invalid {
                key,
                reason: reason.into(),
            })
        };
        if self.n_per_class == 0 {
            return invalid("n_per_class", "must be at least 1");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return invalid("train_fraction", "must lie in (0, 1)");
        }
        let n_train = (self.train_fraction * self.n_per_class as f64).round() as usize;
        if n_train == 0 || n_train == self.n_per_class {
            return invalid("train_fraction", "leaves an empty train or test split");
        }
        if self.iters_per_epoch == 0 {
            return invalid("iters_per_epoch", "must be at least 1");
        }
        if !(self.noise_sigma >= 0.0 && self.init_sd >= 0.0) {
            return invalid("noise_sigma", "noise_sigma and init_sd must be non-negative");
        }
        if self.grid_resolution < 2 || self.grid_x[0] >= self.grid_x[1] || self.grid_y[0] >= self.grid_y[1] {
            return invalid(
                "grid_resolution",
                "need a non-empty grid with at least 2 points per axis",
            );
        }
        Ok(())
    }
}

/// Either kind of experiment.
#[derive(Debug, Clone, PartialEq)]
pub enum Config {
    Particles(ExperimentConfig),
    Ellipse(EllipseConfig),
}

impl Config {
    pub fn name(&self) -> &str {
        match self {
            Config::Particles(c) => &c.name,
            Config::Ellipse(c) => &c.name,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Config::Particles(c) => c.seed,
            Config::Ellipse(c) => c.seed,
        }
    }

    pub fn output(&self) -> Option<&str> {
        match self {
            Config::Particles(c) => c.output.as_deref(),
            Config::Ellipse(c) => c.output.as_deref(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match self {
            Config::Particles(c) => c.validate(),
            Config::Ellipse(c) => c.validate(),
        }
    }

    /// Parses a config, applying `key=value` overrides first. Override values
    /// are read as TOML values, falling back to plain strings.
    pub fn parse(text: &str, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        for (key, raw) in overrides {
            table.insert(key.clone(), parse_value(raw));
        }
        let kind = match table.remove("kind") {
            None => "particles".to_string(),
            Some(toml::Value::String(s)) => s,
            Some(other) => {
                return Err(ConfigError::Invalid {
                    key: "kind",
                    reason: format!("expected a string, got {other}"),
                })
            }
        };
        let parse_err = |e: toml::de::Error| ConfigError::Parse(e.to_string());
        let config = match kind.as_str() {
            "particles" => Config::Particles(table.try_into().map_err(parse_err)?),
            "ellipse" => Config::Ellipse(table.try_into().map_err(parse_err)?),
            other => {
                return Err(ConfigError::Invalid {
                    key: "kind",
                    reason: format!("unknown kind {other:?} (expected particles or ellipse)"),
                })
            }
        };
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        let body = match self {
            Config::Particles(c) => toml::to_string(c),
            Config::Ellipse(c) => toml::to_string(c).map(|s| format!("kind = \"ellipse\"\n{s}")),
        };
        body.expect("configs serialize to TOML")
    }
}

fn parse_value(raw: &str) -> toml::Value {
    let probe = format!("v = {raw}");
    match probe.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "t"
method = "mf-sgld"
objective = "camel6"
dim = 2
beta = 10.0
lambda = 2.0
gamma = 0.1
outer_dt = 0.01
inner_steps = 20
agents = 5
iters = 10
runs = 2
seed = 7
init_lo = -2.0
init_hi = [2.0, 1.0]
"#;

    fn particles(c: Config) -> ExperimentConfig {
        match c {
            Config::Particles(c) => c,
            Config::Ellipse(_) => panic!("expected a particle config"),
        }
    }

    #[test]
    fn parses_with_defaults() {
        let c = particles(Config::parse(MINIMAL, &[]).unwrap());
        assert_eq!(c.method, Method::MfSgld);
        assert_eq!(c.epsilon, 1.0);
        assert_eq!(c.burn_in, 1);
        assert_eq!(c.init_box().unwrap(), vec![(-2.0, 2.0), (-2.0, 1.0)]);
        assert!(c.traces_enabled());
        c.validate().unwrap();
        assert!((c.hyper_params().unwrap().inner_dt - 5e-4).abs() < 1e-18);
    }

    #[test]
    fn rejects_unknown_and_missing_keys() {
        let typo = format!("{MINIMAL}lamda = 3.0\n");
        assert!(matches!(Config::parse(&typo, &[]), Err(ConfigError::Parse(_))));
        let missing = MINIMAL.replace("runs = 2\n", "");
        assert!(matches!(Config::parse(&missing, &[]), Err(ConfigError::Parse(_))));
        let wrong_type = MINIMAL.replace("agents = 5", "agents = \"five\"");
        assert!(Config::parse(&wrong_type, &[]).is_err());
        assert!(Config::parse(&format!("kind = \"other\"\n{MINIMAL}"), &[]).is_err());
    }

    #[test]
    fn overrides_apply() {
        let over = [
            ("seed".to_string(), "99".to_string()),
            ("method".to_string(), "hom-sgld".to_string()),
            ("lambda".to_string(), "0.5".to_string()),
        ];
        let c = particles(Config::parse(MINIMAL, &over).unwrap());
        assert_eq!((c.seed, c.method, c.lambda), (99, Method::HomSgld, 0.5));
    }

    #[test]
    fn semantic_validation() {
        let bad_box = MINIMAL.replace("init_hi = [2.0, 1.0]", "init_hi = [2.0, -3.0]");
        assert!(particles(Config::parse(&bad_box, &[]).unwrap()).validate().is_err());
        let wrong_len = MINIMAL.replace("init_hi = [2.0, 1.0]", "init_hi = [2.0]");
        assert!(particles(Config::parse(&wrong_len, &[]).unwrap()).validate().is_err());
        let bad_dt = format!("{MINIMAL}inner_dt = 0.1\n");
        assert!(matches!(
            particles(Config::parse(&bad_dt, &[]).unwrap()).validate(),
            Err(ConfigError::Params(_))
        ));
        let bad_obj = MINIMAL.replace("dim = 2", "dim = 3");
        assert!(matches!(
            particles(Config::parse(&bad_obj, &[]).unwrap()).validate(),
            Err(ConfigError::Objective(_))
        ));
        let degenerate = MINIMAL
            .replace("init_lo = -2.0", "init_lo = 0.0")
            .replace("[2.0, 1.0]", "0.0");
        assert!(particles(Config::parse(&degenerate, &[]).unwrap()).validate().is_ok());
    }

    #[test]
    fn round_trip() {
        let c = Config::parse(MINIMAL, &[]).unwrap();
        assert_eq!(Config::parse(&c.to_toml(), &[]).unwrap(), c);
    }

    #[test]
    fn parse_value_falls_back_to_string() {
        assert_eq!(parse_value("3"), toml::Value::Integer(3));
        assert_eq!(parse_value("[1.0, 2.0]").as_array().unwrap().len(), 2);
        assert_eq!(parse_value("sgld"), toml::Value::String("sgld".into()));
    }
}
