//! Experiment configuration: JSON with unknown keys rejected.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow_eps::BranchPolicy;
use crate::geometry::{Point, Polyrectangle};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "type")]
pub enum ShapeSpec {
    Rectangle { l1: f64, l2: f64 },
    Polyrectangle { vertices: Vec<[f64; 2]> },
    Circle { radius: f64 },
}

impl ShapeSpec {
    pub fn to_polyrectangle(&self) -> Result<Polyrectangle, ConfigError> {
        match self {
            ShapeSpec::Rectangle { l1, l2 } => {
                if *l1 <= 0.0 || *l2 <= 0.0 {
                    return Err(ConfigError::Invalid("rectangle sides must be positive".into()));
                }
                Ok(Polyrectangle::centered(*l1, *l2))
            }
            ShapeSpec::Polyrectangle { vertices } => {
                let pts = vertices.iter().map(|v| Point::new(v[0], v[1])).collect();
                Polyrectangle::new(pts)
                    .map_err(|e| ConfigError::Invalid(format!("bad polyrectangle: {e}")))
            }
            ShapeSpec::Circle { .. } => Err(ConfigError::Invalid(
                "circle shapes are only valid for the effective convex flow".into(),
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Converge,
    Compare,
    Portrait,
    Single,
}

fn default_samples() -> usize {
    101
}

fn default_dt() -> f64 {
    1e-3
}

fn default_policy() -> BranchPolicy {
    BranchPolicy::Cross
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub alpha: f64,
    pub beta: f64,
    pub kind: ExperimentKind,
    pub shape: ShapeSpec,
    /// Second shape for comparison experiments (must contain `shape`).
    #[serde(default)]
    pub outer_shape: Option<ShapeSpec>,
    #[serde(default)]
    pub epsilons: Vec<f64>,
    pub t_max: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub output_prefix: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_policy")]
    pub branch_policy: BranchPolicy,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.alpha < 0.0 && self.beta > 0.0) {
            return Err(ConfigError::Invalid(format!(
                "need alpha < 0 < beta, got alpha={}, beta={}",
                self.alpha, self.beta
            )));
        }
        if !(self.t_max > 0.0) {
            return Err(ConfigError::Invalid("t_max must be positive".into()));
        }
        if !(self.dt > 0.0) {
            return Err(ConfigError::Invalid("dt must be positive".into()));
        }
        let cap = 8.0 / (self.beta - self.alpha);
        for w in self.epsilons.windows(2) {
            if w[1] >= w[0] {
                return Err(ConfigError::Invalid(
                    "epsilon list must be strictly decreasing".into(),
                ));
            }
        }
        for &e in &self.epsilons {
            if !(e > 0.0 && e < cap) {
                return Err(ConfigError::Invalid(format!(
                    "epsilon {e} outside (0, {cap}) for these phase values"
                )));
            }
        }
        Ok(())
    }
}
