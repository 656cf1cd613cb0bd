use serde::{Deserialize, Serialize};

use super::DistillError;
use crate::augment::AugmentSpec;
use crate::model::Distance;

/// A single learning rate, or a list to sweep with the best run reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LearningRate {
    Single(f64),
    Sweep(Vec<f64>),
}

impl LearningRate {
    pub fn values(&self) -> Vec<f64> {
        match self {
            LearningRate::Single(x) => vec![*x],
            LearningRate::Sweep(v) => v.clone(),
        }
    }
}

/// `"none"`, `"online"` or `{"offline": multiplier}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugMode {
    #[default]
    None,
    Online,
    Offline(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Accuracy,
    Matthews,
}

fn default_alpha() -> f64 {
    0.1
}
fn default_gamma() -> f64 {
    0.5
}
fn default_distance() -> Distance {
    Distance::Mse
}
fn default_batch() -> usize {
    64
}
fn default_steps() -> usize {
    50_000
}
fn default_lr() -> LearningRate {
    LearningRate::Sweep(vec![0.01, 0.001])
}
fn default_eval_every() -> usize {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KDTrainConfig {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_distance")]
    pub distance: Distance,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_lr")]
    pub lr: LearningRate,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
    #[serde(default)]
    pub metric: Metric,
    #[serde(default)]
    pub aug: Option<AugmentSpec>,
    #[serde(default)]
    pub aug_mode: AugMode,
}

impl Default for KDTrainConfig {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            beta: 0.0,
            gamma: default_gamma(),
            distance: default_distance(),
            batch_size: default_batch(),
            steps: default_steps(),
            lr: default_lr(),
            seed: 0,
            eval_every: default_eval_every(),
            metric: Metric::Accuracy,
            aug: None,
            aug_mode: AugMode::None,
        }
    }
}

impl KDTrainConfig {
    pub fn validate(&self) -> Result<(), DistillError> {
        let bad = |m: String| Err(DistillError::InvalidConfig(m));
        for (name, w) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ] {
            if !(0.0..=1.0).contains(&w) {
                return bad(format!("{name} must lie in [0, 1], got {w}"));
            }
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.steps == 0 {
            return bad("steps must be positive".into());
        }
        if self.eval_every == 0 {
            return bad("eval_every must be positive".into());
        }
        let lrs = self.lr.values();
        if lrs.is_empty() || lrs.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return bad("learning rates must be positive".into());
        }
        match self.aug_mode {
            AugMode::None => {}
            AugMode::Offline(0) => return bad("offline multiplier must be at least 1".into()),
            _ if self.aug.is_none() => return bad("aug_mode requires an aug spec".into()),
            _ => {}
        }
        if let Some(spec) = &self.aug {
            spec.validate()?;
        }
        Ok(())
    }

    /// Same config with a single learning rate.
    pub fn with_lr(&self, lr: f64) -> Self {
        Self {
            lr: LearningRate::Single(lr),
            ..self.clone()
        }
    }

    /// Weight on the augmented half of the objective, zero without augmentation.
    pub fn aug_weight(&self) -> f64 {
        match self.aug_mode {
            AugMode::None => 0.0,
            _ => 1.0 - self.gamma,
        }
    }
}
