//! Training objectives and loops: plain fine-tuning, vanilla distillation and
//! distillation with offline or online augmentation.
//!
//! The per-step objective is
//! `gamma * mean(L_KD over the batch) + (1 - gamma) * mean(L'_KD over the augmented batch)`
//! with `L_KD = alpha * CE(y) + (1 - alpha) * Distance` and
//! `L'_KD = beta * CE(y') + (1 - beta) * Distance`.

mod config;
mod train;


use thiserror::Error;

use crate::augment::AugmentError;
use crate::corpus::{CorpusError, Dataset};
use crate::model::{ClassifierParams, Distance, ModelError, Objective};

pub use config::{AugMode, KDTrainConfig, LearningRate, Metric};
pub use train::{
    distill_student, distill_sweep, finetune_student, finetune_sweep, train_teacher, EvalRecord,
    Sweep, TrainContext, TrainLog,
};

#[derive(Debug, Error)]
pub enum DistillError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("loss diverged at step {step}")]
    Divergence { step: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// `alpha * CE(softmax(student), label) + (1 - alpha) * Distance(student, teacher)`.
pub fn kd_example_loss(
    student_logits: &[f64],
    teacher_logits: &[f64],
    label: usize,
    alpha: f64,
    distance: Distance,
) -> Result<f64, ModelError> {
    Ok(
        Objective::distill(Some(label), alpha, teacher_logits, distance)
            .evaluate(student_logits)?
            .0,
    )
}

/// Loss on an augmented example. The label term is dropped when `beta == 0`,
/// in which case `aug_label` may be `None`.
pub fn aug_kd_example_loss(
    student_logits: &[f64],
    teacher_logits: &[f64],
    aug_label: Option<usize>,
    beta: f64,
    distance: Distance,
) -> Result<f64, ModelError> {
    Ok(
        Objective::distill(aug_label, beta, teacher_logits, distance)
            .evaluate(student_logits)?
            .0,
    )
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// `gamma * mean(kd) + (1 - gamma) * mean(aug)`. An empty augmented batch
/// means no augmentation, so only the first term is kept.
pub fn combined_batch_loss(kd_losses: &[f64], aug_losses: &[f64], gamma: f64) -> f64 {
    let kd = mean(kd_losses);
    if aug_losses.is_empty() || gamma == 1.0 {
        return kd;
    }
    gamma * kd + (1.0 - gamma) * mean(aug_losses)
}

/// Argmax predictions scored with `metric`.
pub fn evaluate(
    params: &ClassifierParams,
    data: &Dataset,
    metric: Metric,
) -> Result<f64, DistillError> {
    let preds = data
        .examples()
        .iter()
        .map(|ex| params.predict(&ex.sequence))
        .collect::<Result<Vec<_>, _>>()?;
    let labels = data.labels();
    Ok(match metric {
        Metric::Accuracy => crate::corpus::accuracy(&preds, &labels)?,
        Metric::Matthews => crate::corpus::matthews(&preds, &labels)?,
    })
}
