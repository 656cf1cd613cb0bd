//! Mean-pooled bag-of-embeddings classifier with a two-layer MLP head.
//!
//! `logits = W2 * relu(W1 * pooled + b1) + b2`, where `pooled` is the mean
//! embedding of each segment (concatenated in paired mode). Gradients are
//! computed by hand.

mod checkpoint;
mod loss;
mod optim;


use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{EmbeddingTable, TokenSequence};
use crate::seed::{self, rng_from};

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_SCHEMA};
pub use loss::{
    cross_entropy, kl_distance, mse_distance, softmax, Distance, Objective, PROB_FLOOR,
};
pub use optim::{adam_step, OptimizerState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid dimensions: {0}")]
    InvalidDims(String),
    #[error("empty segment")]
    EmptySegment,
    #[error("paired mode requires a segment break")]
    MissingSegmentBreak,
    #[error("token id {id} out of range for vocabulary of {vocab}")]
    TokenOutOfRange { id: u32, vocab: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("label required when the cross-entropy weight is positive")]
    MissingLabel,
    #[error("teacher logits required when the distance weight is positive")]
    MissingTeacher,
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed checkpoint: {0}")]
    Format(String),
    #[error("checkpoint checksum mismatch")]
    Checksum,
}

/// Whether the segment break (if any) is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputMode {
    Single,
    Paired,
}

impl InputMode {
    pub fn segments(self) -> usize {
        match self {
            InputMode::Single => 1,
            InputMode::Paired => 2,
        }
    }
}

/// Architecture of a classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelShape {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub num_classes: usize,
    pub mode: InputMode,
}

impl ModelShape {
    pub fn input_width(&self) -> usize {
        self.embed_dim * self.mode.segments()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.vocab_size == 0
            || self.embed_dim == 0
            || self.hidden_dim == 0
            || self.num_classes == 0
        {
            return Err(ModelError::InvalidDims(format!("{self:?}")));
        }
        Ok(())
    }
}

/// All trainable tensors, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierParams {
    pub shape: ModelShape,
    /// `V x E`
    pub emb: Vec<f64>,
    /// `H x In`
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `C x H`
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Same layout as [`ClassifierParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub emb: Vec<f64>,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Gradients {
    pub fn zeros(shape: &ModelShape) -> Self {
        let (v, e, h, c, i) = dims(shape);
        Self {
            emb: vec![0.0; v * e],
            w1: vec![0.0; h * i],
            b1: vec![0.0; h],
            w2: vec![0.0; c * h],
            b2: vec![0.0; c],
        }
    }

    pub fn tensors(&self) -> [&[f64]; 5] {
        [&self.emb, &self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .fold(0.0f64, |m, g| m.max(g.abs()))
    }
}

fn dims(s: &ModelShape) -> (usize, usize, usize, usize, usize) {
    (
        s.vocab_size,
        s.embed_dim,
        s.hidden_dim,
        s.num_classes,
        s.input_width(),
    )
}

fn uniform(rng: &mut impl Rng, n: usize, bound: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-bound..=bound)).collect()
}

/// Random initialisation. Embeddings are copied from `pretrained` when given,
/// otherwise drawn from U(-0.1, 0.1).
pub fn init(
    shape: ModelShape,
    seed: u64,
    pretrained: Option<&EmbeddingTable>,
) -> Result<ClassifierParams, ModelError> {
    shape.validate()?;
    let (v, e, h, c, i) = dims(&shape);
    let mut rng = rng_from(seed, &[seed::stream::INIT]);
    let emb = match pretrained {
        Some(table) => {
            if table.dim() != e || table.len() != v {
                return Err(ModelError::InvalidDims(format!(
                    "embedding table is {}x{}, model expects {v}x{e}",
                    table.len(),
                    table.dim()
                )));
            }
            table.as_slice().to_vec()
        }
        None => uniform(&mut rng, v * e, 0.1),
    };
    let s1 = (6.0 / (i + h) as f64).sqrt();
    let s2 = (6.0 / (h + c) as f64).sqrt();
    let w1 = uniform(&mut rng, h * i, s1);
    let b1 = uniform(&mut rng, h, s1);
    let w2 = uniform(&mut rng, c * h, s2);
    let b2 = uniform(&mut rng, c, s2);
    Ok(ClassifierParams {
        shape,
        emb,
        w1,
        b1,
        w2,
        b2,
    })
}

/// Intermediate values kept for the backward pass.
struct Trace {
    ranges: Vec<std::ops::Range<usize>>,
    pooled: Vec<f64>,
    pre: Vec<f64>,
    hidden: Vec<f64>,
    logits: Vec<f64>,
}

impl ClassifierParams {
    pub fn shape(&self) -> &ModelShape {
        &self.shape
    }

    pub fn num_classes(&self) -> usize {
        self.shape.num_classes
    }

    fn pool_ranges(&self, seq: &TokenSequence) -> Result<Vec<std::ops::Range<usize>>, ModelError> {
        let ranges = match self.shape.mode {
            InputMode::Single => vec![0..seq.len()],
            InputMode::Paired => {
                if seq.segment_break().is_none() {
                    return Err(ModelError::MissingSegmentBreak);
                }
                seq.segment_ranges()
            }
        };
        if ranges.iter().any(|r| r.is_empty()) {
            return Err(ModelError::EmptySegment);
        }
        let v = self.shape.vocab_size;
        if let Some(&id) = seq.ids().iter().find(|&&id| id as usize >= v) {
            return Err(ModelError::TokenOutOfRange { id, vocab: v });
        }
        Ok(ranges)
    }

    fn trace(&self, seq: &TokenSequence) -> Result<Trace, ModelError> {
        let (_, e, h, c, inw) = dims(&self.shape);
        let ranges = self.pool_ranges(seq)?;
        let mut pooled = vec![0.0; inw];
        for (s, r) in ranges.iter().enumerate() {
            let out = &mut pooled[s * e..(s + 1) * e];
            for &id in &seq.ids()[r.clone()] {
                let row = &self.emb[id as usize * e..(id as usize + 1) * e];
                for (o, x) in out.iter_mut().zip(row) {
                    *o += x;
                }
            }
            let n = r.len() as f64;
            out.iter_mut().for_each(|o| *o /= n);
        }
        let mut pre = self.b1.clone();
        for (j, p) in pre.iter_mut().enumerate() {
            *p += dot(&self.w1[j * inw..(j + 1) * inw], &pooled);
        }
        let hidden: Vec<f64> = pre.iter().map(|&x| x.max(0.0)).collect();
        let mut logits = self.b2.clone();
        for (k, l) in logits.iter_mut().enumerate() {
            *l += dot(&self.w2[k * h..(k + 1) * h], &hidden);
        }
        debug_assert_eq!(logits.len(), c);
        Ok(Trace {
            ranges,
            pooled,
            pre,
            hidden,
            logits,
        })
    }

    pub fn forward(&self, seq: &TokenSequence) -> Result<Vec<f64>, ModelError> {
        Ok(self.trace(seq)?.logits)
    }

    pub fn predict(&self, seq: &TokenSequence) -> Result<usize, ModelError> {
        Ok(crate::corpus::argmax(&self.forward(seq)?))
    }

    pub fn tensors(&self) -> [&[f64]; 5] {
        [&self.emb, &self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub(crate) fn tensors_mut(&mut self) -> [&mut Vec<f64>; 5] {
        [
            &mut self.emb,
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|x| x.is_finite()))
    }

    /// Accumulates `scale * dL/dparams` for one example into `grads`, given
    /// `dL/dlogits`.
    fn accumulate(
        &self,
        seq: &TokenSequence,
        tr: &Trace,
        dlogits: &[f64],
        scale: f64,
        grads: &mut Gradients,
    ) {
        let (_, e, h, _, inw) = dims(&self.shape);
        let mut dhidden = vec![0.0; h];
        for (k, &dz) in dlogits.iter().enumerate() {
            let g = scale * dz;
            if g == 0.0 {
                continue;
            }
            grads.b2[k] += g;
            let row = &self.w2[k * h..(k + 1) * h];
            let grow = &mut grads.w2[k * h..(k + 1) * h];
            for j in 0..h {
                grow[j] += g * tr.hidden[j];
                dhidden[j] += g * row[j];
            }
        }
        let mut dpooled = vec![0.0; inw];
        for j in 0..h {
            if tr.pre[j] <= 0.0 || dhidden[j] == 0.0 {
                continue;
            }
            let g = dhidden[j];
            grads.b1[j] += g;
            let row = &self.w1[j * inw..(j + 1) * inw];
            let grow = &mut grads.w1[j * inw..(j + 1) * inw];
            for i in 0..inw {
                grow[i] += g * tr.pooled[i];
                dpooled[i] += g * row[i];
            }
        }
        for (s, r) in tr.ranges.iter().enumerate() {
            let n = r.len() as f64;
            let d = &dpooled[s * e..(s + 1) * e];
            for &id in &seq.ids()[r.clone()] {
                let grow = &mut grads.emb[id as usize * e..(id as usize + 1) * e];
                for (g, x) in grow.iter_mut().zip(d) {
                    *g += x / n;
                }
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One weighted term of a batch objective.
#[derive(Debug, Clone, Copy)]
pub struct TrainItem<'a> {
    pub sequence: &'a TokenSequence,
    pub objective: Objective<'a>,
    pub weight: f64,
}

/// Loss `sum_i weight_i * objective_i(forward(seq_i))` and its gradient.
/// Callers encode batch means through the weights. Items are processed in
/// slice order so the reduction is deterministic.
pub fn backward(
    params: &ClassifierParams,
    items: &[TrainItem<'_>],
) -> Result<(f64, Gradients), ModelError> {
    let mut grads = Gradients::zeros(&params.shape);
    let mut total = 0.0;
    for item in items {
        if item.weight == 0.0 {
            continue;
        }
        let tr = params.trace(item.sequence)?;
        let (loss, dlogits) = item.objective.evaluate(&tr.logits)?;
        total += item.weight * loss;
        params.accumulate(item.sequence, &tr, &dlogits, item.weight, &mut grads);
    }
    Ok((total, grads))
}

/// Loss only, without gradients.
pub fn batch_loss(params: &ClassifierParams, items: &[TrainItem<'_>]) -> Result<f64, ModelError> {
    let mut total = 0.0;
    for item in items {
        if item.weight == 0.0 {
            continue;
        }
        let logits = params.forward(item.sequence)?;
        total += item.weight * item.objective.evaluate(&logits)?.0;
    }
    Ok(total)
}
