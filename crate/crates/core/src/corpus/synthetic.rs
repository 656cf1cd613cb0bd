//! Class-conditional unigram corpora and matching embedding tables.
//!
//! Token ids `1..vocab_size` are split into `num_classes` blocks of "signal"
//! tokens followed by a block of neutral tokens. A class draws its own signal
//! tokens with weight `1 + class_token_bias` and every other token with weight
//! 1, so a bias of zero removes all class information and an infinite bias
//! restricts each class to its own block.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{
    CorpusError, Dataset, EmbeddingTable, LabeledExample, Result, TokenId, TokenSequence,
    Vocabulary, UNK_TOKEN,
};
use crate::seed::rng_from;

fn default_signal_fraction() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticTaskSpec {
    pub num_classes: usize,
    /// Size of the task vocabulary, including the unknown token at id 0.
    pub vocab_size: usize,
    /// Inclusive range of segment lengths.
    pub seq_len_range: [usize; 2],
    pub class_token_bias: f64,
    pub seed: u64,
    /// Share of the non-UNK vocabulary that carries class signal.
    #[serde(default = "default_signal_fraction")]
    pub signal_fraction: f64,
    /// Emit two-segment inputs.
    #[serde(default)]
    pub paired: bool,
}

impl SyntheticTaskSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CorpusError::InvalidSpec(m));
        let [lo, hi] = self.seq_len_range;
        if self.num_classes < 2 {
            return bad("num_classes must be at least 2".into());
        }
        if self.vocab_size < self.num_classes {
            return bad("vocab_size must be at least num_classes".into());
        }
        if lo < 1 || hi < lo {
            return bad(format!("invalid seq_len_range [{lo}, {hi}]"));
        }
        if self.class_token_bias.is_nan() || self.class_token_bias < 0.0 {
            return bad("class_token_bias must be non-negative".into());
        }
        if !(self.signal_fraction > 0.0 && self.signal_fraction <= 1.0) {
            return bad("signal_fraction must lie in (0, 1]".into());
        }
        if self.block_size() == 0 {
            return bad("vocabulary too small for one signal token per class".into());
        }
        Ok(())
    }

    /// Signal tokens per class.
    pub fn block_size(&self) -> usize {
        let usable = self.vocab_size.saturating_sub(1);
        ((usable as f64 * self.signal_fraction).floor() as usize) / self.num_classes
    }

    /// Class whose signal block contains `id`, if any.
    pub fn signal_class(&self, id: TokenId) -> Option<usize> {
        let b = self.block_size();
        let id = id as usize;
        (id >= 1 && id < 1 + b * self.num_classes).then(|| (id - 1) / b)
    }

    fn class_weights(&self, class: usize) -> Vec<f64> {
        let mut w = vec![0.0; self.vocab_size];
        for (id, slot) in w.iter_mut().enumerate().skip(1) {
            let own = self.signal_class(id as TokenId) == Some(class);
            *slot = if self.class_token_bias.is_infinite() {
                if own {
                    1.0
                } else {
                    0.0
                }
            } else if own {
                1.0 + self.class_token_bias
            } else {
                1.0
            };
        }
        w
    }
}

/// Draws `count` examples: class uniform, segment length uniform in range,
/// tokens i.i.d. from the class distribution.
pub fn generate_synthetic(spec: &SyntheticTaskSpec, count: usize) -> Result<Dataset> {
    spec.validate()?;
    let samplers = (0..spec.num_classes)
        .map(|c| {
            WeightedIndex::new(spec.class_weights(c))
                .map_err(|e| CorpusError::InvalidSpec(e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rng = rng_from(spec.seed, &[]);
    let [lo, hi] = spec.seq_len_range;
    let mut examples = Vec::with_capacity(count);
    for _ in 0..count {
        let label = rng.random_range(0..spec.num_classes);
        let segment = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<TokenId> {
            let len = rng.random_range(lo..=hi);
            (0..len)
                .map(|_| samplers[label].sample(rng) as TokenId)
                .collect()
        };
        let sequence = if spec.paired {
            let a = segment(&mut rng);
            let b = segment(&mut rng);
            TokenSequence::paired(&a, &b)?
        } else {
            TokenSequence::single(segment(&mut rng))
        };
        examples.push(LabeledExample { sequence, label });
    }
    Dataset::new(examples, spec.num_classes)
}

/// Layout of a synthetic "pretrained" embedding table.
///
/// Signal tokens of class `c` sit around a random unit centroid scaled by
/// `class_separation`; neutral tokens are pure noise. `extra_tokens` rows are
/// appended after the task vocabulary: they never occur in generated text,
/// like the long tail of a general-purpose embedding vocabulary, and each is
/// attached to a class cluster so that it shows up among nearest neighbours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticEmbeddingSpec {
    pub dim: usize,
    pub class_separation: f64,
    pub noise: f64,
    #[serde(default)]
    pub extra_tokens: usize,
    /// When set, [`teacher_embeddings`] gives the teacher fresh
    /// `N(0, s^2)` rows for the extra tokens instead of the shared ones.
    #[serde(default)]
    pub teacher_extra_noise: Option<f64>,
    pub seed: u64,
}

pub fn synthetic_embeddings(
    task: &SyntheticTaskSpec,
    emb: &SyntheticEmbeddingSpec,
) -> Result<(Vocabulary, EmbeddingTable)> {
    task.validate()?;
    if emb.dim == 0 || emb.noise < 0.0 || emb.class_separation < 0.0 {
        return Err(CorpusError::InvalidSpec("invalid embedding spec".into()));
    }
    let mut rng = rng_from(emb.seed, &[]);
    let gauss = |rng: &mut rand_chacha::ChaCha8Rng, n: usize| -> Vec<f64> {
        (0..n)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect()
    };
    let centroids: Vec<Vec<f64>> = (0..task.num_classes)
        .map(|_| {
            let v = gauss(&mut rng, emb.dim);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            v.into_iter()
                .map(|x| x / norm * emb.class_separation)
                .collect()
        })
        .collect();

    let total = task.vocab_size + emb.extra_tokens;
    let mut tokens = Vec::with_capacity(total);
    let mut data = Vec::with_capacity(total * emb.dim);
    tokens.push(UNK_TOKEN.to_string());
    data.extend(std::iter::repeat_n(0.0, emb.dim));
    for id in 1..total {
        let class = if id < task.vocab_size {
            tokens.push(format!("w{id}"));
            task.signal_class(id as TokenId)
        } else {
            let j = id - task.vocab_size;
            tokens.push(format!("x{j}"));
            Some(j % task.num_classes)
        };
        let noise = gauss(&mut rng, emb.dim);
        let row = noise.into_iter().enumerate().map(|(k, z)| {
            let center = class.map_or(0.0, |c| centroids[c][k]);
            center + emb.noise * z
        });
        data.extend(row);
    }
    Ok((
        Vocabulary::new(tokens)?,
        EmbeddingTable::new(emb.dim, data)?,
    ))
}

/// The teacher's own copy of the table. Task rows are shared; extra rows are
/// replaced by isotropic noise when `teacher_extra_noise` is set, so the
/// teacher has no usable knowledge of tokens it never met in task text.
pub fn teacher_embeddings(
    task: &SyntheticTaskSpec,
    emb: &SyntheticEmbeddingSpec,
    table: &EmbeddingTable,
) -> Result<EmbeddingTable> {
    let Some(scale) = emb.teacher_extra_noise else {
        return Ok(table.clone());
    };
    if !(scale >= 0.0 && scale.is_finite()) {
        return Err(CorpusError::InvalidSpec(
            "teacher_extra_noise must be non-negative".into(),
        ));
    }
    if table.dim() != emb.dim || table.len() != task.vocab_size + emb.extra_tokens {
        return Err(CorpusError::InvalidSpec(
            "table does not match the specs".into(),
        ));
    }
    let mut rng = rng_from(emb.seed, &[1]);
    let mut data = table.as_slice().to_vec();
    for x in &mut data[task.vocab_size * emb.dim..] {
        *x = scale * rng.sample::<f64, _>(StandardNormal);
    }
    EmbeddingTable::new(emb.dim, data)
}
