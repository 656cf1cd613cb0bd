//! Token-level data augmentation with an exact semantic-shift degree.
//!
//! The degree `r` is the proportion of tokens an edit touches:
//! [`change_count`] turns it into a per-segment token count. All randomness
//! comes from seeds derived with [`crate::seed::derive_seed`], so online
//! augmentation gives the same result however the batch is scheduled.

mod neighbors;
mod ops;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, LabeledExample, TokenSequence, Vocabulary};
use crate::seed::{rng_from, stream};

pub use neighbors::{NeighborIndex, Thesaurus};
pub use ops::{
    eda, eda_branch, random_delete, random_insert, random_swap, replace, Candidates, EdaBranch,
};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AugmentError {
    #[error("augmentation method {method:?} needs a {resource}")]
    MissingResource {
        method: AugmentMethod,
        resource: &'static str,
    },
    #[error("invalid augmentation spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentMethod {
    Knn,
    Synonym,
    RandomReplace,
    RandomSwap,
    RandomInsert,
    RandomDelete,
    Eda,
}

fn default_k() -> usize {
    15
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentSpec {
    pub method: AugmentMethod,
    /// Semantic-shift degree: proportion of tokens changed, in `[0, 1]`.
    pub degree: f64,
    /// Neighbour count for kNN replacement.
    #[serde(default = "default_k")]
    pub k: usize,
    pub base_seed: u64,
}

impl AugmentSpec {
    pub fn validate(&self) -> Result<(), AugmentError> {
        if !(0.0..=1.0).contains(&self.degree) {
            return Err(AugmentError::InvalidSpec(format!(
                "degree {} outside [0, 1]",
                self.degree
            )));
        }
        if self.k == 0 {
            return Err(AugmentError::InvalidSpec("k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Number of tokens changed in a segment of `length` tokens at `degree`:
/// `degree * length` rounded half up, capped at `length`.
pub fn change_count(length: usize, degree: f64) -> usize {
    let raw = (degree * length as f64 + 0.5 + 1e-9).floor();
    (raw.max(0.0) as usize).min(length)
}

/// An augmented input `x'`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AugmentedExample {
    pub sequence: TokenSequence,
    /// Index of the originating example within the batch or dataset.
    pub source_index: usize,
    /// Output positions that hold a replaced, moved or inserted token.
    pub changed_positions: Vec<usize>,
    /// Source positions dropped by random deletion.
    pub removed_positions: Vec<usize>,
}

impl AugmentedExample {
    /// Renders the sequence with changed tokens wrapped as `*token*`.
    pub fn highlight(&self, vocab: &Vocabulary) -> String {
        self.sequence
            .segment_ranges()
            .into_iter()
            .map(|r| {
                r.map(|p| {
                    let tok = vocab.token(self.sequence.ids()[p]);
                    if self.changed_positions.binary_search(&p).is_ok() {
                        format!("*{tok}*")
                    } else {
                        tok.to_string()
                    }
                })
                .collect::<Vec<_>>()
                .join(" ")
            })
            .collect::<Vec<_>>()
            .join(" | ")
    }
}

/// Lookup structures the augmentation methods draw candidates from.
#[derive(Debug, Clone, Default)]
pub struct AugmentResources {
    pub vocab_size: usize,
    pub neighbors: Option<NeighborIndex>,
    pub thesaurus: Option<Thesaurus>,
}

/// A validated pairing of spec and resources.
#[derive(Debug, Clone, Copy)]
pub struct Augmenter<'a> {
    spec: &'a AugmentSpec,
    res: &'a AugmentResources,
}

impl<'a> Augmenter<'a> {
    pub fn new(spec: &'a AugmentSpec, res: &'a AugmentResources) -> Result<Self, AugmentError> {
        spec.validate()?;
        let missing = |resource| AugmentError::MissingResource {
            method: spec.method,
            resource,
        };
        match spec.method {
            AugmentMethod::Knn if res.neighbors.is_none() => return Err(missing("neighbor index")),
            AugmentMethod::Synonym | AugmentMethod::Eda if res.thesaurus.is_none() => {
                return Err(missing("thesaurus"))
            }
            AugmentMethod::RandomInsert if res.neighbors.is_none() && res.thesaurus.is_none() => {
                return Err(missing("neighbor index or thesaurus"))
            }
            AugmentMethod::RandomReplace if res.vocab_size < 3 => {
                return Err(AugmentError::InvalidSpec(
                    "random replacement needs at least two non-UNK tokens".into(),
                ))
            }
            _ => {}
        }
        Ok(Self { spec, res })
    }

    pub fn spec(&self) -> &AugmentSpec {
        self.spec
    }

    fn insert_candidates(&self) -> Candidates<'a> {
        match (&self.res.neighbors, &self.res.thesaurus) {
            (Some(idx), _) => Candidates::Neighbors(idx),
            (None, Some(th)) => Candidates::Synonyms(th),
            (None, None) => unreachable!("checked in Augmenter::new"),
        }
    }

    pub fn apply<R: Rng + ?Sized>(&self, seq: &TokenSequence, rng: &mut R) -> AugmentedExample {
        let r = self.spec.degree;
        let res = self.res;
        match self.spec.method {
            AugmentMethod::Knn => replace(
                seq,
                Candidates::Neighbors(res.neighbors.as_ref().expect("validated")),
                r,
                rng,
            ),
            AugmentMethod::Synonym => replace(
                seq,
                Candidates::Synonyms(res.thesaurus.as_ref().expect("validated")),
                r,
                rng,
            ),
            AugmentMethod::RandomReplace => replace(
                seq,
                Candidates::Random {
                    vocab_size: res.vocab_size,
                },
                r,
                rng,
            ),
            AugmentMethod::RandomSwap => random_swap(seq, r, rng),
            AugmentMethod::RandomInsert => random_insert(seq, self.insert_candidates(), r, rng),
            AugmentMethod::RandomDelete => random_delete(seq, r, rng),
            AugmentMethod::Eda => eda(seq, res.thesaurus.as_ref().expect("validated"), r, rng).1,
        }
    }

    /// Augments a sampled batch. Example `i` at `step` is driven by the seed
    /// derived from `(base_seed, step, i)`.
    pub fn online(&self, batch: &[LabeledExample], step: u64) -> Vec<AugmentedExample> {
        batch
            .par_iter()
            .enumerate()
            .map(|(i, ex)| {
                let mut rng = rng_from(self.spec.base_seed, &[stream::ONLINE_AUG, step, i as u64]);
                AugmentedExample {
                    source_index: i,
                    ..self.apply(&ex.sequence, &mut rng)
                }
            })
            .collect()
    }

    /// `multiplier` augmented copies of every example, seeded by
    /// `(base_seed, source_index, copy_index)` and ordered source-major.
    pub fn offline(&self, data: &Dataset, multiplier: usize) -> Vec<AugmentedExample> {
        data.examples()
            .par_iter()
            .enumerate()
            .flat_map_iter(|(i, ex)| {
                (0..multiplier).map(move |j| {
                    let mut rng = rng_from(
                        self.spec.base_seed,
                        &[stream::OFFLINE_AUG, i as u64, j as u64],
                    );
                    AugmentedExample {
                        source_index: i,
                        ..self.apply(&ex.sequence, &mut rng)
                    }
                })
            })
            .collect()
    }
}

pub fn augment_online(
    batch: &[LabeledExample],
    spec: &AugmentSpec,
    res: &AugmentResources,
    step: u64,
) -> Result<Vec<AugmentedExample>, AugmentError> {
    Ok(Augmenter::new(spec, res)?.online(batch, step))
}

pub fn augment_offline(
    data: &Dataset,
    spec: &AugmentSpec,
    res: &AugmentResources,
    multiplier: usize,
) -> Result<Vec<AugmentedExample>, AugmentError> {
    if multiplier == 0 {
        return Err(AugmentError::InvalidSpec(
            "multiplier must be at least 1".into(),
        ));
    }
    Ok(Augmenter::new(spec, res)?.offline(data, multiplier))
}

/// Total augmented examples produced by online augmentation, as a multiple
/// of the KD pool: `batch_size * steps / pool_size`.
pub fn online_multiple(batch_size: usize, steps: usize, pool_size: usize) -> f64 {
    (batch_size * steps) as f64 / pool_size as f64
}
