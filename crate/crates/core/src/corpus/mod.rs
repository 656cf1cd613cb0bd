//! Vocabularies, embedding tables, labelled datasets and metrics.

mod io;
mod metrics;
mod synthetic;

use std::collections::HashMap;
use std::ops::Range;
use std::path::PathBuf;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::seed::{rng_from, stream};

pub use io::{
    load_augmented, load_dataset, load_embeddings, write_augmented, write_dataset,
    write_embeddings, AugmentedRow,
};
pub use metrics::{accuracy, matthews};
pub use synthetic::{
    generate_synthetic, synthetic_embeddings, teacher_embeddings, SyntheticEmbeddingSpec,
    SyntheticTaskSpec,
};

pub type TokenId = u32;

/// Id 0 is reserved for out-of-vocabulary tokens.
pub const UNK_ID: TokenId = 0;
pub const UNK_TOKEN: &str = "<unk>";

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("empty embedding file")]
    EmptyEmbeddingFile,
    #[error("inconsistent dimension at line {line}: expected {expected}, found {found}")]
    InconsistentDimension {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("duplicate token {token:?} at line {line}")]
    DuplicateToken { line: usize, token: String },
    #[error("non-numeric field {field:?} at line {line}")]
    NonNumeric { line: usize, field: String },
    #[error("non-finite value at line {line}")]
    NonFinite { line: usize },
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("non-integer label {value:?} at line {line}")]
    NonIntegerLabel { line: usize, value: String },
    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },
    #[error("token id {id} out of range for vocabulary of size {vocab_size}")]
    TokenOutOfRange { id: TokenId, vocab_size: usize },
    #[error("invalid segment break {at} for sequence of length {len}")]
    InvalidSegmentBreak { at: usize, len: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("length mismatch: {left} predictions vs {right} gold labels")]
    LengthMismatch { left: usize, right: usize },
    #[error("metric input is empty")]
    EmptyInput,
    #[error("label {0} is not binary")]
    NonBinaryLabel(usize),
    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
}

pub type Result<T> = std::result::Result<T, CorpusError>;

/// Ordered set of distinct tokens; the position of a token is its id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Vocabulary {
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, tok) in tokens.iter().enumerate() {
            if index.insert(tok.clone(), i as TokenId).is_some() {
                return Err(CorpusError::DuplicateToken {
                    line: i + 1,
                    token: tok.clone(),
                });
            }
        }
        Ok(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn lookup(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    /// Looks a token up, mapping unknown tokens to [`UNK_ID`].
    pub fn id_or_unk(&self, token: &str) -> TokenId {
        self.lookup(token).unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Row-major `V x dim` table; row `i` belongs to token id `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(CorpusError::InvalidSpec(
                "embedding dim must be positive".into(),
            ));
        }
        if data.len() % dim != 0 {
            return Err(CorpusError::InvalidSpec(format!(
                "{} values do not form rows of width {dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(CorpusError::NonFinite {
                line: pos / dim + 1,
            });
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(CorpusError::InconsistentDimension {
                    line: i + 1,
                    expected: dim,
                    found: r.len(),
                });
            }
        }
        Self::new(dim, rows.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, id: usize) -> &[f64] {
        &self.data[id * self.dim..(id + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Token ids with an optional boundary between two segments
/// (premise/hypothesis style inputs).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSequence {
    ids: Vec<TokenId>,
    segment_break: Option<usize>,
}

impl TokenSequence {
    pub fn new(ids: Vec<TokenId>, segment_break: Option<usize>) -> Result<Self> {
        if let Some(at) = segment_break {
            if at == 0 || at >= ids.len() {
                return Err(CorpusError::InvalidSegmentBreak { at, len: ids.len() });
            }
        }
        Ok(Self { ids, segment_break })
    }

    pub fn single(ids: Vec<TokenId>) -> Self {
        Self {
            ids,
            segment_break: None,
        }
    }

    pub fn paired(first: &[TokenId], second: &[TokenId]) -> Result<Self> {
        let mut ids = first.to_vec();
        ids.extend_from_slice(second);
        Self::new(ids, Some(first.len()))
    }

    pub fn ids(&self) -> &[TokenId] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn segment_break(&self) -> Option<usize> {
        self.segment_break
    }

    /// Index ranges of the one or two segments.
    pub fn segment_ranges(&self) -> Vec<Range<usize>> {
        match self.segment_break {
            Some(b) => vec![0..b, b..self.ids.len()],
            None => vec![0..self.ids.len()],
        }
    }

    /// Rebuilds a sequence from edited segments, recomputing the break.
    pub fn from_segments(segments: Vec<Vec<TokenId>>) -> Result<Self> {
        match segments.len() {
            1 => Ok(Self::single(
                segments.into_iter().next().unwrap_or_default(),
            )),
            2 => Self::paired(&segments[0], &segments[1]),
            n => Err(CorpusError::InvalidSpec(format!("{n} segments"))),
        }
    }

    pub fn check_vocab(&self, vocab_size: usize) -> Result<()> {
        match self.ids.iter().find(|&&id| id as usize >= vocab_size) {
            Some(&id) => Err(CorpusError::TokenOutOfRange { id, vocab_size }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub sequence: TokenSequence,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    examples: Vec<LabeledExample>,
    num_classes: usize,
}

impl Dataset {
    pub fn new(examples: Vec<LabeledExample>, num_classes: usize) -> Result<Self> {
        if examples.is_empty() {
            return Err(CorpusError::EmptyDataset);
        }
        if let Some(ex) = examples.iter().find(|e| e.label >= num_classes) {
            return Err(CorpusError::LabelOutOfRange {
                label: ex.label,
                num_classes,
            });
        }
        Ok(Self {
            examples,
            num_classes,
        })
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.examples.iter().map(|e| e.label).collect()
    }

    /// Widens the class count, e.g. when a test split lacks the top label.
    pub fn with_num_classes(self, num_classes: usize) -> Result<Self> {
        Self::new(self.examples, num_classes)
    }

    pub fn check_vocab(&self, vocab_size: usize) -> Result<()> {
        self.examples
            .iter()
            .try_for_each(|e| e.sequence.check_vocab(vocab_size))
    }
}

/// Number of examples kept by [`subsample`]: `ceil(fraction * len)`.
pub fn subsample_size(len: usize, fraction: f64) -> usize {
    // The slack absorbs products such as 0.07 * 100 = 7.000000000000001.
    ((fraction * len as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Uniform sample without replacement of `ceil(fraction * |data|)` examples.
pub fn subsample(data: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(CorpusError::InvalidSpec(format!(
            "fraction {fraction} outside (0, 1]"
        )));
    }
    let keep = subsample_size(data.len(), fraction).min(data.len());
    if keep == 0 {
        return Err(CorpusError::EmptyDataset);
    }
    let mut rng = rng_from(seed, &[stream::SUBSAMPLE]);
    let picked = index::sample(&mut rng, data.len(), keep);
    let examples = picked
        .into_iter()
        .map(|i| data.examples[i].clone())
        .collect();
    Dataset::new(examples, data.num_classes)
}

/// Probability vector over classes, e.g. a teacher's soft labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelDistribution {
    probs: Vec<f64>,
}

impl LabelDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(CorpusError::InvalidDistribution("no classes".into()));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(CorpusError::InvalidDistribution(
                "probability outside [0, 1]".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(CorpusError::InvalidDistribution(format!("sums to {total}")));
        }
        Ok(Self { probs })
    }

    pub(crate) fn new_unchecked(probs: Vec<f64>) -> Self {
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.probs)
    }
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
