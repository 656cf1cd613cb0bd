pub mod augment;
pub mod gen_synthetic;
pub mod sweep;
pub mod theory;
pub mod train;

use std::path::{Path, PathBuf};

use kdaug::augment::{AugmentMethod, AugmentResources, AugmentSpec, NeighborIndex, Thesaurus};
use kdaug::corpus::{load_dataset, load_embeddings, Dataset, EmbeddingTable, Vocabulary};
use kdaug::model::{InputMode, ModelShape};
use serde::Deserialize;

use crate::error::CliError;
use crate::output::Run;

fn yes() -> bool {
    true
}

fn single() -> InputMode {
    InputMode::Single
}

/// Model settings; vocabulary size and embedding width come from the
/// embedding file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub hidden_dim: usize,
    pub num_classes: usize,
    #[serde(default = "single")]
    pub mode: InputMode,
    /// Checked against the embedding file when given.
    #[serde(default)]
    pub embed_dim: Option<usize>,
    /// Initialise the embedding layer from the file.
    #[serde(default = "yes")]
    pub pretrained: bool,
}

impl ModelSpec {
    pub fn shape(
        &self,
        vocab: &Vocabulary,
        table: &EmbeddingTable,
    ) -> Result<ModelShape, CliError> {
        if let Some(e) = self.embed_dim {
            if e != table.dim() {
                return Err(CliError::config(format!(
                    "model.embed_dim is {e} but the embedding file has dimension {}",
                    table.dim()
                )));
            }
        }
        let shape = ModelShape {
            vocab_size: vocab.len(),
            embed_dim: table.dim(),
            hidden_dim: self.hidden_dim,
            num_classes: self.num_classes,
            mode: self.mode,
        };
        shape.validate()?;
        Ok(shape)
    }
}

pub fn load_vocab(run: &Run, path: &Path) -> Result<(Vocabulary, EmbeddingTable), CliError> {
    Ok(load_embeddings(&run.input(path))?)
}

pub fn load_data(
    run: &Run,
    path: &Path,
    vocab: &Vocabulary,
    num_classes: usize,
) -> Result<Dataset, CliError> {
    let p = run.input(path);
    let data = load_dataset(&p, vocab)?;
    if data.num_classes() > num_classes {
        return Err(CliError::config(format!(
            "{} has labels up to {} but model.num_classes is {num_classes}",
            p.display(),
            data.num_classes() - 1
        )));
    }
    Ok(data.with_num_classes(num_classes)?)
}

/// Lookup structures needed by `spec`.
pub fn resources(
    run: &Run,
    spec: &AugmentSpec,
    vocab: &Vocabulary,
    table: &EmbeddingTable,
    thesaurus: Option<&PathBuf>,
) -> Result<AugmentResources, CliError> {
    let thesaurus = thesaurus
        .map(|p| Thesaurus::load(&run.input(p), vocab))
        .transpose()?;
    let wants_neighbors = match spec.method {
        AugmentMethod::Knn => true,
        AugmentMethod::RandomInsert => thesaurus.is_none(),
        _ => false,
    };
    Ok(AugmentResources {
        vocab_size: vocab.len(),
        neighbors: wants_neighbors.then(|| NeighborIndex::build(table, spec.k)),
        thesaurus,
    })
}

/// Shortest round-trip rendering, so files are stable and lossless. Very
/// small or large magnitudes use exponent notation.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}


pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}
