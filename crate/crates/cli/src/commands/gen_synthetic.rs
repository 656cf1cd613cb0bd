use kdaug::corpus::{
    generate_synthetic, synthetic_embeddings, teacher_embeddings, write_dataset, write_embeddings,
    SyntheticEmbeddingSpec, SyntheticTaskSpec,
};
use kdaug::seed::derive_seed;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::output::Run;
use crate::Io;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Config {
    task: SyntheticTaskSpec,
    embedding: SyntheticEmbeddingSpec,
    train_size: usize,
    test_size: usize,
    /// Defaults to a seed derived from the task seed.
    #[serde(default)]
    test_seed: Option<u64>,
}

#[derive(Serialize)]
struct Summary {
    train_rows: usize,
    test_rows: usize,
    vocab_size: usize,
    embedding_rows: usize,
    embedding_dim: usize,
}

pub fn run(io: &Io) -> Result<(), CliError> {
    let (mut run, cfg) = Run::start::<Config>("gen-synthetic", io)?;
    if cfg.train_size == 0 || cfg.test_size == 0 {
        return Err(CliError::config(
            "train_size and test_size must be at least 1",
        ));
    }
    let train = generate_synthetic(&cfg.task, cfg.train_size)?;
    let test_spec = SyntheticTaskSpec {
        seed: cfg
            .test_seed
            .unwrap_or_else(|| derive_seed(cfg.task.seed, &[1])),
        ..cfg.task.clone()
    };
    let test = generate_synthetic(&test_spec, cfg.test_size)?;
    let (vocab, table) = synthetic_embeddings(&cfg.task, &cfg.embedding)?;

    write_dataset(&run.output("train.tsv"), &train, &vocab)?;
    write_dataset(&run.output("test.tsv"), &test, &vocab)?;
    write_embeddings(&run.output("embeddings.txt"), &vocab, &table)?;
    if cfg.embedding.teacher_extra_noise.is_some() {
        let teacher = teacher_embeddings(&cfg.task, &cfg.embedding, &table)?;
        write_embeddings(&run.output("teacher_embeddings.txt"), &vocab, &teacher)?;
    }
    let summary = Summary {
        train_rows: train.len(),
        test_rows: test.len(),
        vocab_size: cfg.task.vocab_size,
        embedding_rows: table.len(),
        embedding_dim: table.dim(),
    };
    run.write_json("summary.json", &summary)?;
    println!(
        "wrote {} train and {} test rows, {} embeddings of dimension {}",
        summary.train_rows, summary.test_rows, summary.embedding_rows, summary.embedding_dim
    );
    run.finish()
}
