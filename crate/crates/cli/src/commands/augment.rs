use std::path::PathBuf;

use kdaug::augment::{AugmentSpec, AugmentedExample, Augmenter};
use kdaug::corpus::{load_dataset, write_augmented, AugmentedRow, LabeledExample};
use serde::Deserialize;

use super::{load_vocab, resources};
use crate::error::CliError;
use crate::output::Run;
use crate::Io;

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Mode {
    /// `multiplier` copies per example.
    #[default]
    Offline,
    /// One copy per example, treating the file as the batch of `step`.
    Online,
}

fn one() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Config {
    input: PathBuf,
    embeddings: PathBuf,
    #[serde(default)]
    thesaurus: Option<PathBuf>,
    spec: AugmentSpec,
    #[serde(default)]
    mode: Mode,
    #[serde(default = "one")]
    multiplier: usize,
    #[serde(default)]
    step: u64,
}

/// How many before/after pairs are printed.
const PREVIEW: usize = 3;

pub fn run(io: &Io) -> Result<(), CliError> {
    let (mut run, cfg) = Run::start::<Config>("augment", io)?;
    if cfg.multiplier == 0 {
        return Err(CliError::config("multiplier must be at least 1"));
    }
    let (vocab, table) = load_vocab(&run, &cfg.embeddings)?;
    let data = load_dataset(&run.input(&cfg.input), &vocab)?;
    let res = resources(&run, &cfg.spec, &vocab, &table, cfg.thesaurus.as_ref())?;
    let aug = Augmenter::new(&cfg.spec, &res)?;
    let out: Vec<AugmentedExample> = match cfg.mode {
        Mode::Offline => aug.offline(&data, cfg.multiplier),
        Mode::Online => aug.online(data.examples(), cfg.step),
    };
    let rows: Vec<AugmentedRow> = out
        .iter()
        .map(|a| AugmentedRow {
            example: LabeledExample {
                sequence: a.sequence.clone(),
                label: data.examples()[a.source_index].label,
            },
            source_index: a.source_index,
        })
        .collect();
    write_augmented(&run.output("augmented.tsv"), &rows, &vocab)?;

    let empty = AugmentedExample {
        sequence: data.examples()[0].sequence.clone(),
        source_index: 0,
        changed_positions: Vec::new(),
        removed_positions: Vec::new(),
    };
    println!(
        "degree {} ({:?}), {} rows",
        cfg.spec.degree,
        cfg.spec.method,
        rows.len()
    );
    for a in out.iter().take(PREVIEW) {
        let original = AugmentedExample {
            sequence: data.examples()[a.source_index].sequence.clone(),
            ..empty.clone()
        };
        println!("before: {}", original.highlight(&vocab));
        println!("after:  {}", a.highlight(&vocab));
    }
    run.finish()
}
