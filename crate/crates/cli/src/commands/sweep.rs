use std::path::PathBuf;

use kdaug::augment::{AugmentMethod, AugmentSpec};
use kdaug::corpus::subsample;
use kdaug::distill::{distill_sweep, AugMode, KDTrainConfig, TrainContext};
use kdaug::model::load_checkpoint;
use kdaug::seed::{derive_seed, stream};
use rayon::prelude::*;

use super::{fmt_f64, load_data, load_vocab, resources, ModelSpec};
use crate::error::CliError;
use crate::output::{csv_text, Run};
use crate::Io;

fn default_degrees() -> Vec<f64> {
    vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]
}

fn default_method() -> AugmentMethod {
    AugmentMethod::Knn
}

fn default_k() -> usize {
    15
}

fn default_mode() -> AugMode {
    AugMode::Online
}

#[derive(Debug, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct Config {
    /// Full KD pool; each fraction subsamples it.
    pool: PathBuf,
    eval: PathBuf,
    embeddings: PathBuf,
    teacher: PathBuf,
    #[serde(default)]
    thesaurus: Option<PathBuf>,
    model: ModelSpec,
    fractions: Vec<f64>,
    #[serde(default = "default_degrees")]
    degrees: Vec<f64>,
    seeds: Vec<u64>,
    #[serde(default = "default_method")]
    method: AugmentMethod,
    #[serde(default = "default_k")]
    k: usize,
    /// Mode for non-zero degrees; degree 0 is always plain KD.
    #[serde(default = "default_mode")]
    aug_mode: AugMode,
    #[serde(default)]
    training: KDTrainConfig,
}

pub struct Cell {
    pub fraction: f64,
    pub degree: f64,
    pub seed: u64,
    pub lr: f64,
    pub metric: f64,
}

/// `0.01 -> "1%"`; shortest form that keeps the value.
fn percent(x: f64) -> String {
    format!("{}%", fmt_f64((x * 1e6).round() / 1e4))
}

/// Seed means in row-major (fraction, degree) order, summed in seed order.
pub fn pivot(cells: &[Cell], fractions: &[f64], degrees: &[f64]) -> Vec<Vec<f64>> {
    fractions
        .iter()
        .map(|&f| {
            degrees
                .iter()
                .map(|&d| {
                    let vals: Vec<f64> = cells
                        .iter()
                        .filter(|c| c.fraction == f && c.degree == d)
                        .map(|c| c.metric)
                        .collect();
                    vals.iter().sum::<f64>() / vals.len() as f64
                })
                .collect()
        })
        .collect()
}

fn column_name(d: f64) -> String {
    if d == 0.0 {
        "Vanilla KD".to_string()
    } else {
        percent(d)
    }
}

pub fn run(io: &Io) -> Result<(), CliError> {
    let (mut run, cfg) = Run::start::<Config>("sweep-degree", io)?;
    if cfg.fractions.is_empty() || cfg.degrees.is_empty() || cfg.seeds.is_empty() {
        return Err(CliError::config(
            "fractions, degrees and seeds must be non-empty",
        ));
    }
    if cfg.aug_mode == AugMode::None {
        return Err(CliError::config("aug_mode must be online or offline"));
    }
    for (name, list) in [("fractions", &cfg.fractions), ("degrees", &cfg.degrees)] {
        let mut sorted = list.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        if sorted.len() != list.len() {
            return Err(CliError::config(format!("{name} contains duplicates")));
        }
    }
    if cfg.fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
        return Err(CliError::config("fractions must lie in (0, 1]"));
    }
    if cfg.degrees.iter().any(|d| !(0.0..=1.0).contains(d)) {
        return Err(CliError::config("degrees must lie in [0, 1]"));
    }

    let (vocab, table) = load_vocab(&run, &cfg.embeddings)?;
    let shape = cfg.model.shape(&vocab, &table)?;
    let pool = load_data(&run, &cfg.pool, &vocab, shape.num_classes)?;
    let eval = load_data(&run, &cfg.eval, &vocab, shape.num_classes)?;
    let teacher = load_checkpoint(&run.input(&cfg.teacher))?;
    if teacher.shape.vocab_size != shape.vocab_size
        || teacher.shape.num_classes != shape.num_classes
    {
        return Err(CliError::config(
            "teacher checkpoint does not match the student vocabulary or classes",
        ));
    }
    let probe = AugmentSpec {
        method: cfg.method,
        degree: 0.0,
        k: cfg.k,
        base_seed: 0,
    };
    let res = resources(&run, &probe, &vocab, &table, cfg.thesaurus.as_ref())?;
    let base = cfg.training.seed;

    let mut jobs = Vec::new();
    for (fi, &fraction) in cfg.fractions.iter().enumerate() {
        for (di, &degree) in cfg.degrees.iter().enumerate() {
            for (si, &seed) in cfg.seeds.iter().enumerate() {
                jobs.push((fi, di, si, fraction, degree, seed));
            }
        }
    }
    let cells = jobs
        .par_iter()
        .map(
            |&(fi, di, si, fraction, degree, seed)| -> Result<Cell, CliError> {
                // Data and initialisation depend on (seed, fraction) only, so runs
                // that differ in degree are paired.
                let kd = subsample(
                    &pool,
                    fraction,
                    derive_seed(seed, &[stream::SUBSAMPLE, fi as u64]),
                )?;
                let cell_seed =
                    derive_seed(base, &[stream::SWEEP_CELL, fi as u64, di as u64, si as u64]);
                let training = KDTrainConfig {
                    seed: derive_seed(seed, &[stream::SWEEP_CELL, fi as u64]),
                    aug: Some(AugmentSpec {
                        degree,
                        base_seed: cell_seed,
                        ..probe.clone()
                    }),
                    aug_mode: if degree == 0.0 {
                        AugMode::None
                    } else {
                        cfg.aug_mode
                    },
                    ..cfg.training.clone()
                };
                let ctx = TrainContext {
                    pretrained: cfg.model.pretrained.then_some(&table),
                    resources: Some(&res),
                    eval: Some(&eval),
                };
                let sweep = distill_sweep(&teacher, shape, &kd, &training, ctx)?;
                let best = sweep.best_run();
                Ok(Cell {
                    fraction,
                    degree,
                    seed,
                    lr: best.lr,
                    metric: best.best_metric().expect("eval data given"),
                })
            },
        )
        .collect::<Result<Vec<_>, _>>()?;

    let long: Vec<Vec<String>> = cells
        .iter()
        .map(|c| {
            vec![
                fmt_f64(c.fraction),
                fmt_f64(c.degree),
                c.seed.to_string(),
                fmt_f64(c.lr),
                fmt_f64(c.metric),
            ]
        })
        .collect();
    run.write(
        "results.csv",
        csv_text(&["fraction", "degree", "seed", "lr", "metric"], &long)?,
    )?;

    let means = pivot(&cells, &cfg.fractions, &cfg.degrees);
    let mut header = vec!["fraction".to_string()];
    header.extend(cfg.degrees.iter().map(|&d| fmt_f64(d)));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = cfg
        .fractions
        .iter()
        .zip(&means)
        .map(|(&f, row)| {
            std::iter::once(fmt_f64(f))
                .chain(row.iter().map(|&m| fmt_f64(m)))
                .collect()
        })
        .collect();
    run.write("pivot.csv", csv_text(&header_refs, &rows)?)?;

    let mut md = String::from("| Data |");
    for &d in &cfg.degrees {
        md.push_str(&format!(" {} |", column_name(d)));
    }
    md.push_str("\n|---|");
    md.push_str(&"---|".repeat(cfg.degrees.len()));
    md.push('\n');
    for (&f, row) in cfg.fractions.iter().zip(&means) {
        md.push_str(&format!("| {} |", percent(f)));
        for &m in row {
            md.push_str(&format!(" {:.2} |", 100.0 * m));
        }
        md.push('\n');
    }
    run.write("pivot.md", &md)?;
    print!("{md}");
    run.finish()
}
