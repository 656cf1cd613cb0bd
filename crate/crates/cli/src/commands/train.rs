use std::path::PathBuf;

use kdaug::augment::AugmentResources;
use kdaug::distill::{
    distill_sweep, finetune_sweep, AugMode, KDTrainConfig, Metric, Sweep, TrainContext,
};
use kdaug::model::{load_checkpoint, save_checkpoint};
use serde::{Deserialize, Serialize};

use super::{fmt_f64, fmt_opt, load_data, load_vocab, resources, ModelSpec};
use crate::error::CliError;
use crate::output::{csv_text, Run};
use crate::Io;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Teacher,
    Finetune,
    Distill,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Teacher => "train-teacher",
            Kind::Finetune => "finetune",
            Kind::Distill => "distill",
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Config {
    /// Training data (the KD pool for `distill`).
    train: PathBuf,
    #[serde(default)]
    eval: Option<PathBuf>,
    /// Vocabulary plus initial embedding rows.
    embeddings: PathBuf,
    /// Teacher checkpoint; `distill` only.
    #[serde(default)]
    teacher: Option<PathBuf>,
    #[serde(default)]
    thesaurus: Option<PathBuf>,
    model: ModelSpec,
    #[serde(default)]
    training: KDTrainConfig,
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub lr: f64,
    pub steps: usize,
    pub final_loss: Option<f64>,
    pub final_metric: Option<f64>,
    pub best_metric: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub command: String,
    pub metric: Metric,
    pub runs: Vec<RunSummary>,
    pub best: usize,
    pub best_lr: f64,
}

pub fn summarize(command: &str, metric: Metric, sweep: &Sweep) -> Summary {
    Summary {
        command: command.to_string(),
        metric,
        runs: sweep
            .runs
            .iter()
            .map(|r| RunSummary {
                lr: r.lr,
                steps: r.loss_trace.len(),
                final_loss: r.records.last().map(|x| x.train_loss),
                final_metric: r.final_metric(),
                best_metric: r.best_metric(),
            })
            .collect(),
        best: sweep.best,
        best_lr: sweep.best_run().lr,
    }
}

pub fn run(io: &Io, kind: Kind) -> Result<(), CliError> {
    let (mut run, cfg) = Run::start::<Config>(kind.name(), io)?;
    let (vocab, table) = load_vocab(&run, &cfg.embeddings)?;
    let shape = cfg.model.shape(&vocab, &table)?;
    let train = load_data(&run, &cfg.train, &vocab, shape.num_classes)?;
    let eval = cfg
        .eval
        .as_ref()
        .map(|p| load_data(&run, p, &vocab, shape.num_classes))
        .transpose()?;

    let mut training = cfg.training.clone();
    if kind == Kind::Teacher {
        training.aug_mode = AugMode::None;
    }
    let res: Option<AugmentResources> = match (&training.aug, training.aug_mode) {
        (Some(spec), mode) if mode != AugMode::None => Some(resources(
            &run,
            spec,
            &vocab,
            &table,
            cfg.thesaurus.as_ref(),
        )?),
        _ => None,
    };
    let ctx = TrainContext {
        pretrained: cfg.model.pretrained.then_some(&table),
        resources: res.as_ref(),
        eval: eval.as_ref(),
    };

    let sweep = match kind {
        Kind::Teacher | Kind::Finetune => {
            if cfg.teacher.is_some() {
                return Err(CliError::config(format!(
                    "{} takes no teacher",
                    kind.name()
                )));
            }
            finetune_sweep(shape, &train, &training, ctx)?
        }
        Kind::Distill => {
            let path = cfg
                .teacher
                .as_ref()
                .ok_or_else(|| CliError::config("distill needs a teacher checkpoint"))?;
            let teacher = load_checkpoint(&run.input(path))?;
            let t = teacher.shape;
            if t.vocab_size != shape.vocab_size
                || t.num_classes != shape.num_classes
                || t.mode != shape.mode
            {
                return Err(CliError::config(format!(
                    "teacher shape (vocab {}, classes {}, {:?}) does not match the student (vocab {}, classes {}, {:?})",
                    t.vocab_size, t.num_classes, t.mode, shape.vocab_size, shape.num_classes, shape.mode
                )));
            }
            distill_sweep(&teacher, shape, &train, &training, ctx)?
        }
    };

    save_checkpoint(&run.output("checkpoint.json"), &sweep.best_run().params)?;
    let mut rows = Vec::new();
    for r in &sweep.runs {
        for rec in &r.records {
            rows.push(vec![
                fmt_f64(r.lr),
                rec.step.to_string(),
                fmt_f64(rec.train_loss),
                fmt_opt(rec.metric),
            ]);
        }
    }
    let log = csv_text(&["lr", "step", "train_loss", "metric"], &rows)?;
    run.write("log.csv", log)?;
    let summary = summarize(kind.name(), training.metric, &sweep);
    run.write_json("summary.json", &summary)?;
    let best = &summary.runs[summary.best];
    println!(
        "{}: best lr {} final loss {} metric {}",
        kind.name(),
        summary.best_lr,
        fmt_opt(best.final_loss),
        fmt_opt(best.final_metric)
    );
    run.finish()
}
