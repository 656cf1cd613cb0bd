use std::time::Instant;

use rand::Rng;
use serde::Serialize;

use super::{evaluate, AugMode, DistillError, KDTrainConfig};
use crate::augment::{AugmentResources, AugmentedExample, Augmenter};
use crate::corpus::{Dataset, EmbeddingTable, TokenSequence};
use crate::model::{
    adam_step, backward, init, ClassifierParams, ModelShape, Objective, OptimizerState, TrainItem,
};
use crate::seed::{rng_from, stream};

/// Optional inputs shared by the training entry points.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrainContext<'a> {
    /// Initial embedding rows for the trained model.
    pub pretrained: Option<&'a EmbeddingTable>,
    /// Needed whenever `aug_mode` is not `none`.
    pub resources: Option<&'a AugmentResources>,
    /// Scored every `eval_every` steps and at the last step.
    pub eval: Option<&'a Dataset>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalRecord {
    pub step: usize,
    pub train_loss: f64,
    pub metric: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainLog {
    pub lr: f64,
    pub records: Vec<EvalRecord>,
    /// Batch objective at every step, before that step's update.
    pub loss_trace: Vec<f64>,
    pub params: ClassifierParams,
    pub wall_seconds: f64,
}

impl TrainLog {
    pub fn final_metric(&self) -> Option<f64> {
        self.records.last().and_then(|r| r.metric)
    }

    pub fn best_metric(&self) -> Option<f64> {
        self.records
            .iter()
            .filter_map(|r| r.metric)
            .fold(None, |best, m| Some(best.map_or(m, |b: f64| b.max(m))))
    }
}

/// Runs over a list of learning rates with the index of the best one.
#[derive(Debug, Clone)]
pub struct Sweep {
    pub runs: Vec<TrainLog>,
    pub best: usize,
}

impl Sweep {
    fn from_runs(runs: Vec<TrainLog>) -> Self {
        // Best eval metric wins; without eval data the lowest final loss does.
        // Ties keep the earlier run.
        let score = |log: &TrainLog| match log.best_metric() {
            Some(m) => m,
            None => -log.loss_trace.last().copied().unwrap_or(f64::INFINITY),
        };
        let mut best = 0;
        for (i, run) in runs.iter().enumerate() {
            if score(run) > score(&runs[best]) {
                best = i;
            }
        }
        Self { runs, best }
    }

    pub fn best_run(&self) -> &TrainLog {
        &self.runs[self.best]
    }
}

struct Teacher<'a> {
    params: &'a ClassifierParams,
    kd_logits: Vec<Vec<f64>>,
}

enum AugSource<'a> {
    None,
    Online(Augmenter<'a>),
    Offline {
        pool: Vec<AugmentedExample>,
        logits: Vec<Vec<f64>>,
    },
}

fn single_lr(cfg: &KDTrainConfig) -> Result<f64, DistillError> {
    match cfg.lr.values().as_slice() {
        [lr] => Ok(*lr),
        _ => Err(DistillError::InvalidConfig(
            "a single run needs exactly one learning rate; use the sweep variant".into(),
        )),
    }
}

fn run(
    shape: ModelShape,
    data: &Dataset,
    cfg: &KDTrainConfig,
    ctx: TrainContext<'_>,
    teacher: Option<&ClassifierParams>,
) -> Result<TrainLog, DistillError> {
    let started = Instant::now();
    cfg.validate()?;
    let lr = single_lr(cfg)?;
    data.check_vocab(shape.vocab_size)?;
    if data.num_classes() > shape.num_classes {
        return Err(DistillError::InvalidConfig(format!(
            "data has {} classes, model has {}",
            data.num_classes(),
            shape.num_classes
        )));
    }
    let teacher = match teacher {
        Some(t) => {
            if t.shape().num_classes != shape.num_classes || t.shape().mode != shape.mode {
                return Err(DistillError::InvalidConfig(
                    "teacher and student disagree on classes or input mode".into(),
                ));
            }
            let kd_logits = data
                .examples()
                .iter()
                .map(|ex| t.forward(&ex.sequence))
                .collect::<Result<_, _>>()?;
            Some(Teacher {
                params: t,
                kd_logits,
            })
        }
        None => None,
    };
    // Without a teacher only the label terms are left, with y' = y.
    let (alpha, beta) = match teacher {
        Some(_) => (cfg.alpha, cfg.beta),
        None => (1.0, 1.0),
    };
    let gamma = if cfg.aug_mode == AugMode::None {
        1.0
    } else {
        cfg.gamma
    };

    let augmenter = match (&cfg.aug_mode, &cfg.aug) {
        (AugMode::None, _) => None,
        (_, Some(spec)) => {
            let res = ctx.resources.ok_or_else(|| {
                DistillError::InvalidConfig("augmentation needs resources".into())
            })?;
            Some(Augmenter::new(spec, res)?)
        }
        (_, None) => unreachable!("checked by validate"),
    };
    let aug = match (cfg.aug_mode, augmenter) {
        (_, None) => AugSource::None,
        _ if gamma == 1.0 => AugSource::None,
        (AugMode::Online, Some(a)) => AugSource::Online(a),
        (AugMode::Offline(n), Some(a)) => {
            let pool = a.offline(data, n);
            let logits = match &teacher {
                Some(t) => pool
                    .iter()
                    .map(|ex| t.params.forward(&ex.sequence))
                    .collect::<Result<_, _>>()?,
                None => Vec::new(),
            };
            AugSource::Offline { pool, logits }
        }
        (AugMode::None, Some(_)) => unreachable!(),
    };

    let mut student = init(shape, cfg.seed, ctx.pretrained)?;
    let mut opt = OptimizerState::new(&student, lr);
    let examples = data.examples();
    let b = cfg.batch_size;
    let kd_w = gamma / b as f64;
    let aug_w = (1.0 - gamma) / b as f64;
    let mut loss_trace = Vec::with_capacity(cfg.steps);
    let mut records = Vec::new();

    for step in 0..cfg.steps {
        let mut rng = rng_from(cfg.seed, &[stream::BATCH, step as u64]);
        let idx: Vec<usize> = (0..b)
            .map(|_| rng.random_range(0..examples.len()))
            .collect();

        // Augmented inputs and their teacher outputs, owned for this step.
        let mut aug_seqs: Vec<(&TokenSequence, usize)> = Vec::new();
        let online_batch: Vec<AugmentedExample>;
        let mut online_logits: Vec<Vec<f64>> = Vec::new();
        let mut aug_logit_refs: Vec<Option<&[f64]>> = Vec::new();
        match &aug {
            AugSource::None => {}
            AugSource::Online(a) => {
                let batch: Vec<_> = idx.iter().map(|&i| examples[i].clone()).collect();
                online_batch = a.online(&batch, step as u64);
                if let Some(t) = &teacher {
                    online_logits = online_batch
                        .iter()
                        .map(|ex| t.params.forward(&ex.sequence))
                        .collect::<Result<_, _>>()?;
                }
                for ex in &online_batch {
                    aug_seqs.push((&ex.sequence, examples[idx[ex.source_index]].label));
                }
                for k in 0..online_batch.len() {
                    aug_logit_refs.push(online_logits.get(k).map(Vec::as_slice));
                }
            }
            AugSource::Offline { pool, logits } => {
                let mut rng = rng_from(cfg.seed, &[stream::OFFLINE_BATCH, step as u64]);
                for _ in 0..b {
                    let j = rng.random_range(0..pool.len());
                    let ex = &pool[j];
                    aug_seqs.push((&ex.sequence, examples[ex.source_index].label));
                    aug_logit_refs.push(logits.get(j).map(Vec::as_slice));
                }
            }
        }

        let mut items = Vec::with_capacity(idx.len() + aug_seqs.len());
        for &i in &idx {
            let ex = &examples[i];
            items.push(TrainItem {
                sequence: &ex.sequence,
                objective: Objective {
                    label: Some(ex.label),
                    alpha,
                    teacher_logits: teacher.as_ref().map(|t| t.kd_logits[i].as_slice()),
                    distance: cfg.distance,
                },
                weight: kd_w,
            });
        }
        for ((seq, label), logits) in aug_seqs.iter().zip(&aug_logit_refs) {
            items.push(TrainItem {
                sequence: seq,
                objective: Objective {
                    label: Some(*label),
                    alpha: beta,
                    teacher_logits: *logits,
                    distance: cfg.distance,
                },
                weight: aug_w,
            });
        }

        let (loss, grads) = backward(&student, &items)?;
        if !loss.is_finite() {
            return Err(DistillError::Divergence { step });
        }
        adam_step(&mut student, &grads, &mut opt)?;
        if !student.is_finite() {
            return Err(DistillError::Divergence { step });
        }
        loss_trace.push(loss);
        let done = step + 1;
        if done % cfg.eval_every == 0 || done == cfg.steps {
            let metric = match ctx.eval {
                Some(ev) => Some(evaluate(&student, ev, cfg.metric)?),
                None => None,
            };
            records.push(EvalRecord {
                step: done,
                train_loss: loss,
                metric,
            });
        }
    }
    Ok(TrainLog {
        lr,
        records,
        loss_trace,
        params: student,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Cross-entropy training on `data`, ignoring any augmentation settings.
pub fn train_teacher(
    shape: ModelShape,
    data: &Dataset,
    cfg: &KDTrainConfig,
    ctx: TrainContext<'_>,
) -> Result<TrainLog, DistillError> {
    let cfg = KDTrainConfig {
        aug_mode: AugMode::None,
        ..cfg.clone()
    };
    run(shape, data, &cfg, ctx, None)
}

/// Cross-entropy training. Augmented examples, if configured, keep the label
/// of their source and are weighted by `1 - gamma`.
pub fn finetune_student(
    shape: ModelShape,
    data: &Dataset,
    cfg: &KDTrainConfig,
    ctx: TrainContext<'_>,
) -> Result<TrainLog, DistillError> {
    run(shape, data, cfg, ctx, None)
}

/// Trains a fresh student against a frozen teacher.
pub fn distill_student(
    teacher: &ClassifierParams,
    shape: ModelShape,
    kd_data: &Dataset,
    cfg: &KDTrainConfig,
    ctx: TrainContext<'_>,
) -> Result<TrainLog, DistillError> {
    run(shape, kd_data, cfg, ctx, Some(teacher))
}

fn sweep_with(
    cfg: &KDTrainConfig,
    mut f: impl FnMut(&KDTrainConfig) -> Result<TrainLog, DistillError>,
) -> Result<Sweep, DistillError> {
    cfg.validate()?;
    let runs = cfg
        .lr
        .values()
        .into_iter()
        .map(|lr| f(&cfg.with_lr(lr)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Sweep::from_runs(runs))
}

pub fn finetune_sweep(
    shape: ModelShape,
    data: &Dataset,
    cfg: &KDTrainConfig,
    ctx: TrainContext<'_>,
) -> Result<Sweep, DistillError> {
    sweep_with(cfg, |c| finetune_student(shape, data, c, ctx))
}

pub fn distill_sweep(
    teacher: &ClassifierParams,
    shape: ModelShape,
    kd_data: &Dataset,
    cfg: &KDTrainConfig,
    ctx: TrainContext<'_>,
) -> Result<Sweep, DistillError> {
    sweep_with(cfg, |c| distill_student(teacher, shape, kd_data, c, ctx))
}
