//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion does.

mod common;

use std::fs;
use std::io::Write;
use std::time::{Duration, Instant};

use common::*;
use kdaug::augment::{
    change_count, AugmentMethod, AugmentResources, AugmentSpec, AugmentedExample, Augmenter,
    NeighborIndex, Thesaurus,
};
use kdaug::corpus::{
    generate_synthetic, subsample, synthetic_embeddings, teacher_embeddings,
    SyntheticEmbeddingSpec, SyntheticTaskSpec,
};
use kdaug::distill::{
    distill_student, finetune_student, kd_example_loss, train_teacher, AugMode, KDTrainConfig,
    LearningRate, TrainContext,
};
use kdaug::model::{
    backward, batch_loss, cross_entropy, init, kl_distance, mse_distance, softmax,
    ClassifierParams, Distance, InputMode, ModelShape, Objective, TrainItem,
};
use kdaug::seed::rng_from;
use kdaug::theory::{
    kde_lipschitz_bound, l1_density_error, n_threshold, sweep_optimal_tau, tau_threshold,
    verify_theorem, x_u, GroundTruth, KdeMixture, L1Method, PointSet, SweepOptions,
    TheoremInstance,
};
use kdaug::{Dataset, EmbeddingTable, LabeledExample, TokenId, TokenSequence};
use rand::Rng;
use serde_json::{json, Value};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// ---------------------------------------------------------------- gradients

fn tensor_mut(p: &mut ClassifierParams, t: usize) -> &mut Vec<f64> {
    match t {
        0 => &mut p.emb,
        1 => &mut p.w1,
        2 => &mut p.b1,
        3 => &mut p.w2,
        _ => &mut p.b2,
    }
}

/// Hidden pre-activations recomputed from the raw tensors.
fn pre_activations(p: &ClassifierParams, seq: &TokenSequence) -> Vec<f64> {
    let s = p.shape;
    let e = s.embed_dim;
    let ranges = match s.mode {
        InputMode::Single => vec![0..seq.len()],
        InputMode::Paired => seq.segment_ranges(),
    };
    let mut pooled = Vec::new();
    for r in ranges {
        let n = r.len() as f64;
        let mut acc = vec![0.0; e];
        for &id in &seq.ids()[r] {
            for k in 0..e {
                acc[k] += p.emb[id as usize * e + k];
            }
        }
        pooled.extend(acc.into_iter().map(|x| x / n));
    }
    let w = pooled.len();
    (0..s.hidden_dim)
        .map(|j| p.b1[j] + (0..w).map(|k| p.w1[j * w + k] * pooled[k]).sum::<f64>())
        .collect()
}

fn random_segment(rng: &mut impl Rng, vocab: usize) -> Vec<TokenId> {
    let len = rng.random_range(1..6);
    (0..len)
        .map(|_| rng.random_range(0..vocab as TokenId))
        .collect()
}

fn gradient_check() -> Outcome {
    let h = 1e-4;
    let mut worst = 0.0f64;
    let mut redraws = 0;
    let mut seed = 0u64;
    let mut configs = 0;
    while configs < 20 {
        seed += 1;
        let mut rng = rng_from(seed, &[99]);
        let mode = if rng.random::<bool>() {
            InputMode::Paired
        } else {
            InputMode::Single
        };
        let shape = ModelShape {
            vocab_size: rng.random_range(3..10),
            embed_dim: rng.random_range(1..5),
            hidden_dim: rng.random_range(1..6),
            num_classes: rng.random_range(2..5),
            mode,
        };
        let p = init(shape, seed, None).unwrap();
        let teacher = init(shape, seed + 1000, None).unwrap();
        let seqs: Vec<TokenSequence> = (0..3)
            .map(|_| match mode {
                InputMode::Single => {
                    TokenSequence::single(random_segment(&mut rng, shape.vocab_size))
                }
                InputMode::Paired => TokenSequence::paired(
                    &random_segment(&mut rng, shape.vocab_size),
                    &random_segment(&mut rng, shape.vocab_size),
                )
                .unwrap(),
            })
            .collect();
        // Central differences are meaningless across a ReLU kink.
        if seqs
            .iter()
            .any(|s| pre_activations(&p, s).iter().any(|x| x.abs() < 1e-2))
        {
            redraws += 1;
            continue;
        }
        configs += 1;
        let labels: Vec<usize> = (0..3)
            .map(|_| rng.random_range(0..shape.num_classes))
            .collect();
        let tl: Vec<Vec<f64>> = seqs.iter().map(|s| teacher.forward(s).unwrap()).collect();
        for kind in 0..3 {
            let items: Vec<TrainItem> = (0..3)
                .map(|i| TrainItem {
                    sequence: &seqs[i],
                    objective: match kind {
                        0 => Objective::cross_entropy(labels[i]),
                        1 => Objective::distill(Some(labels[i]), 0.3, &tl[i], Distance::Mse),
                        _ => Objective::distill(Some(labels[i]), 0.3, &tl[i], Distance::Kl),
                    },
                    weight: 1.0 / 3.0,
                })
                .collect();
            let (_, g) = backward(&p, &items).unwrap();
            let analytic = [&g.emb, &g.w1, &g.b1, &g.w2, &g.b2];
            for (t, ana) in analytic.iter().enumerate() {
                for i in 0..ana.len() {
                    let mut plus = p.clone();
                    tensor_mut(&mut plus, t)[i] += h;
                    let mut minus = p.clone();
                    tensor_mut(&mut minus, t)[i] -= h;
                    let num = (batch_loss(&plus, &items).unwrap()
                        - batch_loss(&minus, &items).unwrap())
                        / (2.0 * h);
                    let denom = ana[i].abs().max(num.abs()).max(1e-7);
                    worst = worst.max((ana[i] - num).abs() / denom);
                }
            }
        }
    }
    outcome(
        worst < 1e-4,
        format!("max relative error {worst:.2e} over 20 configs x 3 losses ({redraws} redrawn near a kink)"),
    )
}

// --------------------------------------------------------- loss identities

fn small_task() -> (SyntheticTaskSpec, SyntheticEmbeddingSpec) {
    (
        SyntheticTaskSpec {
            num_classes: 2,
            vocab_size: 200,
            seq_len_range: [4, 10],
            class_token_bias: 3.0,
            seed: 3,
            signal_fraction: 0.5,
            paired: false,
        },
        SyntheticEmbeddingSpec {
            dim: 8,
            class_separation: 1.0,
            noise: 1.0,
            extra_tokens: 50,
            teacher_extra_noise: None,
            seed: 4,
        },
    )
}

fn loss_identities() -> Outcome {
    let mut rng = rng_from(2, &[]);
    let mut ce_exact = true;
    let mut self_zero = true;
    let mut kl_min = f64::INFINITY;
    for _ in 0..1000 {
        let c = rng.random_range(2..6);
        let s: Vec<f64> = (0..c).map(|_| rng.random_range(-10.0..10.0)).collect();
        let t: Vec<f64> = (0..c).map(|_| rng.random_range(-10.0..10.0)).collect();
        let y = rng.random_range(0..c);
        let ce = cross_entropy(&softmax(&s), y);
        let ce_grad = Objective::cross_entropy(y).evaluate(&s).unwrap().1;
        for d in [Distance::Mse, Distance::Kl] {
            ce_exact &= kd_example_loss(&s, &t, y, 1.0, d).unwrap() == ce;
            ce_exact &= Objective::distill(Some(y), 1.0, &t, d)
                .evaluate(&s)
                .unwrap()
                .1
                == ce_grad;
        }
        self_zero &= mse_distance(&s, &s).unwrap() == 0.0;
        self_zero &= kl_distance(&softmax(&s), &softmax(&s)).unwrap() == 0.0;
        kl_min = kl_min.min(kl_distance(&softmax(&s), &softmax(&t)).unwrap());
    }

    let (task, espec) = small_task();
    let (_, table) = synthetic_embeddings(&task, &espec).unwrap();
    let data = generate_synthetic(&task, 300).unwrap();
    let shape = ModelShape {
        vocab_size: table.len(),
        embed_dim: 8,
        hidden_dim: 8,
        num_classes: 2,
        mode: InputMode::Single,
    };
    let base = KDTrainConfig {
        steps: 60,
        lr: LearningRate::Single(0.01),
        eval_every: 60,
        batch_size: 16,
        seed: 5,
        ..Default::default()
    };
    let ctx = TrainContext {
        pretrained: Some(&table),
        ..Default::default()
    };
    let teacher = train_teacher(
        ModelShape {
            hidden_dim: 16,
            ..shape
        },
        &data,
        &base,
        ctx,
    )
    .unwrap();
    let res = AugmentResources {
        vocab_size: table.len(),
        neighbors: Some(NeighborIndex::build(&table, 5)),
        thesaurus: None,
    };
    let vanilla = distill_student(&teacher.params, shape, &data, &base, ctx).unwrap();
    let gamma_one = KDTrainConfig {
        gamma: 1.0,
        aug: Some(AugmentSpec {
            method: AugmentMethod::Knn,
            degree: 0.5,
            k: 5,
            base_seed: 8,
        }),
        aug_mode: AugMode::Online,
        ..base.clone()
    };
    let ctx_aug = TrainContext {
        resources: Some(&res),
        ..ctx
    };
    let g1 = distill_student(&teacher.params, shape, &data, &gamma_one, ctx_aug).unwrap();
    let trace_equal = g1.loss_trace == vanilla.loss_trace && g1.params == vanilla.params;

    outcome(
        ce_exact && self_zero && kl_min >= 0.0 && trace_equal,
        format!(
            "alpha=1 equals CE: {ce_exact}, D(x,x)=0: {self_zero}, min KL {kl_min:.2e} on 1000 pairs, \
             gamma=1 trace identical: {trace_equal}"
        ),
    )
}

// ---------------------------------------------------------- augmentation

fn augment_fixture() -> (AugmentResources, usize) {
    let vocab = 300;
    let mut rng = rng_from(30, &[]);
    let rows: Vec<Vec<f64>> = (0..vocab)
        .map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let table = EmbeddingTable::from_rows(&rows).unwrap();
    let thesaurus = Thesaurus::new((1..vocab as TokenId).map(|t| {
        let syns: Vec<TokenId> = (0..3)
            .map(|_| rng.random_range(1..vocab as TokenId))
            .collect();
        let fallback = if t == 1 { 2 } else { 1 };
        (t, syns.into_iter().chain([fallback]).collect())
    }));
    let res = AugmentResources {
        vocab_size: vocab,
        neighbors: Some(NeighborIndex::build(&table, 10)),
        thesaurus: Some(thesaurus),
    };
    (res, vocab)
}

fn changes_are_exact(src: &TokenSequence, out: &AugmentedExample, want: usize) -> bool {
    let changed = &out.changed_positions;
    out.sequence.len() == src.len()
        && changed.len() == want
        && (0..src.len()).all(|p| {
            let moved = src.ids()[p] != out.sequence.ids()[p];
            moved == changed.contains(&p)
        })
}

fn degree_exactness() -> Outcome {
    let (res, vocab) = augment_fixture();
    let methods = [
        AugmentMethod::Knn,
        AugmentMethod::Synonym,
        AugmentMethod::RandomReplace,
    ];
    let mut rng = rng_from(31, &[]);
    let mut exact = 0;
    for case in 0..1000 {
        let len = rng.random_range(1..40);
        let ids: Vec<TokenId> = (0..len)
            .map(|_| rng.random_range(1..vocab as TokenId))
            .collect();
        let seq = TokenSequence::single(ids);
        // Half the cases sit on a 5% grid, where ties in the rounding occur.
        let (degree, want) = if case % 2 == 0 {
            let k = rng.random_range(0..=20usize);
            (k as f64 / 20.0, (2 * k * len + 20) / 40)
        } else {
            let r: f64 = rng.random();
            (r, (r * len as f64).round() as usize)
        };
        assert_eq!(change_count(len, degree), want);
        let method = methods[case % 3];
        let spec = AugmentSpec {
            method,
            degree,
            k: 10,
            base_seed: case as u64,
        };
        let aug = Augmenter::new(&spec, &res).unwrap();
        let out = aug.apply(&seq, &mut rng_from(case as u64, &[]));
        exact += usize::from(changes_are_exact(&seq, &out, want));
    }

    let batch: Vec<LabeledExample> = (0..64)
        .map(|i| LabeledExample {
            sequence: TokenSequence::single(
                (0..12)
                    .map(|_| rng.random_range(1..vocab as TokenId))
                    .collect(),
            ),
            label: i % 2,
        })
        .collect();
    let data = Dataset::new(batch.clone(), 2).unwrap();
    let mut replay = true;
    for seed in 0..100u64 {
        let spec = AugmentSpec {
            method: methods[seed as usize % 3],
            degree: 0.4,
            k: 10,
            base_seed: seed,
        };
        let run = || {
            let aug = Augmenter::new(&spec, &res).unwrap();
            serde_json::to_vec(&(aug.online(&batch, seed), aug.offline(&data, 2))).unwrap()
        };
        replay &= run() == run();
    }

    let spec = AugmentSpec {
        method: AugmentMethod::Knn,
        degree: 0.5,
        k: 10,
        base_seed: 77,
    };
    let with_threads = |n: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap();
        pool.install(|| {
            let aug = Augmenter::new(&spec, &res).unwrap();
            (0..20)
                .map(|step| aug.online(&batch, step))
                .collect::<Vec<_>>()
        })
    };
    let parallel_same = with_threads(1) == with_threads(4);

    outcome(
        exact == 1000 && replay && parallel_same,
        format!(
            "{exact}/1000 exact change counts, 100-seed replay identical: {replay}, \
             1 vs 4 threads identical: {parallel_same}"
        ),
    )
}

// ----------------------------------------------------------- KD behaviour

struct KdSetup {
    big: Dataset,
    test: Dataset,
    table: EmbeddingTable,
    teacher: ClassifierParams,
    teacher_acc: f64,
    res: AugmentResources,
}

const STUDENT_STEPS: usize = 300;
const POOL: usize = 500;
const SEEDS: u64 = 5;

fn kd_setup() -> KdSetup {
    let task = SyntheticTaskSpec {
        num_classes: 2,
        vocab_size: 5000,
        seq_len_range: [8, 16],
        class_token_bias: 3.0,
        seed: 1,
        signal_fraction: 0.5,
        paired: false,
    };
    let espec = SyntheticEmbeddingSpec {
        dim: 16,
        class_separation: 1.0,
        noise: 1.0,
        extra_tokens: 10_000,
        teacher_extra_noise: Some(2.0),
        seed: 2,
    };
    let (_, table) = synthetic_embeddings(&task, &espec).unwrap();
    let teacher_table = teacher_embeddings(&task, &espec, &table).unwrap();
    let big = generate_synthetic(
        &SyntheticTaskSpec {
            seed: 10,
            ..task.clone()
        },
        50_000,
    )
    .unwrap();
    let test = generate_synthetic(&SyntheticTaskSpec { seed: 11, ..task }, 4000).unwrap();
    let shape = ModelShape {
        vocab_size: table.len(),
        embed_dim: 16,
        hidden_dim: 128,
        num_classes: 2,
        mode: InputMode::Single,
    };
    let cfg = KDTrainConfig {
        steps: 3000,
        lr: LearningRate::Single(0.003),
        eval_every: 3000,
        ..Default::default()
    };
    let ctx = TrainContext {
        pretrained: Some(&teacher_table),
        resources: None,
        eval: Some(&test),
    };
    let log = train_teacher(shape, &big, &cfg, ctx).unwrap();
    let res = AugmentResources {
        vocab_size: table.len(),
        neighbors: Some(NeighborIndex::build(&table, 15)),
        thesaurus: None,
    };
    KdSetup {
        teacher_acc: log.final_metric().unwrap(),
        teacher: log.params,
        big,
        test,
        table,
        res,
    }
}

fn student_accuracy(s: &KdSetup, pool: &Dataset, degree: f64, seed: u64, distill: bool) -> f64 {
    let shape = ModelShape {
        hidden_dim: 16,
        ..s.teacher.shape
    };
    let cfg = KDTrainConfig {
        steps: STUDENT_STEPS,
        lr: LearningRate::Single(0.01),
        eval_every: STUDENT_STEPS,
        seed,
        aug: Some(AugmentSpec {
            method: AugmentMethod::Knn,
            degree,
            k: 15,
            base_seed: seed,
        }),
        aug_mode: if degree == 0.0 {
            AugMode::None
        } else {
            AugMode::Online
        },
        ..Default::default()
    };
    let ctx = TrainContext {
        pretrained: Some(&s.table),
        resources: Some(&s.res),
        eval: Some(&s.test),
    };
    let log = if distill {
        distill_student(&s.teacher, shape, pool, &cfg, ctx)
    } else {
        finetune_student(shape, pool, &cfg, ctx)
    };
    log.unwrap().final_metric().unwrap()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn kd_pool(s: &KdSetup, seed: u64) -> Dataset {
    subsample(&s.big, POOL as f64 / s.big.len() as f64, 100 + seed).unwrap()
}

fn pct(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| format!("{:.2}", 100.0 * x))
        .collect::<Vec<_>>()
        .join(", ")
}

fn quantity(s: &KdSetup) -> Outcome {
    let fractions = [0.01, 0.1, 1.0];
    let means: Vec<f64> = fractions
        .iter()
        .map(|&f| {
            let accs: Vec<f64> = (0..SEEDS)
                .map(|seed| {
                    let kd = subsample(&s.big, f, 100 + seed).unwrap();
                    student_accuracy(s, &kd, 0.0, seed, true)
                })
                .collect();
            mean(&accs)
        })
        .collect();
    let pass = means.windows(2).all(|w| w[1] >= w[0] - 0.005);
    outcome(
        pass,
        format!(
            "teacher {:.2}%, vanilla KD at 1%/10%/100%: [{}]",
            100.0 * s.teacher_acc,
            pct(&means)
        ),
    )
}

fn degree_trend(s: &KdSetup) -> Outcome {
    let degrees = [0.0, 0.1, 0.3, 0.5, 0.8];
    let accs: Vec<Vec<f64>> = degrees
        .iter()
        .map(|&d| {
            (0..SEEDS)
                .map(|seed| student_accuracy(s, &kd_pool(s, seed), d, seed, true))
                .collect()
        })
        .collect();
    let means: Vec<f64> = accs.iter().map(|a| mean(a)).collect();
    let best = (0..degrees.len()).fold(0, |b, i| if means[i] > means[b] { i } else { b });
    let all_beat_zero = means[1..].iter().all(|&m| m > means[0]);
    let best_large = degrees[best] >= 0.3;
    let extreme_drops = means[4] < means[best];
    let paired: Vec<String> = (1..degrees.len())
        .map(|i| {
            let diffs: Vec<f64> = (0..SEEDS as usize)
                .map(|k| accs[i][k] - accs[0][k])
                .collect();
            let wins = diffs.iter().filter(|&&x| x > 0.0).count();
            format!(
                "{}: {:+.2} ({wins}/{SEEDS})",
                degrees[i],
                100.0 * mean(&diffs)
            )
        })
        .collect();
    outcome(
        all_beat_zero && best_large && extreme_drops,
        format!(
            "means [{}] over degrees {degrees:?}; paired vs degree 0 [{}]; best {}",
            pct(&means),
            paired.join(", "),
            degrees[best]
        ),
    )
}

fn finetune_contrast(s: &KdSetup) -> Outcome {
    let run = |d: f64| -> Vec<f64> {
        (0..SEEDS)
            .map(|seed| student_accuracy(s, &kd_pool(s, seed), d, seed, false))
            .collect()
    };
    let plain = run(0.0);
    let shifted = run(0.7);
    let wins = (0..SEEDS as usize)
        .filter(|&k| shifted[k] > plain[k])
        .count();
    outcome(
        mean(&shifted) <= mean(&plain),
        format!(
            "fine-tune no aug {:.2}%, degree 0.7 {:.2}% (augmented ahead in {wins}/{SEEDS} seeds)",
            100.0 * mean(&plain),
            100.0 * mean(&shifted)
        ),
    )
}

// ----------------------------------------------------------------- theory

fn formulas() -> Outcome {
    let text = include_str!("../../core/tests/data/bound_oracle.json");
    let o: Value = serde_json::from_str(text).unwrap();
    let num = |v: &Value| -> f64 { v.as_str().unwrap().parse().unwrap() };
    let mut worst = 0.0f64;
    let cases = o["cases"].as_array().unwrap();
    for c in cases {
        let d = c["d"].as_u64().unwrap() as usize;
        let eps = c["eps"].as_f64().unwrap();
        let delta = c["delta"].as_f64().unwrap();
        let tau = c["tau"].as_f64().unwrap();
        let n = c["n"].as_u64().unwrap() as usize;
        for (name, got) in [
            ("x_u", x_u(d, eps)),
            ("tau_threshold", tau_threshold(d, eps)),
            ("n_threshold", n_threshold(d, eps, delta, tau)),
            ("kde_lipschitz_bound", kde_lipschitz_bound(n, tau)),
        ] {
            let want = num(&c[name]);
            worst = worst.max((got - want).abs() / want.abs());
        }
    }
    let reference = num(&o["reference"]["x_u"]);
    let xu = x_u(2, 0.1);
    let off = (xu - reference).abs() / reference;
    outcome(
        cases.len() == 20 && worst < 1e-10 && off < 0.005,
        format!(
            "max relative error {worst:.1e} on {} cases; x_u(2, 0.1) = {xu:.6} (oracle {reference:.6})",
            cases.len()
        ),
    )
}

fn kde_stack() -> Outcome {
    // Importance-sampled integral with a wide Gaussian proposal.
    let mut rng = rng_from(80, &[]);
    let mix = KdeMixture::new(PointSet::standard_normal(2, 1000, &mut rng), 0.05).unwrap();
    let (samples, s) = (200_000, 2.5);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let x: Vec<f64> = PointSet::standard_normal(2, 1, &mut rng)
            .as_slice()
            .iter()
            .map(|z| s * z)
            .collect();
        let q = (-(x[0] * x[0] + x[1] * x[1]) / (2.0 * s * s)).exp()
            / (2.0 * std::f64::consts::PI * s * s);
        let w = mix.density(&x).unwrap() / q;
        sum += w;
        sum_sq += w * w;
    }
    let n = samples as f64;
    let integral = sum / n;
    let integral_se = ((sum_sq / n - integral * integral) / n).sqrt();
    let integral_ok = (integral - 1.0).abs() < 0.01;

    // Two-dimensional histogram of sampler output against binned density.
    let mut rng = rng_from(81, &[]);
    let mix = KdeMixture::new(PointSet::standard_normal(2, 50, &mut rng), 0.2).unwrap();
    let count = 100_000;
    let pts = mix.sample(count, &mut rng);
    let (lo, width, bins) = (-3.0, 1.0, 6);
    let mut hist = vec![0usize; bins * bins];
    for x in pts.iter() {
        let (i, j) = (((x[0] - lo) / width).floor(), ((x[1] - lo) / width).floor());
        if (0.0..bins as f64).contains(&i) && (0.0..bins as f64).contains(&j) {
            hist[i as usize * bins + j as usize] += 1;
        }
    }
    let sub = 40;
    let h = width / sub as f64;
    let mut worst_z = 0.0f64;
    for i in 0..bins {
        for j in 0..bins {
            let mut p = 0.0;
            for a in 0..sub {
                for b in 0..sub {
                    let x = [
                        lo + i as f64 * width + (a as f64 + 0.5) * h,
                        lo + j as f64 * width + (b as f64 + 0.5) * h,
                    ];
                    p += mix.density(&x).unwrap() * h * h;
                }
            }
            let expect = count as f64 * p;
            let sd = (expect * (1.0 - p)).sqrt().max(1.0);
            worst_z = worst_z.max((hist[i * bins + j] as f64 - expect).abs() / sd);
        }
    }
    let hist_ok = worst_z < 3.0;

    // L1 error against the truth for growing n.
    let gt = GroundTruth::new(vec![1.5, -0.5]).unwrap();
    let sizes = [100, 10_000, 100_000];
    let mut ordered = 0;
    let mut rows = Vec::new();
    for meta in 0..5u64 {
        let errs: Vec<f64> = sizes
            .iter()
            .map(|&n| {
                let mut rng = rng_from(meta, &[82, n as u64]);
                let mix = KdeMixture::new(PointSet::standard_normal(2, n, &mut rng), 0.05).unwrap();
                l1_density_error(&mix, &gt, L1Method::MonteCarlo { samples: 10_000 }, meta)
                    .unwrap()
                    .value
            })
            .collect();
        ordered += usize::from(errs.windows(2).all(|w| w[1] < w[0]));
        rows.push(format!("[{:.3} {:.3} {:.3}]", errs[0], errs[1], errs[2]));
    }
    outcome(
        integral_ok && hist_ok && ordered >= 3,
        format!(
            "integral {integral:.4} (se {integral_se:.4}), histogram max |z| {worst_z:.2} over 36 bins, \
             L1 strictly decreasing in {ordered}/5: {}",
            rows.join(" ")
        ),
    )
}

fn theorem_gap() -> Outcome {
    let (eps, delta) = (0.3, 0.1);
    let tau = tau_threshold(2, eps) / 2.0;
    let n = n_threshold(2, eps, delta, tau).ceil() as usize + 1;
    let inst = TheoremInstance {
        gt: GroundTruth::new(vec![1.5, -0.5]).unwrap(),
        n,
        m: 5000,
        tau,
        eps,
        delta,
        eps_t: 0.0,
        seed: 1,
        hypotheses: 64,
        offset_std: 1.0,
        l1_samples: 2000,
    };
    let trials = 50;
    let reports = verify_theorem(&inst, trials).unwrap();
    let ok = reports.iter().filter(|r| r.gap_ok).count();
    let sigma = (delta * (1.0 - delta) / trials as f64).sqrt();
    let needed = 1.0 - delta - 3.0 * sigma;
    let frac = ok as f64 / trials as f64;
    let mean_l1 = reports.iter().map(|r| r.l1_err).sum::<f64>() / trials as f64;
    let mean_gap = reports.iter().map(|r| r.eps_t - r.eps_s).sum::<f64>() / trials as f64;

    let wide = TheoremInstance { tau: 100.0, ..inst };
    let wide_l1: Vec<f64> = verify_theorem(&wide, 5)
        .unwrap()
        .iter()
        .map(|r| r.l1_err)
        .collect();
    let ood = wide_l1.iter().all(|&x| x > 0.5);
    outcome(
        frac >= needed && ood,
        format!(
            "tau {tau:.3e}, n {n}: gap within bound in {ok}/{trials} (need {:.3}), mean gap {mean_gap:.3}, \
             mean L1 {mean_l1:.3}; tau=100 L1 [{}]",
            needed,
            wide_l1.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn tau_preference() -> Outcome {
    let gt = GroundTruth::with_curvature(vec![3.0, 0.0], 1.0).unwrap();
    let taus = [0.01, 0.05, 0.2, 0.8, 3.0];
    let mut monotone = 0;
    let mut rows = Vec::new();
    for meta in 0..5u64 {
        let sweep = sweep_optimal_tau(
            &gt,
            &[50, 200, 1000],
            &taus,
            20,
            meta,
            &SweepOptions::default(),
        )
        .unwrap();
        let best: Vec<f64> = sweep.optimal.iter().map(|&(_, t)| t).collect();
        monotone += usize::from(best.windows(2).all(|w| w[1] <= w[0]));
        rows.push(format!("{best:?}"));
    }
    outcome(
        monotone >= 3,
        format!(
            "optimal tau for n = 50, 200, 1000 weakly decreasing in {monotone}/5: {}",
            rows.join(" ")
        ),
    )
}

// -------------------------------------------------------------------- CLI

fn cli_reproducibility() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let mut distill = distill_config(40);
    distill["training"]["aug"] = json!({"method": "knn", "degree": 0.4, "k": 5, "base_seed": 2});
    distill["training"]["aug_mode"] = json!("online");
    let mut finetune = distill.clone();
    finetune.as_object_mut().unwrap().remove("teacher");
    let sweep = json!({
        "pool": "data/train.tsv", "eval": "data/test.tsv", "embeddings": "data/embeddings.txt",
        "teacher": "teacher/checkpoint.json",
        "model": {"hidden_dim": 6, "num_classes": 2},
        "fractions": [0.2, 1.0], "degrees": [0.0, 0.3, 0.6], "seeds": [0, 1, 2],
        "training": {"steps": 20, "lr": [0.01, 0.003], "eval_every": 10}
    });
    let augment = json!({
        "input": "data/train.tsv", "embeddings": "data/embeddings.txt",
        "spec": {"method": "random_insert", "degree": 0.3, "base_seed": 1}, "multiplier": 3
    });
    let verify = json!({
        "instance": {"gt": {"w": [1.0, -1.0]}, "n": 200, "m": 500, "tau": 0.1, "eps": 0.3,
                     "delta": 0.1, "eps_t": 0.0, "seed": 3, "l1_samples": 300},
        "trials": 3
    });
    let sweep_tau = json!({
        "gt": {"w": [3.0, 0.0], "curvature": 1.0}, "n_values": [20, 80], "tau_grid": [0.05, 0.5],
        "trials": 2, "seed": 1, "options": {"test_count": 500, "aug_count": 200, "candidates": 16}
    });
    let bounds = json!({"d": 2, "eps": 0.1, "delta": 0.1, "tau": 1e-7});

    ok(&run_with(
        dir,
        "gen-synthetic",
        &gen_config(400, 150),
        "data",
    ));
    ok(&run_with(
        dir,
        "train-teacher",
        &teacher_config(),
        "teacher",
    ));
    let runs: [(&str, &Value); 8] = [
        ("gen-synthetic", &gen_config(400, 150)),
        ("train-teacher", &teacher_config()),
        ("distill", &distill),
        ("finetune", &finetune),
        ("sweep-degree", &sweep),
        ("augment", &augment),
        ("theory verify", &verify),
        ("theory sweep-tau", &sweep_tau),
    ];
    let mut identical = true;
    let mut files = 0;
    let mut mismatched = Vec::new();
    for (command, cfg) in runs.iter().chain([("theory bounds", &bounds)].iter()) {
        let stem = command.replace(' ', "_");
        let out_a = ok(&run_with(dir, command, cfg, &format!("{stem}_a")));
        let out_b = ok(&run_with(dir, command, cfg, &format!("{stem}_b")));
        let a = tree(&dir.join(format!("{stem}_a")));
        let b = tree(&dir.join(format!("{stem}_b")));
        let same_files = a.keys().eq(b.keys());
        let same = same_files
            && out_a == out_b
            && a.iter().all(|(path, bytes)| {
                files += 1;
                if path.as_os_str() == "manifest.json" {
                    stable_manifest(bytes) == stable_manifest(&b[path])
                } else {
                    *bytes == b[path]
                }
            });
        if !same {
            mismatched.push(command.to_string());
        }
        identical &= same;
    }

    let (_, long) = read_csv(&dir.join("sweep-degree_a/results.csv"));
    let (header, pivot) = read_csv(&dir.join("sweep-degree_a/pivot.csv"));
    let mut pivot_exact = pivot.len() == 2;
    for row in &pivot {
        for (j, degree) in header.iter().enumerate().skip(1) {
            let vals: Vec<f64> = long
                .iter()
                .filter(|r| r[0] == row[0] && r[1] == *degree)
                .map(|r| r[4].parse().unwrap())
                .collect();
            pivot_exact &= vals.len() == 3
                && row[j].parse::<f64>().unwrap() == vals.iter().sum::<f64>() / vals.len() as f64;
        }
    }
    let md = fs::read_to_string(dir.join("sweep-degree_a/pivot.md")).unwrap();
    pivot_exact &= md.starts_with("| Data | Vanilla KD | 30% | 60% |");
    outcome(
        identical && pivot_exact,
        format!(
            "9 commands rerun, {files} files compared, mismatches {mismatched:?}; \
             pivot equals long-form means: {pivot_exact}"
        ),
    )
}

// ------------------------------------------------------------------ driver

fn report(line: &str) {
    // Written straight to the process stdout so it shows without --nocapture.
    let mut out = std::io::stdout().lock();
    writeln!(out, "{line}").unwrap();
    out.flush().unwrap();
}

#[test]
fn acceptance() {
    let mut failed = Vec::new();
    let mut check = |id: usize, name: &str, budget: Duration, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        let took = start.elapsed();
        let pass = o.pass && took <= budget;
        report(&format!(
            "{} [{id:>2}] {name}: {} ({:.1}s, budget {}s)",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64(),
            budget.as_secs()
        ));
        if !pass {
            failed.push(id);
        }
    };
    let secs = Duration::from_secs;

    check(1, "gradient correctness", secs(30), &mut gradient_check);
    check(2, "loss identities", secs(10), &mut loss_identities);
    check(
        3,
        "augmentation degree and determinism",
        secs(30),
        &mut degree_exactness,
    );
    let setup_start = Instant::now();
    let setup = kd_setup();
    let setup_time = setup_start.elapsed();
    report(&format!(
        "     teacher trained in {:.1}s (counted against the next criterion)",
        setup_time.as_secs_f64()
    ));
    check(
        4,
        "more KD data helps",
        secs(20 * 60) - setup_time,
        &mut || quantity(&setup),
    );
    check(
        5,
        "KD accuracy versus augmentation degree",
        secs(30 * 60),
        &mut || degree_trend(&setup),
    );
    check(
        6,
        "fine-tuning gains nothing at large shift",
        secs(10 * 60),
        &mut || finetune_contrast(&setup),
    );
    check(7, "bound formulas", secs(1), &mut formulas);
    check(8, "kernel density stack", secs(5 * 60), &mut kde_stack);
    check(
        9,
        "source/target gap bound",
        secs(10 * 60),
        &mut theorem_gap,
    );
    check(
        10,
        "smaller samples prefer wider bandwidth",
        secs(15 * 60),
        &mut tau_preference,
    );
    check(
        11,
        "CLI reproducibility",
        secs(5 * 60),
        &mut cli_reproducibility,
    );

    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
