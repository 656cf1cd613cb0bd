use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    dot, invalid, l1_density_error, n_threshold, norm_sq, sample_ground_truth, tau_threshold, x_u,
    GroundTruth, KdeMixture, L1Method, LabeledPoints, PointSet, Result, TeacherModel, TheoryError,
};
use crate::seed::{derive_seed, rng_from, stream};

/// Finite family of linear thresholds `h(x) = 1[v.x + c > 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisClass {
    d: usize,
    dirs: Vec<f64>,
    offsets: Vec<f64>,
}

impl HypothesisClass {
    pub fn new(candidates: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let Some(d) = candidates.first().map(|(v, _)| v.len()) else {
            return invalid("hypothesis class is empty");
        };
        let mut dirs = Vec::with_capacity(candidates.len() * d);
        let mut offsets = Vec::with_capacity(candidates.len());
        for (v, c) in candidates {
            if v.len() != d {
                return Err(TheoryError::DimensionMismatch {
                    expected: d,
                    found: v.len(),
                });
            }
            dirs.extend(v);
            offsets.push(c);
        }
        Ok(Self { d, dirs, offsets })
    }

    /// `count` random unit directions with `N(0, offset_std^2)` offsets,
    /// preceded by the direction of `w` at offset 0 when `include_bayes`.
    pub fn random(
        gt: &GroundTruth,
        count: usize,
        offset_std: f64,
        include_bayes: bool,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let d = gt.dim();
        let mut cands = Vec::with_capacity(count + 1);
        if include_bayes {
            let n = norm_sq(gt.w()).sqrt();
            cands.push((gt.w().iter().map(|x| x / n).collect(), 0.0));
        }
        for _ in 0..count {
            let v: Vec<f64> = loop {
                let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                let n = norm_sq(&v).sqrt();
                if n > 1e-12 {
                    break v.iter().map(|x| x / n).collect();
                }
            };
            let z: f64 = rng.sample(StandardNormal);
            cands.push((v, offset_std * z));
        }
        Self::new(cands)
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn candidate(&self, j: usize) -> (&[f64], f64) {
        (&self.dirs[j * self.d..(j + 1) * self.d], self.offsets[j])
    }

    pub fn predict(&self, j: usize, x: &[f64]) -> u8 {
        let (v, c) = self.candidate(j);
        u8::from(dot(v, x) + c > 0.0)
    }

    /// 0-1 error of every candidate on `data`.
    pub fn error_rates(&self, data: &LabeledPoints) -> Result<Vec<f64>> {
        if data.points.dim() != self.d {
            return Err(TheoryError::DimensionMismatch {
                expected: self.d,
                found: data.points.dim(),
            });
        }
        let n = data.labels.len() as f64;
        Ok((0..self.len())
            .map(|j| {
                let wrong = data
                    .points
                    .iter()
                    .zip(&data.labels)
                    .filter(|(x, &y)| self.predict(j, x) != y)
                    .count();
                wrong as f64 / n
            })
            .collect())
    }
}

fn argmin_first(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x < xs[best] {
            best = i;
        }
    }
    best
}

/// Empirical risk minimiser over the class; ties go to the lowest index.
pub fn fit_hypothesis(source: &LabeledPoints, hclass: &HypothesisClass) -> Result<usize> {
    if source.labels.is_empty() {
        return invalid("source sample is empty");
    }
    Ok(argmin_first(&hclass.error_rates(source)?))
}

/// `count` mixture draws labelled by the thresholded teacher.
fn teacher_sample(
    mix: &KdeMixture,
    gt: &GroundTruth,
    teacher: &TeacherModel,
    count: usize,
    seed: u64,
) -> LabeledPoints {
    let mut rng = rng_from(seed, &[]);
    let points = mix.sample(count, &mut rng);
    let labels = points
        .iter()
        .map(|x| teacher.hard_label(gt, x, &mut rng))
        .collect();
    LabeledPoints { points, labels }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapMeasurement {
    pub eps_t: f64,
    pub eps_t_stderr: f64,
    pub eps_s: f64,
    pub eps_s_stderr: f64,
}

fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Target and source errors of every candidate: the target sample is fresh
/// ground truth with Bernoulli labels, the source sample is fresh mixture
/// draws with thresholded teacher labels.
fn candidate_errors(
    hclass: &HypothesisClass,
    gt: &GroundTruth,
    test_count: usize,
    mix: &KdeMixture,
    aug_count: usize,
    teacher: &TeacherModel,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let target = sample_ground_truth(gt, test_count, derive_seed(seed, &[1]));
    let source = teacher_sample(mix, gt, teacher, aug_count, derive_seed(seed, &[2]));
    Ok((hclass.error_rates(&target)?, hclass.error_rates(&source)?))
}

/// `eps_T` and `eps_S` of candidate `h`.
#[allow(clippy::too_many_arguments)]
pub fn measure_gap(
    hclass: &HypothesisClass,
    h: usize,
    gt: &GroundTruth,
    test_count: usize,
    mix: &KdeMixture,
    aug_count: usize,
    teacher: &TeacherModel,
    seed: u64,
) -> Result<GapMeasurement> {
    if h >= hclass.len() {
        return invalid("hypothesis index out of range");
    }
    if test_count == 0 || aug_count == 0 {
        return invalid("sample counts must be positive");
    }
    let single = HypothesisClass::new(vec![{
        let (v, c) = hclass.candidate(h);
        (v.to_vec(), c)
    }])?;
    let (t, s) = candidate_errors(&single, gt, test_count, mix, aug_count, teacher, seed)?;
    Ok(GapMeasurement {
        eps_t: t[0],
        eps_t_stderr: binomial_se(t[0], test_count),
        eps_s: s[0],
        eps_s_stderr: binomial_se(s[0], aug_count),
    })
}

fn default_hypotheses() -> usize {
    64
}
fn default_offset_std() -> f64 {
    1.0
}
fn default_l1_samples() -> usize {
    4000
}

/// One configuration of the bound check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoremInstance {
    pub gt: GroundTruth,
    /// Training points, i.e. mixture centers.
    pub n: usize,
    /// Size of each augmented and target sample.
    pub m: usize,
    pub tau: f64,
    pub eps: f64,
    pub delta: f64,
    pub eps_t: f64,
    pub seed: u64,
    #[serde(default = "default_hypotheses")]
    pub hypotheses: usize,
    #[serde(default = "default_offset_std")]
    pub offset_std: f64,
    #[serde(default = "default_l1_samples")]
    pub l1_samples: usize,
}

impl TheoremInstance {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 || self.hypotheses == 0 || self.l1_samples < 2 {
            return invalid("counts must be positive");
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return invalid("tau must be positive");
        }
        if !(self.eps > 0.0 && self.eps < 1.0) || !(self.delta > 0.0 && self.delta < 1.0) {
            return invalid("eps and delta must lie in (0, 1)");
        }
        if !(self.eps_t >= 0.0) || !(self.offset_std >= 0.0) {
            return invalid("eps_t and offset_std must be non-negative");
        }
        Ok(())
    }

    pub fn teacher(&self) -> TeacherModel {
        TeacherModel {
            eps_t: self.eps_t,
            reliable_radius: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub trial: usize,
    pub n: usize,
    pub tau: f64,
    pub x_u: f64,
    pub tau_thresh: f64,
    pub n_thresh: f64,
    pub l1_err: f64,
    pub l1_stderr: f64,
    pub eps_t: f64,
    pub eps_s: f64,
    /// `min_h (eps_T(h) + eps_S(h))`
    pub lambda: f64,
    /// `eps_T(h*) + eps_T(h*)` for the joint minimiser `h*`, as the bound is
    /// literally stated.
    pub lambda_as_written: f64,
    pub gap_ok: bool,
}

/// Runs `trials` independent instances. Each trial draws centers, fits the
/// ERM hypothesis on teacher-labelled mixture draws and measures the gap on
/// fresh samples.
pub fn verify_theorem(inst: &TheoremInstance, trials: usize) -> Result<Vec<TheoremReport>> {
    inst.validate()?;
    if trials == 0 {
        return invalid("trials must be positive");
    }
    let d = inst.gt.dim();
    let xu = x_u(d, inst.eps);
    let tau_thresh = tau_threshold(d, inst.eps);
    let n_thresh = n_threshold(d, inst.eps, inst.delta, inst.tau);
    let teacher = inst.teacher();
    (0..trials)
        .into_par_iter()
        .map(|trial| {
            let seed = derive_seed(inst.seed, &[stream::TRIAL, trial as u64]);
            let mut rng = rng_from(seed, &[0]);
            let centers = PointSet::standard_normal(d, inst.n, &mut rng);
            let mix = KdeMixture::new(centers, inst.tau)?;
            let l1 = l1_density_error(
                &mix,
                &inst.gt,
                L1Method::MonteCarlo {
                    samples: inst.l1_samples,
                },
                derive_seed(seed, &[1]),
            )?;
            let mut hrng = rng_from(seed, &[2]);
            let hclass = HypothesisClass::random(
                &inst.gt,
                inst.hypotheses,
                inst.offset_std,
                true,
                &mut hrng,
            )?;
            let fit_set = teacher_sample(&mix, &inst.gt, &teacher, inst.m, derive_seed(seed, &[3]));
            let h = fit_hypothesis(&fit_set, &hclass)?;
            let (et, es) = candidate_errors(
                &hclass,
                &inst.gt,
                inst.m,
                &mix,
                inst.m,
                &teacher,
                derive_seed(seed, &[4]),
            )?;
            let joint: Vec<f64> = et.iter().zip(&es).map(|(a, b)| a + b).collect();
            let star = argmin_first(&joint);
            let lambda = joint[star];
            Ok(TheoremReport {
                trial,
                n: inst.n,
                tau: inst.tau,
                x_u: xu,
                tau_thresh,
                n_thresh,
                l1_err: l1.value,
                l1_stderr: l1.stderr,
                eps_t: et[h],
                eps_s: es[h],
                lambda,
                lambda_as_written: 2.0 * et[star],
                gap_ok: et[h] - es[h] < inst.eps + lambda,
            })
        })
        .collect()
}

fn default_candidates() -> usize {
    256
}
fn default_aug_count() -> usize {
    2000
}
fn default_test_count() -> usize {
    50_000
}
fn default_sweep_teacher() -> TeacherModel {
    TeacherModel {
        eps_t: 0.0,
        reliable_radius: Some(3.0),
    }
}

/// Settings of the bandwidth sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepOptions {
    #[serde(default = "default_candidates")]
    pub candidates: usize,
    #[serde(default = "default_offset_std")]
    pub offset_std: f64,
    #[serde(default)]
    pub include_bayes: bool,
    #[serde(default = "default_aug_count")]
    pub aug_count: usize,
    #[serde(default = "default_test_count")]
    pub test_count: usize,
    #[serde(default = "default_sweep_teacher")]
    pub teacher: TeacherModel,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            candidates: default_candidates(),
            offset_std: default_offset_std(),
            include_bayes: false,
            aug_count: default_aug_count(),
            test_count: default_test_count(),
            teacher: default_sweep_teacher(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauSweepRow {
    pub n: usize,
    pub tau: f64,
    pub mean_eps_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauSweep {
    pub rows: Vec<TauSweepRow>,
    /// `(n, tau)` with the lowest mean target error for each `n`.
    pub optimal: Vec<(usize, f64)>,
}

/// For every `n` and `tau`: fit the ERM hypothesis on teacher-labelled
/// mixture draws and score its expected target error on a shared test set.
/// Within a trial the centers, the candidate class and the mixture draws
/// (up to the bandwidth scale) are shared across the grid.
pub fn sweep_optimal_tau(
    gt: &GroundTruth,
    n_values: &[usize],
    tau_grid: &[f64],
    trials: usize,
    seed: u64,
    opts: &SweepOptions,
) -> Result<TauSweep> {
    if n_values.is_empty() || tau_grid.is_empty() || trials == 0 {
        return invalid("sweep grids and trial count must be non-empty");
    }
    if n_values.contains(&0) || tau_grid.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return invalid("n values and bandwidths must be positive");
    }
    if opts.candidates == 0 && !opts.include_bayes || opts.aug_count == 0 || opts.test_count == 0 {
        return invalid("sweep sample counts must be positive");
    }
    opts.teacher.validate()?;
    let d = gt.dim();
    let mut test_rng = rng_from(seed, &[stream::SWEEP_CELL, 0]);
    let test = PointSet::standard_normal(d, opts.test_count, &mut test_rng);
    let f: Vec<f64> = test.iter().map(|x| gt.prob(x)).collect();
    // Expected 0-1 loss under y ~ Bernoulli(f(x)).
    let expected_error = |hc: &HypothesisClass, j: usize| -> f64 {
        let total: f64 = test
            .iter()
            .zip(&f)
            .map(|(x, &p)| if hc.predict(j, x) == 1 { 1.0 - p } else { p })
            .sum();
        total / test.len() as f64
    };

    let mut rows = Vec::with_capacity(n_values.len() * tau_grid.len());
    let mut optimal = Vec::with_capacity(n_values.len());
    for (a, &n) in n_values.iter().enumerate() {
        let per_trial: Vec<Vec<f64>> = (0..trials)
            .into_par_iter()
            .map(|t| -> Result<Vec<f64>> {
                let mut rng = rng_from(seed, &[stream::SWEEP_CELL, 1, a as u64, t as u64]);
                let centers = PointSet::standard_normal(d, n, &mut rng);
                let hc = HypothesisClass::random(
                    gt,
                    opts.candidates,
                    opts.offset_std,
                    opts.include_bayes,
                    &mut rng,
                )?;
                // Common random numbers: every bandwidth reuses the same
                // center picks and unit noise, scaled by sqrt(tau).
                let picks: Vec<usize> = (0..opts.aug_count)
                    .map(|_| rng.random_range(0..n))
                    .collect();
                let noise: Vec<f64> = (0..opts.aug_count * d)
                    .map(|_| rng.sample(StandardNormal))
                    .collect();
                tau_grid
                    .iter()
                    .enumerate()
                    .map(|(b, &tau)| {
                        let sd = tau.sqrt();
                        let coords = picks
                            .iter()
                            .enumerate()
                            .flat_map(|(i, &c)| {
                                let noise = &noise[i * d..(i + 1) * d];
                                centers
                                    .point(c)
                                    .iter()
                                    .zip(noise)
                                    .map(move |(x, z)| x + sd * z)
                            })
                            .collect();
                        let points = PointSet::new(d, coords)?;
                        let mut trng =
                            rng_from(seed, &[stream::SWEEP_CELL, 2, a as u64, t as u64, b as u64]);
                        let labels = points
                            .iter()
                            .map(|x| opts.teacher.hard_label(gt, x, &mut trng))
                            .collect();
                        let src = LabeledPoints { points, labels };
                        let h = fit_hypothesis(&src, &hc)?;
                        Ok(expected_error(&hc, h))
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let means: Vec<f64> = (0..tau_grid.len())
            .map(|b| per_trial.iter().map(|v| v[b]).sum::<f64>() / trials as f64)
            .collect();
        let mut best = 0;
        for b in 1..tau_grid.len() {
            if means[b] < means[best] || (means[b] == means[best] && tau_grid[b] < tau_grid[best]) {
                best = b;
            }
        }
        for (b, &tau) in tau_grid.iter().enumerate() {
            rows.push(TauSweepRow {
                n,
                tau,
                mean_eps_t: means[b],
            });
        }
        optimal.push((n, tau_grid[best]));
    }
    Ok(TauSweep { rows, optimal })
}
