//! Monte-Carlo instance of the augmentation bound: Gaussian inputs, a
//! sigmoid ground truth, a bounded-error teacher and kernel-density
//! augmentation, together with the closed-form thresholds.

mod bounds;
mod gap;
mod kde;


use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bounds::{
    hoeffding_deviation, kde_lipschitz_bound, n_threshold, tau_threshold, x_u, GridSpec,
};
pub use gap::{
    fit_hypothesis, measure_gap, sweep_optimal_tau, verify_theorem, GapMeasurement,
    HypothesisClass, SweepOptions, TauSweep, TauSweepRow, TheoremInstance, TheoremReport,
};
pub use kde::{l1_density_error, Estimate, KdeMixture, L1Method};

#[derive(Debug, Error)]
pub enum TheoryError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

pub type Result<T> = std::result::Result<T, TheoryError>;

fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(TheoryError::InvalidParameter(msg.into()))
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Points in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    d: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn new(d: usize, coords: Vec<f64>) -> Result<Self> {
        if d == 0 || coords.len() % d != 0 {
            return invalid("coordinate count is not a multiple of the dimension");
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return invalid("non-finite coordinate");
        }
        Ok(Self { d, coords })
    }

    /// `count` i.i.d. standard normal points.
    pub fn standard_normal(d: usize, count: usize, rng: &mut impl Rng) -> Self {
        let coords = (0..d * count).map(|_| rng.sample(StandardNormal)).collect();
        Self { d, coords }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }
}

/// Points with hard 0/1 labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoints {
    pub points: PointSet,
    pub labels: Vec<u8>,
}

/// `x ~ N(0, I)` and `P(y = 1 | x) = sigmoid(w.x + curvature * (|x|^2 - d))`.
/// With zero curvature this is the plain logistic model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GroundTruthSpec", into = "GroundTruthSpec")]
pub struct GroundTruth {
    w: Vec<f64>,
    curvature: f64,
    lipschitz_b: f64,
}

/// Serialised form; the Lipschitz constant is recomputed on load.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroundTruthSpec {
    w: Vec<f64>,
    #[serde(default)]
    curvature: f64,
}

impl TryFrom<GroundTruthSpec> for GroundTruth {
    type Error = TheoryError;

    fn try_from(s: GroundTruthSpec) -> Result<Self> {
        Self::with_curvature(s.w, s.curvature)
    }
}

impl From<GroundTruth> for GroundTruthSpec {
    fn from(g: GroundTruth) -> Self {
        Self {
            w: g.w,
            curvature: g.curvature,
        }
    }
}

impl GroundTruth {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        Self::with_curvature(w, 0.0)
    }

    pub fn with_curvature(w: Vec<f64>, curvature: f64) -> Result<Self> {
        if w.len() < 2 {
            return invalid("dimension must be at least 2");
        }
        if w.iter().any(|x| !x.is_finite()) || !curvature.is_finite() {
            return invalid("non-finite parameter");
        }
        let n = norm_sq(&w).sqrt();
        if n == 0.0 {
            return invalid("w must be non-zero");
        }
        let lipschitz_b = normal_density_lipschitz(w.len());
        Ok(Self {
            w,
            curvature,
            lipschitz_b,
        })
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn curvature(&self) -> f64 {
        self.curvature
    }

    /// `sup |grad p|` of the standard normal density in `d` dimensions.
    pub fn lipschitz_b(&self) -> f64 {
        self.lipschitz_b
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        let d = self.dim() as f64;
        dot(&self.w, x) + self.curvature * (norm_sq(x) - d)
    }

    pub fn prob(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    /// Input density `p(x)`.
    pub fn density(&self, x: &[f64]) -> f64 {
        let d = self.dim() as f64;
        (2.0 * std::f64::consts::PI).powf(-d / 2.0) * (-0.5 * norm_sq(x)).exp()
    }

    /// Unit vector orthogonal to `w`, built from the coordinate axis on which
    /// `w` has the smallest weight.
    pub fn orthogonal_direction(&self) -> Vec<f64> {
        let k = (0..self.dim())
            .min_by(|&a, &b| self.w[a].abs().total_cmp(&self.w[b].abs()))
            .expect("d >= 2");
        let wn = norm_sq(&self.w);
        let mut u: Vec<f64> = self.w.iter().map(|&wi| -self.w[k] * wi / wn).collect();
        u[k] += 1.0;
        let un = norm_sq(&u).sqrt();
        u.iter().map(|x| x / un).collect()
    }
}

/// Maximises `r * (2 pi)^(-d/2) * exp(-r^2 / 2)`, the gradient norm of the
/// standard normal density at radius `r`, by golden-section search.
fn normal_density_lipschitz(d: usize) -> f64 {
    let c = (2.0 * std::f64::consts::PI).powf(-(d as f64) / 2.0);
    let g = |r: f64| c * r * (-0.5 * r * r).exp();
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0f64, 10.0f64);
    for _ in 0..200 {
        let x1 = b - phi * (b - a);
        let x2 = a + phi * (b - a);
        if g(x1) < g(x2) {
            a = x1;
        } else {
            b = x2;
        }
    }
    g(0.5 * (a + b))
}

/// `count` points from `N(0, I)` with labels `y ~ Bernoulli(f(x))`.
pub fn sample_ground_truth(gt: &GroundTruth, count: usize, seed: u64) -> LabeledPoints {
    let mut rng = crate::seed::rng_from(seed, &[]);
    let points = PointSet::standard_normal(gt.dim(), count, &mut rng);
    let labels = points
        .iter()
        .map(|x| u8::from(rng.random::<f64>() < gt.prob(x)))
        .collect();
    LabeledPoints { points, labels }
}

/// `g(x) = clamp(f(x) + u, 0, 1)` with `u ~ U(-eps_t, eps_t)`. No randomness
/// is consumed when `eps_t == 0`.
pub fn teacher_label(x: &[f64], gt: &GroundTruth, eps_t: f64, rng: &mut impl Rng) -> f64 {
    let f = gt.prob(x);
    if eps_t == 0.0 {
        return f;
    }
    let u = rng.random_range(-eps_t..eps_t);
    (f + u).clamp(0.0, 1.0)
}

/// A teacher with error at most `eps_t` inside a ball of radius
/// `reliable_radius`. Outside it the teacher follows a logistic model rotated
/// away from the truth, which stands in for unreliable out-of-distribution
/// predictions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TeacherModel {
    pub eps_t: f64,
    #[serde(default)]
    pub reliable_radius: Option<f64>,
}

impl TeacherModel {
    pub fn exact() -> Self {
        Self {
            eps_t: 0.0,
            reliable_radius: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_t >= 0.0 && self.eps_t.is_finite()) {
            return invalid("eps_t must be non-negative");
        }
        if let Some(r) = self.reliable_radius {
            if !(r > 0.0) {
                return invalid("reliable_radius must be positive");
            }
        }
        Ok(())
    }

    pub fn prob(&self, gt: &GroundTruth, x: &[f64], rng: &mut impl Rng) -> f64 {
        match self.reliable_radius {
            Some(r) if norm_sq(x) > r * r => {
                let u = gt.orthogonal_direction();
                let scale = norm_sq(gt.w()).sqrt();
                sigmoid(scale * dot(&u, x))
            }
            _ => teacher_label(x, gt, self.eps_t, rng),
        }
    }

    /// Teacher probability thresholded at 0.5.
    pub fn hard_label(&self, gt: &GroundTruth, x: &[f64], rng: &mut impl Rng) -> u8 {
        u8::from(self.prob(gt, x, rng) >= 0.5)
    }
}
