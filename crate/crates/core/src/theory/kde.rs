use std::collections::HashMap;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::{invalid, GridSpec, GroundTruth, PointSet, Result, TheoryError};
use crate::seed::rng_from;

/// Kernels further than `sqrt(2 * tau * CUTOFF)` contribute less than
/// `exp(-CUTOFF)` each and are skipped by the cell index.
const CUTOFF: f64 = 37.0;

/// Largest grid the grid estimator will walk.
const MAX_GRID_CELLS: f64 = 5e7;

/// Uniform-weight Gaussian mixture `(1/n) sum_i N(c_i, tau I)`.
#[derive(Debug, Clone)]
pub struct KdeMixture {
    centers: PointSet,
    tau: f64,
    index: Option<CellIndex>,
}

#[derive(Debug, Clone)]
struct CellIndex {
    size: f64,
    cells: HashMap<[i64; 3], Vec<u32>>,
}

impl CellIndex {
    fn key(&self, x: &[f64]) -> [i64; 3] {
        let mut k = [0i64; 3];
        for (slot, v) in k.iter_mut().zip(x) {
            *slot = (v / self.size).floor() as i64;
        }
        k
    }

    fn build(centers: &PointSet, size: f64) -> Self {
        let mut idx = Self {
            size,
            cells: HashMap::new(),
        };
        for (i, c) in centers.iter().enumerate() {
            let k = idx.key(c);
            idx.cells.entry(k).or_default().push(i as u32);
        }
        idx
    }
}

impl KdeMixture {
    pub fn new(centers: PointSet, tau: f64) -> Result<Self> {
        if centers.is_empty() {
            return invalid("mixture needs at least one center");
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return invalid("tau must be positive");
        }
        let index = (centers.dim() <= 3).then(|| {
            let size = (2.0 * tau * CUTOFF).sqrt();
            CellIndex::build(&centers, size)
        });
        Ok(Self {
            centers,
            tau,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.centers.dim()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn centers(&self) -> &PointSet {
        &self.centers
    }

    fn norm_const(&self) -> f64 {
        (2.0 * PI * self.tau).powf(-(self.dim() as f64) / 2.0) / self.centers.len() as f64
    }

    fn kernel(&self, x: &[f64], c: &[f64]) -> f64 {
        let r2: f64 = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
        (-r2 / (2.0 * self.tau)).exp()
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(TheoryError::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Density at `x`. Uses the cell index when available, so kernels whose
    /// contribution is below `exp(-37)` are dropped.
    pub fn density(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let Some(idx) = &self.index else {
            return self.density_exact(x);
        };
        let d = self.dim();
        let base = idx.key(x);
        let mut total = 0.0;
        let mut offset = [0i64; 3];
        let span = 3usize.pow(d as u32);
        for code in 0..span {
            let mut c = code;
            for slot in offset.iter_mut().take(d) {
                *slot = (c % 3) as i64 - 1;
                c /= 3;
            }
            let mut key = base;
            for k in 0..d {
                key[k] += offset[k];
            }
            if let Some(members) = idx.cells.get(&key) {
                for &i in members {
                    total += self.kernel(x, self.centers.point(i as usize));
                }
            }
        }
        Ok(total * self.norm_const())
    }

    /// Density at `x` summing every kernel.
    pub fn density_exact(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let total: f64 = self.centers.iter().map(|c| self.kernel(x, c)).sum();
        Ok(total * self.norm_const())
    }

    /// Draws `count` points: a uniformly chosen center plus `N(0, tau I)`.
    pub fn sample(&self, count: usize, rng: &mut impl Rng) -> PointSet {
        let d = self.dim();
        let sd = self.tau.sqrt();
        let mut coords = Vec::with_capacity(count * d);
        for _ in 0..count {
            let c = self.centers.point(rng.random_range(0..self.centers.len()));
            for &ck in c {
                let z: f64 = rng.sample(StandardNormal);
                coords.push(ck + sd * z);
            }
        }
        PointSet::new(d, coords).expect("finite by construction")
    }

    /// Mass outside the cube `[-a, a]^d`.
    fn mass_outside_cube(&self, a: f64) -> f64 {
        let s = (2.0 * self.tau).sqrt();
        let total: f64 = self
            .centers
            .iter()
            .map(|c| {
                let log_inside: f64 = c
                    .iter()
                    .map(|&ck| {
                        let q = 0.5 * erfc((a - ck) / s) + 0.5 * erfc((a + ck) / s);
                        (-q.min(1.0)).ln_1p()
                    })
                    .sum();
                -log_inside.exp_m1()
            })
            .sum();
        total / self.centers.len() as f64
    }
}

fn normal_mass_outside_cube(d: usize, a: f64) -> f64 {
    let q = erfc(a / 2f64.sqrt());
    -((d as f64) * (-q.min(1.0)).ln_1p()).exp_m1()
}

/// A Monte-Carlo or deterministic estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum L1Method {
    /// Midpoint rule over the cube of the grid, plus the mass both densities
    /// put outside it. Only for `d <= 3`.
    Grid(GridSpec),
    /// Importance sampling from `q = (P_hat + P) / 2`.
    MonteCarlo { samples: usize },
}

/// `|P_hat - P|_1` between the mixture and the ground-truth input density.
pub fn l1_density_error(
    mix: &KdeMixture,
    gt: &GroundTruth,
    method: L1Method,
    seed: u64,
) -> Result<Estimate> {
    let d = mix.dim();
    if gt.dim() != d {
        return Err(TheoryError::DimensionMismatch {
            expected: d,
            found: gt.dim(),
        });
    }
    match method {
        L1Method::MonteCarlo { samples } => {
            if samples < 2 {
                return invalid("need at least two samples");
            }
            let mut rng = rng_from(seed, &[]);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            let mut x = vec![0.0; d];
            for _ in 0..samples {
                if rng.random::<bool>() {
                    x.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                } else {
                    let p = mix.sample(1, &mut rng);
                    x.copy_from_slice(p.point(0));
                }
                let ph = mix.density(&x)?;
                let p = gt.density(&x);
                let r = if ph + p > 0.0 {
                    2.0 * (ph - p).abs() / (ph + p)
                } else {
                    0.0
                };
                sum += r;
                sum_sq += r * r;
            }
            let n = samples as f64;
            let mean = sum / n;
            let var = ((sum_sq / n - mean * mean) * n / (n - 1.0)).max(0.0);
            Ok(Estimate {
                value: mean,
                stderr: (var / n).sqrt(),
            })
        }
        L1Method::Grid(spec) => {
            if d > 3 {
                return invalid("grid estimator supports d <= 3");
            }
            let per_axis = spec.cells_per_axis();
            if (per_axis as f64).powi(d as i32) > MAX_GRID_CELLS {
                return invalid("grid too fine for the grid estimator");
            }
            let a = spec.radius;
            let width = 2.0 * a / per_axis as f64;
            let vol = width.powi(d as i32);
            let total_cells = per_axis.pow(d as u32);
            let mut x = vec![0.0; d];
            let mut sum = 0.0;
            for cell in 0..total_cells {
                let mut c = cell;
                for slot in x.iter_mut() {
                    let k = c % per_axis;
                    c /= per_axis;
                    *slot = -a + (k as f64 + 0.5) * width;
                }
                sum += (mix.density(&x)? - gt.density(&x)).abs() * vol;
            }
            let tail = mix.mass_outside_cube(a) + normal_mass_outside_cube(d, a);
            Ok(Estimate {
                value: sum + tail,
                stderr: 0.0,
            })
        }
    }
}
