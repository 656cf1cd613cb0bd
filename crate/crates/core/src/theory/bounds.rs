//! Closed-form radius, bandwidth and sample-size thresholds. The functions
//! expect `d >= 2`, `eps` and `delta` in (0, 1) and `tau > 0`.

use serde::{Deserialize, Serialize};

use super::{invalid, Result};

/// `2d ln(2 pi d) + 12 ln 2 - 4 ln eps`
pub fn x_u(d: usize, eps: f64) -> f64 {
    let d = d as f64;
    2.0 * d * (2.0 * std::f64::consts::PI * d).ln() + 12.0 * 2f64.ln() - 4.0 * eps.ln()
}

/// Repeated multiplication. `powi` may round differently when the compiler
/// folds it, which would make reports differ from direct calls.
fn ipow(x: f64, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, _| acc * x)
}

/// `2^(d-3) eps / x_u^(d+2)`
pub fn tau_threshold(d: usize, eps: f64) -> f64 {
    2f64.powf(d as f64 - 3.0) * eps / ipow(x_u(d, eps), d + 2)
}

/// `16/eps^2 ((d^2+5d+6) ln 2 + (d^2+d) ln x_u + d ln d - d ln eps - d ln delta - (d/2) ln tau)`
pub fn n_threshold(d: usize, eps: f64, delta: f64, tau: f64) -> f64 {
    let df = d as f64;
    let inner =
        (df * df + 5.0 * df + 6.0) * 2f64.ln() + (df * df + df) * x_u(d, eps).ln() + df * df.ln()
            - df * eps.ln()
            - df * delta.ln()
            - df / 2.0 * tau.ln();
    16.0 / (eps * eps) * inner
}

/// Lipschitz bound `n e^(-1/2) / sqrt(tau)` for the summed kernels.
pub fn kde_lipschitz_bound(n: usize, tau: f64) -> f64 {
    n as f64 * (-0.5f64).exp() / tau.sqrt()
}

/// Cube `[-radius, radius]^d` cut into cells of side at most `cell`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub d: usize,
    pub radius: f64,
    pub cell: f64,
    /// `ceil(2 radius / cell)^d`, kept as a float because the theoretical
    /// grid is astronomically large.
    pub n_g: f64,
}

impl GridSpec {
    pub fn new(d: usize, radius: f64, cell: f64) -> Result<Self> {
        if d == 0 || !(radius > 0.0 && radius.is_finite()) || !(cell > 0.0 && cell.is_finite()) {
            return invalid("grid needs positive dimension, radius and cell size");
        }
        let n_g = ipow((2.0 * radius / cell).ceil(), d);
        Ok(Self {
            d,
            radius,
            cell,
            n_g,
        })
    }

    /// Grid used by the proof: radius `x_u` and cell size
    /// `eps / (2 (B + B') (2 x_u)^d)`.
    pub fn theoretical(d: usize, eps: f64, b: f64, b_prime: f64) -> Result<Self> {
        let xu = x_u(d, eps);
        let cell = eps / (2.0 * (b + b_prime) * ipow(2.0 * xu, d));
        Self::new(d, xu, cell)
    }

    pub fn cells_per_axis(&self) -> usize {
        (2.0 * self.radius / self.cell).ceil() as usize
    }
}

/// Uniform deviation over `n_g` cells from Hoeffding and a union bound:
/// `sqrt(ln(2 n_g / delta) / (2 n))`.
pub fn hoeffding_deviation(n_g: f64, n: usize, delta: f64) -> f64 {
    ((2.0 * n_g / delta).ln() / (2.0 * n as f64)).sqrt()
}
