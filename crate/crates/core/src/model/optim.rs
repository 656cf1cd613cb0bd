use super::{ClassifierParams, Gradients, ModelError};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Adam moment estimates, one pair per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(params: &ClassifierParams, lr: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params
            .tensors()
            .iter()
            .map(|t| vec![0.0; t.len()])
            .collect();
        Self {
            lr,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// Bias-corrected Adam update on a flat parameter vector.
pub(crate) fn adam_update(
    x: &mut [f64],
    g: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
    b1: f64,
    b2: f64,
    eps: f64,
    step: u64,
) {
    let c1 = 1.0 - b1.powi(step as i32);
    let c2 = 1.0 - b2.powi(step as i32);
    for i in 0..x.len() {
        let gi = g[i];
        if gi == 0.0 && m[i] == 0.0 && v[i] == 0.0 {
            continue;
        }
        m[i] = b1 * m[i] + (1.0 - b1) * gi;
        v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
        let mh = m[i] / c1;
        let vh = v[i] / c2;
        x[i] -= lr * mh / (vh.sqrt() + eps);
    }
}

pub fn adam_step(
    params: &mut ClassifierParams,
    grads: &Gradients,
    state: &mut OptimizerState,
) -> Result<(), ModelError> {
    let gts = grads.tensors();
    for (p, g) in params.tensors().iter().zip(gts.iter()) {
        if p.len() != g.len() {
            return Err(ModelError::LengthMismatch {
                left: p.len(),
                right: g.len(),
            });
        }
    }
    state.step += 1;
    let OptimizerState {
        lr,
        beta1,
        beta2,
        eps,
        step,
        m,
        v,
    } = state;
    for (((p, g), m), v) in params
        .tensors_mut()
        .into_iter()
        .zip(gts)
        .zip(m.iter_mut())
        .zip(v.iter_mut())
    {
        adam_update(p, g, m, v, *lr, *beta1, *beta2, *eps, *step);
    }
    Ok(())
}
