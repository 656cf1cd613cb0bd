//! Output-layer functions: softmax, cross-entropy and the two distances used
//! between student and teacher outputs.

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::corpus::LabelDistribution;

/// Probabilities are clamped to this floor before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

/// Divergence between student and teacher outputs. MSE compares logits, KL
/// compares the softmax distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    Mse,
    Kl,
}

pub(crate) fn softmax_vec(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn softmax(logits: &[f64]) -> LabelDistribution {
    LabelDistribution::new_unchecked(softmax_vec(logits))
}

/// `-ln p(label)` with the probability clamped at [`PROB_FLOOR`].
pub fn cross_entropy(dist: &LabelDistribution, label: usize) -> f64 {
    -dist.probs()[label].max(PROB_FLOOR).ln()
}

/// `(1/C) * sum (s_i - t_i)^2` over logits.
pub fn mse_distance(student_logits: &[f64], teacher_logits: &[f64]) -> Result<f64, ModelError> {
    if student_logits.len() != teacher_logits.len() {
        return Err(ModelError::LengthMismatch {
            left: student_logits.len(),
            right: teacher_logits.len(),
        });
    }
    let c = student_logits.len() as f64;
    Ok(student_logits
        .iter()
        .zip(teacher_logits)
        .map(|(s, t)| (s - t) * (s - t))
        .sum::<f64>()
        / c)
}

/// `KL(teacher || student) = sum t_i (ln t_i - ln s_i)`, both clamped.
pub fn kl_distance(
    student: &LabelDistribution,
    teacher: &LabelDistribution,
) -> Result<f64, ModelError> {
    kl_probs(student.probs(), teacher.probs())
}

pub(crate) fn kl_probs(student: &[f64], teacher: &[f64]) -> Result<f64, ModelError> {
    if student.len() != teacher.len() {
        return Err(ModelError::LengthMismatch {
            left: student.len(),
            right: teacher.len(),
        });
    }
    Ok(teacher
        .iter()
        .zip(student)
        .filter(|(&t, _)| t > 0.0)
        .map(|(&t, &s)| t * (t.max(PROB_FLOOR).ln() - s.max(PROB_FLOOR).ln()))
        .sum())
}

/// Per-example training signal:
/// `alpha * CE(softmax(z), label) + (1 - alpha) * Distance(z, teacher)`.
/// A term with zero weight is skipped, so a label is only needed when
/// `alpha > 0` and teacher logits only when `alpha < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective<'a> {
    pub label: Option<usize>,
    pub alpha: f64,
    pub teacher_logits: Option<&'a [f64]>,
    pub distance: Distance,
}

impl<'a> Objective<'a> {
    pub fn cross_entropy(label: usize) -> Self {
        Self {
            label: Some(label),
            alpha: 1.0,
            teacher_logits: None,
            distance: Distance::Mse,
        }
    }

    pub fn distill(
        label: Option<usize>,
        alpha: f64,
        teacher_logits: &'a [f64],
        distance: Distance,
    ) -> Self {
        Self {
            label,
            alpha,
            teacher_logits: Some(teacher_logits),
            distance,
        }
    }

    /// Loss value and its gradient with respect to the logits.
    pub fn evaluate(&self, logits: &[f64]) -> Result<(f64, Vec<f64>), ModelError> {
        let c = logits.len();
        let mut loss = 0.0;
        let mut grad = vec![0.0; c];
        let probs = softmax_vec(logits);
        if self.alpha > 0.0 {
            let y = self.label.ok_or(ModelError::MissingLabel)?;
            if y >= c {
                return Err(ModelError::LabelOutOfRange {
                    label: y,
                    classes: c,
                });
            }
            loss += self.alpha * -probs[y].max(PROB_FLOOR).ln();
            if probs[y] >= PROB_FLOOR {
                for (j, g) in grad.iter_mut().enumerate() {
                    let onehot = if j == y { 1.0 } else { 0.0 };
                    *g += self.alpha * (probs[j] - onehot);
                }
            }
        }
        let w = 1.0 - self.alpha;
        if w > 0.0 {
            let t = self.teacher_logits.ok_or(ModelError::MissingTeacher)?;
            match self.distance {
                Distance::Mse => {
                    loss += w * mse_distance(logits, t)?;
                    for (j, g) in grad.iter_mut().enumerate() {
                        *g += w * 2.0 * (logits[j] - t[j]) / c as f64;
                    }
                }
                Distance::Kl => {
                    if t.len() != c {
                        return Err(ModelError::LengthMismatch {
                            left: c,
                            right: t.len(),
                        });
                    }
                    let tp = softmax_vec(t);
                    loss += w * kl_probs(&probs, &tp)?;
                    let live: f64 = tp
                        .iter()
                        .zip(&probs)
                        .filter(|(_, &s)| s >= PROB_FLOOR)
                        .map(|(&ti, _)| ti)
                        .sum();
                    for (j, g) in grad.iter_mut().enumerate() {
                        let own = if probs[j] >= PROB_FLOOR { tp[j] } else { 0.0 };
                        *g += w * (probs[j] * live - own);
                    }
                }
            }
        }
        Ok((loss, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn softmax_cases() {
        let d = softmax(&[2.0, 2.0, 2.0]);
        assert!(d.probs().iter().all(|&p| (p - 1.0 / 3.0).abs() < 1e-15));
        let a = softmax(&[0.3, -1.2, 2.0]);
        let b = softmax(&[100.3, 98.8, 102.0]);
        for (x, y) in a.probs().iter().zip(b.probs()) {
            assert!((x - y).abs() < 1e-12);
        }
        let big = softmax(&[1000.0, 0.0]);
        assert!(big.probs()[0] > 1.0 - 1e-12 && big.probs()[1] >= 0.0);
        assert!(big.probs().iter().all(|p| p.is_finite()));
    }

    #[test]
    fn cross_entropy_cases() {
        let one = LabelDistribution::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(cross_entropy(&one, 1), 0.0);
        let u = softmax(&[0.0, 0.0, 0.0]);
        assert!((cross_entropy(&u, 2) - 3f64.ln()).abs() < 1e-15);
        // Clamped at the probability floor.
        assert!((cross_entropy(&one, 0) - (-PROB_FLOOR.ln())).abs() < 1e-12);
    }

    #[test]
    fn mse_cases() {
        assert_eq!(mse_distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert!(mse_distance(&[1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn kl_cases() {
        let d = softmax(&[0.1, 0.7, -0.2]);
        assert_eq!(kl_distance(&d, &d).unwrap(), 0.0);
        // KL([0.5,0.5] || [0.9,0.1]) = 0.5 ln(0.5/0.9) + 0.5 ln(0.5/0.1).
        let t = LabelDistribution::new(vec![0.5, 0.5]).unwrap();
        let s = LabelDistribution::new(vec![0.9, 0.1]).unwrap();
        let expected = 0.510_825_623_765_990_7;
        assert!((kl_distance(&s, &t).unwrap() - expected).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn mse_symmetric_and_kl_nonnegative(
            a in prop::collection::vec(-5.0f64..5.0, 4),
            b in prop::collection::vec(-5.0f64..5.0, 4),
        ) {
            prop_assert_eq!(mse_distance(&a, &b).unwrap(), mse_distance(&b, &a).unwrap());
            prop_assert!(kl_distance(&softmax(&a), &softmax(&b)).unwrap() >= -1e-15);
            let s: f64 = softmax(&a).probs().iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }

        #[test]
        fn softmax_preserves_argmax(a in prop::collection::vec(-50.0f64..50.0, 5), shift in -100.0f64..100.0) {
            let shifted: Vec<f64> = a.iter().map(|x| x + shift).collect();
            prop_assert_eq!(softmax(&a).argmax(), crate::corpus::argmax(&a));
            prop_assert_eq!(softmax(&shifted).argmax(), crate::corpus::argmax(&a));
        }
    }
}
