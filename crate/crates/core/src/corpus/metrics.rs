use super::{CorpusError, Result};

fn check_lengths(preds: &[usize], golds: &[usize]) -> Result<()> {
    if preds.len() != golds.len() {
        return Err(CorpusError::LengthMismatch {
            left: preds.len(),
            right: golds.len(),
        });
    }
    if preds.is_empty() {
        return Err(CorpusError::EmptyInput);
    }
    Ok(())
}

/// Fraction of exact matches.
pub fn accuracy(preds: &[usize], golds: &[usize]) -> Result<f64> {
    check_lengths(preds, golds)?;
    let hits = preds.iter().zip(golds).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Matthews correlation of binary predictions. Returns 0 when any row or
/// column of the confusion matrix is empty.
pub fn matthews(preds: &[usize], golds: &[usize]) -> Result<f64> {
    check_lengths(preds, golds)?;
    let (mut tp, mut tn, mut fp, mut fn_) = (0u64, 0u64, 0u64, 0u64);
    for (&p, &g) in preds.iter().zip(golds) {
        match (p, g) {
            (1, 1) => tp += 1,
            (0, 0) => tn += 1,
            (1, 0) => fp += 1,
            (0, 1) => fn_ += 1,
            (p, g) => return Err(CorpusError::NonBinaryLabel(p.max(g))),
        }
    }
    let marginals = [tp + fp, tp + fn_, tn + fp, tn + fn_];
    if marginals.contains(&0) {
        return Ok(0.0);
    }
    let denom: f64 = marginals.iter().map(|&m| m as f64).product::<f64>().sqrt();
    Ok((tp as f64 * tn as f64 - fp as f64 * fn_ as f64) / denom)
}
