use crate::error::{Error, Result};

/// `|top-k ∩ G| / |G|`.
pub fn rec_at_k(recommended: &[usize], ground_truth: &[usize], k: usize) -> Result<f64> {
    if ground_truth.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    let hits = recommended
        .iter()
        .take(k)
        .filter(|r| ground_truth.contains(r))
        .count();
    Ok(hits as f64 / ground_truth.len() as f64)
}

/// Reciprocal 1-based rank of the first ground-truth hit; 0 on a miss.
pub fn mrr(recommended: &[usize], ground_truth: &[usize]) -> Result<f64> {
    if ground_truth.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    Ok(recommended
        .iter()
        .position(|r| ground_truth.contains(r))
        .map_or(0.0, |i| 1.0 / (i + 1) as f64))
}
