use super::OptimError;

/// Softmax cross-entropy for one example.
///
/// Returns the loss `logsumexp(z) - z[label]` and its gradient
/// `softmax(z) - onehot(label)`.
pub fn cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>), OptimError> {
    if label >= logits.len() {
        return Err(OptimError::LabelOutOfRange {
            label,
            classes: logits.len(),
        });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|&z| (z - max).exp()).sum();
    let lse = max + sum.ln();
    let loss = lse - logits[label];
    let grad = logits
        .iter()
        .enumerate()
        .map(|(i, &z)| (z - lse).exp() - if i == label { 1.0 } else { 0.0 })
        .collect();
    // lse >= z[label] holds exactly in real arithmetic; clamp rounding noise.
    Ok((loss.max(0.0), grad))
}
