//! Classification metrics over class indices (0 non-humor, 1 humor).

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricError {
    #[error("predictions ({predictions}) and labels ({labels}) differ in length")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("no predictions to score")]
    Empty,
    #[error("class index {0} out of range")]
    ClassOutOfRange(usize),
}

fn check(predictions: &[usize], labels: &[usize]) -> Result<(), MetricError> {
    if predictions.len() != labels.len() {
        return Err(MetricError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    if predictions.is_empty() {
        return Err(MetricError::Empty);
    }
    if let Some(&c) = predictions.iter().chain(labels).find(|&&c| c >= NUM_CLASSES) {
        return Err(MetricError::ClassOutOfRange(c));
    }
    Ok(())
}

const NUM_CLASSES: usize = 2;

/// `counts[label][prediction]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[usize; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn new(predictions: &[usize], labels: &[usize]) -> Result<Self, MetricError> {
        check(predictions, labels)?;
        let mut counts = [[0; NUM_CLASSES]; NUM_CLASSES];
        for (&p, &l) in predictions.iter().zip(labels) {
            counts[l][p] += 1;
        }
        Ok(Self { counts })
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    /// F1 of one class, 0 when precision and recall are both 0.
    pub fn f1(&self, class: usize) -> f64 {
        let tp = self.counts[class][class] as f64;
        let predicted: usize = (0..NUM_CLASSES).map(|l| self.counts[l][class]).sum();
        let actual: usize = self.counts[class].iter().sum();
        let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
        let recall = if actual == 0 { 0.0 } else { tp / actual as f64 };
        if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        }
    }
}

pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64, MetricError> {
    check(predictions, labels)?;
    let correct = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / predictions.len() as f64)
}

/// Unweighted mean of the per-class F1 scores.
pub fn macro_f1(predictions: &[usize], labels: &[usize]) -> Result<f64, MetricError> {
    let cm = ConfusionMatrix::new(predictions, labels)?;
    Ok((0..NUM_CLASSES).map(|c| cm.f1(c)).sum::<f64>() / NUM_CLASSES as f64)
}
