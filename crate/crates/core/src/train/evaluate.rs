use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fold::{fold_metrics, ClipPrediction};
use super::{argmax, Classifier, ConfusionMatrix, TrainError};
use crate::embedding::Dataset;

/// Eval-mode scores of one model on a labeled dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub dataset: String,
    pub n_clips: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub confusion: ConfusionMatrix,
    /// In manifest order.
    pub predictions: Vec<ClipPrediction>,
}

/// Scores `model` on every clip of `dataset`.
pub fn evaluate(model: &Classifier, dataset: &Dataset) -> Result<Evaluation, TrainError> {
    dataset.require_pair(model.extractor_pair)?;
    let predictions = dataset
        .clips
        .par_iter()
        .map(|c| {
            let p = model.probabilities(&c.audio.values, &c.video.values)?;
            Ok(ClipPrediction {
                clip_id: c.clip_id.clone(),
                label: c.label,
                predicted: argmax(&p),
                probabilities: p,
            })
        })
        .collect::<Result<Vec<_>, TrainError>>()?;
    let metrics = fold_metrics(0, &predictions, 0, 0)?;
    let preds: Vec<usize> = predictions.iter().map(|p| p.predicted.index()).collect();
    let labels: Vec<usize> = predictions.iter().map(|p| p.label.index()).collect();
    Ok(Evaluation {
        dataset: dataset.name.clone(),
        n_clips: predictions.len(),
        accuracy: metrics.test_accuracy,
        macro_f1: metrics.test_macro_f1,
        confusion: ConfusionMatrix::new(&preds, &labels)?,
        predictions,
    })
}
