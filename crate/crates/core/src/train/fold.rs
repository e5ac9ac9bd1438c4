use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{accuracy, macro_f1};
use super::model_file::{argmax, Classifier};
use super::{FoldMetrics, TrainConfig, TrainError};
use crate::embedding::{Clip, Dataset, FoldPlan, Label};
use crate::nn::{init_params, NnError, model_backward, model_forward, model_forward_traced, Mode, ModelParams, ModelSpec, TensorMap};
use crate::optim::{adam_step, cross_entropy, AdamState, EarlyStopState, StopDecision};
use crate::rng::{derive_seed, stream, tag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean train-mode loss over the epoch's batches, weighted by batch size.
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipPrediction {
    pub clip_id: String,
    pub label: Label,
    pub predicted: Label,
    /// `[non_humor, humor]`
    pub probabilities: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub fold_index: usize,
    pub train_clips: Vec<String>,
    pub val_clips: Vec<String>,
    pub test_clips: Vec<String>,
    /// Eval-mode losses of the initial parameters.
    pub initial_train_loss: f64,
    pub initial_val_loss: f64,
    pub epochs: Vec<EpochLog>,
    /// 1-based epoch whose snapshot was kept; 0 when no epoch ran.
    pub best_epoch: usize,
    /// Last epoch that ran.
    pub stop_epoch: usize,
    pub stopped_early: bool,
    /// Eval-mode losses of the returned parameters.
    pub final_train_loss: f64,
    pub final_val_loss: f64,
    pub test_predictions: Vec<ClipPrediction>,
}

#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub model: Classifier,
    pub metrics: FoldMetrics,
    pub log: TrainingLog,
}

/// Mean eval-mode cross-entropy over `clips`.
pub fn eval_loss(spec: &ModelSpec, params: &ModelParams, clips: &[&Clip]) -> Result<f64, TrainError> {
    if clips.is_empty() {
        return Ok(0.0);
    }
    let losses = clips
        .par_iter()
        .map(|c| {
            let logits = model_forward(spec, params, &c.audio.values, &c.video.values, &mut Mode::Eval)?;
            Ok(cross_entropy(&logits, c.label.index())?.0)
        })
        .collect::<Result<Vec<f64>, TrainError>>()?;
    Ok(losses.iter().sum::<f64>() / clips.len() as f64)
}

/// Per-sample gradients summed in sample order, divided by the batch size.
fn batch_gradient(
    spec: &ModelSpec,
    params: &ModelParams,
    batch: &[&Clip],
    dropout_seed: u64,
) -> Result<(f64, TensorMap), TrainError> {
    let per_sample = batch
        .par_iter()
        .enumerate()
        .map(|(i, clip)| {
            let mut rng = stream(dropout_seed, &[i as u64]);
            let (logits, trace) = model_forward_traced(
                spec,
                params,
                &clip.audio.values,
                &clip.video.values,
                &mut Mode::Train(&mut rng),
            )?;
            let (loss, grad_logits) = cross_entropy(&logits, clip.label.index())?;
            let grads = model_backward(spec, params, &trace, &grad_logits)?;
            Ok((loss, grads))
        })
        .collect::<Result<Vec<_>, TrainError>>()?;

    let mut iter = per_sample.into_iter();
    let (mut loss, mut total) = iter.next().expect("batch is non-empty");
    for (l, g) in iter {
        loss += l;
        for (name, t) in total.iter_mut() {
            t.add_assign(&g[name]);
        }
    }
    let scale = 1.0 / batch.len() as f64;
    total.values_mut().for_each(|t| t.scale(scale));
    Ok((loss * scale, total))
}

/// Splits training clips into (train, validation), stratified per class.
fn validation_split<'a>(
    train: &[&'a Clip],
    config: &TrainConfig,
    fold: usize,
) -> (Vec<&'a Clip>, Vec<&'a Clip>) {
    let mut fit = Vec::new();
    let mut val = Vec::new();
    for label in Label::ALL {
        let mut members: Vec<&Clip> = train.iter().copied().filter(|c| c.label == label).collect();
        members.sort_by(|a, b| a.clip_id.cmp(&b.clip_id));
        stream(config.seed, &[tag("validation"), fold as u64, label.index() as u64]).shuffle(&mut members);
        let n = members.len();
        let n_val = if n < 2 {
            0
        } else {
            ((n as f64 * config.val_fraction).round() as usize).clamp(1, n - 1)
        };
        val.extend_from_slice(&members[..n_val]);
        fit.extend_from_slice(&members[n_val..]);
    }
    fit.sort_by(|a, b| a.clip_id.cmp(&b.clip_id));
    val.sort_by(|a, b| a.clip_id.cmp(&b.clip_id));
    (fit, val)
}

/// Trains on every fold except `test_fold` and evaluates on `test_fold`.
pub fn train_fold(
    dataset: &Dataset,
    plan: &FoldPlan,
    test_fold: usize,
    config: &TrainConfig,
) -> Result<FoldOutcome, TrainError> {
    config.validate()?;
    if test_fold >= plan.k {
        return Err(TrainError::Plan(format!("test fold {test_fold} outside 0..{}", plan.k)));
    }
    let mut test = Vec::new();
    let mut train = Vec::new();
    for clip in &dataset.clips {
        match plan.fold_of(&clip.clip_id) {
            Some(f) if f == test_fold => test.push(clip),
            Some(_) => train.push(clip),
            None => return Err(TrainError::Plan(format!("clip {} missing from fold plan", clip.clip_id))),
        }
    }
    if test.is_empty() {
        return Err(TrainError::Plan(format!("test fold {test_fold} is empty")));
    }
    let (fit, val) = validation_split(&train, config, test_fold);
    if fit.is_empty() {
        return Err(TrainError::EmptySplit { fold: test_fold, split: "training" });
    }
    if val.is_empty() {
        return Err(TrainError::EmptySplit { fold: test_fold, split: "validation" });
    }
    let test_ids: HashSet<&str> = test.iter().map(|c| c.clip_id.as_str()).collect();
    if let Some(leak) = fit.iter().chain(&val).find(|c| test_ids.contains(c.clip_id.as_str())) {
        return Err(TrainError::Plan(format!("clip {} in both train and test", leak.clip_id)));
    }

    let spec = config.model_spec();
    let fold = test_fold as u64;
    let mut params = init_params(&spec, derive_seed(config.seed, &[tag("init"), fold]))?;
    let mut adam = AdamState::new(config.adam(), &params.tensors);
    let mut stopper = EarlyStopState::new(config.patience, config.min_delta);
    let initial_train_loss = eval_loss(&spec, &params, &fit)?;
    let initial_val_loss = eval_loss(&spec, &params, &val)?;
    let mut epochs = Vec::new();
    let mut stopped_early = false;

    for epoch in 1..=config.epochs {
        let mut order = fit.clone();
        stream(config.seed, &[tag("shuffle"), fold, epoch as u64]).shuffle(&mut order);
        let mut loss_sum = 0.0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let dropout_seed = derive_seed(config.seed, &[tag("dropout"), fold, epoch as u64, b as u64]);
            let diverged = |detail: String| TrainError::Diverged {
                fold: test_fold,
                epoch,
                detail,
            };
            let (loss, grads) = match batch_gradient(&spec, &params, batch, dropout_seed) {
                Err(TrainError::Nn(NnError::NonFiniteOutput)) => {
                    return Err(diverged(format!("batch {b} produced non-finite logits")))
                }
                other => other?,
            };
            if !loss.is_finite() {
                return Err(diverged(format!("batch {b} loss {loss}")));
            }
            adam_step(&mut params.tensors, &grads, &mut adam)?;
            params.snap_to_f32();
            if let Some((name, _)) = params.tensors.iter().find(|(_, t)| !t.is_finite()) {
                return Err(diverged(format!("batch {b} left {name} non-finite in binary32")));
            }
            loss_sum += loss * batch.len() as f64;
        }
        let val_loss = eval_loss(&spec, &params, &val)?;
        epochs.push(EpochLog {
            epoch,
            train_loss: loss_sum / fit.len() as f64,
            val_loss,
        });
        if stopper.update(val_loss, &params) == StopDecision::Stop {
            if stopper.diverged() {
                return Err(TrainError::Diverged {
                    fold: test_fold,
                    epoch,
                    detail: "validation loss is NaN".into(),
                });
            }
            stopped_early = epoch < config.epochs;
            break;
        }
    }

    let best_epoch = stopper.best_epoch();
    let stop_epoch = epochs.len();
    if let Some(best) = stopper.into_best() {
        params = best;
    }

    let final_train_loss = eval_loss(&spec, &params, &fit)?;
    let final_val_loss = eval_loss(&spec, &params, &val)?;
    let model = Classifier {
        spec,
        params,
        extractor_pair: config.extractor_pair,
        config_hash: config.hash(),
        metrics: None,
    };

    let test_predictions = test
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
    let metrics = fold_metrics(test_fold, &test_predictions, best_epoch, stop_epoch)?;
    let model = Classifier {
        metrics: Some(metrics.clone()),
        ..model
    };
    let ids = |clips: &[&Clip]| clips.iter().map(|c| c.clip_id.clone()).collect::<Vec<_>>();
    let log = TrainingLog {
        fold_index: test_fold,
        train_clips: ids(&fit),
        val_clips: ids(&val),
        test_clips: ids(&test),
        initial_train_loss,
        initial_val_loss,
        epochs,
        best_epoch,
        stop_epoch,
        stopped_early,
        final_train_loss,
        final_val_loss,
        test_predictions,
    };
    Ok(FoldOutcome { model, metrics, log })
}

pub(crate) fn fold_metrics(
    fold_index: usize,
    predictions: &[ClipPrediction],
    best_epoch: usize,
    stop_epoch: usize,
) -> Result<FoldMetrics, TrainError> {
    let preds: Vec<usize> = predictions.iter().map(|p| p.predicted.index()).collect();
    let labels: Vec<usize> = predictions.iter().map(|p| p.label.index()).collect();
    Ok(FoldMetrics {
        fold_index,
        test_accuracy: accuracy(&preds, &labels)?,
        test_macro_f1: macro_f1(&preds, &labels)?,
        best_epoch,
        stop_epoch,
        n_test: predictions.len(),
    })
}
