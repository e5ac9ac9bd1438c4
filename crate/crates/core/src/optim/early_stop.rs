use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopDecision {
    Continue,
    Stop,
}

/// Patience-based early stopping on a validation loss.
///
/// An epoch improves when its loss is below `best - min_delta`; the current
/// parameters are then snapshotted and the counter resets. A non-improving
/// epoch that arrives with the counter already at `patience` stops training.
/// A NaN loss stops immediately and sets the divergence flag.
#[derive(Debug, Clone)]
pub struct EarlyStopState<S> {
    pub patience: usize,
    pub min_delta: f64,
    best_val_loss: f64,
    best_epoch: usize,
    best: Option<S>,
    epochs_since_improvement: usize,
    epochs_seen: usize,
    diverged: bool,
}

impl<S: Clone> EarlyStopState<S> {
    pub fn new(patience: usize, min_delta: f64) -> Self {
        Self {
            patience,
            min_delta,
            best_val_loss: f64::INFINITY,
            best_epoch: 0,
            best: None,
            epochs_since_improvement: 0,
            epochs_seen: 0,
            diverged: false,
        }
    }

    /// Records one epoch's validation loss.
    pub fn update(&mut self, val_loss: f64, current: &S) -> StopDecision {
        self.epochs_seen += 1;
        if val_loss.is_nan() {
            self.diverged = true;
            return StopDecision::Stop;
        }
        if val_loss < self.best_val_loss - self.min_delta {
            self.best_val_loss = val_loss;
            self.best_epoch = self.epochs_seen;
            self.best = Some(current.clone());
            self.epochs_since_improvement = 0;
            return StopDecision::Continue;
        }
        if self.epochs_since_improvement >= self.patience {
            return StopDecision::Stop;
        }
        self.epochs_since_improvement += 1;
        StopDecision::Continue
    }

    pub fn best_val_loss(&self) -> f64 {
        self.best_val_loss
    }

    /// 1-based epoch of the snapshot, 0 before any improvement.
    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn epochs_since_improvement(&self) -> usize {
        self.epochs_since_improvement
    }

    pub fn diverged(&self) -> bool {
        self.diverged
    }

    pub fn best(&self) -> Option<&S> {
        self.best.as_ref()
    }

    pub fn into_best(self) -> Option<S> {
        self.best
    }
}
