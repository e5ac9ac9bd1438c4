//! Loss, optimizer and early stopping.

mod adam;
mod early_stop;
mod loss;

use thiserror::Error;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use early_stop::{EarlyStopState, StopDecision};
pub use loss::cross_entropy;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("no gradient for parameter {0}")]
    MissingGradient(String),
    #[error("no optimizer moment for parameter {0}")]
    MissingMoment(String),
    #[error("{what} for {name} has shape {found:?}, parameter has {expected:?}")]
    Shape {
        name: String,
        what: &'static str,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
}
