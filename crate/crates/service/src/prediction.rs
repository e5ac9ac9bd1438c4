use std::time::Duration;

use avr_core::embedding::{Label, EMBEDDING_DIM};
use avr_core::train::Classifier;
use serde::{Deserialize, Serialize};

use crate::error::{ApiError, ErrorCode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probabilities {
    pub non_humor: f64,
    pub humor: f64,
}

/// Per-stage wall time in whole milliseconds. `total_ms` also covers
/// orchestration, so it is at least each stage but not their exact sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Latency {
    pub total_ms: u64,
    pub demux_ms: u64,
    pub extract_ms: u64,
    pub model_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probabilities: Probabilities,
    pub predicted_label: Label,
    pub latency_ms: Latency,
    pub model_id: String,
    /// Length of the uploaded media when the demuxer reports it.
    pub media_duration_s: Option<f64>,
}

pub(crate) fn millis(d: Duration) -> u64 {
    u64::try_from(d.as_millis()).unwrap_or(u64::MAX)
}

/// Checks one embedding vector, naming `field` in the error.
pub fn validate_embedding(field: &str, values: &[f32]) -> Result<(), ApiError> {
    if values.len() != EMBEDDING_DIM {
        return Err(ApiError::new(
            ErrorCode::InvalidEmbedding,
            format!("{field}: expected {EMBEDDING_DIM} values, got {}", values.len()),
        ));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(ApiError::new(
            ErrorCode::InvalidEmbedding,
            format!("{field}: non-finite value at index {i}"),
        ));
    }
    Ok(())
}

/// Eval-mode prediction on a pair of embeddings. Demux and extract
/// latencies are zero; callers that ran those stages fill them in.
pub fn predict_from_embeddings(
    model: &Classifier,
    model_id: &str,
    audio: &[f32],
    video: &[f32],
) -> Result<Prediction, ApiError> {
    validate_embedding("audio", audio)?;
    validate_embedding("video", video)?;
    let started = std::time::Instant::now();
    let (label, p) = model
        .predict(audio, video)
        .map_err(|e| ApiError::new(ErrorCode::Internal, "model forward failed").with_detail(e.to_string()))?;
    let model_ms = millis(started.elapsed());
    Ok(Prediction {
        probabilities: Probabilities {
            non_humor: p[0],
            humor: p[1],
        },
        predicted_label: label,
        latency_ms: Latency {
            total_ms: model_ms,
            model_ms,
            ..Latency::default()
        },
        model_id: model_id.to_owned(),
        media_duration_s: None,
    })
}
