//! HTTP inference service for trained audio-visual humor classifiers.
//!
//! A request flows upload → [`media`] demux (16 kHz mono waveform plus video
//! stream) → [`extractor`] sidecar (one 768-d embedding per modality) →
//! eval-mode model → [`Prediction`]. The model is immutable once loaded and
//! shared by all requests; demux and extraction run under a concurrency
//! limit.
//!
//! | route                      | body                                 |
//! |----------------------------|--------------------------------------|
//! | `POST /v1/predict`         | multipart, field `video` (mp4)       |
//! | `POST /v1/predict_embedding` | JSON `{"audio": [..], "video": [..]}` |
//! | `GET /v1/health`           |                                      |
//! | `GET /v1/model`            |                                      |
//!
//! Errors are JSON `{error_code, message, detail}`; see [`ErrorCode`].

pub mod config;
pub mod error;
pub mod extractor;
pub mod media;
pub mod pipeline;
pub mod prediction;
pub mod server;
pub mod stub;

pub use config::{ExtractorConfig, ServiceConfig};
pub use error::{ApiError, ErrorCode};
pub use pipeline::{LoadedModel, Pipeline};
pub use prediction::{predict_from_embeddings, Latency, Prediction, Probabilities};
pub use server::{router, serve, AppState, EmbeddingRequest, Health, ModelInfo};
