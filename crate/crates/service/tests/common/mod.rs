//! Fixtures for driving the router in-process.
#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use avr_core::embedding::{EmbeddingRecord, ExtractorPair, Modality, EMBEDDING_DIM};
use avr_core::nn::{init_params, ModelSpec};
use avr_core::rng::SplitMix64;
use avr_core::train::{save_model, Classifier};
use avr_service::extractor::Extractor;
use avr_service::media::Demuxer;
use avr_service::stub::StubDemuxer;
use avr_service::{router, AppState, LoadedModel, Pipeline, ServiceConfig};
use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use tower::ServiceExt;

pub const BOUNDARY: &str = "avr-test-boundary";

pub fn classifier(spec: ModelSpec, seed: u64) -> Classifier {
    Classifier {
        params: init_params(&spec, seed).unwrap(),
        spec,
        extractor_pair: ExtractorPair::VideomaeAst,
        config_hash: "0123456789abcdef".into(),
        metrics: None,
    }
}

/// Saves `model` under `dir` and loads it the way the service does.
pub fn loaded(model: &Classifier, dir: &Path) -> LoadedModel {
    let path = dir.join("model.json");
    save_model(model, &path).unwrap();
    LoadedModel::load(&path, None).unwrap()
}

pub fn embedding(pair: ExtractorPair, modality: Modality, dim: usize, seed: u64) -> EmbeddingRecord {
    let mut rng = SplitMix64::new(seed);
    let values = (0..dim).map(|_| rng.normal() as f32).collect();
    EmbeddingRecord::new("stub", pair.extractor(modality), values)
}

pub fn embedding_pair(seed: u64) -> (EmbeddingRecord, EmbeddingRecord) {
    let pair = ExtractorPair::VideomaeAst;
    (
        embedding(pair, Modality::Audio, EMBEDDING_DIM, seed),
        embedding(pair, Modality::Video, EMBEDDING_DIM, seed + 1),
    )
}

pub fn app_with(model: LoadedModel, extractor: Arc<dyn Extractor>, config: ServiceConfig, timeout: Duration) -> axum::Router {
    let demuxer: Arc<dyn Demuxer> = Arc::new(StubDemuxer);
    let pipeline = Pipeline::new(demuxer, extractor, config.extractor_concurrency, timeout);
    router(AppState::with_model(config, pipeline, model))
}

pub fn app(model: LoadedModel, extractor: Arc<dyn Extractor>) -> axum::Router {
    app_with(model, extractor, ServiceConfig::default(), Duration::from_secs(60))
}

pub fn multipart_body(field: &str, bytes: &[u8]) -> Vec<u8> {
    let mut body = format!(
        "--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"{field}\"; filename=\"clip.mp4\"\r\nContent-Type: video/mp4\r\n\r\n"
    )
    .into_bytes();
    body.extend_from_slice(bytes);
    body.extend_from_slice(format!("\r\n--{BOUNDARY}--\r\n").as_bytes());
    body
}

pub fn upload_request(field: &str, bytes: &[u8]) -> Request<Body> {
    Request::post("/v1/predict")
        .header("content-type", format!("multipart/form-data; boundary={BOUNDARY}"))
        .body(Body::from(multipart_body(field, bytes)))
        .unwrap()
}

pub fn embedding_request(audio: &[f32], video: &[f32]) -> Request<Body> {
    let body = serde_json::json!({ "audio": audio, "video": video });
    Request::post("/v1/predict_embedding")
        .header("content-type", "application/json")
        .body(Body::from(serde_json::to_vec(&body).unwrap()))
        .unwrap()
}

pub fn get(path: &str) -> Request<Body> {
    Request::get(path).body(Body::empty()).unwrap()
}

pub async fn send(app: &axum::Router, request: Request<Body>) -> (StatusCode, serde_json::Value) {
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = to_bytes(response.into_body(), usize::MAX).await.unwrap();
    let json = serde_json::from_slice(&bytes).unwrap_or_else(|_| serde_json::Value::String(String::from_utf8_lossy(&bytes).into()));
    (status, json)
}

/// Asserts an error response carries `code` and the documented fields.
pub fn assert_error(status: StatusCode, body: &serde_json::Value, expected_status: u16, code: &str) {
    assert_eq!(status.as_u16(), expected_status, "{body}");
    assert_eq!(body["error_code"], code, "{body}");
    assert!(body["message"].is_string(), "{body}");
    assert!(body.get("detail").is_some(), "{body}");
}
