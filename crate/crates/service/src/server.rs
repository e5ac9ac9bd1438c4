use std::sync::{Arc, RwLock};
use std::time::Instant;

use avr_core::train::FoldMetrics;
use axum::body::Bytes;
use axum::extract::multipart::MultipartRejection;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, Multipart, State};
use axum::http::{HeaderValue, Method, StatusCode};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

use crate::config::ServiceConfig;
use crate::error::{ApiError, ErrorCode};
use crate::pipeline::{LoadedModel, Pipeline};
use crate::prediction::Prediction;

#[derive(Debug, Clone)]
enum ModelState {
    Starting,
    Ready(Arc<LoadedModel>),
    Failed(String),
}

/// Shared state behind every handler. The model is read-only once loaded.
pub struct AppState {
    config: ServiceConfig,
    pipeline: Pipeline,
    model: RwLock<ModelState>,
    reload: tokio::sync::Mutex<()>,
    started: Instant,
}

impl AppState {
    /// Loads the model before returning; a load failure refuses startup
    /// unless the config asks for lazy loading.
    pub async fn start(config: ServiceConfig, pipeline: Pipeline) -> Result<Arc<Self>, String> {
        config.validate()?;
        let state = Arc::new(Self {
            config,
            pipeline,
            model: RwLock::new(ModelState::Starting),
            reload: tokio::sync::Mutex::new(()),
            started: Instant::now(),
        });
        if state.config.lazy_model {
            let background = Arc::clone(&state);
            tokio::spawn(async move {
                let _ = background.load().await;
            });
        } else {
            state.load().await?;
        }
        Ok(state)
    }

    /// Like [`AppState::start`] with an already loaded model.
    pub fn with_model(config: ServiceConfig, pipeline: Pipeline, model: LoadedModel) -> Arc<Self> {
        Arc::new(Self {
            config,
            pipeline,
            model: RwLock::new(ModelState::Ready(Arc::new(model))),
            reload: tokio::sync::Mutex::new(()),
            started: Instant::now(),
        })
    }

    async fn load(&self) -> Result<Arc<LoadedModel>, String> {
        let _guard = self.reload.lock().await;
        if let ModelState::Ready(m) = &*self.model.read().unwrap() {
            return Ok(Arc::clone(m));
        }
        let path = self.config.model_path.clone();
        let expected = self.config.expected_config_hash.clone();
        let loaded = tokio::task::spawn_blocking(move || LoadedModel::load(&path, expected.as_deref()))
            .await
            .map_err(|e| e.to_string())
            .and_then(|r| r);
        let mut slot = self.model.write().unwrap();
        match loaded {
            Ok(model) => {
                if let Some(w) = &model.warning {
                    tracing::warn!("{w}");
                }
                tracing::info!(model_id = %model.model_id, path = %model.path.display(), "model loaded");
                let model = Arc::new(model);
                *slot = ModelState::Ready(Arc::clone(&model));
                Ok(model)
            }
            Err(reason) => {
                tracing::error!("{reason}");
                *slot = ModelState::Failed(reason.clone());
                Err(reason)
            }
        }
    }

    fn snapshot(&self) -> ModelState {
        self.model.read().unwrap().clone()
    }

    /// The serving model; in lazy mode a failed load is retried first.
    pub async fn model(&self) -> Result<Arc<LoadedModel>, ApiError> {
        let unavailable = |reason: &str| ApiError::new(ErrorCode::ModelUnavailable, "model unavailable").with_detail(reason);
        match self.snapshot() {
            ModelState::Ready(m) => Ok(m),
            ModelState::Starting => Err(unavailable("model is still loading")),
            ModelState::Failed(_) if self.config.lazy_model => self.load().await.map_err(|r| unavailable(&r)),
            ModelState::Failed(reason) => Err(unavailable(&reason)),
        }
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    /// `starting`, `ok` or `degraded`.
    pub status: String,
    pub reason: Option<String>,
    pub model_id: Option<String>,
    pub arch: Option<String>,
    pub extractor_pair: Option<String>,
    pub uptime_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub model_id: String,
    pub arch: String,
    pub extractor_pair: String,
    pub config_hash: String,
    pub param_count: usize,
    pub spec: avr_core::nn::ModelSpec,
    pub metrics: Option<FoldMetrics>,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRequest {
    pub audio: Vec<f32>,
    pub video: Vec<f32>,
}

async fn health(State(state): State<Arc<AppState>>) -> Json<Health> {
    let uptime_s = state.started.elapsed().as_secs_f64();
    let empty = |status: &str, reason: Option<String>| Health {
        status: status.into(),
        reason,
        model_id: None,
        arch: None,
        extractor_pair: None,
        uptime_s,
    };
    Json(match state.snapshot() {
        ModelState::Starting => empty("starting", None),
        ModelState::Failed(reason) => empty("degraded", Some(reason)),
        ModelState::Ready(m) => Health {
            status: "ok".into(),
            reason: m.warning.clone(),
            model_id: Some(m.model_id.clone()),
            arch: Some(m.classifier.spec.arch.to_string()),
            extractor_pair: Some(m.classifier.extractor_pair.to_string()),
            uptime_s,
        },
    })
}

async fn model_info(State(state): State<Arc<AppState>>) -> Result<Json<ModelInfo>, ApiError> {
    let m = state.model().await?;
    let c = &m.classifier;
    Ok(Json(ModelInfo {
        model_id: m.model_id.clone(),
        arch: c.spec.arch.to_string(),
        extractor_pair: c.extractor_pair.to_string(),
        config_hash: c.config_hash.clone(),
        param_count: c.spec.param_count(),
        spec: c.spec.clone(),
        metrics: c.metrics.clone(),
        warning: m.warning.clone(),
    }))
}

fn too_large(limit: usize) -> ApiError {
    ApiError::new(ErrorCode::PayloadTooLarge, format!("upload exceeds {limit} bytes"))
}

async fn predict_embedding(
    State(state): State<Arc<AppState>>,
    body: Result<Bytes, BytesRejection>,
) -> Result<Json<Prediction>, ApiError> {
    let body = body.map_err(|r| {
        if r.status() == StatusCode::PAYLOAD_TOO_LARGE {
            ApiError::new(ErrorCode::PayloadTooLarge, "request body too large").with_detail(r.body_text())
        } else {
            ApiError::new(ErrorCode::InvalidRequest, "unreadable request body").with_detail(r.body_text())
        }
    })?;
    let request: EmbeddingRequest = serde_json::from_slice(&body).map_err(|e| {
        ApiError::new(ErrorCode::InvalidRequest, "body must be JSON {\"audio\": [...], \"video\": [...]}")
            .with_detail(e.to_string())
    })?;
    let model = state.model().await?;
    Ok(Json(model.predict(request.audio, request.video).await?))
}

async fn predict_video(
    State(state): State<Arc<AppState>>,
    multipart: Result<Multipart, MultipartRejection>,
) -> Result<Json<Prediction>, ApiError> {
    let limit = state.config.max_upload_bytes;
    let mut multipart = multipart.map_err(|r| {
        ApiError::new(ErrorCode::InvalidRequest, "expected a multipart/form-data upload").with_detail(r.body_text())
    })?;
    let mut upload: Option<Vec<u8>> = None;
    loop {
        let field = multipart.next_field().await.map_err(|e| {
            if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
                too_large(limit)
            } else {
                ApiError::new(ErrorCode::InvalidRequest, "malformed multipart body").with_detail(e.body_text())
            }
        })?;
        let Some(mut field) = field else { break };
        if field.name() != Some("video") {
            continue;
        }
        let mut data = Vec::new();
        while let Some(chunk) = field.chunk().await.map_err(|e| {
            if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
                too_large(limit)
            } else {
                ApiError::new(ErrorCode::InvalidRequest, "malformed multipart body").with_detail(e.body_text())
            }
        })? {
            if data.len() + chunk.len() > limit {
                return Err(too_large(limit));
            }
            data.extend_from_slice(&chunk);
        }
        upload = Some(data);
    }
    let upload = upload.ok_or_else(|| ApiError::new(ErrorCode::InvalidRequest, "multipart field `video` is required"))?;
    let model = state.model().await?;
    Ok(Json(state.pipeline.predict_video(&upload, &model).await?))
}

fn cors(origins: &[String]) -> CorsLayer {
    let layer = CorsLayer::new()
        .allow_methods([Method::GET, Method::POST])
        .allow_headers(Any);
    if origins.is_empty() {
        layer.allow_origin(Any)
    } else {
        let list: Vec<HeaderValue> = origins.iter().filter_map(|o| HeaderValue::from_str(o).ok()).collect();
        layer.allow_origin(AllowOrigin::list(list))
    }
}

/// The HTTP API.
pub fn router(state: Arc<AppState>) -> Router {
    // Multipart framing adds a little on top of the file itself.
    let body_limit = state.config.max_upload_bytes.saturating_add(64 * 1024);
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/model", get(model_info))
        .route("/v1/predict_embedding", post(predict_embedding))
        .route(
            "/v1/predict",
            post(predict_video).layer(DefaultBodyLimit::max(body_limit)),
        )
        .layer(cors(&state.config.cors_origins))
        .with_state(state)
}

/// Binds `config.listen` and serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<(), String> {
    let pipeline = Pipeline::from_config(&config);
    let state = AppState::start(config, pipeline).await?;
    let listener = tokio::net::TcpListener::bind(&state.config.listen)
        .await
        .map_err(|e| format!("cannot listen on {}: {e}", state.config.listen))?;
    let addr = listener.local_addr().map_err(|e| e.to_string())?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| e.to_string())
}
