use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use avr_core::train::{model_from_json, model_id, Classifier};
use tokio::sync::Semaphore;

use crate::config::{ExtractorConfig, ServiceConfig};
use crate::error::{ApiError, ErrorCode};
use crate::extractor::{check_extracted, ExtractedPair, ExtractionRequest, Extractor, HttpExtractor, SubprocessExtractor};
use crate::media::{sniff_mp4, CommandDemuxer, Demuxer};
use crate::prediction::{millis, predict_from_embeddings, Prediction};

/// A classifier together with its identity.
#[derive(Debug)]
pub struct LoadedModel {
    pub classifier: Classifier,
    pub model_id: String,
    pub path: PathBuf,
    /// Set when the file's config hash differs from the expected one.
    pub warning: Option<String>,
}

impl LoadedModel {
    pub fn load(path: &Path, expected_hash: Option<&str>) -> Result<Self, String> {
        let bytes = std::fs::read(path).map_err(|e| format!("cannot read model {}: {e}", path.display()))?;
        let text = std::str::from_utf8(&bytes).map_err(|e| format!("model {} is not UTF-8: {e}", path.display()))?;
        let classifier = model_from_json(text).map_err(|e| format!("model {}: {e}", path.display()))?;
        let warning = expected_hash.filter(|h| *h != classifier.config_hash).map(|h| {
            format!(
                "model was trained with config {} but {h} was expected",
                classifier.config_hash
            )
        });
        Ok(Self {
            classifier,
            model_id: model_id(&bytes),
            path: path.to_owned(),
            warning,
        })
    }

    /// Eval-mode prediction on embeddings, off the async executor.
    pub async fn predict(self: &Arc<Self>, audio: Vec<f32>, video: Vec<f32>) -> Result<Prediction, ApiError> {
        let model = Arc::clone(self);
        tokio::task::spawn_blocking(move || predict_from_embeddings(&model.classifier, &model.model_id, &audio, &video))
            .await
            .map_err(|e| ApiError::new(ErrorCode::Internal, "prediction task failed").with_detail(e.to_string()))?
    }
}

/// Upload → demux → extract, bounded by a concurrency limit and a timeout.
#[derive(Clone)]
pub struct Pipeline {
    demuxer: Arc<dyn Demuxer>,
    extractor: Arc<dyn Extractor>,
    limit: Arc<Semaphore>,
    timeout: Duration,
}

/// Embeddings of one upload plus stage timings.
#[derive(Debug, Clone)]
pub struct Embedded {
    pub pair: ExtractedPair,
    pub demux: Duration,
    pub extract: Duration,
    pub duration_s: Option<f64>,
}

impl Pipeline {
    pub fn new(demuxer: Arc<dyn Demuxer>, extractor: Arc<dyn Extractor>, concurrency: usize, timeout: Duration) -> Self {
        Self {
            demuxer,
            extractor,
            limit: Arc::new(Semaphore::new(concurrency.max(1))),
            timeout,
        }
    }

    /// The production pipeline described by `config`.
    pub fn from_config(config: &ServiceConfig) -> Self {
        let timeout = config.timeout();
        let extractor: Arc<dyn Extractor> = match &config.extractor {
            ExtractorConfig::Command { command } => Arc::new(SubprocessExtractor {
                command: command.clone(),
                timeout,
            }),
            ExtractorConfig::Http { url } => Arc::new(HttpExtractor::new(url.clone(), timeout)),
        };
        Self::new(
            Arc::new(CommandDemuxer::new(config.demux.clone(), timeout)),
            extractor,
            config.extractor_concurrency,
            timeout,
        )
    }

    pub async fn embed(&self, upload: &[u8], model: &Classifier) -> Result<Embedded, ApiError> {
        sniff_mp4(upload)?;
        let _permit = self
            .limit
            .acquire()
            .await
            .map_err(|_| ApiError::new(ErrorCode::Internal, "pipeline closed"))?;
        let scratch = tempfile::tempdir()
            .map_err(|e| ApiError::new(ErrorCode::Internal, "scratch directory").with_detail(e.to_string()))?;
        let input = scratch.path().join("upload.mp4");
        tokio::fs::write(&input, upload)
            .await
            .map_err(|e| ApiError::new(ErrorCode::Internal, "storing upload").with_detail(e.to_string()))?;

        let started = Instant::now();
        let demuxed = self.demuxer.demux(&input, scratch.path()).await?;
        let demux = started.elapsed();

        let started = Instant::now();
        let request = ExtractionRequest {
            input: &input,
            demuxed: &demuxed,
            workdir: scratch.path(),
            pair: model.extractor_pair,
        };
        let pair = tokio::time::timeout(self.timeout, self.extractor.extract(request))
            .await
            .map_err(|_| {
                ApiError::new(ErrorCode::ExtractorTimeout, "extractor timed out")
                    .with_detail(format!("no result within {:?}", self.timeout))
            })??;
        let extract = started.elapsed();
        check_extracted(model.extractor_pair, &pair)?;
        Ok(Embedded {
            pair,
            demux,
            extract,
            duration_s: demuxed.duration_s,
        })
    }

    /// Full video prediction with per-stage latencies.
    pub async fn predict_video(&self, upload: &[u8], model: &Arc<LoadedModel>) -> Result<Prediction, ApiError> {
        let started = Instant::now();
        let embedded = self.embed(upload, &model.classifier).await?;
        let ExtractedPair { audio, video } = embedded.pair;
        let mut prediction = model.predict(audio.values, video.values).await?;
        prediction.latency_ms.demux_ms = millis(embedded.demux);
        prediction.latency_ms.extract_ms = millis(embedded.extract);
        prediction.latency_ms.total_ms = millis(started.elapsed());
        prediction.media_duration_s = embedded.duration_s;
        Ok(prediction)
    }
}
