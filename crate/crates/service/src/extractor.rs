//! Clients of the foundation-model extractor sidecar.
//!
//! Two transports share one output contract: an AVRE record per modality,
//! produced by the extractors of the served model's pair, 768 values wide.

use std::path::{Path, PathBuf};
use std::time::Duration;

use async_trait::async_trait;
use avr_core::embedding::{decode, EmbeddingError, EmbeddingRecord, ExtractorPair, Modality};
use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::{ApiError, ErrorCode};
use crate::media::{fill, run, tail, DemuxOutput, RunError};

/// Everything an extractor may need about one request.
#[derive(Debug, Clone, Copy)]
pub struct ExtractionRequest<'a> {
    /// The original upload.
    pub input: &'a Path,
    pub demuxed: &'a DemuxOutput,
    /// Scratch directory owned by the request.
    pub workdir: &'a Path,
    pub pair: ExtractorPair,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedPair {
    pub audio: EmbeddingRecord,
    pub video: EmbeddingRecord,
}

#[async_trait]
pub trait Extractor: Send + Sync {
    async fn extract(&self, request: ExtractionRequest<'_>) -> Result<ExtractedPair, ApiError>;
}

fn failure(message: impl Into<String>) -> ApiError {
    ApiError::new(ErrorCode::ExtractorFailure, message)
}

/// Enforces the output contract on a pair of records.
pub fn check_extracted(pair: ExtractorPair, out: &ExtractedPair) -> Result<(), ApiError> {
    for (modality, record) in [(Modality::Audio, &out.audio), (Modality::Video, &out.video)] {
        if record.modality != modality {
            return Err(failure(format!("expected a {modality} embedding, got {}", record.modality)));
        }
        let expected = pair.extractor(modality);
        if record.extractor != expected {
            return Err(failure(format!(
                "{modality} embedding came from {}, the model needs {expected}",
                record.extractor
            )));
        }
        match record.validate(false) {
            Ok(()) => {}
            Err(e @ EmbeddingError::Dim(_)) => {
                return Err(ApiError::new(ErrorCode::EmbeddingDimMismatch, e.to_string())
                    .with_detail(format!("{modality} embedding")))
            }
            Err(e) => return Err(failure(format!("{modality} embedding invalid: {e}"))),
        }
    }
    Ok(())
}

/// Sorts decoded records into (audio, video) by their header modality.
fn pair_by_modality(records: Vec<EmbeddingRecord>) -> Result<ExtractedPair, ApiError> {
    let mut audio = None;
    let mut video = None;
    for r in records {
        let slot = match r.modality {
            Modality::Audio => &mut audio,
            Modality::Video => &mut video,
        };
        if slot.replace(r).is_some() {
            return Err(failure("extractor produced two embeddings for one modality"));
        }
    }
    match (audio, video) {
        (Some(audio), Some(video)) => Ok(ExtractedPair { audio, video }),
        (None, _) => Err(failure("extractor produced no audio embedding")),
        (_, None) => Err(failure("extractor produced no video embedding")),
    }
}

fn decode_named(bytes: &[u8], name: &str) -> Result<EmbeddingRecord, ApiError> {
    decode(bytes, name).map_err(|e| failure(format!("unreadable embedding {name}: {e}")))
}

/// Runs the sidecar as a subprocess and reads the `*.avre` files it writes.
///
/// Placeholders: `{pair}` (`videomae-ast` or `languagebind`), `{input}`,
/// `{audio}`, `{video}` and `{out}`, the directory to write into.
#[derive(Debug, Clone, PartialEq)]
pub struct SubprocessExtractor {
    pub command: Vec<String>,
    pub timeout: Duration,
}

pub fn default_extractor_command() -> Vec<String> {
    "avr-extractor extract --pair {pair} --in {input} --out {out}"
        .split_whitespace()
        .map(str::to_owned)
        .collect()
}

impl Default for SubprocessExtractor {
    fn default() -> Self {
        Self {
            command: default_extractor_command(),
            timeout: Duration::from_secs(60),
        }
    }
}

#[async_trait]
impl Extractor for SubprocessExtractor {
    async fn extract(&self, req: ExtractionRequest<'_>) -> Result<ExtractedPair, ApiError> {
        let out_dir: PathBuf = req.workdir.join("embeddings");
        tokio::fs::create_dir_all(&out_dir)
            .await
            .map_err(|e| ApiError::new(ErrorCode::Internal, "scratch directory").with_detail(e.to_string()))?;
        let s = |p: &Path| p.to_string_lossy().into_owned();
        let (input, audio, video, out) = (s(req.input), s(&req.demuxed.audio), s(&req.demuxed.video), s(&out_dir));
        let argv = fill(
            &self.command,
            &[
                ("pair", req.pair.cli_name()),
                ("input", &input),
                ("audio", &audio),
                ("video", &video),
                ("out", &out),
            ],
        );
        match run(&argv, self.timeout).await {
            Err(RunError::Timeout) => {
                return Err(ApiError::new(ErrorCode::ExtractorTimeout, "extractor timed out")
                    .with_detail(format!("no result within {:?}", self.timeout)))
            }
            Err(RunError::Spawn(e)) => return Err(failure("extractor could not be started").with_detail(e)),
            Ok(o) if !o.success => {
                let log = if o.stderr.trim().is_empty() { o.stdout } else { o.stderr };
                return Err(failure("extractor exited with an error").with_detail(tail(&log)));
            }
            Ok(_) => {}
        }
        let mut records = Vec::new();
        let mut entries = tokio::fs::read_dir(&out_dir)
            .await
            .map_err(|e| failure("extractor output directory unreadable").with_detail(e.to_string()))?;
        while let Ok(Some(entry)) = entries.next_entry().await {
            let path = entry.path();
            if path.extension().is_some_and(|e| e == "avre") {
                let bytes = tokio::fs::read(&path)
                    .await
                    .map_err(|e| failure("extractor output unreadable").with_detail(e.to_string()))?;
                let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
                records.push(decode_named(&bytes, &name)?);
            }
        }
        pair_by_modality(records)
    }
}

/// Response body of the sidecar's `POST /extract`: base64 AVRE payloads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpExtractResponse {
    pub audio: String,
    pub video: String,
}

impl HttpExtractResponse {
    pub fn encode(audio: &[u8], video: &[u8]) -> Self {
        Self {
            audio: BASE64.encode(audio),
            video: BASE64.encode(video),
        }
    }
}

/// Posts the upload to the sidecar's HTTP endpoint as multipart fields
/// `video` (the original file), `audio` (the demuxed waveform) and `pair`.
#[derive(Debug, Clone)]
pub struct HttpExtractor {
    pub url: String,
    pub timeout: Duration,
    client: reqwest::Client,
}

impl HttpExtractor {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        Self {
            url: url.into(),
            timeout,
            client: reqwest::Client::new(),
        }
    }
}

#[async_trait]
impl Extractor for HttpExtractor {
    async fn extract(&self, req: ExtractionRequest<'_>) -> Result<ExtractedPair, ApiError> {
        let read = |p: PathBuf| async move {
            tokio::fs::read(&p)
                .await
                .map_err(|e| ApiError::new(ErrorCode::Internal, "reading media for extractor").with_detail(e.to_string()))
        };
        let video = read(req.input.to_owned()).await?;
        let audio = read(req.demuxed.audio.clone()).await.unwrap_or_default();
        let form = reqwest::multipart::Form::new()
            .text("pair", req.pair.cli_name())
            .part("video", reqwest::multipart::Part::bytes(video).file_name("clip.mp4"))
            .part("audio", reqwest::multipart::Part::bytes(audio).file_name("audio.wav"));
        let response = self
            .client
            .post(&self.url)
            .multipart(form)
            .timeout(self.timeout)
            .send()
            .await
            .map_err(|e| {
                if e.is_timeout() {
                    ApiError::new(ErrorCode::ExtractorTimeout, "extractor timed out").with_detail(e.to_string())
                } else {
                    failure("extractor request failed").with_detail(e.to_string())
                }
            })?;
        let status = response.status();
        let body = response.bytes().await.map_err(|e| {
            if e.is_timeout() {
                ApiError::new(ErrorCode::ExtractorTimeout, "extractor timed out").with_detail(e.to_string())
            } else {
                failure("extractor response unreadable").with_detail(e.to_string())
            }
        })?;
        if !status.is_success() {
            return Err(failure(format!("extractor answered {status}"))
                .with_detail(tail(&String::from_utf8_lossy(&body))));
        }
        let parsed: HttpExtractResponse = serde_json::from_slice(&body)
            .map_err(|e| failure("extractor response is not the expected JSON").with_detail(e.to_string()))?;
        let mut records = Vec::with_capacity(2);
        for (name, b64) in [("audio", &parsed.audio), ("video", &parsed.video)] {
            let bytes = BASE64
                .decode(b64)
                .map_err(|e| failure(format!("{name} payload is not base64")).with_detail(e.to_string()))?;
            records.push(decode_named(&bytes, name)?);
        }
        pair_by_modality(records)
    }
}
