//! In-process stand-ins for the media tool and the extractor sidecar, so the
//! service runs end to end with neither installed.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use async_trait::async_trait;
use avr_core::embedding::EmbeddingRecord;

use crate::error::{ApiError, ErrorCode};
use crate::extractor::{ExtractedPair, ExtractionRequest, Extractor};
use crate::media::{DemuxOutput, Demuxer};

/// Marker a stub upload carries to simulate a video without sound.
pub const NO_AUDIO_MARKER: &[u8] = b"avr-stub:no-audio";

/// Writes placeholder stream files. Uploads containing [`NO_AUDIO_MARKER`]
/// are treated as lacking an audio track.
#[derive(Debug, Default, Clone, Copy)]
pub struct StubDemuxer;

#[async_trait]
impl Demuxer for StubDemuxer {
    async fn demux(&self, input: &Path, workdir: &Path) -> Result<DemuxOutput, ApiError> {
        let bytes = tokio::fs::read(input)
            .await
            .map_err(|e| ApiError::new(ErrorCode::Internal, "stub demux").with_detail(e.to_string()))?;
        if bytes.windows(NO_AUDIO_MARKER.len()).any(|w| w == NO_AUDIO_MARKER) {
            return Err(ApiError::new(ErrorCode::MissingAudioTrack, "the video has no audio track"));
        }
        let audio = workdir.join("audio.wav");
        let video = workdir.join("video.mp4");
        for p in [&audio, &video] {
            tokio::fs::write(p, b"")
                .await
                .map_err(|e| ApiError::new(ErrorCode::Internal, "stub demux").with_detail(e.to_string()))?;
        }
        Ok(DemuxOutput {
            audio,
            video,
            duration_s: None,
        })
    }
}

/// Returns fixed records, optionally after a delay, and counts calls.
#[derive(Debug)]
pub struct StubExtractor {
    pub audio: EmbeddingRecord,
    pub video: EmbeddingRecord,
    pub delay: Duration,
    calls: AtomicUsize,
}

impl StubExtractor {
    pub fn new(audio: EmbeddingRecord, video: EmbeddingRecord) -> Self {
        Self {
            audio,
            video,
            delay: Duration::ZERO,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

#[async_trait]
impl Extractor for StubExtractor {
    async fn extract(&self, _request: ExtractionRequest<'_>) -> Result<ExtractedPair, ApiError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if !self.delay.is_zero() {
            tokio::time::sleep(self.delay).await;
        }
        Ok(ExtractedPair {
            audio: self.audio.clone(),
            video: self.video.clone(),
        })
    }
}

/// Always fails the way a crashed sidecar does.
#[derive(Debug, Default, Clone, Copy)]
pub struct FailingExtractor;

#[async_trait]
impl Extractor for FailingExtractor {
    async fn extract(&self, _request: ExtractionRequest<'_>) -> Result<ExtractedPair, ApiError> {
        Err(ApiError::new(ErrorCode::ExtractorFailure, "extractor exited with an error").with_detail("stub failure"))
    }
}

/// The smallest byte string the upload sniffer accepts as MP4.
pub fn minimal_mp4() -> Vec<u8> {
    let mut v = vec![0, 0, 0, 0x18];
    v.extend_from_slice(b"ftypisom");
    v.extend_from_slice(&[0, 0, 2, 0]);
    v.extend_from_slice(b"isomiso2");
    v
}
