use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::extractor::default_extractor_command;
use crate::media::DemuxCommands;

/// How the service reaches the extractor sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ExtractorConfig {
    /// Spawn the sidecar per request with file handoff.
    Command { command: Vec<String> },
    /// Post to a running sidecar's `/extract` endpoint.
    Http { url: String },
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        ExtractorConfig::Command {
            command: default_extractor_command(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: String,
    pub model_path: PathBuf,
    pub extractor: ExtractorConfig,
    pub demux: DemuxCommands,
    pub max_upload_bytes: usize,
    /// Bound on each external stage (demux, extraction), in seconds.
    pub request_timeout_s: f64,
    /// Concurrent demux + extraction pipelines; further uploads queue.
    pub extractor_concurrency: usize,
    /// Start serving before the model is loaded, report failures through
    /// health instead of refusing to start, and retry loading on demand.
    pub lazy_model: bool,
    /// Allowed browser origins; empty allows any.
    pub cors_origins: Vec<String>,
    /// Warn when the model was trained under a different config hash.
    pub expected_config_hash: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            model_path: PathBuf::from("model.json"),
            extractor: ExtractorConfig::default(),
            demux: DemuxCommands::default(),
            max_upload_bytes: 256 * 1024 * 1024,
            request_timeout_s: 60.0,
            extractor_concurrency: 1,
            lazy_model: false,
            cors_origins: Vec::new(),
            expected_config_hash: None,
        }
    }
}

impl ServiceConfig {
    pub fn timeout(&self) -> Duration {
        Duration::try_from_secs_f64(self.request_timeout_s).unwrap_or(Duration::from_secs(60))
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.request_timeout_s > 0.0 && self.request_timeout_s.is_finite()) {
            return Err(format!("request_timeout_s must be positive, got {}", self.request_timeout_s));
        }
        if self.extractor_concurrency == 0 {
            return Err("extractor_concurrency must be at least 1".into());
        }
        if self.max_upload_bytes == 0 {
            return Err("max_upload_bytes must be positive".into());
        }
        if self.demux.audio.is_empty() || self.demux.video.is_empty() {
            return Err("demux commands must not be empty".into());
        }
        if let ExtractorConfig::Command { command } = &self.extractor {
            if command.is_empty() {
                return Err("extractor command must not be empty".into());
            }
        }
        Ok(())
    }
}
