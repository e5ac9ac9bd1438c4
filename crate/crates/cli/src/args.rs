use std::path::PathBuf;

use avr_core::embedding::ExtractorPair;
use avr_core::nn::{Arch, Readout};
use avr_core::train::TrainConfig;
use avr_service::{ExtractorConfig, ServiceConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "avr", version, about = "Audio-visual humor classifier: train, evaluate, predict, serve")]
pub struct Cli {
    /// Worker threads for training and evaluation (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// k-fold cross-validation; writes a run directory with report and models.
    Train(TrainArgs),
    /// Eval-mode metrics of one model on a labeled manifest.
    Evaluate(EvaluateArgs),
    /// One prediction from a pair of embedding files or a video.
    Predict(PredictArgs),
    /// Run the HTTP inference service until interrupted.
    Serve(ServeArgs),
    /// Print the stratified fold assignment of a manifest.
    Folds(FoldsArgs),
    /// Write a synthetic, linearly separable dataset for smoke tests.
    Synth(SynthArgs),
}

/// Training hyperparameters. Each flag overrides the same-named field of
/// `--config`; unset fields keep their defaults.
#[derive(Debug, Args, Default)]
pub struct TrainFlags {
    /// TOML file with any subset of the fields below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// cnn | lstm [default: cnn]
    #[arg(long)]
    pub arch: Option<Arch>,
    /// videomae-ast | languagebind [default: videomae-ast]
    #[arg(long, alias = "extractor_pair")]
    pub extractor_pair: Option<ExtractorPair>,
    /// Maximum epochs per fold [default: 50, reference protocol]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Adam learning rate [default: 1e-5, reference protocol]
    #[arg(long)]
    pub lr: Option<f64>,
    /// [default: 32, implementation choice]
    #[arg(long, alias = "batch_size")]
    pub batch_size: Option<usize>,
    /// Number of folds [default: 5, reference protocol]
    #[arg(long)]
    pub k: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// [default: 0.2, implementation choice]
    #[arg(long, alias = "dropout_rate")]
    pub dropout_rate: Option<f64>,
    /// Non-improving epochs tolerated before stopping [default: 5, implementation choice]
    #[arg(long)]
    pub patience: Option<usize>,
    /// Minimum validation-loss decrease that counts as improvement [default: 1e-4, implementation choice]
    #[arg(long, alias = "min_delta")]
    pub min_delta: Option<f64>,
    /// Share of each class in the training folds held out for early stopping [default: 0.1, implementation choice]
    #[arg(long, alias = "val_fraction")]
    pub val_fraction: Option<f64>,
    /// CNN readout: global_avg_pool | flatten [default: global_avg_pool, implementation choice]
    #[arg(long)]
    pub readout: Option<Readout>,
    /// LSTM input width per time step; must divide 768 [default: 1, implementation choice]
    #[arg(long, alias = "lstm_step_features")]
    pub lstm_step_features: Option<usize>,
}

impl TrainFlags {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<TrainConfig, String> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
                toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?
            }
            None => TrainConfig::default(),
        };
        macro_rules! apply {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() {
                    cfg.$field = v;
                }
            )*};
        }
        apply!(arch, extractor_pair, epochs, lr, batch_size, k, seed, dropout_rate, patience, min_delta, val_fraction, readout, lstm_step_features);
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset manifest (JSON).
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub flags: TrainFlags,
    /// Parent of the `<unix-seconds>-<config-hash>` run directory.
    #[arg(long, default_value = "runs", conflicts_with = "out")]
    pub runs_dir: PathBuf,
    /// Exact run directory, instead of a fresh one under --runs-dir.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Include per-clip predictions in the output.
    #[arg(long)]
    pub per_clip: bool,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Audio embedding (AVRE file).
    #[arg(value_name = "AUDIO_EMBEDDING", requires = "video_embedding", conflicts_with = "video")]
    pub audio_embedding: Option<PathBuf>,
    /// Video embedding (AVRE file).
    #[arg(value_name = "VIDEO_EMBEDDING")]
    pub video_embedding: Option<PathBuf>,
    /// An mp4 to demux and embed with the extractor sidecar.
    #[arg(long, required_unless_present = "audio_embedding")]
    pub video: Option<PathBuf>,
    #[command(flatten)]
    pub service: ServiceFlags,
}

/// Service settings. Each flag overrides the same-named field of `--config`.
#[derive(Debug, Args, Default)]
pub struct ServiceFlags {
    /// TOML file with any subset of the service fields.
    #[arg(long = "service-config")]
    pub config: Option<PathBuf>,
    /// Sidecar command template; placeholders {pair} {input} {audio} {video} {out}.
    #[arg(long, conflicts_with = "extractor_url")]
    pub extractor_command: Option<String>,
    /// URL of a running sidecar's POST /extract.
    #[arg(long)]
    pub extractor_url: Option<String>,
    /// Seconds allowed for each of demux and extraction [default: 60]
    #[arg(long, alias = "request_timeout_s")]
    pub request_timeout_s: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub service: ServiceFlags,
    /// Model file [default: model.json]
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Address to bind [default: 127.0.0.1:8080]
    #[arg(long)]
    pub listen: Option<String>,
    /// [default: 268435456]
    #[arg(long, alias = "max_upload_bytes")]
    pub max_upload_bytes: Option<usize>,
    /// Concurrent demux+extract pipelines [default: 1]
    #[arg(long, alias = "extractor_concurrency")]
    pub extractor_concurrency: Option<usize>,
    /// Serve before the model loads and report load failures via health.
    #[arg(long, alias = "lazy_model")]
    pub lazy_model: bool,
    /// Allowed browser origin; repeatable [default: any]
    #[arg(long = "cors-origin")]
    pub cors_origins: Vec<String>,
    /// Warn when the model's config hash differs.
    #[arg(long, alias = "expected_config_hash")]
    pub expected_config_hash: Option<String>,
}

impl ServiceFlags {
    pub fn resolve(&self) -> Result<ServiceConfig, String> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
                toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?
            }
            None => ServiceConfig::default(),
        };
        if let Some(c) = &self.extractor_command {
            cfg.extractor = ExtractorConfig::Command {
                command: c.split_whitespace().map(str::to_owned).collect(),
            };
        }
        if let Some(url) = &self.extractor_url {
            cfg.extractor = ExtractorConfig::Http { url: url.clone() };
        }
        if let Some(t) = self.request_timeout_s {
            cfg.request_timeout_s = t;
        }
        Ok(cfg)
    }
}

impl ServeArgs {
    pub fn resolve(&self) -> Result<ServiceConfig, String> {
        let mut cfg = self.service.resolve()?;
        if let Some(m) = &self.model {
            cfg.model_path = m.clone();
        }
        if let Some(l) = &self.listen {
            cfg.listen = l.clone();
        }
        if let Some(b) = self.max_upload_bytes {
            cfg.max_upload_bytes = b;
        }
        if let Some(c) = self.extractor_concurrency {
            cfg.extractor_concurrency = c;
        }
        cfg.lazy_model |= self.lazy_model;
        if !self.cors_origins.is_empty() {
            cfg.cors_origins = self.cors_origins.clone();
        }
        if self.expected_config_hash.is_some() {
            cfg.expected_config_hash = self.expected_config_hash.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct FoldsArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Directory for the manifest and embeddings.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 200, alias = "n_clips")]
    pub n_clips: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Class mean offset per coordinate.
    #[arg(long, default_value_t = 0.25)]
    pub separation: f64,
    /// videomae-ast | languagebind
    #[arg(long, default_value = "videomae-ast")]
    pub extractor_pair: ExtractorPair,
}
