//! `avr`: operator entry point. Machine output is JSON on stdout, logs go to
//! stderr. Exit codes: 0 success, 1 usage, 2 data error, 3 runtime error.

mod args;

use std::process::ExitCode;
use std::sync::Arc;

use avr_core::embedding::{load_dataset, make_folds, read_embedding, DatasetError};
use avr_core::synthetic::{gaussian_dataset, SyntheticSpec};
use avr_core::train::{cross_validate, evaluate, load_model, write_run, write_run_to, TrainError};
use avr_service::extractor::{check_extracted, ExtractedPair};
use avr_service::{predict_from_embeddings, ErrorCode, LoadedModel, Pipeline};
use clap::Parser;
use serde_json::json;

use args::{Cli, Command, EvaluateArgs, FoldsArgs, PredictArgs, ServeArgs, SynthArgs, TrainArgs};

enum Failure {
    Usage(String),
    Data(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<TrainError> for Failure {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(_) => Failure::Usage(e.to_string()),
            TrainError::Dataset(_) | TrainError::Folds(_) | TrainError::Plan(_) | TrainError::EmptySplit { .. } => {
                Failure::Data(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<DatasetError> for Failure {
    fn from(e: DatasetError) -> Self {
        Failure::Data(e.to_string())
    }
}

fn print(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("JSON output"));
}

fn train(a: &TrainArgs) -> Result<(), Failure> {
    let config = a.flags.resolve().map_err(Failure::Usage)?;
    tracing::info!(config = %serde_json::to_string(&config).unwrap(), hash = %config.hash(), "resolved config");
    let dataset = load_dataset(&a.manifest)?;
    tracing::info!(clips = dataset.len(), "dataset loaded");
    let run = cross_validate(&dataset, &config)?;
    let run_dir = match &a.out {
        Some(dir) => {
            write_run_to(&run, dir)?;
            dir.clone()
        }
        None => write_run(&run, &a.runs_dir)?,
    };
    eprintln!("{}", run.report.render_table());
    print(&json!({
        "config": config,
        "config_hash": config.hash(),
        "run_dir": run_dir,
        "report": run.report,
    }));
    Ok(())
}

fn evaluate_cmd(a: &EvaluateArgs) -> Result<(), Failure> {
    let model = load_model(&a.model).map_err(|e| Failure::Data(e.to_string()))?;
    let dataset = load_dataset(&a.manifest)?;
    let mut result = serde_json::to_value(evaluate(&model, &dataset)?).expect("JSON output");
    if !a.per_clip {
        result.as_object_mut().unwrap().remove("predictions");
    }
    eprintln!(
        "accuracy {:.2}%  macro-F1 {:.2}%  on {} clips",
        100.0 * result["accuracy"].as_f64().unwrap(),
        100.0 * result["macro_f1"].as_f64().unwrap(),
        result["n_clips"]
    );
    print(&json!({ "model": a.model, "manifest": a.manifest, "evaluation": result }));
    Ok(())
}

fn service_failure(e: avr_service::ApiError) -> Failure {
    let code = serde_json::to_value(e.error_code).expect("error code serializes");
    let mut message = format!("{}: {}", code.as_str().unwrap_or_default(), e.message);
    if let Some(d) = &e.detail {
        message.push_str(&format!(" ({d})"));
    }
    match e.error_code {
        ErrorCode::InvalidRequest
        | ErrorCode::UndecodableMedia
        | ErrorCode::MissingAudioTrack
        | ErrorCode::InvalidEmbedding
        | ErrorCode::PayloadTooLarge => Failure::Data(message),
        _ => Failure::Runtime(message),
    }
}

fn runtime() -> Result<tokio::runtime::Runtime, Failure> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::Runtime(e.to_string()))
}

fn predict(a: &PredictArgs) -> Result<(), Failure> {
    let loaded = LoadedModel::load(&a.model, None).map_err(Failure::Data)?;
    let prediction = match (&a.audio_embedding, &a.video_embedding, &a.video) {
        (Some(audio), Some(video), None) => {
            let read = |p: &std::path::PathBuf| read_embedding(p).map_err(|e| Failure::Data(format!("{}: {e}", p.display())));
            let pair = ExtractedPair {
                audio: read(audio)?,
                video: read(video)?,
            };
            check_extracted(loaded.classifier.extractor_pair, &pair).map_err(|e| Failure::Data(e.message))?;
            predict_from_embeddings(&loaded.classifier, &loaded.model_id, &pair.audio.values, &pair.video.values)
                .map_err(service_failure)?
        }
        (None, None, Some(file)) => {
            let config = a.service.resolve().map_err(Failure::Usage)?;
            config.validate().map_err(Failure::Usage)?;
            tracing::info!(config = %serde_json::to_string(&config).unwrap(), "resolved service config");
            let upload = std::fs::read(file).map_err(|e| Failure::Data(format!("{}: {e}", file.display())))?;
            let pipeline = Pipeline::from_config(&config);
            let model = Arc::new(loaded);
            runtime()?
                .block_on(pipeline.predict_video(&upload, &model))
                .map_err(service_failure)?
        }
        _ => return Err(Failure::Usage("give either AUDIO_EMBEDDING VIDEO_EMBEDDING or --video".into())),
    };
    print(&serde_json::to_value(prediction).expect("JSON output"));
    Ok(())
}

fn serve(a: &ServeArgs) -> Result<(), Failure> {
    let config = a.resolve().map_err(Failure::Usage)?;
    print(&json!({ "config": config }));
    runtime()?.block_on(avr_service::serve(config)).map_err(Failure::Runtime)
}

fn folds(a: &FoldsArgs) -> Result<(), Failure> {
    let dataset = load_dataset(&a.manifest)?;
    let plan = make_folds(&dataset, a.k, a.seed).map_err(|e| Failure::Data(e.to_string()))?;
    let sizes = plan.sizes();
    let members: Vec<Vec<&str>> = (0..a.k).map(|f| plan.members(f)).collect();
    print(&json!({ "plan": plan, "sizes": sizes, "members": members }));
    Ok(())
}

fn synth(a: &SynthArgs) -> Result<(), Failure> {
    let spec = SyntheticSpec {
        n_clips: a.n_clips,
        separation: a.separation,
        seed: a.seed,
        pair: a.extractor_pair,
        ..SyntheticSpec::default()
    };
    if spec.n_clips < 2 {
        return Err(Failure::Usage("--n-clips must be at least 2".into()));
    }
    let manifest = gaussian_dataset(&spec).write_to_dir(&a.out).map_err(|e| Failure::Runtime(e.to_string()))?;
    print(&json!({ "manifest": manifest, "n_clips": spec.n_clips }));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match &cli.command {
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Predict(a) => predict(a),
        Command::Serve(a) => serve(a),
        Command::Folds(a) => folds(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
