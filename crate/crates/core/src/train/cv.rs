use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fold::{fold_metrics, train_fold, ClipPrediction, FoldOutcome, TrainingLog};
use super::model_file::{argmax, load_model, save_model};
use super::{FoldMetrics, TrainConfig, TrainError};
use crate::embedding::{make_folds, Dataset, FoldPlan};

/// One row of the reference score table, carried for orientation only: it was
/// measured on an unnamed dataset and is never compared against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceScore {
    pub arch: String,
    pub extractor_pair: String,
    pub accuracy_percent: f64,
}

pub fn reference_scores() -> Vec<ReferenceScore> {
    [
        ("cnn", "languagebind", 49.68),
        ("cnn", "videomae+ast", 56.70),
        ("lstm", "languagebind", 48.40),
        ("lstm", "videomae+ast", 54.82),
    ]
    .into_iter()
    .map(|(arch, pair, acc)| ReferenceScore {
        arch: arch.into(),
        extractor_pair: pair.into(),
        accuracy_percent: acc,
    })
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub dataset: String,
    pub n_clips: usize,
    pub config: TrainConfig,
    pub config_hash: String,
    pub folds: Vec<FoldMetrics>,
    pub mean_accuracy: f64,
    pub mean_macro_f1: f64,
    /// Unix seconds at which the run finished.
    pub created_at: u64,
    pub wall_time_s: f64,
    pub reference_scores: Vec<ReferenceScore>,
}

impl CvReport {
    pub fn from_folds(dataset: &Dataset, config: &TrainConfig, folds: Vec<FoldMetrics>, wall_time_s: f64) -> Self {
        let n = folds.len() as f64;
        let mean_accuracy = folds.iter().map(|f| f.test_accuracy).sum::<f64>() / n;
        let mean_macro_f1 = folds.iter().map(|f| f.test_macro_f1).sum::<f64>() / n;
        let created_at = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        Self {
            dataset: dataset.name.clone(),
            n_clips: dataset.len(),
            config: config.clone(),
            config_hash: config.hash(),
            folds,
            mean_accuracy,
            mean_macro_f1,
            created_at,
            wall_time_s,
            reference_scores: reference_scores(),
        }
    }

    /// Human-readable summary laid out like the reference score table.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "dataset {} ({} clips), config {}", self.dataset, self.n_clips, self.config_hash);
        let _ = writeln!(
            out,
            "arch {}  extractors {}  epochs {}  lr {:e}  k {}  seed {}",
            self.config.arch, self.config.extractor_pair, self.config.epochs, self.config.lr, self.config.k, self.config.seed
        );
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<6} {:>10} {:>10} {:>6} {:>6}", "fold", "accuracy", "macro-F1", "best", "stop");
        for f in &self.folds {
            let _ = writeln!(
                out,
                "{:<6} {:>10.2} {:>10.2} {:>6} {:>6}",
                f.fold_index,
                100.0 * f.test_accuracy,
                100.0 * f.test_macro_f1,
                f.best_epoch,
                f.stop_epoch
            );
        }
        let _ = writeln!(out, "{:<6} {:>10.2} {:>10.2}", "mean", 100.0 * self.mean_accuracy, 100.0 * self.mean_macro_f1);
        let _ = writeln!(out);
        let _ = writeln!(out, "Reference accuracy (%), different dataset, not comparable:");
        for arch in ["cnn", "lstm"] {
            let _ = writeln!(out, "  {}", arch.to_uppercase());
            for r in self.reference_scores.iter().filter(|r| r.arch == arch) {
                let _ = writeln!(out, "    {:<14} {:>6.2}", r.extractor_pair, r.accuracy_percent);
            }
        }
        out
    }
}

/// A finished cross-validation run.
#[derive(Debug, Clone)]
pub struct CvRun {
    pub plan: FoldPlan,
    pub report: CvReport,
    pub folds: Vec<FoldOutcome>,
}

/// Runs every fold of a stratified k-fold split and aggregates the results.
///
/// Folds run in parallel on the current rayon pool; results are joined in
/// fold order and every reduction is sequential, so the outcome does not
/// depend on the thread count.
pub fn cross_validate(dataset: &Dataset, config: &TrainConfig) -> Result<CvRun, TrainError> {
    config.validate()?;
    dataset.require_pair(config.extractor_pair)?;
    let started = Instant::now();
    let plan = make_folds(dataset, config.k, config.seed)?;
    let folds = (0..config.k)
        .into_par_iter()
        .map(|f| train_fold(dataset, &plan, f, config))
        .collect::<Result<Vec<_>, _>>()?;
    let metrics = folds.iter().map(|f| f.metrics.clone()).collect();
    let report = CvReport::from_folds(dataset, config, metrics, started.elapsed().as_secs_f64());
    Ok(CvRun { plan, report, folds })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TrainError + '_ {
    move |source| TrainError::Io {
        path: path.to_owned(),
        source,
    }
}

pub fn fold_model_path(run_dir: &Path, fold: usize) -> PathBuf {
    run_dir.join(format!("fold-{fold}.model.json"))
}

pub fn fold_log_path(run_dir: &Path, fold: usize) -> PathBuf {
    run_dir.join(format!("fold-{fold}.log.json"))
}

/// Writes `report.json`, `report.txt`, `folds.json` and per-fold model and
/// log files into `runs_root/<unix-seconds>-<config-hash>/`.
pub fn write_run(run: &CvRun, runs_root: impl AsRef<Path>) -> Result<PathBuf, TrainError> {
    let dir = runs_root
        .as_ref()
        .join(format!("{}-{}", run.report.created_at, run.report.config_hash));
    write_run_to(run, &dir)?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: PathBuf, value: &T) -> Result<(), TrainError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(&path, text).map_err(io_err(&path))
}

/// Like [`write_run`] with an explicit directory.
pub fn write_run_to(run: &CvRun, dir: &Path) -> Result<(), TrainError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_json(dir.join("report.json"), &run.report)?;
    write_json(dir.join("folds.json"), &run.plan)?;
    let txt = dir.join("report.txt");
    fs::write(&txt, run.report.render_table()).map_err(io_err(&txt))?;
    for fold in &run.folds {
        let f = fold.log.fold_index;
        save_model(&fold.model, fold_model_path(dir, f))?;
        write_json(fold_log_path(dir, f), &fold.log)?;
    }
    Ok(())
}

pub fn read_report(run_dir: &Path) -> Result<CvReport, TrainError> {
    let path = run_dir.join("report.json");
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|e| TrainError::Report(format!("{}: {e}", path.display())))
}

pub fn read_log(run_dir: &Path, fold: usize) -> Result<TrainingLog, TrainError> {
    let path = fold_log_path(run_dir, fold);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|e| TrainError::Report(format!("{}: {e}", path.display())))
}

/// Rebuilds a run's report by reloading each fold model and re-scoring it on
/// the test clips recorded in that fold's log.
pub fn regenerate_report(run_dir: &Path, dataset: &Dataset) -> Result<CvReport, TrainError> {
    let original = read_report(run_dir)?;
    let mut folds = Vec::with_capacity(original.config.k);
    for f in 0..original.config.k {
        let model = load_model(fold_model_path(run_dir, f))?;
        let log = read_log(run_dir, f)?;
        let predictions = log
            .test_clips
            .iter()
            .map(|id| {
                let clip = dataset
                    .get(id)
                    .ok_or_else(|| TrainError::Report(format!("clip {id} from fold {f} log not in dataset")))?;
                let p = model.probabilities(&clip.audio.values, &clip.video.values)?;
                Ok(ClipPrediction {
                    clip_id: id.clone(),
                    label: clip.label,
                    predicted: argmax(&p),
                    probabilities: p,
                })
            })
            .collect::<Result<Vec<_>, TrainError>>()?;
        folds.push(fold_metrics(f, &predictions, log.best_epoch, log.stop_epoch)?);
    }
    let mut report = CvReport::from_folds(dataset, &original.config, folds, original.wall_time_s);
    report.created_at = original.created_at;
    Ok(report)
}
