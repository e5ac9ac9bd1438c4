mod common;

use std::collections::BTreeSet;

use avr_core::embedding::{make_folds, Dataset, FoldPlan};
use avr_core::nn::{init_params, Arch};
use avr_core::rng::{derive_seed, tag};
use avr_core::synthetic::{gaussian_dataset, SyntheticSpec};
use avr_core::train::{
    cross_validate, model_to_json, regenerate_report, train_fold, write_run, write_run_to, Classifier, CvReport,
    TrainConfig, TrainError,
};
use common::{logistic_regression_accuracy, naive_accuracy, naive_macro_f1};

fn id_set(ids: &[String]) -> BTreeSet<&str> {
    ids.iter().map(String::as_str).collect()
}

fn small_dataset(n_clips: usize) -> Dataset {
    gaussian_dataset(&SyntheticSpec { n_clips, seed: 3, ..SyntheticSpec::default() })
}

/// A fast configuration: the LSTM over 32 steps of 24 features.
fn fast_config() -> TrainConfig {
    TrainConfig {
        arch: Arch::Lstm,
        lstm_step_features: 24,
        lr: 1e-3,
        epochs: 6,
        seed: 7,
        ..TrainConfig::default()
    }
}

fn comparable_json(report: &CvReport) -> String {
    let mut r = report.clone();
    r.created_at = 0;
    r.wall_time_s = 0.0;
    serde_json::to_string(&r).unwrap()
}

#[test]
fn zero_epochs_returns_initialization() {
    let dataset = small_dataset(30);
    let config = TrainConfig { epochs: 0, ..fast_config() };
    let plan = make_folds(&dataset, config.k, config.seed).unwrap();
    let fold = 2;
    let out = train_fold(&dataset, &plan, fold, &config).unwrap();
    let init = init_params(&config.model_spec(), derive_seed(config.seed, &[tag("init"), fold as u64])).unwrap();
    assert_eq!(out.model.params, init);
    assert!(out.log.epochs.is_empty());
    assert_eq!((out.log.best_epoch, out.log.stop_epoch), (0, 0));
    assert_eq!(out.log.initial_train_loss, out.log.final_train_loss);

    let untrained = Classifier { params: init, metrics: None, ..out.model.clone() };
    let (mut pred, mut labels) = (Vec::new(), Vec::new());
    for id in plan.members(fold) {
        let clip = dataset.get(id).unwrap();
        pred.push(untrained.predict(&clip.audio.values, &clip.video.values).unwrap().0.index());
        labels.push(clip.label.index());
    }
    assert_eq!(out.metrics.test_accuracy, naive_accuracy(&pred, &labels));
    assert_eq!(out.metrics.test_macro_f1, naive_macro_f1(&pred, &labels));
}

#[test]
fn runs_are_identical_across_thread_counts() {
    let dataset = small_dataset(30);
    let config = TrainConfig { epochs: 3, ..fast_config() };
    let run_with = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| cross_validate(&dataset, &config).unwrap())
    };
    let a = run_with(1);
    let b = run_with(3);
    assert_eq!(comparable_json(&a.report), comparable_json(&b.report));
    for (fa, fb) in a.folds.iter().zip(&b.folds) {
        assert_eq!(model_to_json(&fa.model), model_to_json(&fb.model));
        assert_eq!(fa.log, fb.log);
    }
}

#[test]
fn early_stop_restores_best_snapshot() {
    let dataset = small_dataset(40);
    let config = TrainConfig { lr: 1e-2, epochs: 40, patience: 2, ..fast_config() };
    let plan = make_folds(&dataset, config.k, config.seed).unwrap();
    let out = train_fold(&dataset, &plan, 0, &config).unwrap();
    let log = &out.log;
    assert!(log.stopped_early && log.best_epoch < log.stop_epoch, "fold did not stop early: {log:?}");

    // The kept model scores the logged best validation loss and nothing
    // logged beats it by more than min_delta.
    let best = log.epochs[log.best_epoch - 1].val_loss;
    assert_eq!(log.final_val_loss, best);
    let min = log.epochs.iter().map(|e| e.val_loss).fold(f64::INFINITY, f64::min);
    assert!(best <= min + config.min_delta);

    let retrained = train_fold(&dataset, &plan, 0, &TrainConfig { epochs: log.best_epoch, ..config }).unwrap();
    assert_eq!(retrained.model.params, out.model.params);
}

#[test]
fn folds_are_isolated() {
    let dataset = small_dataset(30);
    let run = cross_validate(&dataset, &TrainConfig { epochs: 1, ..fast_config() }).unwrap();
    let all: BTreeSet<&str> = dataset.clips.iter().map(|c| c.clip_id.as_str()).collect();
    for fold in &run.folds {
        let log = &fold.log;
        let (train, val, test) = (id_set(&log.train_clips), id_set(&log.val_clips), id_set(&log.test_clips));
        assert!(train.is_disjoint(&test) && val.is_disjoint(&test) && train.is_disjoint(&val));
        let union: BTreeSet<&str> = train.union(&val).chain(&test).copied().collect();
        assert_eq!(union, all);
        assert_eq!(test, run.plan.members(log.fold_index).into_iter().collect());
        assert!(!val.is_empty());
    }
}

#[test]
fn incomplete_plan_is_rejected() {
    let dataset = small_dataset(30);
    let config = fast_config();
    let mut plan = make_folds(&dataset, config.k, config.seed).unwrap();
    plan.assignment.remove("clip-0003");
    let err = train_fold(&dataset, &plan, 0, &config).unwrap_err();
    assert!(matches!(err, TrainError::Plan(ref m) if m.contains("clip-0003")), "{err}");
    let empty = FoldPlan { k: 5, seed: 0, assignment: plan.assignment.iter().map(|(id, _)| (id.clone(), 0)).collect() };
    assert!(train_fold(&dataset, &empty, 4, &config).is_err());
}

#[test]
fn overflowing_learning_rate_diverges() {
    let dataset = small_dataset(30);
    let config = TrainConfig { lr: 1e39, ..fast_config() };
    let plan = make_folds(&dataset, config.k, config.seed).unwrap();
    let err = train_fold(&dataset, &plan, 0, &config).unwrap_err();
    assert!(matches!(err, TrainError::Diverged { fold: 0, epoch: 1, .. }), "{err}");
}

#[test]
fn report_aggregates_and_regenerates() {
    let dataset = small_dataset(30);
    let run = cross_validate(&dataset, &TrainConfig { epochs: 2, ..fast_config() }).unwrap();
    let report = &run.report;
    assert_eq!(report.folds.len(), 5);
    let n = report.folds.len() as f64;
    let mean_acc = report.folds.iter().map(|f| f.test_accuracy).sum::<f64>() / n;
    let mean_f1 = report.folds.iter().map(|f| f.test_macro_f1).sum::<f64>() / n;
    assert!((report.mean_accuracy - mean_acc).abs() < 1e-9);
    assert!((report.mean_macro_f1 - mean_f1).abs() < 1e-9);
    assert_eq!(report.reference_scores.len(), 4);

    let root = tempfile::tempdir().unwrap();
    let dir = write_run(&run, root.path()).unwrap();
    let name = dir.file_name().unwrap().to_str().unwrap().to_owned();
    assert_eq!(name, format!("{}-{}", report.created_at, report.config_hash));
    for file in ["report.json", "report.txt", "folds.json", "fold-0.model.json", "fold-4.log.json"] {
        assert!(dir.join(file).is_file(), "missing {file}");
    }
    let regenerated = regenerate_report(&dir, &dataset).unwrap();
    assert!((regenerated.mean_accuracy - report.mean_accuracy).abs() < 1e-9);
    assert!((regenerated.mean_macro_f1 - report.mean_macro_f1).abs() < 1e-9);
    assert_eq!(regenerated.folds, report.folds);

    let again = tempfile::tempdir().unwrap();
    write_run_to(&run, again.path()).unwrap();
    for f in 0..5 {
        let file = format!("fold-{f}.model.json");
        assert_eq!(std::fs::read(dir.join(&file)).unwrap(), std::fs::read(again.path().join(&file)).unwrap());
    }
}

#[test]
fn separable_data_is_learned() {
    let dataset = small_dataset(60);
    assert_eq!(logistic_regression_accuracy(&dataset, 200), 1.0);
    let run = cross_validate(&dataset, &TrainConfig { epochs: 15, ..fast_config() }).unwrap();
    assert!(run.report.mean_accuracy >= 0.95, "{}", run.report.render_table());
    for fold in &run.folds {
        assert!(fold.log.final_train_loss < fold.log.initial_train_loss);
    }
}
