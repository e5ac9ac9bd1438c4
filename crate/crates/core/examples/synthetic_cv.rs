//! Cross-validates a model on synthetic Gaussian embeddings.
//!
//! ```text
//! cargo run --release -p avr-core --example synthetic_cv -- [cnn|lstm] [lr] [epochs]
//! ```

use avr_core::nn::Arch;
use avr_core::synthetic::{gaussian_dataset, SyntheticSpec};
use avr_core::train::{cross_validate, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let arch = match args.get(1).map(String::as_str) {
        Some("lstm") => Arch::Lstm,
        _ => Arch::Cnn,
    };
    let lr = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    let epochs = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(50);
    let dataset = gaussian_dataset(&SyntheticSpec::default());
    let config = TrainConfig {
        arch,
        lr,
        epochs,
        lstm_step_features: if arch == Arch::Lstm { 24 } else { 1 },
        seed: 7,
        ..TrainConfig::default()
    };
    let run = cross_validate(&dataset, &config).expect("cross-validation failed");
    for fold in &run.folds {
        let log = &fold.log;
        eprintln!(
            "fold {}: init train {:.4} final train {:.4} best {} stop {} epochs {:?}",
            log.fold_index,
            log.initial_train_loss,
            log.final_train_loss,
            log.best_epoch,
            log.stop_epoch,
            log.epochs.iter().map(|e| format!("{:.3}/{:.3}", e.train_loss, e.val_loss)).collect::<Vec<_>>()
        );
    }
    println!("{}", run.report.render_table());
}
