use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::TrainError;
use crate::embedding::ExtractorPair;
use crate::nn::{Arch, ModelSpec, Readout};
use crate::optim::AdamHyper;

/// Everything that determines a cross-validation run.
///
/// Defaults: 50 epochs, learning rate 1e-5 and 5 folds are the reference
/// protocol; batch size, dropout rate, patience, `min_delta`, validation
/// fraction, readout and LSTM step width are this implementation's choices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub arch: Arch,
    pub extractor_pair: ExtractorPair,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub k: usize,
    pub seed: u64,
    pub dropout_rate: f64,
    pub patience: usize,
    pub min_delta: f64,
    pub val_fraction: f64,
    pub readout: Readout,
    pub lstm_step_features: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            arch: Arch::Cnn,
            extractor_pair: ExtractorPair::VideomaeAst,
            epochs: 50,
            lr: 1e-5,
            batch_size: 32,
            k: 5,
            seed: 0,
            dropout_rate: 0.2,
            patience: 5,
            min_delta: 1e-4,
            val_fraction: 0.1,
            readout: Readout::GlobalAvgPool,
            lstm_step_features: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: String| Err(TrainError::Config(msg));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.k < 2 {
            return bad(format!("k must be at least 2, got {}", self.k));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 0.5) {
            return bad(format!("val_fraction must lie in (0, 0.5), got {}", self.val_fraction));
        }
        if !(self.min_delta >= 0.0 && self.min_delta.is_finite()) {
            return bad(format!("min_delta must be non-negative, got {}", self.min_delta));
        }
        self.model_spec().validate()?;
        Ok(())
    }

    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec {
            arch: self.arch,
            dropout_rate: self.dropout_rate,
            readout: self.readout,
            lstm_step_features: self.lstm_step_features,
            ..ModelSpec::default()
        }
    }

    pub fn adam(&self) -> AdamHyper {
        AdamHyper {
            lr: self.lr,
            ..AdamHyper::default()
        }
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        TrainConfig::default().validate().unwrap();
    }

    #[test]
    fn hash_tracks_content() {
        let a = TrainConfig::default();
        let b = TrainConfig { seed: 1, ..a.clone() };
        assert_eq!(a.hash(), TrainConfig::default().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn rejects_bad_values() {
        for cfg in [
            TrainConfig { k: 1, ..Default::default() },
            TrainConfig { val_fraction: 0.5, ..Default::default() },
            TrainConfig { lr: 0.0, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { dropout_rate: 1.0, ..Default::default() },
            TrainConfig { arch: Arch::Lstm, lstm_step_features: 7, ..Default::default() },
        ] {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn partial_toml_like_json_fills_defaults() {
        let cfg: TrainConfig = serde_json::from_str(r#"{"arch":"lstm","lr":0.001}"#).unwrap();
        assert_eq!(cfg.arch, Arch::Lstm);
        assert_eq!(cfg.epochs, 50);
        assert!(serde_json::from_str::<TrainConfig>(r#"{"epoch":3}"#).is_err());
    }
}
