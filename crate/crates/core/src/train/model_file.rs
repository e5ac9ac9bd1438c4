//! Trained classifiers and their JSON model files.
//!
//! Parameters are stored as base64 of little-endian binary32, so a file
//! round-trip reproduces them bit for bit.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::FoldMetrics;
use crate::embedding::{ExtractorPair, Label};
use crate::nn::{model_forward, softmax, Mode, ModelParams, ModelSpec, NnError, Tensor};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("model file is not valid JSON (line {line}, column {column}): {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported model format version {0}")]
    Version(u32),
    #[error("parameter {name}: {reason}")]
    Payload { name: String, reason: String },
    #[error(transparent)]
    Params(#[from] NnError),
}

/// A trained model with the metadata needed to serve it.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub spec: ModelSpec,
    pub params: ModelParams,
    pub extractor_pair: ExtractorPair,
    pub config_hash: String,
    pub metrics: Option<FoldMetrics>,
}

impl Classifier {
    /// Eval-mode logits `[non_humor, humor]`.
    pub fn logits(&self, audio: &[f32], video: &[f32]) -> Result<Vec<f64>, NnError> {
        model_forward(&self.spec, &self.params, audio, video, &mut Mode::Eval)
    }

    /// Eval-mode class probabilities `[non_humor, humor]`.
    pub fn probabilities(&self, audio: &[f32], video: &[f32]) -> Result<[f64; 2], NnError> {
        let p = softmax(&self.logits(audio, video)?);
        Ok([p[0], p[1]])
    }

    pub fn predict(&self, audio: &[f32], video: &[f32]) -> Result<(Label, [f64; 2]), NnError> {
        let p = self.probabilities(audio, video)?;
        Ok((argmax(&p), p))
    }
}

/// Most probable class; ties go to non-humor.
pub fn argmax(p: &[f64; 2]) -> Label {
    if p[1] > p[0] {
        Label::Humor
    } else {
        Label::NonHumor
    }
}

#[derive(Serialize, Deserialize)]
struct StoredTensor {
    shape: Vec<usize>,
    data: String,
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format_version: u32,
    spec: ModelSpec,
    seed: u64,
    extractor_pair: ExtractorPair,
    parameters: BTreeMap<String, StoredTensor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    metrics: Option<FoldMetrics>,
    config_hash: String,
}

fn encode_tensor(t: &Tensor) -> StoredTensor {
    let mut bytes = Vec::with_capacity(4 * t.len());
    for &v in t.data() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    StoredTensor {
        shape: t.shape().to_vec(),
        data: BASE64.encode(bytes),
    }
}

fn decode_tensor(name: &str, stored: &StoredTensor) -> Result<Tensor, ModelFileError> {
    let payload_err = |reason: String| ModelFileError::Payload {
        name: name.to_owned(),
        reason,
    };
    let bytes = BASE64
        .decode(stored.data.as_bytes())
        .map_err(|e| payload_err(format!("bad base64: {e}")))?;
    let n: usize = stored.shape.iter().product();
    if bytes.len() != 4 * n {
        return Err(payload_err(format!(
            "{} bytes for shape {:?}, expected {}",
            bytes.len(),
            stored.shape,
            4 * n
        )));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    Tensor::new(stored.shape.clone(), data).map_err(|e| payload_err(e.to_string()))
}

/// Serializes a classifier to the JSON model document.
pub fn model_to_json(model: &Classifier) -> String {
    let doc = ModelDocument {
        format_version: MODEL_FORMAT_VERSION,
        spec: model.spec.clone(),
        seed: model.params.seed,
        extractor_pair: model.extractor_pair,
        parameters: model
            .params
            .tensors
            .iter()
            .map(|(n, t)| (n.clone(), encode_tensor(t)))
            .collect(),
        metrics: model.metrics.clone(),
        config_hash: model.config_hash.clone(),
    };
    serde_json::to_string_pretty(&doc).expect("model document serializes")
}

pub fn model_from_json(text: &str) -> Result<Classifier, ModelFileError> {
    let doc: ModelDocument = serde_json::from_str(text).map_err(|e| ModelFileError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if doc.format_version != MODEL_FORMAT_VERSION {
        return Err(ModelFileError::Version(doc.format_version));
    }
    doc.spec.validate()?;
    let tensors = doc
        .parameters
        .iter()
        .map(|(n, s)| Ok((n.clone(), decode_tensor(n, s)?)))
        .collect::<Result<_, ModelFileError>>()?;
    let params = ModelParams {
        seed: doc.seed,
        tensors,
    };
    params.check(&doc.spec)?;
    Ok(Classifier {
        spec: doc.spec,
        params,
        extractor_pair: doc.extractor_pair,
        config_hash: doc.config_hash,
        metrics: doc.metrics,
    })
}

pub fn save_model(model: &Classifier, path: impl AsRef<Path>) -> Result<(), ModelFileError> {
    let path = path.as_ref();
    fs::write(path, model_to_json(model)).map_err(|source| ModelFileError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Classifier, ModelFileError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ModelFileError::Io {
        path: path.to_owned(),
        source,
    })?;
    model_from_json(&text)
}

/// Loads a model, returning a warning when its config hash is not `expected`.
pub fn load_model_expecting(
    path: impl AsRef<Path>,
    expected_config_hash: &str,
) -> Result<(Classifier, Option<String>), ModelFileError> {
    let model = load_model(path)?;
    let warning = (model.config_hash != expected_config_hash).then(|| {
        format!(
            "model config hash {} does not match expected {}",
            model.config_hash, expected_config_hash
        )
    });
    Ok((model, warning))
}

/// Identifier of a model file's exact contents.
pub fn model_id(bytes: &[u8]) -> String {
    Sha256::digest(bytes)[..6].iter().map(|b| format!("{b:02x}")).collect()
}
