//! Dataset manifests and fully resident datasets.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::format::{
    read_embedding, write_embedding, EmbeddingError, EmbeddingRecord, ExtractorPair, Modality,
    EMBEDDING_DIM,
};

/// Class label. The index order fixes the order of every probability vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    NonHumor = 0,
    Humor = 1,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::NonHumor, Label::Humor];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        match index {
            0 => Some(Label::NonHumor),
            1 => Some(Label::Humor),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::NonHumor => "non_humor",
            Label::Humor => "humor",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest {path} is not valid JSON: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("duplicate clip_id \"{0}\"")]
    DuplicateClip(String),
    #[error("clip \"{clip_id}\" has label {label}, expected 0 or 1")]
    InvalidLabel { clip_id: String, label: i64 },
    #[error("clip \"{clip_id}\": missing embedding file {}", path.display())]
    MissingFile { clip_id: String, path: PathBuf },
    #[error("clip \"{clip_id}\": {} : {source}", path.display())]
    Embedding {
        clip_id: String,
        path: PathBuf,
        #[source]
        source: EmbeddingError,
    },
    #[error("clip \"{clip_id}\": {} has dim {found}, manifest expects {expected}", path.display())]
    DimMismatch {
        clip_id: String,
        path: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("clip \"{clip_id}\": {} holds a {found} embedding where {expected} was expected", path.display())]
    WrongModality {
        clip_id: String,
        path: PathBuf,
        expected: Modality,
        found: Modality,
    },
    #[error("dataset has no clip labelled {0}")]
    MissingClass(Label),
    #[error("clip \"{clip_id}\" mixes extractor pairs ({audio} audio, {video} video)")]
    MixedExtractors {
        clip_id: String,
        audio: String,
        video: String,
    },
    #[error("dataset uses {found} embeddings, expected {expected}")]
    WrongPair {
        expected: ExtractorPair,
        found: String,
    },
}

fn default_dim() -> usize {
    EMBEDDING_DIM
}

/// One manifest row. Labels stay as raw integers until validated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestClip {
    pub clip_id: String,
    pub label: i64,
    pub audio_path: String,
    pub video_path: String,
}

/// The JSON manifest document. Paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    /// Expected embedding width; omitted in ordinary manifests.
    #[serde(default = "default_dim", skip_serializing_if = "is_default_dim")]
    pub dim: usize,
    pub clips: Vec<ManifestClip>,
}

fn is_default_dim(dim: &usize) -> bool {
    *dim == EMBEDDING_DIM
}

impl DatasetManifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.to_owned(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| DatasetError::Parse {
            path: path.to_owned(),
            source,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), DatasetError> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text).map_err(|source| DatasetError::Io {
            path: path.to_owned(),
            source,
        })
    }
}

/// A labelled clip with both embeddings resident.
#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    pub clip_id: String,
    pub label: Label,
    pub audio: EmbeddingRecord,
    pub video: EmbeddingRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub clips: Vec<Clip>,
}

impl Dataset {
    /// Builds a dataset, checking clip id uniqueness and class coverage.
    pub fn new(name: impl Into<String>, clips: Vec<Clip>) -> Result<Self, DatasetError> {
        let mut seen = HashSet::new();
        for clip in &clips {
            if !seen.insert(clip.clip_id.as_str()) {
                return Err(DatasetError::DuplicateClip(clip.clip_id.clone()));
            }
            let (a, v) = (clip.audio.extractor, clip.video.extractor);
            let consistent = [ExtractorPair::VideomaeAst, ExtractorPair::Languagebind]
                .iter()
                .any(|p| p.extractor(Modality::Audio) == a && p.extractor(Modality::Video) == v);
            if !consistent {
                return Err(DatasetError::MixedExtractors {
                    clip_id: clip.clip_id.clone(),
                    audio: a.to_string(),
                    video: v.to_string(),
                });
            }
        }
        for label in Label::ALL {
            if !clips.iter().any(|c| c.label == label) {
                return Err(DatasetError::MissingClass(label));
            }
        }
        Ok(Self {
            name: name.into(),
            clips,
        })
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }

    pub fn get(&self, clip_id: &str) -> Option<&Clip> {
        self.clips.iter().find(|c| c.clip_id == clip_id)
    }

    pub fn records(&self) -> impl Iterator<Item = &EmbeddingRecord> {
        self.clips.iter().flat_map(|c| [&c.audio, &c.video])
    }

    pub fn count(&self, label: Label) -> usize {
        self.clips.iter().filter(|c| c.label == label).count()
    }

    /// The extractor pair every clip was embedded with.
    pub fn extractor_pair(&self) -> Option<ExtractorPair> {
        let first = self.clips.first()?;
        [ExtractorPair::VideomaeAst, ExtractorPair::Languagebind]
            .into_iter()
            .find(|p| p.extractor(Modality::Audio) == first.audio.extractor)
    }

    /// Fails unless every clip was embedded with `pair`.
    pub fn require_pair(&self, pair: ExtractorPair) -> Result<(), DatasetError> {
        for clip in &self.clips {
            if clip.audio.extractor != pair.extractor(Modality::Audio) {
                return Err(DatasetError::WrongPair {
                    expected: pair,
                    found: clip.audio.extractor.to_string(),
                });
            }
        }
        Ok(())
    }

    /// Writes every clip as AVRE files under `dir` together with a manifest,
    /// returning the manifest path.
    pub fn write_to_dir(&self, dir: impl AsRef<Path>) -> Result<PathBuf, DatasetError> {
        let dir = dir.as_ref();
        let emb_dir = dir.join("embeddings");
        fs::create_dir_all(&emb_dir).map_err(|source| DatasetError::Io {
            path: emb_dir.clone(),
            source,
        })?;
        let mut rows = Vec::with_capacity(self.clips.len());
        for clip in &self.clips {
            let audio_rel = format!("embeddings/{}.audio.avre", clip.clip_id);
            let video_rel = format!("embeddings/{}.video.avre", clip.clip_id);
            for (rel, rec) in [(&audio_rel, &clip.audio), (&video_rel, &clip.video)] {
                let path = dir.join(rel);
                write_embedding(rec, &path).map_err(|source| DatasetError::Embedding {
                    clip_id: clip.clip_id.clone(),
                    path,
                    source,
                })?;
            }
            rows.push(ManifestClip {
                clip_id: clip.clip_id.clone(),
                label: clip.label.index() as i64,
                audio_path: audio_rel,
                video_path: video_rel,
            });
        }
        let manifest = DatasetManifest {
            name: self.name.clone(),
            dim: EMBEDDING_DIM,
            clips: rows,
        };
        let path = dir.join("manifest.json");
        manifest.write(&path)?;
        Ok(path)
    }
}

/// Loads a manifest and every embedding it references.
pub fn load_dataset(manifest_path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let manifest_path = manifest_path.as_ref();
    let manifest = DatasetManifest::read(manifest_path)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let mut seen = HashSet::new();
    for row in &manifest.clips {
        if !seen.insert(row.clip_id.as_str()) {
            return Err(DatasetError::DuplicateClip(row.clip_id.clone()));
        }
    }

    let mut clips = Vec::with_capacity(manifest.clips.len());
    for row in &manifest.clips {
        let label = usize::try_from(row.label)
            .ok()
            .and_then(Label::from_index)
            .ok_or_else(|| DatasetError::InvalidLabel {
                clip_id: row.clip_id.clone(),
                label: row.label,
            })?;
        let audio = load_record(base, row, &row.audio_path, Modality::Audio, manifest.dim)?;
        let video = load_record(base, row, &row.video_path, Modality::Video, manifest.dim)?;
        clips.push(Clip {
            clip_id: row.clip_id.clone(),
            label,
            audio,
            video,
        });
    }
    Dataset::new(manifest.name, clips)
}

fn load_record(
    base: &Path,
    row: &ManifestClip,
    rel: &str,
    modality: Modality,
    dim: usize,
) -> Result<EmbeddingRecord, DatasetError> {
    let path = base.join(rel);
    if !path.is_file() {
        return Err(DatasetError::MissingFile {
            clip_id: row.clip_id.clone(),
            path,
        });
    }
    let mut record = read_embedding(&path).map_err(|source| DatasetError::Embedding {
        clip_id: row.clip_id.clone(),
        path: path.clone(),
        source,
    })?;
    if record.modality != modality {
        return Err(DatasetError::WrongModality {
            clip_id: row.clip_id.clone(),
            path,
            expected: modality,
            found: record.modality,
        });
    }
    if record.dim() != dim {
        return Err(DatasetError::DimMismatch {
            clip_id: row.clip_id.clone(),
            path,
            expected: dim,
            found: record.dim(),
        });
    }
    record.clip_id = row.clip_id.clone();
    Ok(record)
}
