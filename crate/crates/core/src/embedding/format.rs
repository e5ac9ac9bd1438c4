//! The AVRE binary embedding file.
//!
//! Little-endian layout, 24-byte header followed by the payload:
//!
//! | bytes  | field                                                   |
//! |--------|---------------------------------------------------------|
//! | 0..4   | magic `b"AVRE"`                                         |
//! | 4..8   | version, `u32` (currently 1)                            |
//! | 8      | modality, `u8` (0 audio, 1 video)                       |
//! | 9      | extractor, `u8` (0 ast, 1 videomae, 2/3 languagebind)   |
//! | 10..12 | reserved, zero                                          |
//! | 12..16 | dim, `u32`                                              |
//! | 16..24 | reserved, zero                                          |
//! | 24..   | `dim` IEEE-754 binary32 values                          |

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"AVRE";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 24;
/// Width of every foundation-model embedding handled by this system.
pub const EMBEDDING_DIM: usize = 768;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic {found:?}, expected \"AVRE\"")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),
    #[error("file too short for header: {0} bytes")]
    ShortHeader(usize),
    #[error("truncated payload: dim {dim} needs {needed} bytes, {available} available")]
    Truncated {
        dim: u32,
        needed: usize,
        available: usize,
    },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("unknown modality code {0}")]
    UnknownModality(u8),
    #[error("unknown extractor code {0}")]
    UnknownExtractor(u8),
    #[error("extractor {extractor} does not produce {modality} embeddings")]
    ExtractorModality {
        extractor: Extractor,
        modality: Modality,
    },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("embedding dim {0} != {EMBEDDING_DIM}")]
    Dim(usize),
    #[error("dim field {dim} disagrees with {len} values")]
    LengthMismatch { dim: usize, len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Audio,
    Video,
}

impl Modality {
    pub fn code(self) -> u8 {
        match self {
            Modality::Audio => 0,
            Modality::Video => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self, EmbeddingError> {
        match code {
            0 => Ok(Modality::Audio),
            1 => Ok(Modality::Video),
            other => Err(EmbeddingError::UnknownModality(other)),
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::Audio => "audio",
            Modality::Video => "video",
        })
    }
}

/// Foundation model that produced an embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extractor {
    Ast,
    Videomae,
    LanguagebindAudio,
    LanguagebindVideo,
}

impl Extractor {
    pub fn code(self) -> u8 {
        match self {
            Extractor::Ast => 0,
            Extractor::Videomae => 1,
            Extractor::LanguagebindAudio => 2,
            Extractor::LanguagebindVideo => 3,
        }
    }

    pub fn from_code(code: u8) -> Result<Self, EmbeddingError> {
        match code {
            0 => Ok(Extractor::Ast),
            1 => Ok(Extractor::Videomae),
            2 => Ok(Extractor::LanguagebindAudio),
            3 => Ok(Extractor::LanguagebindVideo),
            other => Err(EmbeddingError::UnknownExtractor(other)),
        }
    }

    pub fn modality(self) -> Modality {
        match self {
            Extractor::Ast | Extractor::LanguagebindAudio => Modality::Audio,
            Extractor::Videomae | Extractor::LanguagebindVideo => Modality::Video,
        }
    }
}

impl fmt::Display for Extractor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Extractor::Ast => "ast",
            Extractor::Videomae => "videomae",
            Extractor::LanguagebindAudio => "languagebind_audio",
            Extractor::LanguagebindVideo => "languagebind_video",
        })
    }
}

/// Which pair of foundation models a dataset or model was built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExtractorPair {
    #[serde(rename = "videomae+ast", alias = "videomae-ast")]
    VideomaeAst,
    #[serde(rename = "languagebind")]
    Languagebind,
}

impl ExtractorPair {
    pub fn extractor(self, modality: Modality) -> Extractor {
        match (self, modality) {
            (ExtractorPair::VideomaeAst, Modality::Audio) => Extractor::Ast,
            (ExtractorPair::VideomaeAst, Modality::Video) => Extractor::Videomae,
            (ExtractorPair::Languagebind, Modality::Audio) => Extractor::LanguagebindAudio,
            (ExtractorPair::Languagebind, Modality::Video) => Extractor::LanguagebindVideo,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ExtractorPair::VideomaeAst => "videomae+ast",
            ExtractorPair::Languagebind => "languagebind",
        }
    }

    /// Spelling used on extractor command lines, free of shell-special characters.
    pub fn cli_name(self) -> &'static str {
        match self {
            ExtractorPair::VideomaeAst => "videomae-ast",
            ExtractorPair::Languagebind => "languagebind",
        }
    }
}

impl std::str::FromStr for ExtractorPair {
    type Err = String;

    /// Accepts `videomae+ast`, `videomae-ast` and `languagebind`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "videomae+ast" | "videomae-ast" => Ok(ExtractorPair::VideomaeAst),
            "languagebind" => Ok(ExtractorPair::Languagebind),
            other => Err(format!("unknown extractor pair {other:?} (expected videomae+ast or languagebind)")),
        }
    }
}

impl fmt::Display for ExtractorPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One clip's embedding for one modality.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub clip_id: String,
    pub modality: Modality,
    pub extractor: Extractor,
    pub values: Vec<f32>,
}

impl EmbeddingRecord {
    pub fn new(
        clip_id: impl Into<String>,
        extractor: Extractor,
        values: Vec<f32>,
    ) -> Self {
        Self {
            clip_id: clip_id.into(),
            modality: extractor.modality(),
            extractor,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Checks finiteness, modality/extractor agreement and, unless
    /// `allow_any_dim`, the 768-wide contract.
    pub fn validate(&self, allow_any_dim: bool) -> Result<(), EmbeddingError> {
        if self.extractor.modality() != self.modality {
            return Err(EmbeddingError::ExtractorModality {
                extractor: self.extractor,
                modality: self.modality,
            });
        }
        if !allow_any_dim && self.values.len() != EMBEDDING_DIM {
            return Err(EmbeddingError::Dim(self.values.len()));
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite(i));
        }
        Ok(())
    }
}

/// Serializes a record to AVRE bytes.
pub fn encode(record: &EmbeddingRecord, allow_any_dim: bool) -> Result<Vec<u8>, EmbeddingError> {
    record.validate(allow_any_dim)?;
    let dim = u32::try_from(record.values.len())
        .map_err(|_| EmbeddingError::Dim(record.values.len()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * record.values.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(record.modality.code());
    out.push(record.extractor.code());
    out.extend_from_slice(&[0, 0]);
    out.extend_from_slice(&dim.to_le_bytes());
    out.extend_from_slice(&[0; 8]);
    for v in &record.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Parses AVRE bytes. The file carries no clip id, so the caller supplies one.
pub fn decode(bytes: &[u8], clip_id: impl Into<String>) -> Result<EmbeddingRecord, EmbeddingError> {
    if bytes.len() < 4 || bytes[0..4] != MAGIC {
        let mut found = [0u8; 4];
        let n = bytes.len().min(4);
        found[..n].copy_from_slice(&bytes[..n]);
        return Err(EmbeddingError::BadMagic { found });
    }
    if bytes.len() < HEADER_LEN {
        return Err(EmbeddingError::ShortHeader(bytes.len()));
    }
    let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != FORMAT_VERSION {
        return Err(EmbeddingError::UnsupportedVersion(version));
    }
    let modality = Modality::from_code(bytes[8])?;
    let extractor = Extractor::from_code(bytes[9])?;
    let dim = u32_at(12);
    let payload = &bytes[HEADER_LEN..];
    let needed = dim as usize * 4;
    if payload.len() < needed {
        return Err(EmbeddingError::Truncated {
            dim,
            needed,
            available: payload.len(),
        });
    }
    if payload.len() > needed {
        return Err(EmbeddingError::TrailingBytes(payload.len() - needed));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let record = EmbeddingRecord {
        clip_id: clip_id.into(),
        modality,
        extractor,
        values,
    };
    record.validate(true)?;
    Ok(record)
}

/// Writes `record` to `path`, enforcing the 768-d contract.
pub fn write_embedding(record: &EmbeddingRecord, path: impl AsRef<Path>) -> Result<(), EmbeddingError> {
    write_embedding_with(record, path, false)
}

/// Like [`write_embedding`] but with the dimension check optionally lifted.
pub fn write_embedding_with(
    record: &EmbeddingRecord,
    path: impl AsRef<Path>,
    allow_any_dim: bool,
) -> Result<(), EmbeddingError> {
    let path = path.as_ref();
    let bytes = encode(record, allow_any_dim)?;
    fs::write(path, bytes).map_err(|source| EmbeddingError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Reads an AVRE file. The returned record's `clip_id` is the file stem.
pub fn read_embedding(path: impl AsRef<Path>) -> Result<EmbeddingRecord, EmbeddingError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| EmbeddingError::Io {
        path: path.to_owned(),
        source,
    })?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    decode(&bytes, stem)
}
