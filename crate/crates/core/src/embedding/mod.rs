//! Embedding files, dataset manifests and fold partitions.

mod dataset;
mod folds;
mod format;

pub use dataset::{load_dataset, Clip, Dataset, DatasetError, DatasetManifest, Label, ManifestClip};
pub use folds::{make_folds, stratified_folds, FoldError, FoldPlan};
pub use format::{
    decode, encode, read_embedding, write_embedding, write_embedding_with, EmbeddingError,
    EmbeddingRecord, Extractor, ExtractorPair, Modality, EMBEDDING_DIM, FORMAT_VERSION, HEADER_LEN,
    MAGIC,
};
