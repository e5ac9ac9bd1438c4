//! Audio-visual humor classification on frozen foundation-model embeddings.
//!
//! The crate covers the offline half of the system:
//!
//! * [`embedding`]: the AVRE embedding file format, dataset manifests and
//!   stratified fold plans.
//! * [`nn`]: tensors and layers with hand-derived backward passes, and the
//!   CNN and LSTM fusion classifiers built from them.
//! * [`optim`]: cross-entropy, Adam and early stopping.
//! * [`train`]: metrics, per-fold training, k-fold cross-validation, reports
//!   and model files.
//!
//! Every stochastic step draws from [`rng::SplitMix64`] streams derived from
//! one user seed, so a run is a pure function of its dataset and config.

pub mod embedding;
pub mod nn;
pub mod optim;
pub mod rng;
pub mod synthetic;
pub mod train;
