//! Stratified, seed-reproducible k-fold partitions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dataset::{Dataset, Label};
use crate::rng::{fnv1a64, SplitMix64};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FoldError {
    #[error("k must be at least 2, got {0}")]
    TooFewFolds(usize),
    #[error("class {label} has {count} < {k} members")]
    ClassTooSmall { label: Label, count: usize, k: usize },
}

/// Assignment of every clip to exactly one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub assignment: BTreeMap<String, usize>,
}

impl FoldPlan {
    pub fn fold_of(&self, clip_id: &str) -> Option<usize> {
        self.assignment.get(clip_id).copied()
    }

    /// Clip ids in `fold`, in lexicographic order.
    pub fn members(&self, fold: usize) -> Vec<&str> {
        self.assignment
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    /// Clip ids outside `fold`, in lexicographic order.
    pub fn complement(&self, fold: usize) -> Vec<&str> {
        self.assignment
            .iter()
            .filter(|(_, &f)| f != fold)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in self.assignment.values() {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Seed of the shuffle stream for one class.
fn class_stream(seed: u64, label: Label) -> SplitMix64 {
    SplitMix64::new(seed ^ fnv1a64(label.name().as_bytes()))
}

/// Partitions labelled ids into `k` stratified folds.
///
/// Each class's ids are sorted, shuffled with its own splitmix64 stream and
/// dealt round-robin. Dealing continues where the previous class stopped so
/// that total fold sizes, not only per-class counts, differ by at most one.
pub fn stratified_folds<'a>(
    items: impl IntoIterator<Item = (&'a str, Label)>,
    k: usize,
    seed: u64,
) -> Result<FoldPlan, FoldError> {
    if k < 2 {
        return Err(FoldError::TooFewFolds(k));
    }
    let mut by_class: BTreeMap<Label, Vec<&str>> = BTreeMap::new();
    for (id, label) in items {
        by_class.entry(label).or_default().push(id);
    }
    for label in Label::ALL {
        let count = by_class.get(&label).map_or(0, Vec::len);
        if count < k {
            return Err(FoldError::ClassTooSmall { label, count, k });
        }
    }

    let mut assignment = BTreeMap::new();
    let mut next = 0usize;
    for label in Label::ALL {
        let ids = by_class.get_mut(&label).expect("checked above");
        ids.sort_unstable();
        class_stream(seed, label).shuffle(ids);
        for id in ids.iter() {
            assignment.insert((*id).to_owned(), next);
            next = (next + 1) % k;
        }
    }
    Ok(FoldPlan { k, seed, assignment })
}

pub fn make_folds(dataset: &Dataset, k: usize, seed: u64) -> Result<FoldPlan, FoldError> {
    stratified_folds(
        dataset.clips.iter().map(|c| (c.clip_id.as_str(), c.label)),
        k,
        seed,
    )
}
