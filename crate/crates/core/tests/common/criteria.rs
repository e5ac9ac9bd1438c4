//! Property and oracle sweeps shared by the focused test files and the
//! acceptance runner. Each returns what it measured so callers can both
//! assert and report.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use avr_core::embedding::{make_folds, Clip, Dataset, EmbeddingRecord, ExtractorPair, Label, Modality};
use avr_core::nn::{conv1d_forward, init_params, softmax, Arch, ModelSpec, Readout, Tensor};
use avr_core::optim::cross_entropy;
use avr_core::rng::SplitMix64;
use avr_core::train::{accuracy, load_model, macro_f1, save_model, Classifier};

use super::{naive_accuracy, naive_conv1d, naive_cross_entropy, naive_macro_f1, naive_softmax, random_vec};

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn random_labels(rng: &mut SplitMix64, n: usize) -> Vec<usize> {
    (0..n).map(|_| rng.below(2) as usize).collect()
}

/// Worst elementwise deviation from the naive oracle, per operation, over
/// `instances` random small problems each.
pub fn oracle_deviations(instances: usize, seed: u64) -> BTreeMap<&'static str, f64> {
    let mut rng = SplitMix64::new(seed);
    let mut worst = BTreeMap::new();
    let mut record = |name: &'static str, err: f64| {
        let w = worst.entry(name).or_insert(0.0f64);
        *w = w.max(err);
    };
    for _ in 0..instances {
        let c_in = 1 + rng.below(4) as usize;
        let c_out = 1 + rng.below(5) as usize;
        let k = 1 + rng.below(4) as usize;
        let len = k + rng.below(12) as usize;
        let x: Vec<Vec<f64>> = (0..c_in).map(|_| random_vec(&mut rng, len, 1.0)).collect();
        let w: Vec<Vec<Vec<f64>>> = (0..c_out)
            .map(|_| (0..c_in).map(|_| random_vec(&mut rng, k, 1.0)).collect())
            .collect();
        let b = random_vec(&mut rng, c_out, 1.0);
        let expected: Vec<f64> = naive_conv1d(&x, &w, &b).concat();
        let got = conv1d_forward(
            &Tensor::new(vec![c_in, len], x.concat()).unwrap(),
            &Tensor::new(vec![c_out, c_in, k], w.concat().concat()).unwrap(),
            &Tensor::vector(b),
        )
        .unwrap();
        record("conv1d", max_abs_diff(got.data(), &expected));

        let n = 2 + rng.below(6) as usize;
        let z = random_vec(&mut rng, n, 3.0);
        record("softmax", max_abs_diff(&softmax(&z), &naive_softmax(&z)));

        let z = random_vec(&mut rng, 2, 3.0);
        let label = rng.below(2) as usize;
        let (loss, _) = cross_entropy(&z, label).unwrap();
        record("cross_entropy", (loss - naive_cross_entropy(&z, label)).abs());

        let n = 1 + rng.below(40) as usize;
        let pred = random_labels(&mut rng, n);
        let labels = random_labels(&mut rng, n);
        record("accuracy", (accuracy(&pred, &labels).unwrap() - naive_accuracy(&pred, &labels)).abs());
        record("macro_f1", (macro_f1(&pred, &labels).unwrap() - naive_macro_f1(&pred, &labels)).abs());
    }
    worst
}

/// Labelled clips with empty embeddings, which is all fold assignment reads.
fn label_only_dataset(ids: Vec<(String, Label)>) -> Dataset {
    let pair = ExtractorPair::VideomaeAst;
    let clips = ids
        .into_iter()
        .map(|(clip_id, label)| Clip {
            audio: EmbeddingRecord::new(clip_id.clone(), pair.extractor(Modality::Audio), Vec::new()),
            video: EmbeddingRecord::new(clip_id.clone(), pair.extractor(Modality::Video), Vec::new()),
            clip_id,
            label,
        })
        .collect();
    Dataset::new("folds", clips).unwrap()
}

/// Checks partition, stratification, size balance and seed reproducibility of
/// `make_folds` over `datasets` random datasets. Returns every violation.
pub fn fold_violations(datasets: usize, seed: u64) -> Vec<String> {
    let mut rng = SplitMix64::new(seed);
    let mut violations = Vec::new();
    for d in 0..datasets {
        let k = 2 + rng.below(9) as usize;
        let n_humor = k + rng.below(50) as usize;
        let n_non = k + rng.below(50) as usize;
        let mut ids: Vec<(String, Label)> = (0..n_humor + n_non)
            .map(|i| {
                let label = if i < n_humor { Label::Humor } else { Label::NonHumor };
                (format!("{:016x}-{i}", rng.next_u64()), label)
            })
            .collect();
        rng.shuffle(&mut ids);
        let dataset = label_only_dataset(ids);
        let fold_seed = rng.next_u64();
        let plan = match make_folds(&dataset, k, fold_seed) {
            Ok(p) => p,
            Err(e) => {
                violations.push(format!("dataset {d}: {e}"));
                continue;
            }
        };
        let mut fail = |what: String| violations.push(format!("dataset {d} (k={k}): {what}"));

        let ids: BTreeSet<&str> = dataset.clips.iter().map(|c| c.clip_id.as_str()).collect();
        let assigned: BTreeSet<&str> = plan.assignment.keys().map(String::as_str).collect();
        if ids != assigned {
            fail("assigned ids differ from dataset ids".into());
        }
        let mut seen = BTreeSet::new();
        for f in 0..k {
            let members = plan.members(f);
            if members.is_empty() {
                fail(format!("fold {f} is empty"));
            }
            for id in members {
                if !seen.insert(id) {
                    fail(format!("clip {id} in two folds"));
                }
            }
        }
        if plan.assignment.values().any(|&f| f >= k) {
            fail("fold index out of range".into());
        }
        if seen.len() != dataset.len() {
            fail(format!("folds cover {} of {} clips", seen.len(), dataset.len()));
        }

        for label in Label::ALL {
            let total = dataset.count(label);
            let (lo, hi) = (total / k, total.div_ceil(k));
            for f in 0..k {
                let n = plan
                    .members(f)
                    .iter()
                    .filter(|id| dataset.get(id).unwrap().label == label)
                    .count();
                if n < lo || n > hi {
                    fail(format!("fold {f} has {n} {label} clips, expected {lo}..={hi}"));
                }
            }
        }
        let sizes = plan.sizes();
        let (min, max) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        if max - min > 1 {
            fail(format!("fold sizes {sizes:?} differ by more than one"));
        }
        if make_folds(&dataset, k, fold_seed).as_ref() != Ok(&plan) {
            fail("same seed produced a different plan".into());
        }
    }
    violations
}

/// A random valid spec, small enough that 100 of them save quickly.
pub fn random_spec(rng: &mut SplitMix64) -> ModelSpec {
    let arch = if rng.below(2) == 0 { Arch::Cnn } else { Arch::Lstm };
    let readout = if rng.below(2) == 0 { Readout::GlobalAvgPool } else { Readout::Flatten };
    let step = [1, 2, 4, 8][rng.below(4) as usize];
    ModelSpec {
        arch,
        input_dim: 8 * (2 + rng.below(6) as usize),
        conv_filters: [1 + rng.below(6) as usize, 1 + rng.below(6) as usize],
        kernel_size: 1 + rng.below(4) as usize,
        lstm_hidden: 1 + rng.below(8) as usize,
        lstm_step_features: step,
        head_hidden: 1 + rng.below(12) as usize,
        readout,
        ..ModelSpec::default()
    }
}

/// Saves and reloads `models` random classifiers (one in ten at the full
/// default size) and compares eval predictions bit for bit on random inputs.
/// Returns every mismatch.
pub fn serialization_mismatches(models: usize, seed: u64, dir: &Path) -> Vec<String> {
    let mut rng = SplitMix64::new(seed);
    let mut mismatches = Vec::new();
    for m in 0..models {
        let spec = match m % 10 {
            0 => ModelSpec::cnn(),
            5 => ModelSpec::lstm(),
            _ => random_spec(&mut rng),
        };
        let params = init_params(&spec, rng.next_u64()).unwrap();
        let pair = if rng.below(2) == 0 { ExtractorPair::VideomaeAst } else { ExtractorPair::Languagebind };
        let model = Classifier {
            spec: spec.clone(),
            params,
            extractor_pair: pair,
            config_hash: format!("{:016x}", rng.next_u64()),
            metrics: None,
        };
        let path = dir.join(format!("model-{m}.json"));
        save_model(&model, &path).unwrap();
        let loaded = match load_model(&path) {
            Ok(l) => l,
            Err(e) => {
                mismatches.push(format!("model {m}: reload failed: {e}"));
                continue;
            }
        };
        if loaded != model {
            mismatches.push(format!("model {m}: reloaded classifier differs"));
        }
        for trial in 0..3 {
            let a: Vec<f32> = (0..spec.input_dim).map(|_| rng.normal() as f32).collect();
            let v: Vec<f32> = (0..spec.input_dim).map(|_| rng.normal() as f32).collect();
            let before = model.probabilities(&a, &v).unwrap();
            let after = loaded.probabilities(&a, &v).unwrap();
            if before.map(f64::to_bits) != after.map(f64::to_bits) {
                mismatches.push(format!("model {m} input {trial}: {before:?} != {after:?}"));
            }
        }
    }
    mismatches
}
