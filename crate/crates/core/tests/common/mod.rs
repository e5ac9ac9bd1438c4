//! Independent oracles shared by the integration and acceptance tests.
//!
//! Nothing here calls the code paths it is used to check: finite differences
//! only evaluate forward passes, and the brute-force references are written
//! from the textbook definitions.
#![allow(dead_code)]

use avr_core::embedding::{Dataset, Label};
use avr_core::nn::{Tensor, TensorMap};
use avr_core::rng::SplitMix64;

pub const FD_STEP: f64 = 1e-6;

/// Norm-wise relative error `|a - n| / (|a| + |n|)`, 0 when both vanish.
pub fn rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt()
        + numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
    if scale < 1e-300 {
        0.0
    } else {
        diff / scale
    }
}

/// Central difference of `f` with respect to `x[i]` for each `i` in `coords`.
pub fn central_diff(x: &mut [f64], coords: &[usize], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    coords
        .iter()
        .map(|&i| {
            let orig = x[i];
            x[i] = orig + FD_STEP;
            let up = f(x);
            x[i] = orig - FD_STEP;
            let down = f(x);
            x[i] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// Central differences of a scalar function of a named tensor map, on
/// `per_tensor` sampled coordinates of every tensor (all when it is smaller).
/// Returns, per tensor, the sampled coordinates and numeric derivatives.
pub fn central_diff_map(
    params: &mut TensorMap,
    per_tensor: usize,
    rng: &mut SplitMix64,
    mut f: impl FnMut(&TensorMap) -> f64,
) -> Vec<(String, Vec<usize>, Vec<f64>)> {
    let names: Vec<String> = params.keys().cloned().collect();
    let mut out = Vec::new();
    for name in names {
        let n = params[&name].len();
        let coords: Vec<usize> = if n <= per_tensor {
            (0..n).collect()
        } else {
            (0..per_tensor).map(|_| rng.below(n as u64) as usize).collect()
        };
        let mut numeric = Vec::with_capacity(coords.len());
        for &i in &coords {
            let orig = params[&name].data()[i];
            params.get_mut(&name).unwrap().data_mut()[i] = orig + FD_STEP;
            let up = f(params);
            params.get_mut(&name).unwrap().data_mut()[i] = orig - FD_STEP;
            let down = f(params);
            params.get_mut(&name).unwrap().data_mut()[i] = orig;
            numeric.push((up - down) / (2.0 * FD_STEP));
        }
        out.push((name, coords, numeric));
    }
    out
}

pub fn random_vec(rng: &mut SplitMix64, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.normal()).collect()
}

pub fn random_tensor(rng: &mut SplitMix64, shape: &[usize], scale: f64) -> Tensor {
    Tensor::new(shape.to_vec(), random_vec(rng, shape.iter().product(), scale)).unwrap()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Direct-loop valid convolution: `out[o][t] = b[o] + Σ_c Σ_j w[o][c][j] x[c][t+j]`.
pub fn naive_conv1d(x: &[Vec<f64>], w: &[Vec<Vec<f64>>], b: &[f64]) -> Vec<Vec<f64>> {
    let len = x[0].len();
    let k = w[0][0].len();
    let mut out = vec![vec![0.0; len + 1 - k]; w.len()];
    for (o, row) in out.iter_mut().enumerate() {
        for (t, v) in row.iter_mut().enumerate() {
            let mut acc = b[o];
            for (c, xc) in x.iter().enumerate() {
                for j in 0..k {
                    acc += w[o][c][j] * xc[t + j];
                }
            }
            *v = acc;
        }
    }
    out
}

/// Softmax straight from the definition, without max subtraction.
pub fn naive_softmax(z: &[f64]) -> Vec<f64> {
    let e: Vec<f64> = z.iter().map(|v| v.exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

pub fn naive_cross_entropy(z: &[f64], label: usize) -> f64 {
    -naive_softmax(z)[label].ln()
}

pub fn naive_accuracy(pred: &[usize], labels: &[usize]) -> f64 {
    let mut correct = 0;
    for i in 0..pred.len() {
        if pred[i] == labels[i] {
            correct += 1;
        }
    }
    correct as f64 / pred.len() as f64
}

/// Macro-F1 by explicit per-class counting.
pub fn naive_macro_f1(pred: &[usize], labels: &[usize]) -> f64 {
    let mut total = 0.0;
    for class in 0..2 {
        let (mut tp, mut fp, mut fneg) = (0.0, 0.0, 0.0);
        for i in 0..pred.len() {
            match (pred[i] == class, labels[i] == class) {
                (true, true) => tp += 1.0,
                (true, false) => fp += 1.0,
                (false, true) => fneg += 1.0,
                _ => {}
            }
        }
        let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let r = if tp + fneg > 0.0 { tp / (tp + fneg) } else { 0.0 };
        total += if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    }
    total / 2.0
}

/// Training accuracy of L2-free logistic regression on the concatenated
/// embeddings, fitted by full-batch gradient descent.
pub fn logistic_regression_accuracy(dataset: &Dataset, iterations: usize) -> f64 {
    let xs: Vec<Vec<f64>> = dataset
        .clips
        .iter()
        .map(|c| c.audio.values.iter().chain(&c.video.values).map(|&v| f64::from(v)).collect())
        .collect();
    let ys: Vec<f64> = dataset.clips.iter().map(|c| if c.label == Label::Humor { 1.0 } else { 0.0 }).collect();
    let d = xs[0].len();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let lr = 0.01;
    for _ in 0..iterations {
        let mut gw = vec![0.0; d];
        let mut gb = 0.0;
        for (x, y) in xs.iter().zip(&ys) {
            let p = 1.0 / (1.0 + (-(dot(&w, x) + b)).exp());
            let e = p - y;
            for (g, xi) in gw.iter_mut().zip(x) {
                *g += e * xi;
            }
            gb += e;
        }
        let n = xs.len() as f64;
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi -= lr * g / n;
        }
        b -= lr * gb / n;
    }
    let correct = xs
        .iter()
        .zip(&ys)
        .filter(|(x, y)| ((dot(&w, x) + b > 0.0) as u8 as f64) == **y)
        .count();
    correct as f64 / xs.len() as f64
}
pub mod gradcheck;
pub mod criteria;
