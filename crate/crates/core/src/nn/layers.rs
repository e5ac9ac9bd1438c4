//! Small layers used by the classification head.

use super::tensor::Tensor;
use super::NnError;
use crate::rng::SplitMix64;

/// Whether stochastic layers are active.
#[derive(Debug)]
pub enum Mode<'a> {
    Eval,
    Train(&'a mut SplitMix64),
}

impl Mode<'_> {
    pub fn is_train(&self) -> bool {
        matches!(self, Mode::Train(_))
    }
}

/// `y = W x + b` with `W: [out, in]`.
pub fn dense_forward(x: &[f64], weight: &Tensor, bias: &Tensor) -> Result<Vec<f64>, NnError> {
    weight.check_rank("dense", 2)?;
    let (out, inp) = (weight.shape()[0], weight.shape()[1]);
    if x.len() != inp {
        return Err(NnError::Shape {
            op: "dense input",
            expected: format!("{inp}"),
            found: format!("{}", x.len()),
        });
    }
    bias.check_shape("dense bias", &[out])?;
    Ok(weight
        .data()
        .chunks_exact(inp)
        .zip(bias.data())
        .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub input: Vec<f64>,
    pub weight: Tensor,
    pub bias: Tensor,
}

pub fn dense_backward(x: &[f64], weight: &Tensor, grad_out: &[f64]) -> Result<DenseGrads, NnError> {
    weight.check_rank("dense", 2)?;
    let (out, inp) = (weight.shape()[0], weight.shape()[1]);
    if x.len() != inp || grad_out.len() != out {
        return Err(NnError::Shape {
            op: "dense backward",
            expected: format!("input {inp}, upstream {out}"),
            found: format!("input {}, upstream {}", x.len(), grad_out.len()),
        });
    }
    let mut gw = vec![0.0; out * inp];
    let mut gx = vec![0.0; inp];
    for ((row_g, row_w), &g) in gw.chunks_exact_mut(inp).zip(weight.data().chunks_exact(inp)).zip(grad_out) {
        for ((gwv, &xv), (gxv, &wv)) in row_g.iter_mut().zip(x).zip(gx.iter_mut().zip(row_w)) {
            *gwv = g * xv;
            *gxv += g * wv;
        }
    }
    Ok(DenseGrads {
        input: gx,
        weight: Tensor::new(vec![out, inp], gw)?,
        bias: Tensor::vector(grad_out.to_vec()),
    })
}

pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

/// Gradient through ReLU given the pre-activation.
pub fn relu_backward(pre: &[f64], grad: &[f64]) -> Vec<f64> {
    pre.iter()
        .zip(grad)
        .map(|(&p, &g)| if p > 0.0 { g } else { 0.0 })
        .collect()
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Mean over the length axis of a `[C, L]` tensor.
pub fn global_avg_pool(x: &Tensor) -> Result<Vec<f64>, NnError> {
    x.check_rank("global_avg_pool", 2)?;
    let len = x.shape()[1] as f64;
    Ok(x.data()
        .chunks_exact(x.shape()[1])
        .map(|row| row.iter().sum::<f64>() / len)
        .collect())
}

pub fn global_avg_pool_backward(grad: &[f64], len: usize) -> Result<Tensor, NnError> {
    let scale = 1.0 / len as f64;
    let data = grad
        .iter()
        .flat_map(|&g| std::iter::repeat(g * scale).take(len))
        .collect();
    Tensor::new(vec![grad.len(), len], data)
}

/// Inverted dropout. Returns the output and the per-element scale that was
/// applied (`None` in eval mode, where the layer is the identity).
pub fn dropout(x: &[f64], rate: f64, mode: &mut Mode<'_>) -> Result<(Vec<f64>, Option<Vec<f64>>), NnError> {
    if !(0.0..1.0).contains(&rate) {
        return Err(NnError::DropoutRate(rate));
    }
    match mode {
        Mode::Eval => Ok((x.to_vec(), None)),
        Mode::Train(rng) => {
            let keep = 1.0 / (1.0 - rate);
            let mask: Vec<f64> = x
                .iter()
                .map(|_| if rng.next_f64() < rate { 0.0 } else { keep })
                .collect();
            let y = x.iter().zip(&mask).map(|(v, m)| v * m).collect();
            Ok((y, Some(mask)))
        }
    }
}

pub fn dropout_backward(grad: &[f64], mask: Option<&[f64]>) -> Vec<f64> {
    match mask {
        None => grad.to_vec(),
        Some(m) => grad.iter().zip(m).map(|(g, s)| g * s).collect(),
    }
}
