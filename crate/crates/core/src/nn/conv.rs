//! Valid-padding, stride-1 1-D convolution (cross-correlation).
//!
//! Both passes lower the convolution to a matrix product over the unfolded
//! input `cols[c*K + j, t] = input[c, t + j]`:
//!
//! ```text
//! out        = W · cols + b            W: [C_out, C_in*K]
//! dW         = dOut · colsᵀ
//! d(cols)    = Wᵀ · dOut               folded back onto the input
//! db[o]      = Σ_t dOut[o, t]
//! ```

use super::tensor::{gemm, Tensor};
use super::NnError;

#[derive(Debug, Clone, PartialEq)]
pub struct Conv1dGrads {
    pub input: Tensor,
    pub kernels: Tensor,
    pub bias: Tensor,
}

struct Dims {
    c_in: usize,
    len: usize,
    c_out: usize,
    k: usize,
    out_len: usize,
}

fn dims(input: &Tensor, kernels: &Tensor) -> Result<Dims, NnError> {
    input.check_rank("conv1d", 2)?;
    kernels.check_rank("conv1d", 3)?;
    let (c_in, len) = (input.shape()[0], input.shape()[1]);
    let (c_out, kc_in, k) = (kernels.shape()[0], kernels.shape()[1], kernels.shape()[2]);
    if kc_in != c_in {
        return Err(NnError::Shape {
            op: "conv1d",
            expected: format!("kernel input channels {c_in}"),
            found: format!("{kc_in}"),
        });
    }
    if len < k {
        return Err(NnError::SequenceTooShort { len, kernel: k });
    }
    Ok(Dims {
        c_in,
        len,
        c_out,
        k,
        out_len: len - k + 1,
    })
}

fn unfold(input: &[f64], d: &Dims) -> Vec<f64> {
    let mut cols = vec![0.0; d.c_in * d.k * d.out_len];
    for c in 0..d.c_in {
        let src = &input[c * d.len..(c + 1) * d.len];
        for j in 0..d.k {
            let row = (c * d.k + j) * d.out_len;
            cols[row..row + d.out_len].copy_from_slice(&src[j..j + d.out_len]);
        }
    }
    cols
}

/// `out[o, t] = bias[o] + Σ_{c,j} kernels[o, c, j] · input[c, t + j]`.
pub fn conv1d_forward(input: &Tensor, kernels: &Tensor, bias: &Tensor) -> Result<Tensor, NnError> {
    let d = dims(input, kernels)?;
    bias.check_shape("conv1d bias", &[d.c_out])?;
    let cols = unfold(input.data(), &d);
    let ck = d.c_in * d.k;
    let mut out = vec![0.0; d.c_out * d.out_len];
    for (o, row) in out.chunks_exact_mut(d.out_len).enumerate() {
        row.fill(bias.data()[o]);
    }
    gemm(d.c_out, ck, d.out_len, kernels.data(), (ck, 1), &cols, (d.out_len, 1), 1.0, &mut out);
    Tensor::new(vec![d.c_out, d.out_len], out)
}

pub fn conv1d_backward(
    input: &Tensor,
    kernels: &Tensor,
    upstream: &Tensor,
) -> Result<Conv1dGrads, NnError> {
    let d = dims(input, kernels)?;
    upstream.check_shape("conv1d upstream", &[d.c_out, d.out_len])?;
    let ck = d.c_in * d.k;
    let g = upstream.data();
    let cols = unfold(input.data(), &d);

    let mut grad_k = vec![0.0; d.c_out * ck];
    gemm(d.c_out, d.out_len, ck, g, (d.out_len, 1), &cols, (1, d.out_len), 0.0, &mut grad_k);

    let mut grad_cols = cols;
    gemm(ck, d.c_out, d.out_len, kernels.data(), (1, ck), g, (d.out_len, 1), 0.0, &mut grad_cols);
    let mut grad_in = vec![0.0; d.c_in * d.len];
    for c in 0..d.c_in {
        let dst = &mut grad_in[c * d.len..(c + 1) * d.len];
        for j in 0..d.k {
            let row = (c * d.k + j) * d.out_len;
            for (x, &gc) in dst[j..j + d.out_len].iter_mut().zip(&grad_cols[row..row + d.out_len]) {
                *x += gc;
            }
        }
    }

    let grad_b = g.chunks_exact(d.out_len).map(|r| r.iter().sum()).collect();

    Ok(Conv1dGrads {
        input: Tensor::new(vec![d.c_in, d.len], grad_in)?,
        kernels: Tensor::new(vec![d.c_out, d.c_in, d.k], grad_k)?,
        bias: Tensor::vector(grad_b),
    })
}
