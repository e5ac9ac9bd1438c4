//! Single-layer LSTM with hand-written backpropagation through time.
//!
//! Gate rows are stacked in the order input, forget, cell, output:
//!
//! ```text
//! z_t = W_ih x_t + W_hh h_{t-1} + b          (4H)
//! i = σ(z_i)  f = σ(z_f)  g = tanh(z_g)  o = σ(z_o)
//! c_t = f ⊙ c_{t-1} + i ⊙ g
//! h_t = o ⊙ tanh(c_t)
//! ```

use super::tensor::Tensor;
use super::NnError;

/// Gate weights of one LSTM layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmWeights<'a> {
    /// `[4H, D]`
    pub w_ih: &'a Tensor,
    /// `[4H, H]`
    pub w_hh: &'a Tensor,
    /// `[4H]`
    pub bias: &'a Tensor,
}

impl LstmWeights<'_> {
    pub fn hidden(&self) -> usize {
        self.w_hh.shape()[1]
    }

    fn check(&self, input_dim: usize) -> Result<usize, NnError> {
        self.w_hh.check_rank("lstm w_hh", 2)?;
        let h = self.hidden();
        self.w_hh.check_shape("lstm w_hh", &[4 * h, h])?;
        self.w_ih.check_shape("lstm w_ih", &[4 * h, input_dim])?;
        self.bias.check_shape("lstm bias", &[4 * h])?;
        Ok(h)
    }
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCache {
    input: Vec<f64>,
    input_dim: usize,
    hidden: usize,
    h0: Vec<f64>,
    c0: Vec<f64>,
    /// Post-activation gates, `[L, 4H]`.
    gates: Vec<f64>,
    /// Cell states, `[L, H]`.
    cells: Vec<f64>,
    /// `tanh(c_t)`, `[L, H]`.
    tanh_cells: Vec<f64>,
    /// Hidden states, `[L, H]`.
    hiddens: Vec<f64>,
}

impl LstmCache {
    pub fn seq_len(&self) -> usize {
        self.input.len() / self.input_dim.max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmOutput {
    /// `[L, H]`, or `None` for an empty sequence.
    pub h_seq: Option<Tensor>,
    pub h_last: Tensor,
    pub c_last: Tensor,
    pub cache: LstmCache,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmGrads {
    pub w_ih: Tensor,
    pub w_hh: Tensor,
    pub bias: Tensor,
    /// `[L, D]`, or `None` for an empty sequence.
    pub input: Option<Tensor>,
    pub h0: Tensor,
    pub c0: Tensor,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Accumulates `out += m · v` for a row-major `[rows, cols]` matrix.
fn matvec_add(m: &[f64], cols: usize, v: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(m.chunks_exact(cols)) {
        *o += row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// Runs the layer over `input` (`[L, D]`, possibly with `L == 0`) from `(h0, c0)`.
///
/// `input` is passed as a flat slice with its feature width so that empty
/// sequences are representable.
pub fn lstm_forward(
    input: &[f64],
    input_dim: usize,
    weights: &LstmWeights<'_>,
    h0: &Tensor,
    c0: &Tensor,
) -> Result<LstmOutput, NnError> {
    let h = weights.check(input_dim)?;
    h0.check_shape("lstm h0", &[h])?;
    c0.check_shape("lstm c0", &[h])?;
    if input_dim == 0 || input.len() % input_dim != 0 {
        return Err(NnError::Shape {
            op: "lstm input",
            expected: format!("a multiple of {input_dim} values"),
            found: format!("{}", input.len()),
        });
    }
    let steps = input.len() / input_dim;
    let (w_ih, w_hh, b) = (weights.w_ih.data(), weights.w_hh.data(), weights.bias.data());

    let mut gates = vec![0.0; steps * 4 * h];
    let mut cells = vec![0.0; steps * h];
    let mut tanh_cells = vec![0.0; steps * h];
    let mut hiddens = vec![0.0; steps * h];
    let mut h_prev = h0.data().to_vec();
    let mut c_prev = c0.data().to_vec();

    for t in 0..steps {
        let x = &input[t * input_dim..(t + 1) * input_dim];
        let z = &mut gates[t * 4 * h..(t + 1) * 4 * h];
        z.copy_from_slice(b);
        matvec_add(w_ih, input_dim, x, z);
        matvec_add(w_hh, h, &h_prev, z);
        for u in 0..h {
            z[u] = sigmoid(z[u]);
            z[h + u] = sigmoid(z[h + u]);
            z[2 * h + u] = z[2 * h + u].tanh();
            z[3 * h + u] = sigmoid(z[3 * h + u]);
            let c = z[h + u] * c_prev[u] + z[u] * z[2 * h + u];
            let tc = c.tanh();
            cells[t * h + u] = c;
            tanh_cells[t * h + u] = tc;
            hiddens[t * h + u] = z[3 * h + u] * tc;
        }
        h_prev.copy_from_slice(&hiddens[t * h..(t + 1) * h]);
        c_prev.copy_from_slice(&cells[t * h..(t + 1) * h]);
    }

    let h_seq = if steps > 0 {
        Some(Tensor::new(vec![steps, h], hiddens.clone())?)
    } else {
        None
    };
    Ok(LstmOutput {
        h_seq,
        h_last: Tensor::vector(h_prev),
        c_last: Tensor::vector(c_prev),
        cache: LstmCache {
            input: input.to_vec(),
            input_dim,
            hidden: h,
            h0: h0.data().to_vec(),
            c0: c0.data().to_vec(),
            gates,
            cells,
            tanh_cells,
            hiddens,
        },
    })
}

/// Backpropagation through time.
///
/// `grad_h_seq` is the upstream gradient on every hidden state (`[L, H]`, may
/// be omitted when only the final state feeds the loss); `grad_h_last` and
/// `grad_c_last` flow into the final step.
pub fn lstm_backward(
    weights: &LstmWeights<'_>,
    cache: &LstmCache,
    grad_h_seq: Option<&Tensor>,
    grad_h_last: &Tensor,
    grad_c_last: &Tensor,
) -> Result<LstmGrads, NnError> {
    let h = weights.check(cache.input_dim)?;
    if h != cache.hidden {
        return Err(NnError::Shape {
            op: "lstm backward",
            expected: format!("hidden {}", cache.hidden),
            found: format!("hidden {h}"),
        });
    }
    let d = cache.input_dim;
    let steps = cache.seq_len();
    grad_h_last.check_shape("lstm grad_h_last", &[h])?;
    grad_c_last.check_shape("lstm grad_c_last", &[h])?;
    if let Some(g) = grad_h_seq {
        g.check_shape("lstm grad_h_seq", &[steps, h])?;
    }
    let (w_ih, w_hh) = (weights.w_ih.data(), weights.w_hh.data());

    let mut g_w_ih = vec![0.0; 4 * h * d];
    let mut g_w_hh = vec![0.0; 4 * h * h];
    let mut g_b = vec![0.0; 4 * h];
    let mut g_x = vec![0.0; steps * d];
    let mut dh_next = grad_h_last.data().to_vec();
    let mut dc_next = grad_c_last.data().to_vec();
    let mut dz = vec![0.0; 4 * h];

    for t in (0..steps).rev() {
        let gates = &cache.gates[t * 4 * h..(t + 1) * 4 * h];
        let tc = &cache.tanh_cells[t * h..(t + 1) * h];
        let c_prev = if t == 0 { &cache.c0[..] } else { &cache.cells[(t - 1) * h..t * h] };
        let h_prev = if t == 0 { &cache.h0[..] } else { &cache.hiddens[(t - 1) * h..t * h] };
        let x = &cache.input[t * d..(t + 1) * d];

        for u in 0..h {
            let dh = dh_next[u] + grad_h_seq.map_or(0.0, |g| g.data()[t * h + u]);
            let (i, f, g, o) = (gates[u], gates[h + u], gates[2 * h + u], gates[3 * h + u]);
            let dc = dh * o * (1.0 - tc[u] * tc[u]) + dc_next[u];
            dz[u] = dc * g * i * (1.0 - i);
            dz[h + u] = dc * c_prev[u] * f * (1.0 - f);
            dz[2 * h + u] = dc * i * (1.0 - g * g);
            dz[3 * h + u] = dh * tc[u] * o * (1.0 - o);
            dc_next[u] = dc * f;
        }

        for (r, &dzr) in dz.iter().enumerate() {
            g_b[r] += dzr;
            for (gw, &xv) in g_w_ih[r * d..(r + 1) * d].iter_mut().zip(x) {
                *gw += dzr * xv;
            }
            for (gw, &hv) in g_w_hh[r * h..(r + 1) * h].iter_mut().zip(h_prev) {
                *gw += dzr * hv;
            }
        }

        let gx = &mut g_x[t * d..(t + 1) * d];
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        for (r, &dzr) in dz.iter().enumerate() {
            for (g, &w) in gx.iter_mut().zip(&w_ih[r * d..(r + 1) * d]) {
                *g += w * dzr;
            }
            for (g, &w) in dh_next.iter_mut().zip(&w_hh[r * h..(r + 1) * h]) {
                *g += w * dzr;
            }
        }
    }

    Ok(LstmGrads {
        w_ih: Tensor::new(vec![4 * h, d], g_w_ih)?,
        w_hh: Tensor::new(vec![4 * h, h], g_w_hh)?,
        bias: Tensor::vector(g_b),
        input: if steps > 0 { Some(Tensor::new(vec![steps, d], g_x)?) } else { None },
        h0: Tensor::vector(dh_next),
        c0: Tensor::vector(dc_next),
    })
}
