//! The two fusion classifiers.
//!
//! Each modality runs through its own branch (a two-layer 1-D CNN or a
//! single-layer LSTM), branch outputs are concatenated, and a shared head
//! `dense → relu → dropout → dense` produces two logits ordered
//! `[non_humor, humor]`.
//!
//! Parameter names, for the CNN:
//!
//! | name                       | shape                      |
//! |----------------------------|----------------------------|
//! | `{m}.conv1.weight`         | `[f1, 1, k]`               |
//! | `{m}.conv1.bias`           | `[f1]`                     |
//! | `{m}.conv2.weight`         | `[f2, f1, k]`              |
//! | `{m}.conv2.bias`           | `[f2]`                     |
//! | `head.hidden.weight`       | `[hidden, 2 * branch_out]` |
//! | `head.hidden.bias`         | `[hidden]`                 |
//! | `head.output.weight`       | `[2, hidden]`              |
//! | `head.output.bias`         | `[2]`                      |
//!
//! where `{m}` is `audio` or `video`. The LSTM replaces the conv entries with
//! `{m}.lstm.w_ih` `[4H, step]`, `{m}.lstm.w_hh` `[4H, H]` and
//! `{m}.lstm.bias` `[4H]`.

use serde::{Deserialize, Serialize};

use super::conv::{conv1d_backward, conv1d_forward};
use super::layers::{
    dense_backward, dense_forward, dropout, dropout_backward, global_avg_pool,
    global_avg_pool_backward, relu, relu_backward, Mode,
};
use super::lstm::{lstm_backward, lstm_forward, LstmCache, LstmWeights};
use super::tensor::{Tensor, TensorMap};
use super::NnError;
use crate::embedding::{Modality, EMBEDDING_DIM};
use crate::rng::{stream, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    Cnn,
    Lstm,
}

impl Arch {
    pub fn as_str(self) -> &'static str {
        match self {
            Arch::Cnn => "cnn",
            Arch::Lstm => "lstm",
        }
    }
}

impl std::str::FromStr for Arch {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cnn" => Ok(Arch::Cnn),
            "lstm" => Ok(Arch::Lstm),
            other => Err(format!("unknown arch {other:?} (expected cnn or lstm)")),
        }
    }
}

impl std::fmt::Display for Arch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How a CNN branch's `[filters, length]` output becomes a vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    GlobalAvgPool,
    Flatten,
}

impl Readout {
    pub fn as_str(self) -> &'static str {
        match self {
            Readout::GlobalAvgPool => "global_avg_pool",
            Readout::Flatten => "flatten",
        }
    }
}

impl std::str::FromStr for Readout {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "global_avg_pool" => Ok(Readout::GlobalAvgPool),
            "flatten" => Ok(Readout::Flatten),
            other => Err(format!("unknown readout {other:?} (expected global_avg_pool or flatten)")),
        }
    }
}

/// Architecture description. Defaults are the reference downstream settings
/// where one exists (filters, kernel, LSTM width, head width).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSpec {
    pub arch: Arch,
    pub input_dim: usize,
    pub conv_filters: [usize; 2],
    pub kernel_size: usize,
    pub lstm_hidden: usize,
    /// Features consumed per LSTM step; the sequence length is
    /// `input_dim / lstm_step_features`. 1 feeds the embedding one value at a time.
    pub lstm_step_features: usize,
    pub head_hidden: usize,
    pub num_classes: usize,
    pub dropout_rate: f64,
    pub readout: Readout,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            arch: Arch::Cnn,
            input_dim: EMBEDDING_DIM,
            conv_filters: [32, 64],
            kernel_size: 3,
            lstm_hidden: 50,
            lstm_step_features: 1,
            head_hidden: 128,
            num_classes: 2,
            dropout_rate: 0.2,
            readout: Readout::GlobalAvgPool,
        }
    }
}

impl ModelSpec {
    pub fn cnn() -> Self {
        Self::default()
    }

    pub fn lstm() -> Self {
        Self {
            arch: Arch::Lstm,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |reason: String| Err(NnError::Spec(reason));
        if self.num_classes != 2 {
            return bad(format!("num_classes must be 2, got {}", self.num_classes));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(NnError::DropoutRate(self.dropout_rate));
        }
        if self.input_dim == 0 || self.head_hidden == 0 {
            return bad("input_dim and head_hidden must be positive".into());
        }
        match self.arch {
            Arch::Cnn => {
                if self.kernel_size == 0 || self.conv_filters.contains(&0) {
                    return bad("conv filters and kernel size must be positive".into());
                }
                if self.input_dim < 2 * self.kernel_size - 1 {
                    return bad(format!(
                        "input_dim {} too short for two convolutions of width {}",
                        self.input_dim, self.kernel_size
                    ));
                }
            }
            Arch::Lstm => {
                if self.lstm_hidden == 0 || self.lstm_step_features == 0 {
                    return bad("lstm_hidden and lstm_step_features must be positive".into());
                }
                if self.input_dim % self.lstm_step_features != 0 {
                    return bad(format!(
                        "input_dim {} is not a multiple of lstm_step_features {}",
                        self.input_dim, self.lstm_step_features
                    ));
                }
            }
        }
        Ok(())
    }

    fn conv_out_len(&self) -> usize {
        self.input_dim - 2 * (self.kernel_size - 1)
    }

    /// Width of one branch's output vector.
    pub fn branch_width(&self) -> usize {
        match (self.arch, self.readout) {
            (Arch::Cnn, Readout::GlobalAvgPool) => self.conv_filters[1],
            (Arch::Cnn, Readout::Flatten) => self.conv_filters[1] * self.conv_out_len(),
            (Arch::Lstm, _) => self.lstm_hidden,
        }
    }

    /// Every parameter name with its shape, in a fixed order.
    pub fn param_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut shapes = Vec::new();
        for m in BRANCHES {
            let m = m.to_string();
            match self.arch {
                Arch::Cnn => {
                    let [f1, f2] = self.conv_filters;
                    let k = self.kernel_size;
                    shapes.push((format!("{m}.conv1.weight"), vec![f1, 1, k]));
                    shapes.push((format!("{m}.conv1.bias"), vec![f1]));
                    shapes.push((format!("{m}.conv2.weight"), vec![f2, f1, k]));
                    shapes.push((format!("{m}.conv2.bias"), vec![f2]));
                }
                Arch::Lstm => {
                    let h = self.lstm_hidden;
                    shapes.push((format!("{m}.lstm.w_ih"), vec![4 * h, self.lstm_step_features]));
                    shapes.push((format!("{m}.lstm.w_hh"), vec![4 * h, h]));
                    shapes.push((format!("{m}.lstm.bias"), vec![4 * h]));
                }
            }
        }
        let fused = 2 * self.branch_width();
        shapes.push(("head.hidden.weight".into(), vec![self.head_hidden, fused]));
        shapes.push(("head.hidden.bias".into(), vec![self.head_hidden]));
        shapes.push(("head.output.weight".into(), vec![self.num_classes, self.head_hidden]));
        shapes.push(("head.output.bias".into(), vec![self.num_classes]));
        shapes
    }

    pub fn param_count(&self) -> usize {
        self.param_shapes()
            .iter()
            .map(|(_, s)| s.iter().product::<usize>())
            .sum()
    }
}

const BRANCHES: [Modality; 2] = [Modality::Audio, Modality::Video];

/// Learnable arrays of one model. Values are always representable as binary32.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub seed: u64,
    pub tensors: TensorMap,
}

impl ModelParams {
    pub fn get(&self, name: &str) -> Result<&Tensor, NnError> {
        self.tensors
            .get(name)
            .ok_or_else(|| NnError::MissingParam(name.to_owned()))
    }

    /// Checks that exactly the spec's parameters are present with their shapes.
    pub fn check(&self, spec: &ModelSpec) -> Result<(), NnError> {
        let shapes = spec.param_shapes();
        for (name, shape) in &shapes {
            self.get(name)?.check_shape("parameter", shape)?;
        }
        if let Some(extra) = self.tensors.keys().find(|k| !shapes.iter().any(|(n, _)| n == *k)) {
            return Err(NnError::Spec(format!("unexpected parameter {extra}")));
        }
        Ok(())
    }

    pub fn snap_to_f32(&mut self) {
        self.tensors.values_mut().for_each(Tensor::snap_to_f32);
    }

    /// Same shapes, all zeros.
    pub fn zeros_like(spec: &ModelSpec, seed: u64) -> Self {
        let tensors = spec
            .param_shapes()
            .into_iter()
            .map(|(n, s)| (n, Tensor::zeros(&s)))
            .collect();
        Self { seed, tensors }
    }

    pub fn count(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }
}

/// Deterministic initialization.
///
/// Conv and dense weights are Kaiming-uniform with bound `sqrt(6 / fan_in)`;
/// LSTM matrices are uniform in `±1/sqrt(H)`. Biases start at zero except the
/// LSTM forget gate, which starts at 1. Each tensor draws from its own stream
/// keyed by its name, so adding a parameter never shifts another's values.
pub fn init_params(spec: &ModelSpec, seed: u64) -> Result<ModelParams, NnError> {
    spec.validate()?;
    let mut tensors = TensorMap::new();
    for (name, shape) in spec.param_shapes() {
        let mut rng = stream(seed, &[tag("init"), tag(&name)]);
        let n: usize = shape.iter().product();
        let data: Vec<f64> = if name.ends_with(".lstm.bias") {
            let h = spec.lstm_hidden;
            (0..n).map(|i| if (h..2 * h).contains(&i) { 1.0 } else { 0.0 }).collect()
        } else if name.ends_with(".bias") {
            vec![0.0; n]
        } else {
            let bound = if name.contains(".lstm.") {
                1.0 / (spec.lstm_hidden as f64).sqrt()
            } else {
                let fan_in: usize = shape[1..].iter().product();
                (6.0 / fan_in as f64).sqrt()
            };
            (0..n).map(|_| rng.uniform(-bound, bound)).collect()
        };
        let mut t = Tensor::new(shape, data)?;
        t.snap_to_f32();
        tensors.insert(name, t);
    }
    Ok(ModelParams { seed, tensors })
}

#[derive(Debug, Clone)]
enum BranchTrace {
    Cnn {
        input: Tensor,
        pre1: Tensor,
        act1: Tensor,
        pre2: Tensor,
    },
    Lstm {
        cache: LstmCache,
    },
}

/// Intermediate values of one forward pass, consumed by [`model_backward`].
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    branches: Vec<BranchTrace>,
    fused: Vec<f64>,
    hidden_pre: Vec<f64>,
    hidden_act: Vec<f64>,
    dropout_mask: Option<Vec<f64>>,
}

fn check_input(spec: &ModelSpec, modality: Modality, x: &[f32]) -> Result<(), NnError> {
    if x.len() != spec.input_dim {
        return Err(NnError::InputDim {
            modality,
            expected: spec.input_dim,
            found: x.len(),
        });
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(NnError::NonFiniteInput { modality, index: i });
    }
    Ok(())
}

fn branch_forward(
    spec: &ModelSpec,
    params: &ModelParams,
    modality: Modality,
    x: &[f32],
) -> Result<(Vec<f64>, BranchTrace), NnError> {
    let m = modality.to_string();
    match spec.arch {
        Arch::Cnn => {
            let input = Tensor::from_f32(vec![1, x.len()], x)?;
            let pre1 = conv1d_forward(
                &input,
                params.get(&format!("{m}.conv1.weight"))?,
                params.get(&format!("{m}.conv1.bias"))?,
            )?;
            let act1 = Tensor::new(pre1.shape().to_vec(), relu(pre1.data()))?;
            let pre2 = conv1d_forward(
                &act1,
                params.get(&format!("{m}.conv2.weight"))?,
                params.get(&format!("{m}.conv2.bias"))?,
            )?;
            let act2 = Tensor::new(pre2.shape().to_vec(), relu(pre2.data()))?;
            let out = match spec.readout {
                Readout::GlobalAvgPool => global_avg_pool(&act2)?,
                Readout::Flatten => act2.into_data(),
            };
            Ok((out, BranchTrace::Cnn { input, pre1, act1, pre2 }))
        }
        Arch::Lstm => {
            let weights = lstm_weights(params, &m)?;
            let h = spec.lstm_hidden;
            let seq: Vec<f64> = x.iter().map(|&v| f64::from(v)).collect();
            let out = lstm_forward(
                &seq,
                spec.lstm_step_features,
                &weights,
                &Tensor::zeros(&[h]),
                &Tensor::zeros(&[h]),
            )?;
            Ok((out.h_last.into_data(), BranchTrace::Lstm { cache: out.cache }))
        }
    }
}

fn lstm_weights<'a>(params: &'a ModelParams, m: &str) -> Result<LstmWeights<'a>, NnError> {
    Ok(LstmWeights {
        w_ih: params.get(&format!("{m}.lstm.w_ih"))?,
        w_hh: params.get(&format!("{m}.lstm.w_hh"))?,
        bias: params.get(&format!("{m}.lstm.bias"))?,
    })
}

/// Forward pass returning logits and the trace needed for backpropagation.
pub fn model_forward_traced(
    spec: &ModelSpec,
    params: &ModelParams,
    audio: &[f32],
    video: &[f32],
    mode: &mut Mode<'_>,
) -> Result<(Vec<f64>, ForwardTrace), NnError> {
    spec.validate()?;
    check_input(spec, Modality::Audio, audio)?;
    check_input(spec, Modality::Video, video)?;

    let mut fused = Vec::with_capacity(2 * spec.branch_width());
    let mut branches = Vec::with_capacity(2);
    for (modality, x) in [(Modality::Audio, audio), (Modality::Video, video)] {
        let (out, trace) = branch_forward(spec, params, modality, x)?;
        fused.extend_from_slice(&out);
        branches.push(trace);
    }

    let hidden_pre = dense_forward(&fused, params.get("head.hidden.weight")?, params.get("head.hidden.bias")?)?;
    let hidden_act = relu(&hidden_pre);
    let (dropped, dropout_mask) = dropout(&hidden_act, spec.dropout_rate, mode)?;
    let logits = dense_forward(&dropped, params.get("head.output.weight")?, params.get("head.output.bias")?)?;
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(NnError::NonFiniteOutput);
    }
    Ok((
        logits,
        ForwardTrace {
            branches,
            fused,
            hidden_pre,
            hidden_act,
            dropout_mask,
        },
    ))
}

/// Logits `[non_humor, humor]` for one clip.
pub fn model_forward(
    spec: &ModelSpec,
    params: &ModelParams,
    audio: &[f32],
    video: &[f32],
    mode: &mut Mode<'_>,
) -> Result<Vec<f64>, NnError> {
    model_forward_traced(spec, params, audio, video, mode).map(|(logits, _)| logits)
}

/// Gradients of every parameter given `d loss / d logits`.
pub fn model_backward(
    spec: &ModelSpec,
    params: &ModelParams,
    trace: &ForwardTrace,
    grad_logits: &[f64],
) -> Result<TensorMap, NnError> {
    let mut grads = TensorMap::new();

    let dropped: Vec<f64> = match &trace.dropout_mask {
        Some(mask) => trace.hidden_act.iter().zip(mask).map(|(a, m)| a * m).collect(),
        None => trace.hidden_act.clone(),
    };
    let out_g = dense_backward(&dropped, params.get("head.output.weight")?, grad_logits)?;
    grads.insert("head.output.weight".into(), out_g.weight);
    grads.insert("head.output.bias".into(), out_g.bias);

    let g_act = dropout_backward(&out_g.input, trace.dropout_mask.as_deref());
    let g_pre = relu_backward(&trace.hidden_pre, &g_act);
    let hid_g = dense_backward(&trace.fused, params.get("head.hidden.weight")?, &g_pre)?;
    grads.insert("head.hidden.weight".into(), hid_g.weight);
    grads.insert("head.hidden.bias".into(), hid_g.bias);

    let width = spec.branch_width();
    for (b, (modality, branch)) in BRANCHES.iter().zip(&trace.branches).enumerate() {
        let m = modality.to_string();
        let g_out = &hid_g.input[b * width..(b + 1) * width];
        match branch {
            BranchTrace::Cnn { input, pre1, act1, pre2 } => {
                let len2 = pre2.shape()[1];
                let g_act2 = match spec.readout {
                    Readout::GlobalAvgPool => global_avg_pool_backward(g_out, len2)?,
                    Readout::Flatten => Tensor::new(pre2.shape().to_vec(), g_out.to_vec())?,
                };
                let g_pre2 = Tensor::new(pre2.shape().to_vec(), relu_backward(pre2.data(), g_act2.data()))?;
                let c2 = conv1d_backward(act1, params.get(&format!("{m}.conv2.weight"))?, &g_pre2)?;
                let g_pre1 = Tensor::new(pre1.shape().to_vec(), relu_backward(pre1.data(), c2.input.data()))?;
                let c1 = conv1d_backward(input, params.get(&format!("{m}.conv1.weight"))?, &g_pre1)?;
                grads.insert(format!("{m}.conv1.weight"), c1.kernels);
                grads.insert(format!("{m}.conv1.bias"), c1.bias);
                grads.insert(format!("{m}.conv2.weight"), c2.kernels);
                grads.insert(format!("{m}.conv2.bias"), c2.bias);
            }
            BranchTrace::Lstm { cache } => {
                let weights = lstm_weights(params, &m)?;
                let h = spec.lstm_hidden;
                let g = lstm_backward(
                    &weights,
                    cache,
                    None,
                    &Tensor::vector(g_out.to_vec()),
                    &Tensor::zeros(&[h]),
                )?;
                grads.insert(format!("{m}.lstm.w_ih"), g.w_ih);
                grads.insert(format!("{m}.lstm.w_hh"), g.w_hh);
                grads.insert(format!("{m}.lstm.bias"), g.bias);
            }
        }
    }
    Ok(grads)
}
