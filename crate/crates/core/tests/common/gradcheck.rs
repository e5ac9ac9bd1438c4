//! Finite-difference checks of every hand-written backward pass.
//!
//! Each `*_instance` builds one random problem, compares analytic gradients
//! against central differences at 64-bit precision, and returns the worst
//! norm-wise relative error over all gradient tensors of that problem.

use avr_core::nn::{
    conv1d_backward, conv1d_forward, dense_backward, dense_forward, dropout, dropout_backward,
    global_avg_pool, global_avg_pool_backward, init_params, lstm_backward, lstm_forward,
    model_backward, model_forward, model_forward_traced, relu, relu_backward, Arch, LstmWeights,
    Mode, ModelParams, ModelSpec, Tensor,
};
use avr_core::optim::cross_entropy;
use avr_core::rng::SplitMix64;

use super::{central_diff, central_diff_map, dot, random_tensor, random_vec, rel_error};

pub fn conv_instance(rng: &mut SplitMix64) -> f64 {
    let c_in = 1 + rng.below(3) as usize;
    let c_out = 1 + rng.below(4) as usize;
    let (len, k) = (8, 3);
    let mut x = random_tensor(rng, &[c_in, len], 1.0);
    let mut w = random_tensor(rng, &[c_out, c_in, k], 1.0);
    let mut b = random_tensor(rng, &[c_out], 1.0);
    let up = random_tensor(rng, &[c_out, len - k + 1], 1.0);
    let g = conv1d_backward(&x, &w, &up).unwrap();

    let loss = |x: &Tensor, w: &Tensor, b: &Tensor| dot(conv1d_forward(x, w, b).unwrap().data(), up.data());
    let all = |n: usize| (0..n).collect::<Vec<_>>();
    let (w0, b0) = (w.clone(), b.clone());
    let shape_x = x.shape().to_vec();
    let nx = central_diff(x.data_mut(), &all(c_in * len), |d| {
        loss(&Tensor::new(shape_x.clone(), d.to_vec()).unwrap(), &w0, &b0)
    });
    let x0 = x.clone();
    let shape_w = w.shape().to_vec();
    let nw = central_diff(w.data_mut(), &all(w0.len()), |d| {
        loss(&x0, &Tensor::new(shape_w.clone(), d.to_vec()).unwrap(), &b0)
    });
    let nb = central_diff(b.data_mut(), &all(c_out), |d| loss(&x0, &w0, &Tensor::vector(d.to_vec())));
    [
        rel_error(g.input.data(), &nx),
        rel_error(g.kernels.data(), &nw),
        rel_error(g.bias.data(), &nb),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

pub fn lstm_instance(rng: &mut SplitMix64, steps: usize, d: usize, h: usize) -> f64 {
    let mut parts = vec![
        random_tensor(rng, &[4 * h, d], 0.5),
        random_tensor(rng, &[4 * h, h], 0.5),
        random_tensor(rng, &[4 * h], 0.5),
        random_tensor(rng, &[steps, d], 1.0),
        random_tensor(rng, &[h], 0.5),
        random_tensor(rng, &[h], 0.5),
    ];
    let w_seq = random_vec(rng, steps * h, 1.0);
    let w_h = random_vec(rng, h, 1.0);
    let w_c = random_vec(rng, h, 1.0);

    let loss = |p: &[Tensor]| {
        let weights = LstmWeights { w_ih: &p[0], w_hh: &p[1], bias: &p[2] };
        let out = lstm_forward(p[3].data(), d, &weights, &p[4], &p[5]).unwrap();
        dot(out.h_seq.unwrap().data(), &w_seq) + dot(out.h_last.data(), &w_h) + dot(out.c_last.data(), &w_c)
    };

    let weights = LstmWeights { w_ih: &parts[0], w_hh: &parts[1], bias: &parts[2] };
    let out = lstm_forward(parts[3].data(), d, &weights, &parts[4], &parts[5]).unwrap();
    let g = lstm_backward(
        &weights,
        &out.cache,
        Some(&Tensor::new(vec![steps, h], w_seq.clone()).unwrap()),
        &Tensor::vector(w_h.clone()),
        &Tensor::vector(w_c.clone()),
    )
    .unwrap();
    let analytic = [g.w_ih, g.w_hh, g.bias, g.input.unwrap(), g.h0, g.c0];

    let mut worst: f64 = 0.0;
    for (i, a) in analytic.iter().enumerate() {
        let n = parts[i].len();
        let shape = parts[i].shape().to_vec();
        let mut data = parts[i].data().to_vec();
        let numeric = central_diff(&mut data, &(0..n).collect::<Vec<_>>(), |v| {
            let saved = std::mem::replace(&mut parts[i], Tensor::new(shape.clone(), v.to_vec()).unwrap());
            let l = loss(&parts);
            parts[i] = saved;
            l
        });
        worst = worst.max(rel_error(a.data(), &numeric));
    }
    worst
}

pub fn dense_instance(rng: &mut SplitMix64) -> f64 {
    let (inp, out) = (2 + rng.below(6) as usize, 1 + rng.below(5) as usize);
    let mut x = random_vec(rng, inp, 1.0);
    let mut w = random_tensor(rng, &[out, inp], 1.0);
    let mut b = random_tensor(rng, &[out], 1.0);
    let up = random_vec(rng, out, 1.0);
    let g = dense_backward(&x, &w, &up).unwrap();
    let (w0, b0, x0) = (w.clone(), b.clone(), x.clone());
    let nx = central_diff(&mut x, &(0..inp).collect::<Vec<_>>(), |v| dot(&dense_forward(v, &w0, &b0).unwrap(), &up));
    let nw = central_diff(w.data_mut(), &(0..out * inp).collect::<Vec<_>>(), |v| {
        dot(&dense_forward(&x0, &Tensor::new(vec![out, inp], v.to_vec()).unwrap(), &b0).unwrap(), &up)
    });
    let nb = central_diff(b.data_mut(), &(0..out).collect::<Vec<_>>(), |v| {
        dot(&dense_forward(&x0, &w0, &Tensor::vector(v.to_vec())).unwrap(), &up)
    });
    rel_error(&g.input, &nx).max(rel_error(g.weight.data(), &nw)).max(rel_error(g.bias.data(), &nb))
}

pub fn relu_instance(rng: &mut SplitMix64) -> f64 {
    // Keep inputs away from the kink so central differences are exact.
    let mut x: Vec<f64> = random_vec(rng, 16, 1.0)
        .into_iter()
        .map(|v| if v.abs() < 1e-3 { v + 1e-2 } else { v })
        .collect();
    let up = random_vec(rng, 16, 1.0);
    let analytic = relu_backward(&x, &up);
    let numeric = central_diff(&mut x, &(0..16).collect::<Vec<_>>(), |v| dot(&relu(v), &up));
    rel_error(&analytic, &numeric)
}

pub fn pool_instance(rng: &mut SplitMix64) -> f64 {
    let (c, len) = (1 + rng.below(4) as usize, 2 + rng.below(8) as usize);
    let mut x = random_vec(rng, c * len, 1.0);
    let up = random_vec(rng, c, 1.0);
    let analytic = global_avg_pool_backward(&up, len).unwrap();
    let numeric = central_diff(&mut x, &(0..c * len).collect::<Vec<_>>(), |v| {
        dot(&global_avg_pool(&Tensor::new(vec![c, len], v.to_vec()).unwrap()).unwrap(), &up)
    });
    rel_error(analytic.data(), &numeric)
}

pub fn dropout_instance(rng: &mut SplitMix64) -> f64 {
    let mut x = random_vec(rng, 32, 1.0);
    let up = random_vec(rng, 32, 1.0);
    let mask_rng = SplitMix64::new(rng.next_u64());
    let (_, mask) = dropout(&x, 0.3, &mut Mode::Train(&mut mask_rng.clone())).unwrap();
    let analytic = dropout_backward(&up, mask.as_deref());
    let numeric = central_diff(&mut x, &(0..32).collect::<Vec<_>>(), |v| {
        dot(&dropout(v, 0.3, &mut Mode::Train(&mut mask_rng.clone())).unwrap().0, &up)
    });
    rel_error(&analytic, &numeric)
}

pub fn cross_entropy_instance(rng: &mut SplitMix64) -> f64 {
    let mut z = random_vec(rng, 2, 3.0);
    let label = rng.below(2) as usize;
    let (_, analytic) = cross_entropy(&z, label).unwrap();
    let numeric = central_diff(&mut z, &[0, 1], |v| cross_entropy(v, label).unwrap().0);
    rel_error(&analytic, &numeric)
}

/// Full-model check with the eval-mode cross-entropy loss. When `train` is
/// set, a fixed dropout stream is replayed for every evaluation.
pub fn model_instance(rng: &mut SplitMix64, spec: &ModelSpec, per_tensor: usize, train: bool) -> f64 {
    let mut params: ModelParams = init_params(spec, rng.next_u64()).unwrap();
    // Non-zero biases exercise every path.
    for (name, t) in params.tensors.iter_mut() {
        if name.ends_with("bias") {
            for v in t.data_mut() {
                *v += 0.1 * rng.normal();
            }
        }
    }
    let audio: Vec<f32> = (0..spec.input_dim).map(|_| rng.normal() as f32).collect();
    let video: Vec<f32> = (0..spec.input_dim).map(|_| rng.normal() as f32).collect();
    let label = rng.below(2) as usize;
    let dropout_rng = SplitMix64::new(rng.next_u64());

    let mut stream = dropout_rng.clone();
    let mut mode = if train { Mode::Train(&mut stream) } else { Mode::Eval };
    let (logits, trace) = model_forward_traced(spec, &params, &audio, &video, &mut mode).unwrap();
    let (_, grad_logits) = cross_entropy(&logits, label).unwrap();
    let analytic = model_backward(spec, &params, &trace, &grad_logits).unwrap();
    assert!(analytic.values().all(Tensor::is_finite));

    let seed = params.seed;
    let numeric = central_diff_map(&mut params.tensors, per_tensor, rng, |tensors| {
        let p = ModelParams { seed, tensors: tensors.clone() };
        let mut stream = dropout_rng.clone();
        let mut mode = if train { Mode::Train(&mut stream) } else { Mode::Eval };
        let logits = model_forward(spec, &p, &audio, &video, &mut mode).unwrap();
        cross_entropy(&logits, label).unwrap().0
    });
    numeric
        .into_iter()
        .map(|(name, coords, num)| {
            let a = analytic[&name].data();
            let sampled: Vec<f64> = coords.iter().map(|&i| a[i]).collect();
            rel_error(&sampled, &num)
        })
        .fold(0.0, f64::max)
}

pub fn cnn_spec() -> ModelSpec {
    ModelSpec::cnn()
}

/// LSTM model on a 16-step sequence for tractability.
pub fn lstm_spec() -> ModelSpec {
    ModelSpec {
        arch: Arch::Lstm,
        input_dim: 16,
        ..ModelSpec::default()
    }
}
