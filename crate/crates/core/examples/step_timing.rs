//! Times one forward and backward pass of each architecture.

use std::time::Instant;

use avr_core::nn::{init_params, model_backward, model_forward_traced, Mode, ModelSpec};
use avr_core::optim::cross_entropy;
use avr_core::rng::SplitMix64;

fn main() {
    for (name, spec) in [("cnn", ModelSpec::cnn()), ("lstm/24", ModelSpec { lstm_step_features: 24, ..ModelSpec::lstm() })] {
        let params = init_params(&spec, 1).unwrap();
        let mut rng = SplitMix64::new(2);
        let a: Vec<f32> = (0..768).map(|_| rng.normal() as f32).collect();
        let v: Vec<f32> = (0..768).map(|_| rng.normal() as f32).collect();
        let n = 200;
        let t = Instant::now();
        for _ in 0..n {
            let (logits, trace) = model_forward_traced(&spec, &params, &a, &v, &mut Mode::Train(&mut rng)).unwrap();
            let (_, g) = cross_entropy(&logits, 1).unwrap();
            std::hint::black_box(model_backward(&spec, &params, &trace, &g).unwrap());
        }
        let t_fb = t.elapsed().as_secs_f64() / n as f64;
        let t = Instant::now();
        for _ in 0..n {
            std::hint::black_box(avr_core::nn::model_forward(&spec, &params, &a, &v, &mut Mode::Eval).unwrap());
        }
        let t_f = t.elapsed().as_secs_f64() / n as f64;
        println!("{name}: fwd+bwd {:.3} ms, fwd {:.3} ms", t_fb * 1e3, t_f * 1e3);
    }
}
