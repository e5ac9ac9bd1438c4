use avr_core::nn::{Tensor, TensorMap};
use avr_core::optim::{adam_step, AdamHyper, AdamState};
use avr_core::rng::SplitMix64;

fn single(name: &str, data: Vec<f64>) -> TensorMap {
    TensorMap::from([(name.to_owned(), Tensor::vector(data))])
}

/// Runs 100 random 50-step trajectories and checks every coordinate's
/// movement against `bound(step)`.
fn check_step_bound(seed: u64, gradient: impl Fn(&mut SplitMix64, f64) -> f64, bound: impl Fn(u64) -> f64) {
    let mut rng = SplitMix64::new(seed);
    for run in 0..100 {
        let n = 1 + rng.below(16) as usize;
        let lr = 10f64.powf(rng.uniform(-6.0, -1.0));
        let hyper = AdamHyper { lr, ..AdamHyper::default() };
        let base: Vec<f64> = (0..n)
            .map(|_| {
                let mag = 10f64.powf(rng.uniform(-3.0, 2.0));
                if rng.below(2) == 0 { -mag } else { mag }
            })
            .collect();
        let mut params = single("w", vec![0.0; n]);
        let mut state = AdamState::new(hyper, &params);
        for step in 1..=50u64 {
            let g: Vec<f64> = base.iter().map(|&b| gradient(&mut rng, b)).collect();
            let before = params["w"].data().to_vec();
            adam_step(&mut params, &single("w", g), &mut state).unwrap();
            let limit = lr * bound(step) * (1.0 + 1e-9);
            for (i, (a, b)) in before.iter().zip(params["w"].data()).enumerate() {
                let moved = (a - b).abs();
                assert!(moved <= limit, "run {run} step {step} coord {i}: moved {moved:e} > {limit:e}");
            }
        }
        assert_eq!(state.step_count, 50);
    }
}

/// A constant gradient gives m̂ = g and v̂ = g² exactly, so every step moves
/// by lr * |g| / (|g| + eps) < lr.
#[test]
fn constant_gradient_updates_are_bounded_by_lr() {
    check_step_bound(0x6164_616d, |_, g| g, |_| 1.0);
}

/// With only the sign held fixed, Cauchy-Schwarz on the two moment sums gives
/// m̂² / v̂ <= (1-b1)²/(1-b2) * (1-r^t)/(1-r) * (1-b2^t)/(1-b1^t)², r = b1²/b2.
#[test]
fn constant_sign_updates_obey_the_moment_bound() {
    let h = AdamHyper::default();
    let (b1, b2) = (h.beta1, h.beta2);
    let r = b1 * b1 / b2;
    let bound = |t: u64| {
        let t = t as i32;
        ((1.0 - b1).powi(2) / (1.0 - b2) * (1.0 - r.powi(t)) / (1.0 - r) * (1.0 - b2.powi(t))
            / (1.0 - b1.powi(t)).powi(2))
        .sqrt()
    };
    assert!((bound(1) - 1.0).abs() < 1e-12);
    check_step_bound(0x7369_676e, |rng, g| g * 10f64.powf(rng.uniform(-3.0, 3.0)), bound);
}

/// At t = 1 the update is `lr * g / (|g| + eps)`, so scaling g by c >= 1
/// changes it by a relative `eps / |g| * (1 - 1/c)` at most.
fn scaled_first_steps(rng: &mut SplitMix64, min_exp: f64) -> Vec<(f64, f64, f64)> {
    let n = 1 + rng.below(8) as usize;
    let g: Vec<f64> = (0..n)
        .map(|_| {
            let mag = 10f64.powf(rng.uniform(min_exp, 1.0));
            if rng.below(2) == 0 { mag } else { -mag }
        })
        .collect();
    let c = 10f64.powf(rng.uniform(0.0, 3.0));
    // theta = 0 keeps the update free of cancellation error.
    let theta = vec![0.0; n];
    let step = |grad: Vec<f64>| {
        let mut p = single("w", theta.clone());
        let mut state = AdamState::new(AdamHyper::default(), &p);
        adam_step(&mut p, &single("w", grad), &mut state).unwrap();
        p["w"].data().iter().zip(&theta).map(|(a, b)| a - b).collect::<Vec<f64>>()
    };
    let base = step(g.clone());
    let scaled = step(g.iter().map(|v| v * c).collect());
    base.into_iter().zip(scaled).zip(g).map(|((a, b), g)| (a, b, g)).collect()
}

#[test]
fn first_step_is_scale_covariant() {
    let mut rng = SplitMix64::new(5);
    let eps = AdamHyper::default().epsilon;
    for _ in 0..100 {
        for (a, b, g) in scaled_first_steps(&mut rng, -3.0) {
            let rel = (a - b).abs() / a.abs();
            assert!(rel <= eps / g.abs() + 1e-12, "g {g:e}: relative change {rel:e}");
        }
        for (a, b, g) in scaled_first_steps(&mut rng, -2.0) {
            let rel = (a - b).abs() / a.abs();
            assert!(rel < 1e-6, "g {g:e}: relative change {rel:e}");
        }
    }
}
