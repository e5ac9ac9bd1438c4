use serde::{Deserialize, Serialize};

use super::OptimError;
use crate::nn::{Tensor, TensorMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            lr: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment estimates for every parameter, keyed like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub hyper: AdamHyper,
    pub step_count: u64,
    first: TensorMap,
    second: TensorMap,
}

impl AdamState {
    pub fn new(hyper: AdamHyper, params: &TensorMap) -> Self {
        let zeros: TensorMap = params
            .iter()
            .map(|(n, t)| (n.clone(), Tensor::zeros(t.shape())))
            .collect();
        Self {
            hyper,
            step_count: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn first_moment(&self, name: &str) -> Option<&Tensor> {
        self.first.get(name)
    }

    pub fn second_moment(&self, name: &str) -> Option<&Tensor> {
        self.second.get(name)
    }
}

/// One bias-corrected Adam update applied to every parameter.
///
/// Shapes are validated before anything is modified, so a failed call leaves
/// both parameters and state untouched.
pub fn adam_step(params: &mut TensorMap, grads: &TensorMap, state: &mut AdamState) -> Result<(), OptimError> {
    for (name, p) in params.iter() {
        let g = grads.get(name).ok_or_else(|| OptimError::MissingGradient(name.clone()))?;
        let m = state.first.get(name).ok_or_else(|| OptimError::MissingMoment(name.clone()))?;
        for (what, shape) in [("gradient", g.shape()), ("moment", m.shape())] {
            if shape != p.shape() {
                return Err(OptimError::Shape {
                    name: name.clone(),
                    what,
                    expected: p.shape().to_vec(),
                    found: shape.to_vec(),
                });
            }
        }
    }

    state.step_count += 1;
    let AdamHyper { lr, beta1, beta2, epsilon } = state.hyper;
    let t = state.step_count as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    for (name, p) in params.iter_mut() {
        let g = grads[name].data();
        let m = state.first.get_mut(name).expect("validated").data_mut();
        let v = state.second.get_mut(name).expect("validated").data_mut();
        for (((theta, &gi), mi), vi) in p.data_mut().iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            *mi = beta1 * *mi + (1.0 - beta1) * gi;
            *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
            let m_hat = *mi / bc1;
            let v_hat = *vi / bc2;
            *theta -= lr * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
    Ok(())
}
