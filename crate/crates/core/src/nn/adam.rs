use serde::{Deserialize, Serialize};

use super::{CnnModel, CnnParams, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates for every parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub step: u64,
    pub m: CnnParams<T>,
    pub v: CnnParams<T>,
    pub hyper: AdamHyper,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(shape_of: &CnnParams<T>, hyper: AdamHyper) -> Self {
        AdamState {
            step: 0,
            m: shape_of.zeros_like(),
            v: shape_of.zeros_like(),
            hyper,
        }
    }
}

/// One bias-corrected Adam update of `theta` at step `t` (1-based).
pub fn adam_update<T: Scalar>(
    theta: &mut [T],
    grad: &[T],
    m: &mut [T],
    v: &mut [T],
    t: u64,
    lr: f64,
    hyper: AdamHyper,
) {
    debug_assert!(t >= 1);
    let AdamHyper {
        beta1,
        beta2,
        epsilon,
    } = hyper;
    let (b1, b2) = (T::of(beta1), T::of(beta2));
    let (one_b1, one_b2) = (T::of(1.0 - beta1), T::of(1.0 - beta2));
    let corr1 = T::of(1.0 / (1.0 - beta1.powi(t as i32)));
    let corr2 = T::of(1.0 / (1.0 - beta2.powi(t as i32)));
    let (lr, eps) = (T::of(lr), T::of(epsilon));
    for i in 0..theta.len() {
        let g = grad[i];
        m[i] = b1 * m[i] + one_b1 * g;
        v[i] = b2 * v[i] + one_b2 * g * g;
        let m_hat = m[i] * corr1;
        let v_hat = v[i] * corr2;
        theta[i] = theta[i] - lr * m_hat / (v_hat.sqrt() + eps);
    }
}

pub fn adam_step<T: Scalar>(
    model: &mut CnnModel<T>,
    grads: &CnnParams<T>,
    state: &mut AdamState<T>,
    lr: f64,
) {
    state.step += 1;
    let t = state.step;
    let hyper = state.hyper;
    let grads = grads.tensors();
    let m = state.m.tensors_mut();
    let v = state.v.tensors_mut();
    for (((theta, g), m), v) in model
        .params
        .tensors_mut()
        .into_iter()
        .zip(grads)
        .zip(m)
        .zip(v)
    {
        adam_update(theta, g, m, v, t, lr, hyper);
    }
}
