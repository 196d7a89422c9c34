use crate::encoder::EncoderParams;

use super::backward::{param_slices_mut, GradientSet};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Adam moment estimates, flat over all parameters in the fixed slice order.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(params: &EncoderParams) -> Self {
        let n = params.n_params();
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// Scale all gradients by `max_norm / norm` when the global L2 norm exceeds
/// `max_norm`. Returns the pre-clip norm.
pub fn clip_gradients(grads: &mut GradientSet, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}

/// One bias-corrected Adam update over a flat parameter slice. `t` is the
/// 1-based step count; `m` and `v` are the moment buffers for this slice.
pub fn adam_update(theta: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64], t: u64, lr: f64) {
    debug_assert_eq!(theta.len(), grad.len(), "moment shapes must match params");
    let bc1 = 1.0 - ADAM_BETA1.powi(t as i32);
    let bc2 = 1.0 - ADAM_BETA2.powi(t as i32);
    for (j, th) in theta.iter_mut().enumerate() {
        m[j] = ADAM_BETA1 * m[j] + (1.0 - ADAM_BETA1) * grad[j];
        v[j] = ADAM_BETA2 * v[j] + (1.0 - ADAM_BETA2) * grad[j] * grad[j];
        let m_hat = m[j] / bc1;
        let v_hat = v[j] / bc2;
        *th -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}

/// In-place Adam update with bias correction.
pub fn adam_step(
    params: &mut EncoderParams,
    grads: &GradientSet,
    state: &mut AdamState,
    learning_rate: f64,
) {
    state.t += 1;
    let t = state.t;
    let mut offset = 0;
    let grad_slices = grads.slices();
    for (slice_idx, theta) in param_slices_mut(params).into_iter().enumerate() {
        let g = grad_slices[slice_idx];
        let end = offset + g.len();
        adam_update(
            theta,
            g,
            &mut state.m[offset..end],
            &mut state.v[offset..end],
            t,
            learning_rate,
        );
        offset = end;
    }
}
