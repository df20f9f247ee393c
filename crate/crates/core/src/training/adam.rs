use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(params: &mut [f64], grad: &[f64], state: &mut AdamState, lr: f64) -> Result<()> {
    let n = params.len();
    for len in [grad.len(), state.m.len(), state.v.len()] {
        if len != n {
            return Err(Error::ArityMismatch { expected: n, got: len });
        }
    }
    state.t += 1;
    let c1 = 1.0 - BETA1.powf(state.t as f64);
    let c2 = 1.0 - BETA2.powf(state.t as f64);
    for i in 0..n {
        let g = grad[i];
        state.m[i] = BETA1 * state.m[i] + (1.0 - BETA1) * g;
        state.v[i] = BETA2 * state.v[i] + (1.0 - BETA2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + EPSILON);
    }
    Ok(())
}
