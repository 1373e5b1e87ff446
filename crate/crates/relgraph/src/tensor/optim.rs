//! Adam with bias correction plus global-norm gradient clipping.

use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

/// Adam hyperparameters and per-parameter moment accumulators.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    first_moment: Vec<Tensor>,
    second_moment: Vec<Tensor>,
}

impl OptimizerState {
    pub fn new(learning_rate: f64, param_shapes: &[Vec<usize>]) -> Self {
        OptimizerState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first_moment: param_shapes.iter().map(|s| Tensor::zeros(s.clone())).collect(),
            second_moment: param_shapes.iter().map(|s| Tensor::zeros(s.clone())).collect(),
        }
    }

    pub fn first_moment(&self, idx: usize) -> &Tensor {
        &self.first_moment[idx]
    }

    pub fn second_moment(&self, idx: usize) -> &Tensor {
        &self.second_moment[idx]
    }
}

/// Convenience wrapper tying an [`OptimizerState`] to a parameter list that
/// is updated in place each step.
pub struct AdamOptimizer {
    pub state: OptimizerState,
}

impl AdamOptimizer {
    pub fn new(learning_rate: f64, param_shapes: &[Vec<usize>]) -> Self {
        AdamOptimizer { state: OptimizerState::new(learning_rate, param_shapes) }
    }

    /// One bias-corrected Adam update. `params` and `grads` must match the
    /// shapes the optimizer was built with.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor]) -> Result<()> {
        adam_step(params, grads, &mut self.state)
    }
}

/// Standard Adam update; increments the step counter.
pub fn adam_step(
    params: &mut [&mut Tensor],
    grads: &[Tensor],
    state: &mut OptimizerState,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first_moment.len() {
        return Err(Error::invalid(format!(
            "adam_step: {} params, {} grads, {} moment slots",
            params.len(),
            grads.len(),
            state.first_moment.len()
        )));
    }
    for (i, p) in params.iter().enumerate() {
        if p.shape() != grads[i].shape() || p.shape() != state.first_moment[i].shape() {
            return Err(Error::invalid(format!(
                "adam_step: shape mismatch at parameter {i}: {:?} vs {:?}",
                p.shape(),
                grads[i].shape()
            )));
        }
    }
    state.step += 1;
    let t = state.step as f64;
    let bc1 = 1.0 - state.beta1.powf(t);
    let bc2 = 1.0 - state.beta2.powf(t);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.first_moment.iter_mut().zip(state.second_moment.iter_mut()))
    {
        for ((pv, &gv), (mv, vv)) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()))
        {
            *mv = state.beta1 * *mv + (1.0 - state.beta1) * gv;
            *vv = state.beta2 * *vv + (1.0 - state.beta2) * gv * gv;
            let m_hat = *mv / bc1;
            let v_hat = *vv / bc2;
            *pv -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
        }
    }
    Ok(())
}

/// Scale all gradients by max_norm/N when their global L2 norm N exceeds
/// max_norm; no-op otherwise (the boundary is inclusive).
pub fn clip_global_norm(grads: &mut [Tensor], max_norm: f64) {
    assert!(max_norm > 0.0, "max_norm must be positive");
    let sq: f64 = grads.iter().flat_map(|g| g.data()).map(|v| v * v).sum();
    let norm = sq.sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            for v in g.data_mut() {
                *v *= s;
            }
        }
    }
}
