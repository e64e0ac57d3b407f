//! Nesterov-momentum Adam and the two-stage learning-rate schedule.

use crate::error::TensorError;
use crate::tensor::Tensor;

/// Per-parameter state for the Nesterov-momentum Adam update.
///
/// With step counter t (starting at 1) and constant momentum β1, each update
/// applies
///
///   m ← β1·m + (1−β1)·g            v ← β2·v + (1−β2)·g²
///   m̂ = m / (1 − β1^{t+1})          ĝ = g / (1 − β1^t)
///   v̂ = v / (1 − β2^t)
///   θ ← θ − lr · (β1·m̂ + (1−β1)·ĝ) / (√v̂ + ε)
#[derive(Debug, Clone)]
pub struct NAdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl NAdamState {
    /// Moments start at zero, sized to the given parameter lengths.
    pub fn new(lr: f64, param_lens: &[usize]) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first_moment: param_lens.iter().map(|&n| vec![0.0; n]).collect(),
            second_moment: param_lens.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn for_params(lr: f64, params: &[(&str, &Tensor)]) -> Self {
        let lens: Vec<usize> = params.iter().map(|(_, t)| t.numel()).collect();
        Self::new(lr, &lens)
    }
}

/// One optimizer step over named parameters and their gradients.
///
/// Rejects the whole update (state untouched) if any gradient entry is
/// non-finite.
pub fn nadam_step(
    params: &mut [(&str, &mut Tensor)],
    grads: &[Vec<f64>],
    state: &mut NAdamState,
) -> Result<(), TensorError> {
    assert_eq!(params.len(), grads.len(), "param/grad count mismatch");
    assert_eq!(params.len(), state.first_moment.len(), "optimizer state count mismatch");
    for ((name, p), g) in params.iter().zip(grads) {
        if p.numel() != g.len() {
            return Err(TensorError::GradLenMismatch {
                name: name.to_string(),
                param: p.numel(),
                grad: g.len(),
            });
        }
        if let Some(index) = g.iter().position(|v| !v.is_finite()) {
            return Err(TensorError::NonFiniteGrad {
                name: name.to_string(),
                index,
                value: g[index],
            });
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let bias1_t = 1.0 - b1.powi(t);
    let bias1_next = 1.0 - b1.powi(t + 1);
    let bias2_t = 1.0 - b2.powi(t);

    for (pi, ((_, p), g)) in params.iter_mut().zip(grads).enumerate() {
        let m = &mut state.first_moment[pi];
        let v = &mut state.second_moment[pi];
        for i in 0..g.len() {
            let gi = g[i];
            m[i] = b1 * m[i] + (1.0 - b1) * gi;
            v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
            let m_hat = m[i] / bias1_next;
            let g_hat = gi / bias1_t;
            let v_hat = v[i] / bias2_t;
            p.data[i] -= state.lr * (b1 * m_hat + (1.0 - b1) * g_hat) / (v_hat.sqrt() + state.eps);
        }
    }
    Ok(())
}

/// Step learning-rate schedule: `initial` until `switch_epoch`, then `reduced`.
#[derive(Debug, Clone, Copy)]
pub struct LrSchedule {
    pub initial: f64,
    pub reduced: f64,
    pub switch_epoch: u64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self { initial: 2e-3, reduced: 4e-4, switch_epoch: 800 }
    }
}

impl LrSchedule {
    pub fn at(&self, epoch: u64) -> f64 {
        if epoch < self.switch_epoch {
            self.initial
        } else {
            self.reduced
        }
    }
}
