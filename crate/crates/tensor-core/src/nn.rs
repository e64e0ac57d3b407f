//! Linear layers on top of the tape.

use rand::Rng;

use crate::error::TensorError;
use crate::tape::{Tape, TensorId};
use crate::tensor::Tensor;

/// Fully connected layer; weight stored [in, out] so batched inputs multiply
/// as x[b, in] · w.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    /// U[−1/√in, 1/√in] init for weight and bias.
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        Self {
            weight: Tensor::uniform(vec![in_dim, out_dim], -bound, bound, rng).with_grad(),
            bias: Tensor::uniform(vec![out_dim], -bound, bound, rng).with_grad(),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape[0]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape[1]
    }
}

/// Tape-side handle to a leased linear layer.
#[derive(Debug, Clone, Copy)]
pub struct LinearRef {
    pub weight: TensorId,
    pub bias: TensorId,
}

impl LinearRef {
    pub fn lease(tape: &mut Tape, layer: &Linear) -> Self {
        Self { weight: tape.param(&layer.weight), bias: tape.param(&layer.bias) }
    }

    pub fn forward(&self, tape: &mut Tape, x: TensorId) -> Result<TensorId, TensorError> {
        let y = tape.matmul(x, self.weight)?;
        tape.add_bias(y, self.bias)
    }
}
