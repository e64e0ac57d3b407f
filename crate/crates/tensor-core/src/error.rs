use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    ShapeMismatch { op: &'static str, lhs: Vec<usize>, rhs: Vec<usize> },

    #[error("backward requires a scalar loss, got shape {shape:?}")]
    NotScalar { shape: Vec<usize> },

    #[error("non-finite gradient for parameter '{name}' at element {index} (value {value})")]
    NonFiniteGrad { name: String, index: usize, value: f64 },

    #[error("parameter/gradient length mismatch for '{name}': {param} vs {grad}")]
    GradLenMismatch { name: String, param: usize, grad: usize },
}
