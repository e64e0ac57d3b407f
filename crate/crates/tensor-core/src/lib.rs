//! Dense f64 tensor math with a define-by-run reverse-mode tape, plus the
//! Nesterov-momentum Adam optimizer and deterministic seeded substreams.
//!
//! A tape and the tensors leased onto it form one single-writer context;
//! read-only tensors may be shared across contexts.

pub mod error;
pub mod kernels;
pub mod nn;
pub mod optim;
pub mod rng;
pub mod tape;
pub mod tensor;

pub use error::TensorError;
pub use nn::{Linear, LinearRef};
pub use optim::{nadam_step, LrSchedule, NAdamState};
pub use tape::{Tape, TensorId};
pub use tensor::Tensor;
