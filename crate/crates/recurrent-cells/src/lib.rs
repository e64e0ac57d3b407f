//! The five recurrent cells under study — LSTM, GRU, SRU-LSTM, SRU-GRU and
//! SRU-Ours — sharing one step/unroll interface on the reverse-mode tape.
//!
//! The SRU variants add a spatial term `s_t = W_xs·x_t + b_s` that
//! multiplicatively modulates the candidate state before its tanh; SRU-Ours
//! further replaces the (input, forget) pair in the cell update with the
//! refined retain gate `r_t = i⊙(1−(1−f)²) + (1−i)⊙f²`.

mod checkpoint;
mod params;
mod step;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError};
pub use params::{CellKind, CellParams, CellState, GateParams, SpatialParams};
pub use step::{unroll, CellRef, GateRecord, StateRef, StepOutput, UnrollOutput};
