//! Input MLP → recurrent cell → output head. The step inputs are encoded
//! observations; the head regresses all 3T landmark coordinates in the final
//! frame and T label logits from the final hidden state.

use rand::Rng;
use recurrent_cells::{unroll, CellKind, CellParams, CellRef, CellState, StateRef};
use tensor_core::{Linear, LinearRef, Tape, Tensor, TensorError, TensorId};

use crate::episode::{encode_step_input, LandmarkEpisode, STEP_INPUT_DIM};

#[derive(Debug, Clone)]
pub struct BenchmarkNet {
    pub input_mlp: Linear,
    pub cell: CellParams,
    /// optional hidden layer of the output head
    pub output_hidden: Option<Linear>,
    pub output: Linear,
    /// regression outputs are scaled by this constant so the head works in
    /// O(1) units while targets span tens of meters
    pub output_scale: f64,
    /// squash the input projection with tanh (false keeps it linear, which
    /// preserves the metric structure of coordinates and rotation entries)
    pub input_tanh: bool,
    pub t_steps: usize,
}

pub struct BenchmarkForward {
    /// [B, 3T] regressed coordinates
    pub coords: TensorId,
    /// [B, T] label logits
    pub logits: TensorId,
    /// ids of all parameters in `named` order
    pub param_ids: Vec<TensorId>,
}

impl BenchmarkNet {
    pub fn new(
        kind: CellKind,
        t_steps: usize,
        mlp_dim: usize,
        hidden_dim: usize,
        output_hidden_dim: Option<usize>,
        output_scale: f64,
        input_tanh: bool,
        rng: &mut impl Rng,
    ) -> Self {
        let input_mlp = Linear::new(STEP_INPUT_DIM, mlp_dim, rng);
        let cell = CellParams::init(kind, mlp_dim, hidden_dim, rng);
        let (output_hidden, head_in) = match output_hidden_dim {
            Some(d) => (Some(Linear::new(hidden_dim, d, rng)), d),
            None => (None, hidden_dim),
        };
        Self {
            input_mlp,
            cell,
            output_hidden,
            output: Linear::new(head_in, 4 * t_steps, rng),
            output_scale,
            input_tanh,
            t_steps,
        }
    }

    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out = vec![
            ("input_mlp.weight".to_string(), &self.input_mlp.weight),
            ("input_mlp.bias".to_string(), &self.input_mlp.bias),
        ];
        for (n, t) in self.cell.named() {
            out.push((format!("cell.{n}"), t));
        }
        if let Some(h) = &self.output_hidden {
            out.push(("output_hidden.weight".to_string(), &h.weight));
            out.push(("output_hidden.bias".to_string(), &h.bias));
        }
        out.push(("output.weight".to_string(), &self.output.weight));
        out.push(("output.bias".to_string(), &self.output.bias));
        out
    }

    pub fn named_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = vec![
            ("input_mlp.weight".to_string(), &mut self.input_mlp.weight),
            ("input_mlp.bias".to_string(), &mut self.input_mlp.bias),
        ];
        for (n, t) in self.cell.named_mut() {
            out.push((format!("cell.{n}"), t));
        }
        if let Some(h) = &mut self.output_hidden {
            out.push(("output_hidden.weight".to_string(), &mut h.weight));
            out.push(("output_hidden.bias".to_string(), &mut h.bias));
        }
        out.push(("output.weight".to_string(), &mut self.output.weight));
        out.push(("output.bias".to_string(), &mut self.output.bias));
        out
    }

    /// Batched forward over whole episodes (all of length `t_steps`).
    pub fn forward(&self, tape: &mut Tape, episodes: &[LandmarkEpisode]) -> Result<BenchmarkForward, TensorError> {
        assert!(!episodes.is_empty());
        assert!(episodes.iter().all(|e| e.len() == self.t_steps), "episode length mismatch");
        let batch = episodes.len();

        let input_mlp = LinearRef::lease(tape, &self.input_mlp);
        let cell = CellRef::lease(tape, &self.cell)?;
        let output_hidden = self.output_hidden.as_ref().map(|h| LinearRef::lease(tape, h));
        let output = LinearRef::lease(tape, &self.output);

        let mut param_ids = vec![input_mlp.weight, input_mlp.bias];
        param_ids.extend_from_slice(cell.param_ids());
        if let Some(h) = &output_hidden {
            param_ids.extend([h.weight, h.bias]);
        }
        param_ids.extend([output.weight, output.bias]);

        let mut step_inputs = Vec::with_capacity(self.t_steps);
        for s in 0..self.t_steps {
            let mut data = Vec::with_capacity(batch * STEP_INPUT_DIM);
            for ep in episodes {
                data.extend(encode_step_input(ep.landmarks[s], ep.labels[s], &ep.motions[s]));
            }
            let raw = tape.constant(vec![batch, STEP_INPUT_DIM], data);
            let projected = input_mlp.forward(tape, raw)?;
            step_inputs.push(if self.input_tanh { tape.tanh(projected) } else { projected });
        }

        let state0 = CellState::zeros(self.cell.kind, batch, self.cell.hidden_dim);
        let s0 = StateRef::lease(tape, &state0);
        let unrolled = unroll(tape, &cell, &step_inputs, s0)?;

        let head_in = match &output_hidden {
            Some(h) => {
                let pre = h.forward(tape, unrolled.final_h)?;
                tape.tanh(pre)
            }
            None => unrolled.final_h,
        };
        let out = output.forward(tape, head_in)?;
        let coords_raw = tape.slice_cols(out, 0, 3 * self.t_steps)?;
        let coords = tape.scale(coords_raw, self.output_scale);
        let logits = tape.slice_cols(out, 3 * self.t_steps, self.t_steps)?;
        Ok(BenchmarkForward { coords, logits, param_ids })
    }
}

/// Flattened [B, 3T] coordinate targets and [B, T] labels for a batch.
pub fn batch_targets(episodes: &[LandmarkEpisode]) -> (Vec<f64>, Vec<f64>) {
    let mut coords = Vec::new();
    let mut labels = Vec::new();
    for ep in episodes {
        for t in &ep.targets {
            coords.extend_from_slice(t);
        }
        labels.extend_from_slice(&ep.labels);
    }
    (coords, labels)
}
