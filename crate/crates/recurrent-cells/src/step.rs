//! Taped step/unroll for all five cells.
//!
//! Per-gate x-side weights are concatenated once per lease so each step costs
//! two large matmuls instead of eight small ones; slices route the fused
//! preactivations back to their gates. Gradients flow through every step of
//! an unroll (BPTT).

use tensor_core::{Tape, TensorError, TensorId};

use crate::params::{CellKind, CellParams, CellState};

/// On-tape hidden state.
#[derive(Debug, Clone, Copy)]
pub struct StateRef {
    pub h: TensorId,
    pub c: Option<TensorId>,
}

impl StateRef {
    pub fn lease(tape: &mut Tape, state: &CellState) -> Self {
        Self { h: tape.param(&state.h), c: state.c.as_ref().map(|c| tape.param(c)) }
    }

    pub fn to_state(&self, tape: &Tape, batch: usize, hidden: usize) -> CellState {
        CellState {
            h: tensor_core::Tensor::from_vec(vec![batch, hidden], tape.value(self.h).to_vec()),
            c: self
                .c
                .map(|c| tensor_core::Tensor::from_vec(vec![batch, hidden], tape.value(c).to_vec())),
        }
    }
}

/// Per-step gate activations retained for inspection and tests.
#[derive(Debug, Clone, Copy, Default)]
pub struct GateRecord {
    pub input: Option<TensorId>,
    pub forget: Option<TensorId>,
    pub output: Option<TensorId>,
    pub cell: Option<TensorId>,
    pub update: Option<TensorId>,
    pub reset: Option<TensorId>,
    pub candidate: Option<TensorId>,
    pub spatial: Option<TensorId>,
    pub retain: Option<TensorId>,
}

#[derive(Debug, Clone, Copy)]
pub struct StepOutput {
    pub h: TensorId,
    pub state: StateRef,
    pub gates: GateRecord,
}

/// Cell parameters leased onto a tape, with fused x-side and h-side weights.
pub struct CellRef {
    kind: CellKind,
    hidden: usize,
    /// ids of the individual parameters, in `CellParams::named` order
    param_ids: Vec<TensorId>,
    /// [in, G·H] where G counts gates (plus the spatial block, last)
    wx_cat: TensorId,
    /// [H, K·H] fused h-side weights (LSTM family: all four gates; GRU: z and r)
    wh_cat: TensorId,
    /// GRU candidate h-side weight, applied to r⊙h
    w_hh: Option<TensorId>,
    biases: Vec<TensorId>,
    spatial_bias: Option<TensorId>,
}

impl CellRef {
    pub fn lease(tape: &mut Tape, params: &CellParams) -> Result<Self, TensorError> {
        debug_assert!(params.validate().is_ok(), "invalid cell params");
        let kind = params.kind;
        let mut param_ids = Vec::new();
        let mut wx_ids = Vec::new();
        let mut wh_ids = Vec::new();
        let mut biases = Vec::new();
        for gp in &params.gates {
            let wx = tape.param(&gp.w_x);
            let wh = tape.param(&gp.w_h);
            let b = tape.param(&gp.b);
            param_ids.extend([wx, wh, b]);
            wx_ids.push(wx);
            wh_ids.push(wh);
            biases.push(b);
        }
        let mut spatial_bias = None;
        if let Some(sp) = &params.spatial {
            let wxs = tape.param(&sp.w_xs);
            let bs = tape.param(&sp.b_s);
            param_ids.extend([wxs, bs]);
            wx_ids.push(wxs);
            spatial_bias = Some(bs);
        }
        let wx_cat = tape.concat_cols(&wx_ids)?;
        let (wh_cat, w_hh) = if kind.is_lstm_family() {
            (tape.concat_cols(&wh_ids)?, None)
        } else {
            // z and r share the fused product; the candidate acts on r⊙h
            (tape.concat_cols(&wh_ids[..2])?, Some(wh_ids[2]))
        };
        Ok(Self { kind, hidden: params.hidden_dim, param_ids, wx_cat, wh_cat, w_hh, biases, spatial_bias })
    }

    /// Leased parameter ids in `CellParams::named` order.
    pub fn param_ids(&self) -> &[TensorId] {
        &self.param_ids
    }

    pub fn kind(&self) -> CellKind {
        self.kind
    }

    /// One recurrent step: x [B, in], state [B, H] each.
    pub fn step(&self, tape: &mut Tape, x: TensorId, state: StateRef) -> Result<StepOutput, TensorError> {
        let hd = self.hidden;
        let pre_x = tape.matmul(x, self.wx_cat)?;
        if self.kind.is_lstm_family() {
            let pre_h = tape.matmul(state.h, self.wh_cat)?;
            let mut acts = Vec::with_capacity(4);
            for k in 0..4 {
                let px = tape.slice_cols(pre_x, k * hd, hd)?;
                let ph = tape.slice_cols(pre_h, k * hd, hd)?;
                let sum = tape.add(px, ph)?;
                acts.push(tape.add_bias(sum, self.biases[k])?);
            }
            let i = tape.sigmoid(acts[0]);
            let f = tape.sigmoid(acts[1]);
            let o = tape.sigmoid(acts[2]);

            let mut gates = GateRecord {
                input: Some(i),
                forget: Some(f),
                output: Some(o),
                ..GateRecord::default()
            };

            let g = if let Some(b_s) = self.spatial_bias {
                let sx = tape.slice_cols(pre_x, 4 * hd, hd)?;
                let s = tape.add_bias(sx, b_s)?;
                gates.spatial = Some(s);
                let modulated = tape.hadamard(s, acts[3])?;
                tape.tanh(modulated)
            } else {
                tape.tanh(acts[3])
            };
            gates.cell = Some(g);

            let c_prev = state.c.expect("LSTM-family state carries c");
            let c_next = if self.kind == CellKind::SruOurs {
                // r = i⊙(1−(1−f)²) + (1−i)⊙f² ; c' = r⊙c + (1−r)⊙g
                let one_minus_f = tape.affine(f, -1.0, 1.0);
                let omf_sq = tape.square(one_minus_f)?;
                let lhs = tape.affine(omf_sq, -1.0, 1.0);
                let term1 = tape.hadamard(i, lhs)?;
                let f_sq = tape.square(f)?;
                let one_minus_i = tape.affine(i, -1.0, 1.0);
                let term2 = tape.hadamard(one_minus_i, f_sq)?;
                let r = tape.add(term1, term2)?;
                gates.retain = Some(r);
                let keep = tape.hadamard(r, c_prev)?;
                let one_minus_r = tape.affine(r, -1.0, 1.0);
                let write = tape.hadamard(one_minus_r, g)?;
                tape.add(keep, write)?
            } else {
                let keep = tape.hadamard(f, c_prev)?;
                let write = tape.hadamard(i, g)?;
                tape.add(keep, write)?
            };
            let c_act = tape.tanh(c_next);
            let h_next = tape.hadamard(o, c_act)?;
            Ok(StepOutput { h: h_next, state: StateRef { h: h_next, c: Some(c_next) }, gates })
        } else {
            let pre_h = tape.matmul(state.h, self.wh_cat)?;
            let px_z = tape.slice_cols(pre_x, 0, hd)?;
            let ph_z = tape.slice_cols(pre_h, 0, hd)?;
            let sum_z = tape.add(px_z, ph_z)?;
            let act_z = tape.add_bias(sum_z, self.biases[0])?;
            let z = tape.sigmoid(act_z);

            let px_r = tape.slice_cols(pre_x, hd, hd)?;
            let ph_r = tape.slice_cols(pre_h, hd, hd)?;
            let sum_r = tape.add(px_r, ph_r)?;
            let act_r = tape.add_bias(sum_r, self.biases[1])?;
            let r = tape.sigmoid(act_r);

            let rh = tape.hadamard(r, state.h)?;
            let cand_h = tape.matmul(rh, self.w_hh.expect("GRU carries w_hh"))?;
            let px_c = tape.slice_cols(pre_x, 2 * hd, hd)?;
            let sum_c = tape.add(px_c, cand_h)?;
            let inner = tape.add_bias(sum_c, self.biases[2])?;

            let mut gates =
                GateRecord { update: Some(z), reset: Some(r), ..GateRecord::default() };

            let cand = if let Some(b_s) = self.spatial_bias {
                let sx = tape.slice_cols(pre_x, 3 * hd, hd)?;
                let s = tape.add_bias(sx, b_s)?;
                gates.spatial = Some(s);
                let modulated = tape.hadamard(s, inner)?;
                tape.tanh(modulated)
            } else {
                tape.tanh(inner)
            };
            gates.candidate = Some(cand);

            // h' = (1−z)⊙h̃ + z⊙h
            let one_minus_z = tape.affine(z, -1.0, 1.0);
            let new_part = tape.hadamard(one_minus_z, cand)?;
            let old_part = tape.hadamard(z, state.h)?;
            let h_next = tape.add(new_part, old_part)?;
            Ok(StepOutput { h: h_next, state: StateRef { h: h_next, c: None }, gates })
        }
    }
}

#[derive(Debug, Clone)]
pub struct UnrollOutput {
    /// Hidden state after the final step.
    pub final_h: TensorId,
    /// State after each step, in order.
    pub states: Vec<StateRef>,
    pub gates: Vec<GateRecord>,
}

/// T successive step calls; gradients flow through all of them.
pub fn unroll(
    tape: &mut Tape,
    cell: &CellRef,
    inputs: &[TensorId],
    initial: StateRef,
) -> Result<UnrollOutput, TensorError> {
    if inputs.is_empty() {
        return Err(TensorError::ShapeMismatch { op: "unroll", lhs: vec![0], rhs: vec![] });
    }
    let mut states = Vec::with_capacity(inputs.len());
    let mut gates = Vec::with_capacity(inputs.len());
    let mut state = initial;
    for &x in inputs {
        let out = cell.step(tape, x, state)?;
        state = out.state;
        states.push(out.state);
        gates.push(out.gates);
    }
    Ok(UnrollOutput { final_h: state.h, states, gates })
}
