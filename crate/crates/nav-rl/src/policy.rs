//! Actor-critic networks: ray attention → recurrent (or memoryless) trunk →
//! action/value heads, with temporally consistent dropout on the actor.

use rand::Rng;
use recurrent_cells::{CellKind, CellParams, CellRef, CellState, StateRef};
use serde::{Deserialize, Serialize};
use tensor_core::{Linear, LinearRef, Tape, Tensor, TensorError, TensorId};

use crate::attention::{AttnParams, AttnRef, AttnTrace};
use crate::env::Observation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MemoryKind {
    Lstm,
    Gru,
    SruLstm,
    SruGru,
    SruOurs,
    /// feedforward ablation: same interface, no state carried
    Memoryless,
}

impl MemoryKind {
    pub fn cell_kind(self) -> Option<CellKind> {
        match self {
            MemoryKind::Lstm => Some(CellKind::Lstm),
            MemoryKind::Gru => Some(CellKind::Gru),
            MemoryKind::SruLstm => Some(CellKind::SruLstm),
            MemoryKind::SruGru => Some(CellKind::SruGru),
            MemoryKind::SruOurs => Some(CellKind::SruOurs),
            MemoryKind::Memoryless => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MemoryKind::Lstm => "lstm",
            MemoryKind::Gru => "gru",
            MemoryKind::SruLstm => "sru-lstm",
            MemoryKind::SruGru => "sru-gru",
            MemoryKind::SruOurs => "sru-ours",
            MemoryKind::Memoryless => "memoryless",
        }
    }
}

impl std::str::FromStr for MemoryKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            MemoryKind::Lstm,
            MemoryKind::Gru,
            MemoryKind::SruLstm,
            MemoryKind::SruGru,
            MemoryKind::SruOurs,
            MemoryKind::Memoryless,
        ]
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| format!("unknown memory kind '{s}'"))
    }
}

/// Recurrent trunk or its feedforward stand-in.
#[derive(Debug, Clone)]
pub enum Memory {
    Cell(CellParams),
    Feedforward(Linear),
}

impl Memory {
    fn new(kind: MemoryKind, input_dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        match kind.cell_kind() {
            Some(ck) => Memory::Cell(CellParams::init(ck, input_dim, hidden, rng)),
            None => Memory::Feedforward(Linear::new(input_dim, hidden, rng)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ActorNet {
    pub attn: AttnParams,
    pub memory: Memory,
    pub memory_kind: MemoryKind,
    pub hidden: usize,
    pub head_hidden: Linear,
    pub head_out: Linear,
    /// state-independent log standard deviation per action dim
    pub log_std: Tensor,
}

#[derive(Debug, Clone)]
pub struct CriticNet {
    pub attn: AttnParams,
    pub memory: Memory,
    pub memory_kind: MemoryKind,
    pub hidden: usize,
    pub head_hidden: Linear,
    pub head_out: Linear,
    /// whether this critic consumes the privileged 360° scan
    pub privileged: bool,
}

pub const ACTION_DIM: usize = 2;

impl ActorNet {
    pub fn new(
        memory_kind: MemoryKind,
        rays: usize,
        embed: usize,
        heads: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let attn = AttnParams::new(rays, embed, heads, Observation::PROP_GOAL_DIM, rng);
        let trunk_in = embed + Observation::PROP_GOAL_DIM;
        Self {
            attn,
            memory: Memory::new(memory_kind, trunk_in, hidden, rng),
            memory_kind,
            hidden,
            head_hidden: Linear::new(hidden, hidden, rng),
            head_out: Linear::new(hidden, ACTION_DIM, rng),
            log_std: Tensor::full(vec![ACTION_DIM], (0.5f64).ln()).with_grad(),
        }
    }

    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out = self.attn.named("attn");
        match &self.memory {
            Memory::Cell(c) => {
                out.extend(c.named().into_iter().map(|(n, t)| (format!("cell.{n}"), t)))
            }
            Memory::Feedforward(l) => {
                out.push(("ff.weight".into(), &l.weight));
                out.push(("ff.bias".into(), &l.bias));
            }
        }
        out.push(("head_hidden.weight".into(), &self.head_hidden.weight));
        out.push(("head_hidden.bias".into(), &self.head_hidden.bias));
        out.push(("head_out.weight".into(), &self.head_out.weight));
        out.push(("head_out.bias".into(), &self.head_out.bias));
        out.push(("log_std".into(), &self.log_std));
        out
    }

    pub fn named_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = self.attn.named_mut("attn");
        match &mut self.memory {
            Memory::Cell(c) => {
                out.extend(c.named_mut().into_iter().map(|(n, t)| (format!("cell.{n}"), t)))
            }
            Memory::Feedforward(l) => {
                out.push(("ff.weight".into(), &mut l.weight));
                out.push(("ff.bias".into(), &mut l.bias));
            }
        }
        out.push(("head_hidden.weight".into(), &mut self.head_hidden.weight));
        out.push(("head_hidden.bias".into(), &mut self.head_hidden.bias));
        out.push(("head_out.weight".into(), &mut self.head_out.weight));
        out.push(("head_out.bias".into(), &mut self.head_out.bias));
        out.push(("log_std".into(), &mut self.log_std));
        out
    }

    pub fn zero_state(&self, batch: usize) -> PlainState {
        match &self.memory {
            Memory::Cell(c) => PlainState::from_cell(CellState::zeros(c.kind, batch, self.hidden)),
            Memory::Feedforward(_) => PlainState { h: Vec::new(), c: None },
        }
    }
}

impl CriticNet {
    pub fn new(
        memory_kind: MemoryKind,
        rays: usize,
        embed: usize,
        heads: usize,
        hidden: usize,
        privileged: bool,
        rng: &mut impl Rng,
    ) -> Self {
        let attn = AttnParams::new(rays, embed, heads, Observation::PROP_GOAL_DIM, rng);
        let trunk_in = embed + Observation::PROP_GOAL_DIM;
        Self {
            attn,
            memory: Memory::new(memory_kind, trunk_in, hidden, rng),
            memory_kind,
            hidden,
            head_hidden: Linear::new(hidden, hidden, rng),
            head_out: Linear::new(hidden, 1, rng),
            privileged,
        }
    }

    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out = self.attn.named("attn");
        match &self.memory {
            Memory::Cell(c) => {
                out.extend(c.named().into_iter().map(|(n, t)| (format!("cell.{n}"), t)))
            }
            Memory::Feedforward(l) => {
                out.push(("ff.weight".into(), &l.weight));
                out.push(("ff.bias".into(), &l.bias));
            }
        }
        out.push(("head_hidden.weight".into(), &self.head_hidden.weight));
        out.push(("head_hidden.bias".into(), &self.head_hidden.bias));
        out.push(("head_out.weight".into(), &self.head_out.weight));
        out.push(("head_out.bias".into(), &self.head_out.bias));
        out
    }

    pub fn named_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = self.attn.named_mut("attn");
        match &mut self.memory {
            Memory::Cell(c) => {
                out.extend(c.named_mut().into_iter().map(|(n, t)| (format!("cell.{n}"), t)))
            }
            Memory::Feedforward(l) => {
                out.push(("ff.weight".into(), &mut l.weight));
                out.push(("ff.bias".into(), &mut l.bias));
            }
        }
        out.push(("head_hidden.weight".into(), &mut self.head_hidden.weight));
        out.push(("head_hidden.bias".into(), &mut self.head_hidden.bias));
        out.push(("head_out.weight".into(), &mut self.head_out.weight));
        out.push(("head_out.bias".into(), &mut self.head_out.bias));
        out
    }

    pub fn zero_state(&self, batch: usize) -> PlainState {
        match &self.memory {
            Memory::Cell(c) => PlainState::from_cell(CellState::zeros(c.kind, batch, self.hidden)),
            Memory::Feedforward(_) => PlainState { h: Vec::new(), c: None },
        }
    }
}

/// Off-tape recurrent state snapshot, batch-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PlainState {
    pub h: Vec<f64>,
    pub c: Option<Vec<f64>>,
}

impl PlainState {
    fn from_cell(state: CellState) -> Self {
        Self { h: state.h.data, c: state.c.map(|c| c.data) }
    }

    /// Zero the rows of environments that just reset.
    pub fn mask_rows(&mut self, done: &[bool], hidden: usize) {
        if self.h.is_empty() {
            return;
        }
        for (i, &d) in done.iter().enumerate() {
            if d {
                self.h[i * hidden..(i + 1) * hidden].iter_mut().for_each(|v| *v = 0.0);
                if let Some(c) = &mut self.c {
                    c[i * hidden..(i + 1) * hidden].iter_mut().for_each(|v| *v = 0.0);
                }
            }
        }
    }
}

enum MemoryRef {
    Cell(CellRef),
    Feedforward(LinearRef),
}

/// Recurrent state living on a tape, so BPTT can flow through replayed
/// segments. Feedforward trunks carry no state.
#[derive(Debug, Clone, Copy)]
pub enum StateIds {
    Cell { h: TensorId, c: Option<TensorId> },
    None,
}

impl StateIds {
    pub fn lease(tape: &mut Tape, state: &PlainState, batch: usize, hidden: usize) -> Self {
        if state.h.is_empty() {
            return StateIds::None;
        }
        StateIds::Cell {
            h: tape.constant(vec![batch, hidden], state.h.clone()),
            c: state.c.as_ref().map(|c| tape.constant(vec![batch, hidden], c.clone())),
        }
    }

    pub fn extract(&self, tape: &Tape) -> PlainState {
        match self {
            StateIds::Cell { h, c } => PlainState {
                h: tape.value(*h).to_vec(),
                c: c.map(|c| tape.value(c).to_vec()),
            },
            StateIds::None => PlainState { h: Vec::new(), c: None },
        }
    }

    /// Zero the state rows of environments that just reset, on-tape.
    pub fn mask_rows(
        &self,
        tape: &mut Tape,
        done: &[bool],
        hidden: usize,
    ) -> Result<StateIds, TensorError> {
        match self {
            StateIds::Cell { h, c } => {
                if done.iter().all(|&d| !d) {
                    return Ok(*self);
                }
                let batch = done.len();
                let mut keep = vec![1.0; batch * hidden];
                for (i, &d) in done.iter().enumerate() {
                    if d {
                        keep[i * hidden..(i + 1) * hidden].iter_mut().for_each(|v| *v = 0.0);
                    }
                }
                let mask = tape.constant(vec![batch, hidden], keep);
                let h2 = tape.hadamard(*h, mask)?;
                let c2 = match c {
                    Some(c) => Some(tape.hadamard(*c, mask)?),
                    None => None,
                };
                Ok(StateIds::Cell { h: h2, c: c2 })
            }
            StateIds::None => Ok(StateIds::None),
        }
    }
}

/// One network leased onto a tape for a batched forward pass.
pub struct NetRef {
    attn: AttnRef,
    memory: MemoryRef,
    head_hidden: LinearRef,
    head_out: LinearRef,
    log_std: Option<TensorId>,
    hidden: usize,
    pub param_ids: Vec<TensorId>,
}

pub struct NetStep {
    /// action mean [B, 2] (actor) or value [B, 1] (critic)
    pub output: TensorId,
    /// [B, 2] log-std broadcast (actor only)
    pub log_std: Option<TensorId>,
    pub state: StateIds,
    pub trace: AttnTrace,
    /// trunk features after dropout, [B, hidden]
    pub features: TensorId,
}

fn lease_common(
    tape: &mut Tape,
    attn: &AttnParams,
    memory: &Memory,
    head_hidden: &Linear,
    head_out: &Linear,
    log_std: Option<&Tensor>,
    hidden: usize,
) -> Result<NetRef, TensorError> {
    let attn_ref = AttnRef::lease(tape, attn);
    let mut param_ids = attn_ref.param_ids.clone();
    let memory_ref = match memory {
        Memory::Cell(c) => {
            let r = CellRef::lease(tape, c)?;
            param_ids.extend_from_slice(r.param_ids());
            MemoryRef::Cell(r)
        }
        Memory::Feedforward(l) => {
            let r = LinearRef::lease(tape, l);
            param_ids.extend([r.weight, r.bias]);
            MemoryRef::Feedforward(r)
        }
    };
    let hh = LinearRef::lease(tape, head_hidden);
    let ho = LinearRef::lease(tape, head_out);
    param_ids.extend([hh.weight, hh.bias, ho.weight, ho.bias]);
    let ls = log_std.map(|t| {
        let id = tape.param(t);
        param_ids.push(id);
        id
    });
    Ok(NetRef { attn: attn_ref, memory: memory_ref, head_hidden: hh, head_out: ho, log_std: ls, hidden, param_ids })
}

impl NetRef {
    pub fn log_std_id(&self) -> Option<TensorId> {
        self.log_std
    }

    pub fn lease_actor(tape: &mut Tape, net: &ActorNet) -> Result<Self, TensorError> {
        lease_common(tape, &net.attn, &net.memory, &net.head_hidden, &net.head_out, Some(&net.log_std), net.hidden)
    }

    pub fn lease_critic(tape: &mut Tape, net: &CriticNet) -> Result<Self, TensorError> {
        lease_common(tape, &net.attn, &net.memory, &net.head_hidden, &net.head_out, None, net.hidden)
    }

    /// One batched step with the recurrent state carried on the tape, so an
    /// unrolled segment backpropagates through time. `dropout_mask` (already
    /// scaled by 1/(1−p)) applies to the trunk features; pass None in eval
    /// mode.
    pub fn step(
        &self,
        tape: &mut Tape,
        token_features: TensorId,
        prop_goal: TensorId,
        state: StateIds,
        dropout_mask: Option<&[f64]>,
        batch: usize,
    ) -> Result<NetStep, TensorError> {
        let trace = self.attn.compress(tape, token_features, prop_goal, batch)?;
        let trunk_in = tape.concat_cols(&[trace.compressed, prop_goal])?;

        let (features_raw, new_state) = match (&self.memory, state) {
            (MemoryRef::Cell(cell), StateIds::Cell { h, c }) => {
                let out = cell.step(tape, trunk_in, StateRef { h, c })?;
                (out.h, StateIds::Cell { h: out.state.h, c: out.state.c })
            }
            (MemoryRef::Feedforward(ff), _) => {
                let pre = ff.forward(tape, trunk_in)?;
                let h = tape.tanh(pre);
                (h, StateIds::None)
            }
            (MemoryRef::Cell(_), StateIds::None) => {
                panic!("recurrent net stepped without a leased state")
            }
        };

        let features = match dropout_mask {
            Some(mask) => {
                let m = tape.constant(vec![batch, self.hidden], mask.to_vec());
                tape.hadamard(features_raw, m)?
            }
            None => features_raw,
        };

        let pre = self.head_hidden.forward(tape, features)?;
        let act = tape.tanh(pre);
        let output = self.head_out.forward(tape, act)?;

        let log_std = match self.log_std {
            Some(ls) => {
                let zeros = tape.constant(vec![batch, ACTION_DIM], vec![0.0; batch * ACTION_DIM]);
                Some(tape.add_bias(zeros, ls)?)
            }
            None => None,
        };
        Ok(NetStep { output, log_std, state: new_state, trace, features })
    }
}

/// Bernoulli(1−p)/(1−p) mask, one value per feature unit.
pub fn tc_dropout_mask(len: usize, p: f64, rng: &mut impl Rng) -> Vec<f64> {
    assert!((0.0..1.0).contains(&p), "dropout probability must be in [0, 1)");
    if p == 0.0 {
        return vec![1.0; len];
    }
    let keep = 1.0 - p;
    (0..len).map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 }).collect()
}

/// Scalar log-density of a diagonal Gaussian.
pub fn gaussian_log_prob(action: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;
    action
        .iter()
        .zip(mean.iter().zip(log_std))
        .map(|(&a, (&m, &ls))| {
            let z = (a - m) / ls.exp();
            -0.5 * z * z - ls - HALF_LN_2PI
        })
        .sum()
}

/// Closed-form KL(p‖q) between diagonal Gaussians, summed over dims.
pub fn gaussian_kl(mu_p: &[f64], log_std_p: &[f64], mu_q: &[f64], log_std_q: &[f64]) -> f64 {
    mu_p.iter()
        .zip(mu_q)
        .zip(log_std_p.iter().zip(log_std_q))
        .map(|((&mp, &mq), (&lp, &lq))| {
            let (vp, vq) = ((2.0 * lp).exp(), (2.0 * lq).exp());
            lq - lp + (vp + (mp - mq) * (mp - mq)) / (2.0 * vq) - 0.5
        })
        .sum()
}

/// Symmetric KL: ½(KL(p‖q) + KL(q‖p)).
pub fn gaussian_sym_kl(mu_p: &[f64], log_std_p: &[f64], mu_q: &[f64], log_std_q: &[f64]) -> f64 {
    0.5 * (gaussian_kl(mu_p, log_std_p, mu_q, log_std_q)
        + gaussian_kl(mu_q, log_std_q, mu_p, log_std_p))
}
