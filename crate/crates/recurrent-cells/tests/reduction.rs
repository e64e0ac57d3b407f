//! Reduction property, analytic fixed points, gate ranges, determinism.

use proptest::prelude::*;
use recurrent_cells::{unroll, CellKind, CellParams, CellRef, CellState, StateRef};
use tensor_core::rng::substream;
use tensor_core::{Tape, Tensor};

fn step_h_c(params: &CellParams, x: &Tensor, state: &CellState) -> (Vec<f64>, Option<Vec<f64>>) {
    let mut tape = Tape::new();
    let cell = CellRef::lease(&mut tape, params).unwrap();
    let xid = tape.param(x);
    let s0 = StateRef::lease(&mut tape, state);
    let out = cell.step(&mut tape, xid, s0).unwrap();
    let h = tape.value(out.h).to_vec();
    let c = out.state.c.map(|c| tape.value(c).to_vec());
    (h, c)
}

/// Copy gate weights from an SRU variant into its base cell and zero the
/// spatial map (W_xs = 0, b_s = 1): outputs must match the base exactly.
#[test]
fn sru_variants_reduce_to_their_base_cells() {
    for (sru_kind, base_kind) in [(CellKind::SruLstm, CellKind::Lstm), (CellKind::SruGru, CellKind::Gru)] {
        let mut max_diff = 0.0f64;
        for seed in 0..100u64 {
            let mut rng = substream(seed, "reduction", 0);
            let mut sru = CellParams::init(sru_kind, 4, 6, &mut rng);
            let spatial = sru.spatial.as_mut().unwrap();
            spatial.w_xs = Tensor::zeros(vec![4, 6]).with_grad();
            spatial.b_s = Tensor::ones(vec![6]).with_grad();

            let mut base = CellParams::init(base_kind, 4, 6, &mut rng);
            base.gates = sru.gates.clone();

            let x = Tensor::uniform(vec![2, 4], -3.0, 3.0, &mut rng);
            let mut state = CellState::zeros(base_kind, 2, 6);
            state.h = Tensor::uniform(vec![2, 6], -1.0, 1.0, &mut rng);
            if let Some(c) = &mut state.c {
                *c = Tensor::uniform(vec![2, 6], -1.0, 1.0, &mut rng);
            }

            let (h_sru, c_sru) = step_h_c(&sru, &x, &state);
            let (h_base, c_base) = step_h_c(&base, &x, &state);
            for (a, b) in h_sru.iter().zip(&h_base) {
                max_diff = max_diff.max((a - b).abs());
            }
            if let (Some(cs), Some(cb)) = (c_sru, c_base) {
                for (a, b) in cs.iter().zip(&cb) {
                    max_diff = max_diff.max((a - b).abs());
                }
            }
        }
        assert!(max_diff < 1e-12, "{sru_kind} deviates from base by {max_diff}");
    }
}

#[test]
fn zero_parameter_lstm_fixed_points() {
    // all weights/biases zero, c0 = 0: i = f = o = 0.5, g = 0, c1 = 0, h1 = 0
    let params = CellParams::zeros(CellKind::Lstm, 3, 4);
    let x = Tensor::from_vec(vec![1, 3], vec![0.3, -0.7, 1.1]);
    let state = CellState::zeros(CellKind::Lstm, 1, 4);

    let mut tape = Tape::new();
    let cell = CellRef::lease(&mut tape, &params).unwrap();
    let xid = tape.param(&x);
    let s0 = StateRef::lease(&mut tape, &state);
    let out = cell.step(&mut tape, xid, s0).unwrap();
    assert!(tape.value(out.gates.input.unwrap()).iter().all(|&v| v == 0.5));
    assert!(tape.value(out.gates.forget.unwrap()).iter().all(|&v| v == 0.5));
    assert!(tape.value(out.gates.output.unwrap()).iter().all(|&v| v == 0.5));
    assert!(tape.value(out.gates.cell.unwrap()).iter().all(|&v| v == 0.0));
    assert!(tape.value(out.state.c.unwrap()).iter().all(|&v| v == 0.0));
    assert!(tape.value(out.h).iter().all(|&v| v == 0.0));

    // all weights zero, c0 = v: c1 = 0.5 * v
    let mut state2 = CellState::zeros(CellKind::Lstm, 1, 4);
    state2.c = Some(Tensor::from_vec(vec![1, 4], vec![0.8, -0.4, 2.0, 0.0]));
    let (_, c1) = step_h_c(&params, &x, &state2);
    assert_eq!(c1.unwrap(), vec![0.4, -0.2, 1.0, 0.0]);
}

#[test]
fn zero_parameter_gru_fixed_points() {
    // all weights zero, h0 = v: z = r = 0.5, h~ = 0, h1 = 0.5 * v
    let params = CellParams::zeros(CellKind::Gru, 3, 4);
    let x = Tensor::from_vec(vec![1, 3], vec![1.0, 2.0, 3.0]);
    let mut state = CellState::zeros(CellKind::Gru, 1, 4);
    state.h = Tensor::from_vec(vec![1, 4], vec![0.8, -0.4, 2.0, 0.0]);
    let (h1, _) = step_h_c(&params, &x, &state);
    assert_eq!(h1, vec![0.4, -0.2, 1.0, 0.0]);

    // x = 0, h0 = 0, zero biases: h1 = 0
    let zero_state = CellState::zeros(CellKind::Gru, 1, 4);
    let zero_x = Tensor::zeros(vec![1, 3]);
    let (h1, _) = step_h_c(&params, &zero_x, &zero_state);
    assert!(h1.iter().all(|&v| v == 0.0));
}

#[test]
fn sru_spatial_zero_kills_candidate() {
    // W_xs = 0, b_s = 0: g = tanh(0 ⊙ …) = 0, so c1 = f ⊙ c0
    let mut params = CellParams::zeros(CellKind::SruLstm, 3, 4);
    params.spatial.as_mut().unwrap().b_s = Tensor::zeros(vec![4]).with_grad();
    let x = Tensor::from_vec(vec![1, 3], vec![0.5, 0.5, 0.5]);
    let mut state = CellState::zeros(CellKind::SruLstm, 1, 4);
    state.c = Some(Tensor::from_vec(vec![1, 4], vec![1.0, 2.0, -1.0, 0.5]));
    let (_, c1) = step_h_c(&params, &x, &state);
    // f = 0.5 with zero params
    assert_eq!(c1.unwrap(), vec![0.5, 1.0, -0.5, 0.25]);

    // same for SRU-GRU: h~ = 0, h1 = z ⊙ h0
    let mut gparams = CellParams::zeros(CellKind::SruGru, 3, 4);
    gparams.spatial.as_mut().unwrap().b_s = Tensor::zeros(vec![4]).with_grad();
    let mut gstate = CellState::zeros(CellKind::SruGru, 1, 4);
    gstate.h = Tensor::from_vec(vec![1, 4], vec![1.0, 2.0, -1.0, 0.5]);
    let (h1, _) = step_h_c(&gparams, &x, &gstate);
    assert_eq!(h1, vec![0.5, 1.0, -0.5, 0.25]);
}

#[test]
fn refined_retain_gate_saturation_and_symmetry() {
    // Saturated sigmoids are exact in f64, so forcing the forget bias to
    // ±1000 pins f at 1 or 0 exactly.
    let c0 = Tensor::from_vec(vec![1, 4], vec![0.3, -0.8, 1.5, -2.0]);
    let x = Tensor::from_vec(vec![1, 3], vec![0.1, 0.2, 0.3]);

    // f = 1: r = 1, c1 = c0
    let mut params = CellParams::zeros(CellKind::SruOurs, 3, 4);
    params.gates[1].b = Tensor::full(vec![4], 1000.0).with_grad();
    let mut state = CellState::zeros(CellKind::SruOurs, 1, 4);
    state.c = Some(c0.clone());
    let (_, c1) = step_h_c(&params, &x, &state);
    assert_eq!(c1.unwrap(), c0.data);

    // f = 0: r = 0, c1 = g (zero spatial bias here forces g = 0 too, so use
    // b_s = 1 from zeros() and a nonzero cell bias to get g != 0)
    let mut params = CellParams::zeros(CellKind::SruOurs, 3, 4);
    params.gates[1].b = Tensor::full(vec![4], -1000.0).with_grad();
    params.gates[3].b = Tensor::full(vec![4], 0.7).with_grad();
    let mut state = CellState::zeros(CellKind::SruOurs, 1, 4);
    state.c = Some(c0.clone());
    let mut tape = Tape::new();
    let cell = CellRef::lease(&mut tape, &params).unwrap();
    let xid = tape.param(&x);
    let s0 = StateRef::lease(&mut tape, &state);
    let out = cell.step(&mut tape, xid, s0).unwrap();
    let g = tape.value(out.gates.cell.unwrap()).to_vec();
    let c1 = tape.value(out.state.c.unwrap()).to_vec();
    assert!(g.iter().all(|&v| (v - 0.7f64.tanh()).abs() < 1e-15));
    assert_eq!(c1, g);

    // i = f = 0.5: r = 0.5 exactly
    let params = CellParams::zeros(CellKind::SruOurs, 3, 4);
    let mut state = CellState::zeros(CellKind::SruOurs, 1, 4);
    state.c = Some(c0);
    let mut tape = Tape::new();
    let cell = CellRef::lease(&mut tape, &params).unwrap();
    let xid = tape.param(&x);
    let s0 = StateRef::lease(&mut tape, &state);
    let out = cell.step(&mut tape, xid, s0).unwrap();
    assert!(tape.value(out.gates.retain.unwrap()).iter().all(|&v| v == 0.5));
}

#[test]
fn gate_ranges_hold_on_random_inputs() {
    for (case, kind) in CellKind::ALL.iter().enumerate() {
        for seed in 0..20u64 {
            let mut rng = substream(seed, "gate-range", case as u64);
            let params = CellParams::init(*kind, 4, 5, &mut rng);
            let x = Tensor::uniform(vec![3, 4], -5.0, 5.0, &mut rng);
            let mut state = CellState::zeros(*kind, 3, 5);
            state.h = Tensor::uniform(vec![3, 5], -1.0, 1.0, &mut rng);
            if let Some(c) = &mut state.c {
                *c = Tensor::uniform(vec![3, 5], -2.0, 2.0, &mut rng);
            }
            let mut tape = Tape::new();
            let cell = CellRef::lease(&mut tape, &params).unwrap();
            let xid = tape.param(&x);
            let s0 = StateRef::lease(&mut tape, &state);
            let out = cell.step(&mut tape, xid, s0).unwrap();

            let sig_range = |id: Option<tensor_core::TensorId>| {
                if let Some(id) = id {
                    assert!(tape.value(id).iter().all(|&v| (0.0..=1.0).contains(&v)));
                }
            };
            let tanh_range = |id: Option<tensor_core::TensorId>| {
                if let Some(id) = id {
                    assert!(tape.value(id).iter().all(|&v| (-1.0..=1.0).contains(&v)));
                }
            };
            sig_range(out.gates.input);
            sig_range(out.gates.forget);
            sig_range(out.gates.output);
            sig_range(out.gates.update);
            sig_range(out.gates.reset);
            sig_range(out.gates.retain);
            tanh_range(out.gates.cell);
            tanh_range(out.gates.candidate);
        }
    }
}

#[test]
fn unroll_equals_folded_steps_and_rejects_empty() {
    let mut rng = substream(5, "unroll", 0);
    let params = CellParams::init(CellKind::SruOurs, 3, 4, &mut rng);
    let xs: Vec<Tensor> = (0..6).map(|_| Tensor::uniform(vec![2, 3], -1.0, 1.0, &mut rng)).collect();
    let state0 = CellState::zeros(CellKind::SruOurs, 2, 4);

    // unroll on one tape
    let mut tape = Tape::new();
    let cell = CellRef::lease(&mut tape, &params).unwrap();
    let ids: Vec<_> = xs.iter().map(|x| tape.param(x)).collect();
    let s0 = StateRef::lease(&mut tape, &state0);
    let out = unroll(&mut tape, &cell, &ids, s0).unwrap();
    assert_eq!(out.states.len(), 6);

    // fold of single steps across fresh tapes
    let mut state = state0.clone();
    let mut trajectory = Vec::new();
    for x in &xs {
        let mut t = Tape::new();
        let cell = CellRef::lease(&mut t, &params).unwrap();
        let xid = t.param(x);
        let s = StateRef::lease(&mut t, &state);
        let step = cell.step(&mut t, xid, s).unwrap();
        state = step.state.to_state(&t, 2, 4);
        trajectory.push(state.h.data.clone());
    }
    for (sref, h_fold) in out.states.iter().zip(&trajectory) {
        assert_eq!(tape.value(sref.h), h_fold.as_slice());
    }

    // T = 1 equals one step
    let mut t1 = Tape::new();
    let cell1 = CellRef::lease(&mut t1, &params).unwrap();
    let x0 = t1.param(&xs[0]);
    let s01 = StateRef::lease(&mut t1, &state0);
    let single = cell1.step(&mut t1, x0, s01).unwrap();
    let u1 = unroll(&mut t1, &cell1, &[x0], s01).unwrap();
    assert_eq!(t1.value(single.h), t1.value(u1.final_h));

    // empty input sequence is a contract error
    let mut t2 = Tape::new();
    let cell2 = CellRef::lease(&mut t2, &params).unwrap();
    let s02 = StateRef::lease(&mut t2, &state0);
    assert!(unroll(&mut t2, &cell2, &[], s02).is_err());
}

#[test]
fn identical_params_inputs_give_bit_identical_outputs() {
    let mut rng = substream(9, "determinism", 0);
    let params = CellParams::init(CellKind::SruGru, 4, 4, &mut rng);
    let x = Tensor::uniform(vec![2, 4], -1.0, 1.0, &mut rng);
    let state = CellState::zeros(CellKind::SruGru, 2, 4);
    let (h1, _) = step_h_c(&params, &x, &state);
    let (h2, _) = step_h_c(&params, &x, &state);
    assert_eq!(h1, h2);
}

proptest! {
    /// r = i⊙(1−(1−f)²) + (1−i)⊙f² stays in [0,1] whenever i, f do: it is a
    /// convex combination of two values in [0,1].
    #[test]
    fn refined_gate_stays_in_unit_interval(i in 0.0f64..=1.0, f in 0.0f64..=1.0) {
        let r = i * (1.0 - (1.0 - f).powi(2)) + (1.0 - i) * f.powi(2);
        prop_assert!((-1e-15..=1.0 + 1e-15).contains(&r));
    }
}
