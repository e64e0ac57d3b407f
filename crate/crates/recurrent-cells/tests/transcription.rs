//! Straight-line transcriptions of the cell equations, evaluated with plain
//! scalar loops, checked against the taped step implementations.

use recurrent_cells::{CellKind, CellParams, CellRef, CellState, StateRef};
use tensor_core::rng::substream;
use tensor_core::{Tape, Tensor};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// out[j] = Σ_i x[i]·w[i][j] for w stored [in, out] row-major.
fn matvec(w: &Tensor, x: &[f64]) -> Vec<f64> {
    let (rows, cols) = (w.shape[0], w.shape[1]);
    assert_eq!(rows, x.len());
    let mut out = vec![0.0; cols];
    for i in 0..rows {
        for j in 0..cols {
            out[j] += x[i] * w.data[i * cols + j];
        }
    }
    out
}

fn gate_preact(p: &recurrent_cells::GateParams, x: &[f64], h: &[f64]) -> Vec<f64> {
    let xa = matvec(&p.w_x, x);
    let ha = matvec(&p.w_h, h);
    xa.iter().zip(&ha).zip(&p.b.data).map(|((a, b), c)| a + b + c).collect()
}

struct LstmOracle {
    i: Vec<f64>,
    f: Vec<f64>,
    o: Vec<f64>,
    g: Vec<f64>,
    c: Vec<f64>,
    h: Vec<f64>,
}

fn lstm_family_oracle(params: &CellParams, x: &[f64], h0: &[f64], c0: &[f64]) -> LstmOracle {
    let i: Vec<f64> = gate_preact(&params.gates[0], x, h0).into_iter().map(sigmoid).collect();
    let f: Vec<f64> = gate_preact(&params.gates[1], x, h0).into_iter().map(sigmoid).collect();
    let o: Vec<f64> = gate_preact(&params.gates[2], x, h0).into_iter().map(sigmoid).collect();
    let mut g_inner = gate_preact(&params.gates[3], x, h0);
    if let Some(sp) = &params.spatial {
        let s: Vec<f64> = matvec(&sp.w_xs, x).iter().zip(&sp.b_s.data).map(|(a, b)| a + b).collect();
        for (gi, &si) in g_inner.iter_mut().zip(&s) {
            *gi *= si;
        }
    }
    let g: Vec<f64> = g_inner.into_iter().map(f64::tanh).collect();

    let c: Vec<f64> = match params.kind {
        CellKind::SruOurs => (0..g.len())
            .map(|k| {
                let r = i[k] * (1.0 - (1.0 - f[k]).powi(2)) + (1.0 - i[k]) * f[k].powi(2);
                r * c0[k] + (1.0 - r) * g[k]
            })
            .collect(),
        _ => (0..g.len()).map(|k| f[k] * c0[k] + i[k] * g[k]).collect(),
    };
    let h: Vec<f64> = (0..c.len()).map(|k| o[k] * c[k].tanh()).collect();
    LstmOracle { i, f, o, g, c, h }
}

struct GruOracle {
    z: Vec<f64>,
    r: Vec<f64>,
    cand: Vec<f64>,
    h: Vec<f64>,
}

fn gru_family_oracle(params: &CellParams, x: &[f64], h0: &[f64]) -> GruOracle {
    let z: Vec<f64> = gate_preact(&params.gates[0], x, h0).into_iter().map(sigmoid).collect();
    let r: Vec<f64> = gate_preact(&params.gates[1], x, h0).into_iter().map(sigmoid).collect();
    let rh: Vec<f64> = r.iter().zip(h0).map(|(a, b)| a * b).collect();
    let xa = matvec(&params.gates[2].w_x, x);
    let ha = matvec(&params.gates[2].w_h, &rh);
    let mut inner: Vec<f64> =
        xa.iter().zip(&ha).zip(&params.gates[2].b.data).map(|((a, b), c)| a + b + c).collect();
    if let Some(sp) = &params.spatial {
        let s: Vec<f64> = matvec(&sp.w_xs, x).iter().zip(&sp.b_s.data).map(|(a, b)| a + b).collect();
        for (gi, &si) in inner.iter_mut().zip(&s) {
            *gi *= si;
        }
    }
    let cand: Vec<f64> = inner.into_iter().map(f64::tanh).collect();
    let h: Vec<f64> =
        (0..cand.len()).map(|k| (1.0 - z[k]) * cand[k] + z[k] * h0[k]).collect();
    GruOracle { z, r, cand, h }
}

fn run_step(params: &CellParams, x: &Tensor, state: &CellState) -> (Tape, recurrent_cells::StepOutput) {
    let mut tape = Tape::new();
    let cell = CellRef::lease(&mut tape, params).unwrap();
    let xid = tape.param(x);
    let s0 = StateRef::lease(&mut tape, state);
    let out = cell.step(&mut tape, xid, s0).unwrap();
    (tape, out)
}

fn assert_close(tape: &Tape, id: tensor_core::TensorId, expect: &[f64], what: &str) {
    let got = tape.value(id);
    assert_eq!(got.len(), expect.len());
    for (a, b) in got.iter().zip(expect) {
        assert!((a - b).abs() < 1e-12, "{what}: {a} vs {b}");
    }
}

#[test]
fn lstm_family_matches_transcription() {
    for (case, kind) in [CellKind::Lstm, CellKind::SruLstm, CellKind::SruOurs].iter().enumerate() {
        for seed in 0..10u64 {
            let mut rng = substream(seed, "transcription", case as u64);
            let params = CellParams::init(*kind, 5, 7, &mut rng);
            let x = Tensor::uniform(vec![1, 5], -2.0, 2.0, &mut rng);
            let h0 = Tensor::uniform(vec![1, 7], -1.0, 1.0, &mut rng);
            let c0 = Tensor::uniform(vec![1, 7], -1.0, 1.0, &mut rng);
            let state = CellState { h: h0.clone(), c: Some(c0.clone()) };

            let oracle = lstm_family_oracle(&params, &x.data, &h0.data, &c0.data);
            let (tape, out) = run_step(&params, &x, &state);

            assert_close(&tape, out.gates.input.unwrap(), &oracle.i, "i");
            assert_close(&tape, out.gates.forget.unwrap(), &oracle.f, "f");
            assert_close(&tape, out.gates.output.unwrap(), &oracle.o, "o");
            assert_close(&tape, out.gates.cell.unwrap(), &oracle.g, "g");
            assert_close(&tape, out.state.c.unwrap(), &oracle.c, "c");
            assert_close(&tape, out.h, &oracle.h, "h");
        }
    }
}

#[test]
fn gru_family_matches_transcription() {
    for (case, kind) in [CellKind::Gru, CellKind::SruGru].iter().enumerate() {
        for seed in 0..10u64 {
            let mut rng = substream(seed, "transcription-gru", case as u64);
            let params = CellParams::init(*kind, 6, 4, &mut rng);
            let x = Tensor::uniform(vec![1, 6], -2.0, 2.0, &mut rng);
            let h0 = Tensor::uniform(vec![1, 4], -1.0, 1.0, &mut rng);
            let state = CellState { h: h0.clone(), c: None };

            let oracle = gru_family_oracle(&params, &x.data, &h0.data);
            let (tape, out) = run_step(&params, &x, &state);

            assert_close(&tape, out.gates.update.unwrap(), &oracle.z, "z");
            assert_close(&tape, out.gates.reset.unwrap(), &oracle.r, "r");
            assert_close(&tape, out.gates.candidate.unwrap(), &oracle.cand, "h~");
            assert_close(&tape, out.h, &oracle.h, "h");
        }
    }
}
