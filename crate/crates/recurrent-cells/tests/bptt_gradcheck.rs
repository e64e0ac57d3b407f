//! Finite-difference check of BPTT gradients through a T=5 unroll for every
//! cell kind.

use recurrent_cells::{unroll, CellKind, CellParams, CellRef, CellState, StateRef};
use tensor_core::rng::substream;
use tensor_core::{Tape, Tensor};

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn loss_for(params: &CellParams, xs: &[Tensor], state0: &CellState, target: &[f64]) -> f64 {
    let mut tape = Tape::new();
    let cell = CellRef::lease(&mut tape, params).unwrap();
    let ids: Vec<_> = xs.iter().map(|x| tape.param(x)).collect();
    let s0 = StateRef::lease(&mut tape, state0);
    let out = unroll(&mut tape, &cell, &ids, s0).unwrap();
    let t = tape.constant(vec![1, target.len()], target.to_vec());
    let err = tape.sub(out.final_h, t).unwrap();
    let sq = tape.square(err).unwrap();
    let loss = tape.mean_all(sq);
    tape.value(loss)[0]
}

#[test]
fn bptt_gradients_match_finite_differences() {
    let (t_steps, in_dim, hidden) = (5usize, 3usize, 4usize);
    for (case, kind) in CellKind::ALL.iter().enumerate() {
        for seed in 0..20u64 {
            let mut rng = substream(seed, "bptt", case as u64);
            let params = CellParams::init(*kind, in_dim, hidden, &mut rng);
            let xs: Vec<Tensor> =
                (0..t_steps).map(|_| Tensor::uniform(vec![1, in_dim], -1.0, 1.0, &mut rng)).collect();
            let state0 = CellState::zeros(*kind, 1, hidden);
            let target: Vec<f64> = (0..hidden).map(|_| {
                use rand::Rng;
                rng.random_range(-0.5..0.5)
            }).collect();

            // analytic grads
            let mut tape = Tape::new();
            let cell = CellRef::lease(&mut tape, &params).unwrap();
            let ids: Vec<_> = xs.iter().map(|x| tape.param(x)).collect();
            let s0 = StateRef::lease(&mut tape, &state0);
            let out = unroll(&mut tape, &cell, &ids, s0).unwrap();
            let tgt = tape.constant(vec![1, hidden], target.clone());
            let err = tape.sub(out.final_h, tgt).unwrap();
            let sq = tape.square(err).unwrap();
            let loss = tape.mean_all(sq);
            tape.backward(loss).unwrap();
            let analytic: Vec<Vec<f64>> =
                cell.param_ids().iter().map(|&id| tape.grad(id)).collect();

            // finite differences per parameter element
            let named: Vec<String> = params.named().iter().map(|(n, _)| n.clone()).collect();
            for (pi, name) in named.iter().enumerate() {
                let n_elems = params.named()[pi].1.numel();
                for ei in 0..n_elems {
                    let mut plus = params.clone();
                    plus.named_mut()[pi].1.data[ei] += H;
                    let mut minus = params.clone();
                    minus.named_mut()[pi].1.data[ei] -= H;
                    let numeric = (loss_for(&plus, &xs, &state0, &target)
                        - loss_for(&minus, &xs, &state0, &target))
                        / (2.0 * H);
                    let a = analytic[pi][ei];
                    let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
                    assert!(
                        rel < TOL,
                        "{kind} seed {seed} {name}[{ei}]: analytic {a} vs numeric {numeric}"
                    );
                }
            }
        }
    }
}
