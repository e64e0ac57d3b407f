//! Central finite-difference oracle for every differentiable op.
//!
//! The oracle perturbs each parameter element by ±h and recomputes the loss
//! from scratch; it never touches the tape's adjoint code.

use rand::Rng;
use tensor_core::rng::substream;
use tensor_core::{Tape, Tensor, TensorId};

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Check analytic grads of `build` (a scalar-loss graph over the given
/// parameters) against central differences.
fn check(params: &[Tensor], build: impl Fn(&mut Tape, &[TensorId]) -> TensorId) {
    let mut tape = Tape::new();
    let ids: Vec<TensorId> = params.iter().map(|p| tape.param(p)).collect();
    let loss = build(&mut tape, &ids);
    tape.backward(loss).unwrap();
    let analytic: Vec<Vec<f64>> = ids.iter().map(|&id| tape.grad(id)).collect();

    let eval = |ps: &[Tensor]| -> f64 {
        let mut t = Tape::new();
        let ids: Vec<TensorId> = ps.iter().map(|p| t.param(p)).collect();
        let loss = build(&mut t, &ids);
        t.value(loss)[0]
    };

    for pi in 0..params.len() {
        for ei in 0..params[pi].numel() {
            let mut plus = params.to_vec();
            let mut minus = params.to_vec();
            plus[pi].data[ei] += H;
            minus[pi].data[ei] -= H;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * H);
            let a = analytic[pi][ei];
            assert!(
                rel_err(a, numeric) < TOL,
                "param {pi} elem {ei}: analytic {a} vs numeric {numeric}"
            );
        }
    }
}

fn rand_tensor(shape: Vec<usize>, rng: &mut impl Rng) -> Tensor {
    Tensor::uniform(shape, -1.5, 1.5, rng).with_grad()
}

#[test]
fn ops_match_finite_differences() {
    for seed in 0..20u64 {
        let mut rng = substream(seed, "gradcheck", 0);
        let a = rand_tensor(vec![3, 4], &mut rng);
        let b = rand_tensor(vec![3, 4], &mut rng);
        let w = rand_tensor(vec![4, 2], &mut rng);
        let bias = rand_tensor(vec![4], &mut rng);

        check(&[a.clone(), b.clone()], |t, ids| {
            let s = t.add(ids[0], ids[1]).unwrap();
            let h = t.hadamard(s, ids[0]).unwrap();
            let d = t.sub(h, ids[1]).unwrap();
            t.mean_all(d)
        });

        check(&[a.clone(), w.clone()], |t, ids| {
            let y = t.matmul(ids[0], ids[1]).unwrap();
            let y = t.tanh(y);
            t.mean_all(y)
        });

        check(&[a.clone(), bias.clone()], |t, ids| {
            let y = t.add_bias(ids[0], ids[1]).unwrap();
            let y = t.sigmoid(y);
            t.sum_all(y)
        });

        check(&[a.clone()], |t, ids| {
            let y = t.softmax_last(ids[0]);
            let sq = t.square(y).unwrap();
            t.sum_all(sq)
        });

        check(&[a.clone()], |t, ids| {
            let y = t.affine(ids[0], -0.7, 0.3);
            let e = t.exp(y);
            t.mean_all(e)
        });

        check(&[a.clone(), b.clone()], |t, ids| {
            // keep denominator away from zero
            let sq = t.square(ids[1]).unwrap();
            let denom = t.affine(sq, 1.0, 0.5);
            let q = t.div(ids[0], denom).unwrap();
            t.mean_all(q)
        });

        check(&[a.clone()], |t, ids| {
            let sliced = t.slice_cols(ids[0], 1, 2).unwrap();
            let again = t.concat_cols(&[sliced, sliced]).unwrap();
            let y = t.tanh(again);
            t.mean_all(y)
        });

        check(&[a.clone()], |t, ids| {
            let tr = t.transpose(ids[0]).unwrap();
            let y = t.sum_last(tr);
            let sq = t.square(y).unwrap();
            t.sum_all(sq)
        });

        // positive input for ln
        let pos = Tensor::uniform(vec![2, 3], 0.5, 2.0, &mut rng).with_grad();
        check(&[pos], |t, ids| {
            let y = t.ln(ids[0]);
            t.mean_all(y)
        });

        let targets: Vec<f64> = (0..12).map(|_| f64::from(rng.random_range(0..=1))).collect();
        check(&[a.clone()], |t, ids| {
            let bce = t.bce_with_logits(ids[0], &targets).unwrap();
            t.mean_all(bce)
        });

        // minimum/clamp/relu away from their kinks
        let lo = Tensor::uniform(vec![2, 3], -2.0, -0.2, &mut rng).with_grad();
        let hi = Tensor::uniform(vec![2, 3], 0.2, 2.0, &mut rng).with_grad();
        check(&[lo.clone(), hi.clone()], |t, ids| {
            let m = t.minimum(ids[0], ids[1]).unwrap();
            t.mean_all(m)
        });
        check(&[hi.clone()], |t, ids| {
            let c = t.clamp(ids[0], -0.1, 0.19);
            t.sum_all(c)
        });
        check(&[hi], |t, ids| {
            let r = t.relu(ids[0]);
            t.mean_all(r)
        });
    }
}

#[test]
fn batched_attention_ops_match_finite_differences() {
    for seed in 0..20u64 {
        let mut rng = substream(seed, "gradcheck-bmm", 0);
        let (batch, seq, heads, hd) = (2, 3, 2, 2);
        let x = rand_tensor(vec![batch * seq, heads * hd], &mut rng);
        let y = rand_tensor(vec![batch * seq, heads * hd], &mut rng);

        check(&[x.clone(), y.clone()], |t, ids| {
            let q = t.split_heads(ids[0], batch, seq, heads).unwrap();
            let k = t.split_heads(ids[1], batch, seq, heads).unwrap();
            let scores = t.bmm(q, k, true).unwrap();
            let scaled = t.scale(scores, 1.0 / (hd as f64).sqrt());
            let attn = t.softmax_last(scaled);
            let v = t.split_heads(ids[1], batch, seq, heads).unwrap();
            let out = t.bmm(attn, v, false).unwrap();
            let merged = t.merge_heads(out, batch, seq, heads).unwrap();
            let sq = t.square(merged).unwrap();
            t.mean_all(sq)
        });
    }
}

#[test]
fn three_layer_net_matches_finite_differences() {
    // Random tanh MLP: grads against the oracle at h = 1e-5, fp64.
    for seed in 0..20u64 {
        let mut rng = substream(seed, "gradcheck-mlp", 0);
        let x = Tensor::uniform(vec![4, 5], -1.0, 1.0, &mut rng);
        let target = Tensor::uniform(vec![4, 3], -1.0, 1.0, &mut rng);
        let w1 = rand_tensor(vec![5, 8], &mut rng);
        let b1 = rand_tensor(vec![8], &mut rng);
        let w2 = rand_tensor(vec![8, 8], &mut rng);
        let b2 = rand_tensor(vec![8], &mut rng);
        let w3 = rand_tensor(vec![8, 3], &mut rng);
        let b3 = rand_tensor(vec![3], &mut rng);

        check(&[w1, b1, w2, b2, w3, b3], |t, ids| {
            let xid = t.param(&x);
            let tid = t.param(&target);
            let h1 = t.matmul(xid, ids[0]).unwrap();
            let h1 = t.add_bias(h1, ids[1]).unwrap();
            let h1 = t.tanh(h1);
            let h2 = t.matmul(h1, ids[2]).unwrap();
            let h2 = t.add_bias(h2, ids[3]).unwrap();
            let h2 = t.tanh(h2);
            let y = t.matmul(h2, ids[4]).unwrap();
            let y = t.add_bias(y, ids[5]).unwrap();
            let err = t.sub(y, tid).unwrap();
            let sq = t.square(err).unwrap();
            t.mean_all(sq)
        });
    }
}
