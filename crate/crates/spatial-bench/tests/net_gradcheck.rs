//! Finite-difference check of the full benchmark loss (input MLP → cell →
//! output head), which also pins the lease order of `param_ids` against
//! `named_mut`.

use recurrent_cells::CellKind;
use spatial_bench::{batch_targets, generate_episode_with, BenchmarkNet, MotionModel};
use tensor_core::rng::substream;
use tensor_core::Tape;

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

#[test]
fn full_benchmark_loss_matches_finite_differences() {
    for (case, kind) in [CellKind::SruOurs, CellKind::Gru].iter().enumerate() {
        let mut rng = substream(case as u64, "netgrad", 0);
        let net = BenchmarkNet::new(*kind, 3, 6, 5, Some(6), 2.0, true, &mut rng);
        let episodes: Vec<_> =
            (0..2).map(|_| generate_episode_with(MotionModel::YawPlanar, 3, &mut rng)).collect();
        let (coord_targets, label_targets) = batch_targets(&episodes);

        let loss_of = |net: &BenchmarkNet| -> f64 {
            let mut tape = Tape::new();
            let fwd = net.forward(&mut tape, &episodes).unwrap();
            let tgt = tape.constant(vec![2, 9], coord_targets.clone());
            let err = tape.sub(fwd.coords, tgt).unwrap();
            let sq = tape.square(err).unwrap();
            let spatial = tape.mean_all(sq);
            let bce = tape.bce_with_logits(fwd.logits, &label_targets).unwrap();
            let temporal = tape.mean_all(bce);
            let total = tape.add(spatial, temporal).unwrap();
            tape.value(total)[0]
        };

        // analytic grads in param_ids order
        let mut tape = Tape::new();
        let fwd = net.forward(&mut tape, &episodes).unwrap();
        let tgt = tape.constant(vec![2, 9], coord_targets.clone());
        let err = tape.sub(fwd.coords, tgt).unwrap();
        let sq = tape.square(err).unwrap();
        let spatial = tape.mean_all(sq);
        let bce = tape.bce_with_logits(fwd.logits, &label_targets).unwrap();
        let temporal = tape.mean_all(bce);
        let total = tape.add(spatial, temporal).unwrap();
        tape.backward(total).unwrap();
        let analytic: Vec<Vec<f64>> = fwd.param_ids.iter().map(|&id| tape.grad(id)).collect();

        // numeric grads against named_mut order: every parameter, striding
        // elements to keep runtime sane
        let n_params = net.named().len();
        for pi in 0..n_params {
            let numel = net.named()[pi].1.numel();
            for ei in (0..numel).step_by(5) {
                let mut plus = net.clone();
                plus.named_mut()[pi].1.data[ei] += H;
                let mut minus = net.clone();
                minus.named_mut()[pi].1.data[ei] -= H;
                let numeric = (loss_of(&plus) - loss_of(&minus)) / (2.0 * H);
                let a = analytic[pi][ei];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
                assert!(
                    rel < TOL,
                    "{kind} param {} ({}) elem {ei}: analytic {a} vs numeric {numeric}",
                    pi,
                    net.named()[pi].0
                );
            }
        }
    }
}
