//! Dual-loss training on freshly sampled episodes and per-step-index error
//! evaluation.

use rand::Rng;
use recurrent_cells::CellKind;
use serde::{Deserialize, Serialize};
use tensor_core::rng::substream;
use tensor_core::{LrSchedule, NAdamState, Tape, TensorError};
use thiserror::Error;

use crate::episode::{generate_episode_with, LandmarkEpisode};
use crate::pose::MotionModel;
use crate::net::{batch_targets, BenchmarkNet};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub t_steps: usize,
    pub mlp_dim: usize,
    pub hidden_dim: usize,
    pub batch_size: usize,
    pub batches_per_epoch: usize,
    pub epochs: u64,
    pub lr_initial: f64,
    pub lr_reduced: f64,
    pub lr_switch_epoch: u64,
    pub eval_episodes: usize,
    /// Training-loss blend: total = spatial_loss_weight·MSE +
    /// temporal_loss_weight·BCE. Reported metrics always use raw MSE/BCE.
    pub spatial_loss_weight: f64,
    pub temporal_loss_weight: f64,
    /// Added to the forget-gate bias (update gate for GRU family) after init;
    /// positive values start cells in a state-retaining regime.
    pub retention_bias_init: f64,
    /// ego-motion orientation sampling
    pub motion_model: MotionModel,
    /// hidden width of the output head (None = single linear layer)
    pub output_mlp_hidden: Option<usize>,
    /// constant scale on regression outputs
    pub output_scale: f64,
    /// tanh on the input projection (false = linear)
    pub input_tanh: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            t_steps: 15,
            mlp_dim: 128,
            hidden_dim: 128,
            batch_size: 256,
            batches_per_epoch: 20,
            epochs: 1000,
            lr_initial: 2e-3,
            lr_reduced: 4e-4,
            lr_switch_epoch: 800,
            eval_episodes: 1000,
            spatial_loss_weight: 1.0,
            temporal_loss_weight: 1.0,
            retention_bias_init: 0.0,
            motion_model: MotionModel::YawPlanar,
            output_mlp_hidden: Some(128),
            output_scale: 5.0,
            input_tanh: true,
        }
    }
}

impl BenchConfig {
    pub fn schedule(&self) -> LrSchedule {
        LrSchedule { initial: self.lr_initial, reduced: self.lr_reduced, switch_epoch: self.lr_switch_epoch }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: u64,
    pub spatial_mse: f64,
    pub temporal_bce: f64,
    pub temporal_acc: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalStats {
    pub spatial_mse: f64,
    pub temporal_acc: f64,
    /// Mean Euclidean landmark error per observation step index, ordered from
    /// the final step back to the first.
    pub per_step_error_final_to_initial: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub cell: String,
    pub seed: u64,
    pub epochs: Vec<EpochStats>,
    pub final_eval: EvalStats,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training diverged at epoch {epoch} batch {batch}: loss {loss}")]
    Diverged { epoch: u64, batch: usize, loss: f64 },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

fn batch_accuracy(logits: &[f64], labels: &[f64]) -> f64 {
    let correct = logits
        .iter()
        .zip(labels)
        .filter(|(&z, &y)| (z > 0.0) == (y > 0.5))
        .count();
    correct as f64 / labels.len() as f64
}

/// Train one cell kind on freshly sampled episodes every batch.
pub fn train_benchmark(kind: CellKind, config: &BenchConfig, seed: u64) -> Result<TrainReport, TrainError> {
    let mut init_rng = substream(seed, "bench-init", 0);
    let mut net = BenchmarkNet::new(
        kind,
        config.t_steps,
        config.mlp_dim,
        config.hidden_dim,
        config.output_mlp_hidden,
        config.output_scale,
        config.input_tanh,
        &mut init_rng,
    );
    if config.retention_bias_init != 0.0 {
        let gate = if kind.is_lstm_family() { 1 } else { 0 }; // forget / update
        for b in net.cell.gates[gate].b.data.iter_mut() {
            *b += config.retention_bias_init;
        }
    }
    let mut episode_rng = substream(seed, "bench-episodes", 0);
    let schedule = config.schedule();

    let lens: Vec<usize> = net.named().iter().map(|(_, t)| t.numel()).collect();
    let mut opt = NAdamState::new(schedule.at(0), &lens);

    let mut epochs = Vec::with_capacity(config.epochs as usize);
    for epoch in 0..config.epochs {
        opt.lr = schedule.at(epoch);
        let mut sums = (0.0, 0.0, 0.0);
        for batch in 0..config.batches_per_epoch {
            let episodes: Vec<LandmarkEpisode> = (0..config.batch_size)
                .map(|_| generate_episode_with(config.motion_model, config.t_steps, &mut episode_rng))
                .collect();
            let (coord_targets, label_targets) = batch_targets(&episodes);

            let mut tape = Tape::new();
            let fwd = net.forward(&mut tape, &episodes)?;
            let tgt = tape.constant(vec![episodes.len(), 3 * config.t_steps], coord_targets);
            let err = tape.sub(fwd.coords, tgt)?;
            let sq = tape.square(err)?;
            let spatial = tape.mean_all(sq);
            let bce_elems = tape.bce_with_logits(fwd.logits, &label_targets)?;
            let temporal = tape.mean_all(bce_elems);
            let spatial_w = tape.scale(spatial, config.spatial_loss_weight);
            let temporal_w = tape.scale(temporal, config.temporal_loss_weight);
            let total = tape.add(spatial_w, temporal_w)?;

            let loss_v = tape.value(total)[0];
            if !loss_v.is_finite() {
                return Err(TrainError::Diverged { epoch, batch, loss: loss_v });
            }

            tape.backward(total)?;
            let grads: Vec<Vec<f64>> = fwd.param_ids.iter().map(|&id| tape.grad(id)).collect();
            let mut named = net.named_mut();
            let mut refs: Vec<(&str, &mut tensor_core::Tensor)> =
                named.iter_mut().map(|(n, t)| (n.as_str(), &mut **t)).collect();
            tensor_core::nadam_step(&mut refs, &grads, &mut opt)?;

            sums.0 += tape.value(spatial)[0];
            sums.1 += tape.value(temporal)[0];
            sums.2 += batch_accuracy(tape.value(fwd.logits), &label_targets);
        }
        let nb = config.batches_per_epoch as f64;
        epochs.push(EpochStats {
            epoch,
            spatial_mse: sums.0 / nb,
            temporal_bce: sums.1 / nb,
            temporal_acc: sums.2 / nb,
        });
    }

    let mut eval_rng = substream(seed, "bench-eval", 0);
    let eval_episodes: Vec<LandmarkEpisode> = (0..config.eval_episodes)
        .map(|_| generate_episode_with(config.motion_model, config.t_steps, &mut eval_rng))
        .collect();
    let final_eval = evaluate(&net, &eval_episodes, config.batch_size)?;

    Ok(TrainReport { cell: kind.to_string(), seed, epochs, final_eval })
}

/// Held-out evaluation: spatial MSE, exact temporal accuracy, and per-step
/// mean Euclidean error ordered final → initial.
pub fn evaluate(
    net: &BenchmarkNet,
    episodes: &[LandmarkEpisode],
    batch_size: usize,
) -> Result<EvalStats, TrainError> {
    let t_steps = net.t_steps;
    let mut sq_sum = 0.0;
    let mut sq_count = 0usize;
    let mut correct = 0usize;
    let mut label_count = 0usize;
    let mut step_err_sums = vec![0.0; t_steps];

    for chunk in episodes.chunks(batch_size) {
        let mut tape = Tape::new();
        let fwd = net.forward(&mut tape, chunk)?;
        let coords = tape.value(fwd.coords);
        let logits = tape.value(fwd.logits);
        let (coord_targets, label_targets) = batch_targets(chunk);

        for (c, t) in coords.iter().zip(&coord_targets) {
            sq_sum += (c - t) * (c - t);
        }
        sq_count += coord_targets.len();
        correct += logits
            .iter()
            .zip(&label_targets)
            .filter(|(&z, &y)| (z > 0.0) == (y > 0.5))
            .count();
        label_count += label_targets.len();

        let width = 3 * t_steps;
        for (b, _) in chunk.iter().enumerate() {
            for s in 0..t_steps {
                let off = b * width + 3 * s;
                let toff = b * width + 3 * s;
                let dx = coords[off] - coord_targets[toff];
                let dy = coords[off + 1] - coord_targets[toff + 1];
                let dz = coords[off + 2] - coord_targets[toff + 2];
                step_err_sums[s] += (dx * dx + dy * dy + dz * dz).sqrt();
            }
        }
    }

    let n = episodes.len() as f64;
    let mut per_step: Vec<f64> = step_err_sums.iter().map(|s| s / n).collect();
    per_step.reverse(); // final step first
    Ok(EvalStats {
        spatial_mse: sq_sum / sq_count as f64,
        temporal_acc: correct as f64 / label_count as f64,
        per_step_error_final_to_initial: per_step,
    })
}

/// Per-step-index error of a trained net on freshly generated episodes.
pub fn evaluate_spatial_error_by_step(
    net: &BenchmarkNet,
    model: MotionModel,
    count: usize,
    batch_size: usize,
    rng: &mut impl Rng,
) -> Result<Vec<f64>, TrainError> {
    let episodes: Vec<LandmarkEpisode> =
        (0..count).map(|_| generate_episode_with(model, net.t_steps, rng)).collect();
    Ok(evaluate(net, &episodes, batch_size)?.per_step_error_final_to_initial)
}

/// CSV loss curves: epoch, spatial_mse, temporal_bce, temporal_acc.
pub fn loss_curves_csv(report: &TrainReport) -> String {
    let mut out = String::from("epoch,spatial_mse,temporal_bce,temporal_acc\n");
    for e in &report.epochs {
        out.push_str(&format!("{},{},{},{}\n", e.epoch, e.spatial_mse, e.temporal_bce, e.temporal_acc));
    }
    out
}

/// CSV per-step errors: step_index (T..1), mean_error.
pub fn per_step_error_csv(report: &TrainReport) -> String {
    let mut out = String::from("step_index,mean_error\n");
    let t = report.final_eval.per_step_error_final_to_initial.len();
    for (i, err) in report.final_eval.per_step_error_final_to_initial.iter().enumerate() {
        out.push_str(&format!("{},{}\n", t - i, err));
    }
    out
}
