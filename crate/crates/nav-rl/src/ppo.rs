//! Clipped-surrogate PPO over replayed recurrent segments, with deep mutual
//! learning (symmetric Gaussian KL toward a peer policy) and the rollout's
//! frozen TC-dropout masks.

use serde::{Deserialize, Serialize};
use tensor_core::{NAdamState, Tape, TensorError, TensorId};

use crate::env::Observation;
use crate::policy::{ActorNet, CriticNet, NetRef, StateIds, ACTION_DIM};
use crate::rollout::RolloutBuffer;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub clip: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub epochs: usize,
    pub lr: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    /// DML coefficient κ
    pub dml_coef: f64,
    pub max_grad_norm: f64,
    pub dropout_p: f64,
    pub advantage_norm: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip: 0.2,
            gamma: 0.99,
            gae_lambda: 0.95,
            epochs: 4,
            lr: 3e-4,
            value_coef: 0.5,
            entropy_coef: 0.003,
            dml_coef: 0.5,
            max_grad_norm: 1.0,
            dropout_p: 0.1,
            advantage_norm: true,
        }
    }
}

/// Peer action distributions cached over one buffer (constant during the
/// update): means per step [B·2] and the peer's log-std.
#[derive(Debug, Clone)]
pub struct PeerOutputs {
    pub means: Vec<Vec<f64>>,
    pub log_std: Vec<f64>,
}

/// Evaluate a peer actor over a buffer's stored observations (eval mode, no
/// dropout, zero initial state per segment).
pub fn peer_outputs(peer: &ActorNet, buffer: &RolloutBuffer) -> Result<PeerOutputs, TensorError> {
    let batch = buffer.batch;
    let mut means = Vec::with_capacity(buffer.steps.len());
    let mut state = peer.zero_state(batch);
    for (t, step) in buffer.steps.iter().enumerate() {
        if t % buffer.seg_len == 0 {
            state = peer.zero_state(batch);
        }
        let mut tape = Tape::new();
        let peer_ref = NetRef::lease_actor(&mut tape, peer)?;
        let tok = tape.constant(vec![batch * peer.attn.tokens, 3], step.tokens.clone());
        let pg = tape.constant(vec![batch, Observation::PROP_GOAL_DIM], step.prop_goal.clone());
        let sids = StateIds::lease(&mut tape, &state, batch, peer.hidden);
        let out = peer_ref.step(&mut tape, tok, pg, sids, None, batch)?;
        means.push(tape.value(out.output).to_vec());
        state = out.state.extract(&tape);
        state.mask_rows(&step.dones, peer.hidden);
    }
    Ok(PeerOutputs { means, log_std: peer.log_std.data.clone() })
}

pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub dml: f64,
    pub mean_ratio: f64,
}

fn clip_grads(grads: &mut [Vec<f64>], max_norm: f64) {
    let norm: f64 = grads.iter().flat_map(|g| g.iter()).map(|v| v * v).sum::<f64>().sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            g.iter_mut().for_each(|v| *v *= scale);
        }
    }
}

/// On-tape symmetric KL between the stepped Gaussian (mean, log_std ids) and
/// a constant peer Gaussian; returns a [B,1] per-row KL.
pub fn sym_kl_on_tape(
    tape: &mut Tape,
    mean: TensorId,
    log_std: TensorId,
    peer_mean: &[f64],
    peer_log_std: &[f64],
    batch: usize,
) -> Result<TensorId, TensorError> {
    // sym KL per dim = ½[(v_a + d²)/(2 v_b) + (v_b + d²)/(2 v_a)] − ½
    let mb = tape.constant(vec![batch, ACTION_DIM], peer_mean.to_vec());
    let vb_data: Vec<f64> = (0..batch * ACTION_DIM)
        .map(|i| (2.0 * peer_log_std[i % ACTION_DIM]).exp())
        .collect();
    let inv_2vb_data: Vec<f64> = vb_data.iter().map(|v| 1.0 / (2.0 * v)).collect();
    let vb = tape.constant(vec![batch, ACTION_DIM], vb_data);
    let inv_2vb = tape.constant(vec![batch, ACTION_DIM], inv_2vb_data);

    let two_ls = tape.scale(log_std, 2.0);
    let va = tape.exp(two_ls);
    let diff = tape.sub(mean, mb)?;
    let diff_sq = tape.square(diff)?;

    let num_a = tape.add(va, diff_sq)?;
    let term_ab = tape.hadamard(num_a, inv_2vb)?;
    let num_b = tape.add(vb, diff_sq)?;
    let two_va = tape.scale(va, 2.0);
    let term_ba = tape.div(num_b, two_va)?;

    let sum = tape.add(term_ab, term_ba)?;
    let halved = tape.affine(sum, 0.5, -0.5);
    Ok(tape.sum_last(halved))
}

/// One PPO pass (all epochs × segments) for one policy against its buffer.
#[allow(clippy::too_many_arguments)]
pub fn ppo_update(
    actor: &mut ActorNet,
    critic: &mut CriticNet,
    buffer: &RolloutBuffer,
    peer: Option<&PeerOutputs>,
    config: &PpoConfig,
    actor_opt: &mut NAdamState,
    critic_opt: &mut NAdamState,
) -> Result<UpdateStats, TensorError> {
    let batch = buffer.batch;
    let n_segments = buffer.segments.len();
    let mut stats = UpdateStats { policy_loss: 0.0, value_loss: 0.0, entropy: 0.0, dml: 0.0, mean_ratio: 0.0 };
    let mut stat_count = 0.0;

    for _epoch in 0..config.epochs {
        for seg in 0..n_segments {
            let seg_rec = &buffer.segments[seg];
            let mut tape = Tape::new();
            let actor_ref = NetRef::lease_actor(&mut tape, actor)?;
            let critic_ref = NetRef::lease_critic(&mut tape, critic)?;
            let mut a_state = StateIds::lease(&mut tape, &seg_rec.actor_state, batch, actor.hidden);
            let mut c_state = StateIds::lease(&mut tape, &seg_rec.critic_state, batch, critic.hidden);

            let mut surrogate_terms = Vec::with_capacity(buffer.seg_len);
            let mut value_terms = Vec::with_capacity(buffer.seg_len);
            let mut dml_terms = Vec::with_capacity(buffer.seg_len);
            let mut ratio_probe = 0.0;

            for local_t in 0..buffer.seg_len {
                let t = seg * buffer.seg_len + local_t;
                let step = &buffer.steps[t];

                let tok = tape.constant(vec![batch * actor.attn.tokens, 3], step.tokens.clone());
                let pg = tape.constant(vec![batch, Observation::PROP_GOAL_DIM], step.prop_goal.clone());
                let a_out = actor_ref.step(&mut tape, tok, pg, a_state, Some(&seg_rec.dropout_mask), batch)?;
                a_state = a_out.state.mask_rows(&mut tape, &step.dones, actor.hidden)?;

                let ctok = tape.constant(vec![batch * critic.attn.tokens, 3], step.critic_tokens.clone());
                let cpg = tape.constant(vec![batch, Observation::PROP_GOAL_DIM], step.critic_prop_goal.clone());
                let c_out = critic_ref.step(&mut tape, ctok, cpg, c_state, None, batch)?;
                c_state = c_out.state.mask_rows(&mut tape, &step.dones, critic.hidden)?;

                // log-prob of the stored actions under the replayed Gaussian
                let mean = a_out.output;
                let log_std = a_out.log_std.expect("actor carries log_std");
                let actions = tape.constant(vec![batch, ACTION_DIM], step.actions.clone());
                let diff = tape.sub(actions, mean)?;
                let neg_ls = tape.scale(log_std, -1.0);
                let inv_std = tape.exp(neg_ls);
                let z = tape.hadamard(diff, inv_std)?;
                let z_sq = tape.square(z)?;
                let half_z_sq = tape.scale(z_sq, -0.5);
                const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;
                let ls_term = tape.affine(log_std, -1.0, -HALF_LN_2PI);
                let per_dim = tape.add(half_z_sq, ls_term)?;
                let logp = tape.sum_last(per_dim);

                let logp_old = tape.constant(vec![batch, 1], step.log_probs.clone());
                let log_ratio = tape.sub(logp, logp_old)?;
                let ratio = tape.exp(log_ratio);
                ratio_probe += tape.value(ratio).iter().sum::<f64>() / batch as f64;

                let adv_data: Vec<f64> =
                    (0..batch).map(|b| buffer.advantages[t * batch + b]).collect();
                let adv = tape.constant(vec![batch, 1], adv_data);
                let unclipped = tape.hadamard(ratio, adv)?;
                let clipped_ratio = tape.clamp(ratio, 1.0 - config.clip, 1.0 + config.clip);
                let clipped = tape.hadamard(clipped_ratio, adv)?;
                let surrogate = tape.minimum(unclipped, clipped)?;
                surrogate_terms.push(tape.mean_all(surrogate));

                let ret_data: Vec<f64> = (0..batch).map(|b| buffer.returns[t * batch + b]).collect();
                let ret = tape.constant(vec![batch, 1], ret_data);
                let verr = tape.sub(c_out.output, ret)?;
                let vsq = tape.square(verr)?;
                value_terms.push(tape.mean_all(vsq));

                if let Some(peer) = peer {
                    let kl = sym_kl_on_tape(&mut tape, mean, log_std, &peer.means[t], &peer.log_std, batch)?;
                    dml_terms.push(tape.mean_all(kl));
                }
            }

            let mean_of = |tape: &mut Tape, terms: &[TensorId]| -> Result<TensorId, TensorError> {
                let mut acc = terms[0];
                for &t in &terms[1..] {
                    acc = tape.add(acc, t)?;
                }
                Ok(tape.scale(acc, 1.0 / terms.len() as f64))
            };
            let surrogate_mean = mean_of(&mut tape, &surrogate_terms)?;
            let value_mean = mean_of(&mut tape, &value_terms)?;

            // Gaussian entropy from log_std alone: Σ_d (½(1+ln2π) + log_std_d)
            let ls_id = actor_ref.log_std_id().expect("actor carries log_std");
            let ls_sum = tape.sum_all(ls_id);
            let entropy = tape.affine(ls_sum, 1.0, ACTION_DIM as f64 * 0.5 * (1.0 + (2.0 * std::f64::consts::PI).ln()));

            let neg_surrogate = tape.scale(surrogate_mean, -1.0);
            let v_term = tape.scale(value_mean, config.value_coef);
            let ent_term = tape.scale(entropy, -config.entropy_coef);
            let mut loss = tape.add(neg_surrogate, v_term)?;
            loss = tape.add(loss, ent_term)?;
            let dml_mean = if dml_terms.is_empty() {
                None
            } else {
                let m = mean_of(&mut tape, &dml_terms)?;
                let scaled = tape.scale(m, config.dml_coef);
                loss = tape.add(loss, scaled)?;
                Some(m)
            };

            let loss_v = tape.value(loss)[0];
            if !loss_v.is_finite() {
                return Err(TensorError::NonFiniteGrad {
                    name: "ppo loss".into(),
                    index: 0,
                    value: loss_v,
                });
            }
            tape.backward(loss)?;

            let mut actor_grads: Vec<Vec<f64>> =
                actor_ref.param_ids.iter().map(|&id| tape.grad(id)).collect();
            let mut critic_grads: Vec<Vec<f64>> =
                critic_ref.param_ids.iter().map(|&id| tape.grad(id)).collect();
            clip_grads(&mut actor_grads, config.max_grad_norm);
            clip_grads(&mut critic_grads, config.max_grad_norm);

            let mut actor_named = actor.named_mut();
            let mut actor_refs: Vec<(&str, &mut tensor_core::Tensor)> =
                actor_named.iter_mut().map(|(n, t)| (n.as_str(), &mut **t)).collect();
            tensor_core::nadam_step(&mut actor_refs, &actor_grads, actor_opt)?;
            let mut critic_named = critic.named_mut();
            let mut critic_refs: Vec<(&str, &mut tensor_core::Tensor)> =
                critic_named.iter_mut().map(|(n, t)| (n.as_str(), &mut **t)).collect();
            tensor_core::nadam_step(&mut critic_refs, &critic_grads, critic_opt)?;

            stats.policy_loss += tape.value(surrogate_mean)[0];
            stats.value_loss += tape.value(value_mean)[0];
            stats.entropy += tape.value(entropy)[0];
            if let Some(d) = dml_mean {
                stats.dml += tape.value(d)[0];
            }
            stats.mean_ratio += ratio_probe / buffer.seg_len as f64;
            stat_count += 1.0;
        }
    }

    stats.policy_loss /= stat_count;
    stats.value_loss /= stat_count;
    stats.entropy /= stat_count;
    stats.dml /= stat_count;
    stats.mean_ratio /= stat_count;
    Ok(stats)
}
