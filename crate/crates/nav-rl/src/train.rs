//! End-to-end training of two mutually-distilling policies over procedurally
//! generated mazes, plus deterministic evaluation.

use rand::Rng;
use serde::{Deserialize, Serialize};
use tensor_core::rng::substream;
use tensor_core::{NAdamState, TensorError};
use thiserror::Error;

use analysis::{success_by_distance, DistanceBuckets, EpisodeOutcome};

use crate::attention::ray_token_features;
use crate::env::{ray_angles, EnvConfig, NavEnv, Observation};
use crate::maze::{MazeKind, MazeSpec};
use crate::policy::{ActorNet, CriticNet, MemoryKind, NetRef, PlainState, StateIds};
use crate::ppo::{peer_outputs, ppo_update, PpoConfig};
use crate::reward::RewardConfig;
use crate::rollout::{collect_rollout, EnvPool, RolloutParams, RolloutRngs};
use tensor_core::Tape;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NavTrainConfig {
    pub memory: MemoryKind,
    pub embed: usize,
    pub heads: usize,
    pub hidden: usize,
    pub num_envs: usize,
    pub seg_len: usize,
    pub segments_per_iter: usize,
    pub iterations: usize,
    /// train a second policy and distill mutually
    pub mutual_learning: bool,
    pub privileged_critic: bool,
    pub maze_kinds: Vec<MazeKind>,
    pub maze_width: usize,
    pub maze_height: usize,
    pub cell_size: f64,
    pub goal_tolerance: f64,
    pub env: EnvConfig,
    pub reward: RewardConfig,
    pub ppo: PpoConfig,
}

impl Default for NavTrainConfig {
    fn default() -> Self {
        Self {
            memory: MemoryKind::SruOurs,
            embed: 32,
            heads: 4,
            hidden: 64,
            num_envs: 8,
            seg_len: 32,
            segments_per_iter: 3,
            iterations: 150,
            mutual_learning: true,
            privileged_critic: true,
            maze_kinds: vec![MazeKind::OpenRoom, MazeKind::PillarField, MazeKind::DeadEndTrap],
            maze_width: 15,
            maze_height: 15,
            cell_size: 0.5,
            goal_tolerance: 0.5,
            env: EnvConfig::default(),
            reward: RewardConfig::default(),
            ppo: PpoConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub mean_step_reward: f64,
    pub episode_success_rate: Option<f64>,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub dml: f64,
    pub mean_ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NavTrainReport {
    pub memory: String,
    pub seed: u64,
    pub iterations: Vec<IterationStats>,
}

/// Actor-critic pair with its optimizer state.
pub struct Agent {
    pub actor: ActorNet,
    pub critic: CriticNet,
    pub actor_opt: NAdamState,
    pub critic_opt: NAdamState,
}

impl Agent {
    pub fn new(config: &NavTrainConfig, rng: &mut impl Rng) -> Self {
        let rays = config.env.num_rays;
        let critic_rays =
            if config.privileged_critic { config.env.privileged_rays } else { config.env.num_rays };
        let actor =
            ActorNet::new(config.memory, rays, config.embed, config.heads, config.hidden, rng);
        let critic = CriticNet::new(
            config.memory,
            critic_rays,
            config.embed,
            config.heads,
            config.hidden,
            config.privileged_critic,
            rng,
        );
        let actor_lens: Vec<usize> = actor.named().iter().map(|(_, t)| t.numel()).collect();
        let critic_lens: Vec<usize> = critic.named().iter().map(|(_, t)| t.numel()).collect();
        Self {
            actor,
            critic,
            actor_opt: NAdamState::new(0.0, &actor_lens),
            critic_opt: NAdamState::new(0.0, &critic_lens),
        }
    }
}

#[derive(Debug, Error)]
pub enum NavError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("training diverged at iteration {iteration}")]
    Diverged { iteration: usize },
}

fn rollout_rngs(seed: u64, policy: u64) -> RolloutRngs {
    RolloutRngs {
        maze: substream(seed, "maze-gen", policy),
        obs_noise: substream(seed, "obs-noise", policy),
        action: substream(seed, "ppo-sample", policy),
        reward_check: substream(seed, "reward-check", policy),
        dropout: substream(seed, "tc-dropout", policy),
    }
}

/// Train one or two (DML) policies; returns the trained agents and per-policy
/// iteration stats.
pub fn train_nav(config: &NavTrainConfig, seed: u64) -> Result<(Vec<Agent>, Vec<NavTrainReport>), NavError> {
    let n_policies = if config.mutual_learning { 2 } else { 1 };
    let mut agents = Vec::with_capacity(n_policies);
    let mut pools = Vec::with_capacity(n_policies);
    let mut rngs = Vec::with_capacity(n_policies);
    let mut states: Vec<(PlainState, PlainState)> = Vec::with_capacity(n_policies);
    let mut reports = Vec::with_capacity(n_policies);

    for p in 0..n_policies {
        let mut init_rng = substream(seed, "nav-init", p as u64);
        let agent = Agent::new(config, &mut init_rng);
        let mut r = rollout_rngs(seed, p as u64);
        let pool = EnvPool::new(
            config.num_envs,
            config.env.clone(),
            config.maze_kinds.clone(),
            (config.maze_width, config.maze_height),
            config.cell_size,
            config.goal_tolerance,
            &mut r.maze,
        );
        states.push((agent.actor.zero_state(config.num_envs), agent.critic.zero_state(config.num_envs)));
        agents.push(agent);
        pools.push(pool);
        rngs.push(r);
        reports.push(NavTrainReport {
            memory: config.memory.name().to_string(),
            seed,
            iterations: Vec::new(),
        });
    }

    let rollout_params = RolloutParams {
        segments: config.segments_per_iter,
        seg_len: config.seg_len,
        dropout_p: config.ppo.dropout_p,
        gamma: config.ppo.gamma,
        gae_lambda: config.ppo.gae_lambda,
        advantage_norm: config.ppo.advantage_norm,
    };

    for iter in 0..config.iterations {
        // collect all rollouts first so peer outputs are pre-update
        let mut buffers = Vec::with_capacity(n_policies);
        for p in 0..n_policies {
            let (actor_state, critic_state) = &mut states[p];
            let buffer = collect_rollout(
                &agents[p].actor,
                &agents[p].critic,
                &mut pools[p],
                actor_state,
                critic_state,
                &config.reward,
                &rollout_params,
                &mut rngs[p],
            )?;
            buffers.push(buffer);
        }

        let peers: Vec<Option<crate::ppo::PeerOutputs>> = if n_policies == 2 {
            vec![
                Some(peer_outputs(&agents[1].actor, &buffers[0])?),
                Some(peer_outputs(&agents[0].actor, &buffers[1])?),
            ]
        } else {
            vec![None]
        };

        for p in 0..n_policies {
            let agent = &mut agents[p];
            agent.actor_opt.lr = config.ppo.lr;
            agent.critic_opt.lr = config.ppo.lr;
            let stats = ppo_update(
                &mut agent.actor,
                &mut agent.critic,
                &buffers[p],
                peers[p].as_ref(),
                &config.ppo,
                &mut agent.actor_opt,
                &mut agent.critic_opt,
            )
            .map_err(|e| match e {
                TensorError::NonFiniteGrad { .. } => NavError::Diverged { iteration: iter },
                other => NavError::Tensor(other),
            })?;

            let buffer = &buffers[p];
            let horizon = (config.segments_per_iter * config.seg_len * config.num_envs) as f64;
            reports[p].iterations.push(IterationStats {
                iteration: iter,
                mean_step_reward: buffer.reward_sum / horizon,
                episode_success_rate: if buffer.finished_episodes > 0 {
                    Some(buffer.successes as f64 / buffer.finished_episodes as f64)
                } else {
                    None
                },
                policy_loss: stats.policy_loss,
                value_loss: stats.value_loss,
                dml: stats.dml,
                mean_ratio: stats.mean_ratio,
            });
        }
    }
    Ok((agents, reports))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NavEvalReport {
    pub episodes: usize,
    pub success_rate: f64,
    pub mean_episode_steps: f64,
    pub buckets: DistanceBuckets,
}

/// Deterministic evaluation: mean action, no observation noise, no dropout;
/// episodes stop at the goal or at T_max.
pub fn evaluate_nav(
    actor: &ActorNet,
    mazes: &[MazeSpec],
    episodes_per_maze: usize,
    env_config: &EnvConfig,
    bucket_edges: &[f64],
    seed: u64,
) -> Result<NavEvalReport, NavError> {
    let mut outcomes = Vec::new();
    let mut steps_sum = 0usize;
    let mut eval_cfg = env_config.clone();
    eval_cfg.noise.enabled = false;
    let fan = ray_angles(eval_cfg.num_rays, eval_cfg.fov);

    for (mi, maze) in mazes.iter().enumerate() {
        for ep in 0..episodes_per_maze {
            let mut rng = substream(seed, "nav-eval", (mi * episodes_per_maze + ep) as u64);
            let mut env = NavEnv::new(maze.clone(), eval_cfg.clone(), &mut rng);
            let start_distance = env.goal_distance();
            let mut state = actor.zero_state(1);
            let mut success = false;
            let mut steps = 0;
            while !env.done() {
                let obs = env.observe_actor(&mut rng);
                let tokens = ray_token_features(&[obs.rays.clone()], &fan, eval_cfg.max_range);
                let mut tape = Tape::new();
                let actor_ref = NetRef::lease_actor(&mut tape, actor)?;
                let tok = tape.constant(vec![eval_cfg.num_rays, 3], tokens);
                let pg = tape.constant(vec![1, Observation::PROP_GOAL_DIM], obs.prop_goal().to_vec());
                let sids = StateIds::lease(&mut tape, &state, 1, actor.hidden);
                let out = actor_ref.step(&mut tape, tok, pg, sids, None, 1)?;
                let mean = tape.value(out.output).to_vec();
                state = out.state.extract(&tape);
                env.step([mean[0], mean[1]]);
                steps += 1;
                if env.state.reached_goal {
                    success = true;
                    break;
                }
            }
            steps_sum += steps;
            outcomes.push(EpisodeOutcome { distance: start_distance, success });
        }
    }

    let buckets = success_by_distance(&outcomes, bucket_edges).expect("valid bucket edges");
    let success_rate =
        outcomes.iter().filter(|o| o.success).count() as f64 / outcomes.len().max(1) as f64;
    Ok(NavEvalReport {
        episodes: outcomes.len(),
        success_rate,
        mean_episode_steps: steps_sum as f64 / outcomes.len().max(1) as f64,
        buckets,
    })
}

/// Cross-attention weights per step for one episode, as CSV rows
/// (step, head, ray_index, weight).
pub fn attention_trace_csv(
    actor: &ActorNet,
    maze: &MazeSpec,
    env_config: &EnvConfig,
    seed: u64,
) -> Result<String, NavError> {
    let mut eval_cfg = env_config.clone();
    eval_cfg.noise.enabled = false;
    let fan = ray_angles(eval_cfg.num_rays, eval_cfg.fov);
    let mut rng = substream(seed, "attn-trace", 0);
    let mut env = NavEnv::new(maze.clone(), eval_cfg.clone(), &mut rng);
    let mut state = actor.zero_state(1);
    let mut csv = String::from("step,head,ray_index,weight\n");
    let mut step_idx = 0;
    while !env.done() && !env.state.reached_goal {
        let obs = env.observe_actor(&mut rng);
        let tokens = ray_token_features(&[obs.rays.clone()], &fan, eval_cfg.max_range);
        let mut tape = Tape::new();
        let actor_ref = NetRef::lease_actor(&mut tape, actor)?;
        let tok = tape.constant(vec![eval_cfg.num_rays, 3], tokens);
        let pg = tape.constant(vec![1, Observation::PROP_GOAL_DIM], obs.prop_goal().to_vec());
        let sids = StateIds::lease(&mut tape, &state, 1, actor.hidden);
        let out = actor_ref.step(&mut tape, tok, pg, sids, None, 1)?;
        let weights = tape.value(out.trace.cross_weights);
        let heads = actor.attn.heads;
        let k = actor.attn.tokens;
        for h in 0..heads {
            for r in 0..k {
                csv.push_str(&format!("{},{},{},{}\n", step_idx, h, r, weights[h * k + r]));
            }
        }
        let mean = tape.value(out.output).to_vec();
        state = out.state.extract(&tape);
        env.step([mean[0], mean[1]]);
        step_idx += 1;
    }
    Ok(csv)
}
