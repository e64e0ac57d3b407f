//! Batched on-policy rollout across parallel environments, with recurrent
//! states stored at segment boundaries and dropout masks frozen per segment.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use tensor_core::Tape;

use crate::attention::ray_token_features;
use crate::env::{ray_angles, scan_angles, EnvConfig, NavEnv, Observation};
use crate::maze::{generate, MazeKind, MazeSpec};
use crate::policy::{gaussian_log_prob, tc_dropout_mask, ActorNet, CriticNet, NetRef, PlainState, StateIds, ACTION_DIM};
use crate::reward::{combined_reward, pen_reward, reg_reward, task_reward, RewardConfig};

/// Everything one PPO update needs from one rollout.
#[derive(Debug, Clone)]
pub struct RolloutBuffer {
    pub batch: usize,
    pub seg_len: usize,
    pub steps: Vec<StepRecord>,
    pub segments: Vec<SegmentRecord>,
    /// value bootstrap for the state after the last step, zeroed on done
    pub bootstrap_values: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    /// episode stats accumulated during the rollout
    pub finished_episodes: usize,
    pub successes: usize,
    pub reward_sum: f64,
}

#[derive(Debug, Clone)]
pub struct StepRecord {
    /// actor ray tokens, [B·K·3]
    pub tokens: Vec<f64>,
    /// actor proprio+goal, [B·P]
    pub prop_goal: Vec<f64>,
    /// critic ray tokens, [B·Kc·3]
    pub critic_tokens: Vec<f64>,
    /// critic proprio+goal (clean), [B·P]
    pub critic_prop_goal: Vec<f64>,
    /// [B·2]
    pub actions: Vec<f64>,
    /// [B]
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct SegmentRecord {
    pub actor_state: PlainState,
    pub critic_state: PlainState,
    /// frozen TC-dropout mask, [B·hidden], already inverse-scaled
    pub dropout_mask: Vec<f64>,
}

/// Per-policy random streams, split by purpose so consumers never perturb
/// each other.
pub struct RolloutRngs {
    pub maze: ChaCha12Rng,
    pub obs_noise: ChaCha12Rng,
    pub action: ChaCha12Rng,
    pub reward_check: ChaCha12Rng,
    pub dropout: ChaCha12Rng,
}

/// Box-Muller standard normal from two uniform draws.
pub fn sample_normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-12);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub struct EnvPool {
    pub envs: Vec<NavEnv>,
    pub env_config: EnvConfig,
    pub maze_kinds: Vec<MazeKind>,
    pub maze_size: (usize, usize),
    pub cell_size: f64,
    pub goal_tolerance: f64,
}

impl EnvPool {
    pub fn new(
        count: usize,
        env_config: EnvConfig,
        maze_kinds: Vec<MazeKind>,
        maze_size: (usize, usize),
        cell_size: f64,
        goal_tolerance: f64,
        rng: &mut impl Rng,
    ) -> Self {
        assert!(!maze_kinds.is_empty());
        let mut pool = Self { envs: Vec::new(), env_config, maze_kinds, maze_size, cell_size, goal_tolerance };
        for _ in 0..count {
            let maze = pool.sample_maze(rng);
            pool.envs.push(NavEnv::new(maze, pool.env_config.clone(), rng));
        }
        pool
    }

    pub fn sample_maze(&self, rng: &mut impl Rng) -> MazeSpec {
        let kind = self.maze_kinds[rng.random_range(0..self.maze_kinds.len())];
        generate(kind, self.maze_size.0, self.maze_size.1, self.cell_size, self.goal_tolerance, rng)
    }

    pub fn reset_env(&mut self, idx: usize, rng: &mut impl Rng) {
        let maze = self.sample_maze(rng);
        self.envs[idx] = NavEnv::new(maze, self.env_config.clone(), rng);
    }
}

/// Stacked observation arrays for one batched step.
pub struct BatchObs {
    pub tokens: Vec<f64>,
    pub prop_goal: Vec<f64>,
    pub critic_tokens: Vec<f64>,
    pub critic_prop_goal: Vec<f64>,
}

pub fn gather_batch_obs(pool: &mut EnvPool, privileged_critic: bool, noise_rng: &mut impl Rng) -> BatchObs {
    let cfg = &pool.env_config;
    let fan = ray_angles(cfg.num_rays, cfg.fov);
    let circle = scan_angles(cfg.privileged_rays);
    let mut actor_rays = Vec::with_capacity(pool.envs.len());
    let mut prop_goal = Vec::new();
    let mut critic_rays = Vec::with_capacity(pool.envs.len());
    let mut critic_prop_goal = Vec::new();
    for env in pool.envs.iter_mut() {
        let obs = env.observe_actor(noise_rng);
        prop_goal.extend(obs.prop_goal());
        actor_rays.push(obs.rays.clone());

        let clean = env.observe_clean();
        critic_prop_goal.extend(clean.prop_goal());
        if privileged_critic {
            critic_rays.push(env.privileged_scan());
        } else {
            critic_rays.push(clean.rays);
        }
    }
    let tokens = ray_token_features(&actor_rays, &fan, cfg.max_range);
    let critic_angles = if privileged_critic { &circle } else { &fan };
    let critic_tokens = ray_token_features(&critic_rays, critic_angles, cfg.max_range);
    BatchObs { tokens, prop_goal, critic_tokens, critic_prop_goal }
}

pub struct RolloutParams {
    pub segments: usize,
    pub seg_len: usize,
    pub dropout_p: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub advantage_norm: bool,
}

/// Collect `segments × seg_len` batched steps. States evolve off-tape;
/// forward passes run on throwaway tapes.
#[allow(clippy::too_many_arguments)]
pub fn collect_rollout(
    actor: &ActorNet,
    critic: &CriticNet,
    pool: &mut EnvPool,
    actor_state: &mut PlainState,
    critic_state: &mut PlainState,
    reward_config: &RewardConfig,
    params: &RolloutParams,
    rngs: &mut RolloutRngs,
) -> Result<RolloutBuffer, tensor_core::TensorError> {
    let batch = pool.envs.len();
    let horizon = params.segments * params.seg_len;
    let mut steps: Vec<StepRecord> = Vec::with_capacity(horizon);
    let mut segments: Vec<SegmentRecord> = Vec::with_capacity(params.segments);
    let mut finished = 0usize;
    let mut successes = 0usize;
    let mut reward_sum = 0.0;

    let mut seg_mask: Vec<f64> = Vec::new();
    for t in 0..horizon {
        if t % params.seg_len == 0 {
            seg_mask = tc_dropout_mask(batch * actor.hidden, params.dropout_p, &mut rngs.dropout);
            segments.push(SegmentRecord {
                actor_state: actor_state.clone(),
                critic_state: critic_state.clone(),
                dropout_mask: seg_mask.clone(),
            });
        }

        let obs = gather_batch_obs(pool, critic.privileged, &mut rngs.obs_noise);

        let mut tape = Tape::new();
        let actor_ref = NetRef::lease_actor(&mut tape, actor)?;
        let critic_ref = NetRef::lease_critic(&mut tape, critic)?;
        let tok = tape.constant(vec![batch * actor.attn.tokens, 3], obs.tokens.clone());
        let pg = tape.constant(vec![batch, Observation::PROP_GOAL_DIM], obs.prop_goal.clone());
        let ctok = tape.constant(vec![batch * critic.attn.tokens, 3], obs.critic_tokens.clone());
        let cpg = tape.constant(vec![batch, Observation::PROP_GOAL_DIM], obs.critic_prop_goal.clone());
        let a_state = StateIds::lease(&mut tape, actor_state, batch, actor.hidden);
        let c_state = StateIds::lease(&mut tape, critic_state, batch, critic.hidden);
        let a_out = actor_ref.step(&mut tape, tok, pg, a_state, Some(&seg_mask), batch)?;
        let c_out = critic_ref.step(&mut tape, ctok, cpg, c_state, None, batch)?;

        let means = tape.value(a_out.output).to_vec();
        let log_std = actor.log_std.data.clone();
        let values: Vec<f64> = tape.value(c_out.output).to_vec();
        *actor_state = a_out.state.extract(&tape);
        *critic_state = c_out.state.extract(&tape);

        // sample, step environments, reward
        let mut actions = vec![0.0; batch * ACTION_DIM];
        let mut log_probs = vec![0.0; batch];
        let mut rewards = vec![0.0; batch];
        let mut dones = vec![false; batch];
        for b in 0..batch {
            let mean = &means[b * ACTION_DIM..(b + 1) * ACTION_DIM];
            let mut action = [0.0; ACTION_DIM];
            for d in 0..ACTION_DIM {
                let eps = sample_normal(&mut rngs.action);
                action[d] = mean[d] + log_std[d].exp() * eps;
            }
            actions[b * ACTION_DIM..(b + 1) * ACTION_DIM].copy_from_slice(&action);
            log_probs[b] = gaussian_log_prob(&action, mean, &log_std);

            let env = &mut pool.envs[b];
            let collided = env.step(action);
            let dist = env.goal_distance();
            let task = task_reward(env.state.t, env.config.t_max, dist, reward_config, &mut rngs.reward_check);
            if env.state.t == 1 {
                // momentum state starts at the episode's first action
                env.state.action_momentum = env.state.prev_action;
            }
            let mut momentum = env.state.action_momentum;
            let reg = reg_reward(env.state.prev_action, &mut momentum, &env.state.prev_commands, reward_config);
            env.state.action_momentum = momentum;
            let pen = pen_reward(collided, env.state.prev_action[1], reward_config);
            rewards[b] = combined_reward(task, reg, pen, reward_config);
            reward_sum += rewards[b];

            if env.done() {
                dones[b] = true;
                finished += 1;
                if env.state.reached_goal {
                    successes += 1;
                }
            }
        }

        steps.push(StepRecord {
            tokens: obs.tokens,
            prop_goal: obs.prop_goal,
            critic_tokens: obs.critic_tokens,
            critic_prop_goal: obs.critic_prop_goal,
            actions,
            log_probs,
            values,
            rewards,
            dones: dones.clone(),
        });

        // reset finished environments and zero their recurrent rows
        for b in 0..batch {
            if dones[b] {
                pool.reset_env(b, &mut rngs.maze);
            }
        }
        actor_state.mask_rows(&dones, actor.hidden);
        critic_state.mask_rows(&dones, critic.hidden);
    }

    // bootstrap values for the post-rollout state
    let obs = gather_batch_obs(pool, critic.privileged, &mut rngs.obs_noise);
    let mut tape = Tape::new();
    let critic_ref = NetRef::lease_critic(&mut tape, critic)?;
    let ctok = tape.constant(vec![batch * critic.attn.tokens, 3], obs.critic_tokens);
    let cpg = tape.constant(vec![batch, Observation::PROP_GOAL_DIM], obs.critic_prop_goal);
    let c_state = StateIds::lease(&mut tape, critic_state, batch, critic.hidden);
    let c_out = critic_ref.step(&mut tape, ctok, cpg, c_state, None, batch)?;
    let bootstrap_values = tape.value(c_out.output).to_vec();

    let mut buffer = RolloutBuffer {
        batch,
        seg_len: params.seg_len,
        steps,
        segments,
        bootstrap_values,
        advantages: Vec::new(),
        returns: Vec::new(),
        finished_episodes: finished,
        successes,
        reward_sum,
    };
    compute_gae(&mut buffer, params.gamma, params.gae_lambda, params.advantage_norm);
    Ok(buffer)
}

/// GAE(γ, λ) advantages and returns; `done` cuts the bootstrap.
pub fn compute_gae(buffer: &mut RolloutBuffer, gamma: f64, lambda: f64, normalize: bool) {
    let horizon = buffer.steps.len();
    let batch = buffer.batch;
    let mut advantages = vec![0.0; horizon * batch];
    for b in 0..batch {
        let mut running = 0.0;
        for t in (0..horizon).rev() {
            let step = &buffer.steps[t];
            let not_done = if step.dones[b] { 0.0 } else { 1.0 };
            let next_value = if t + 1 < horizon {
                buffer.steps[t + 1].values[b]
            } else {
                buffer.bootstrap_values[b]
            };
            let delta = step.rewards[b] + gamma * next_value * not_done - step.values[b];
            running = delta + gamma * lambda * not_done * running;
            advantages[t * batch + b] = running;
        }
    }
    let returns: Vec<f64> = advantages
        .iter()
        .enumerate()
        .map(|(i, &a)| a + buffer.steps[i / batch].values[i % batch])
        .collect();

    if normalize {
        let n = advantages.len() as f64;
        let mean = advantages.iter().sum::<f64>() / n;
        let var = advantages.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
        let std = var.sqrt().max(1e-8);
        for a in advantages.iter_mut() {
            *a = (*a - mean) / std;
        }
    }
    buffer.advantages = advantages;
    buffer.returns = returns;
}
