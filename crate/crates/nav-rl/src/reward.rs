//! Reward pipeline: sparse time-based task reward with a random mid-episode
//! check, smoothness regularization, and safety penalties.
//!
//! r_t = α₁·r_task − α₂·r_reg − α₃·r_pen

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    pub alpha_task: f64,
    pub alpha_reg: f64,
    pub alpha_pen: f64,
    /// (σ, weight) pairs; tight for precision, loose for guidance
    pub sigma_tight: f64,
    pub weight_tight: f64,
    pub sigma_loose: f64,
    pub weight_loose: f64,
    /// rewarding window at the episode end, control steps
    pub reward_window: usize,
    /// per-step probability of an early reward check
    pub delta_check: f64,
    /// action-momentum factor λ
    pub momentum: f64,
    pub beta_action: f64,
    pub beta_accel: f64,
    pub eta_collision: f64,
    pub eta_rate: f64,
    /// safe heading-rate threshold, rad/s (2D stand-in for tilt)
    pub theta_safe: f64,
    pub gamma: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            alpha_task: 1.0,
            alpha_reg: 0.1,
            alpha_pen: 1.0,
            sigma_tight: 0.5,
            weight_tight: 0.5,
            sigma_loose: 5.0,
            weight_loose: 0.5,
            reward_window: 10,
            delta_check: 0.002,
            momentum: 0.9,
            beta_action: 1.0,
            beta_accel: 0.5,
            eta_collision: 1.0,
            eta_rate: 0.5,
            theta_safe: 1.0,
            gamma: 0.99,
        }
    }
}

/// Single-σ time-based term: 1(t > T_max − T_r ∨ check)/(1 + ‖p‖/σ).
pub fn task_reward_single(
    t: usize,
    t_max: usize,
    reward_window: usize,
    check_fired: bool,
    goal_distance: f64,
    sigma: f64,
) -> f64 {
    let in_window = t > t_max.saturating_sub(reward_window);
    if in_window || check_fired {
        1.0 / (1.0 + goal_distance / sigma)
    } else {
        0.0
    }
}

/// Tight and loose σ terms combined with their weights, sharing one random
/// check draw per step per environment.
pub fn task_reward(
    t: usize,
    t_max: usize,
    goal_distance: f64,
    config: &RewardConfig,
    rng: &mut impl Rng,
) -> f64 {
    let check_fired = rng.random::<f64>() < config.delta_check;
    config.weight_tight
        * task_reward_single(t, t_max, config.reward_window, check_fired, goal_distance, config.sigma_tight)
        + config.weight_loose
            * task_reward_single(t, t_max, config.reward_window, check_fired, goal_distance, config.sigma_loose)
}

/// Momentum-filter state update and the two L1 smoothness terms. The
/// acceleration proxy is the second finite difference of commanded (v, ω).
/// Returns the unscaled r_reg; the momentum state is updated in place.
pub fn reg_reward(
    action: [f64; 2],
    momentum_state: &mut [f64; 2],
    prev_commands: &[[f64; 2]; 2],
    config: &RewardConfig,
) -> f64 {
    let lambda = config.momentum;
    for (m, &a) in momentum_state.iter_mut().zip(&action) {
        *m = lambda * *m + (1.0 - lambda) * a;
    }
    let action_term: f64 =
        action.iter().zip(momentum_state.iter()).map(|(a, m)| (a - m).abs()).sum();
    let accel: f64 = (0..2)
        .map(|i| (action[i] - 2.0 * prev_commands[1][i] + prev_commands[0][i]).abs())
        .sum();
    config.beta_action * action_term + config.beta_accel * accel
}

/// η₁·1(collision) + η₂·max(0, |θ̇| − θ_safe); heading rate stands in for
/// tilt in the planar reduction.
pub fn pen_reward(collision: bool, heading_rate: f64, config: &RewardConfig) -> f64 {
    let collision_term = if collision { config.eta_collision } else { 0.0 };
    collision_term + config.eta_rate * (heading_rate.abs() - config.theta_safe).max(0.0)
}

/// Full per-step reward.
pub fn combined_reward(task: f64, reg: f64, pen: f64, config: &RewardConfig) -> f64 {
    config.alpha_task * task - config.alpha_reg * reg - config.alpha_pen * pen
}
