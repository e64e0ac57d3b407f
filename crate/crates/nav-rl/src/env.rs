//! POMDP navigation environment: unicycle kinematics on an occupancy grid,
//! DDA ray casting, egocentric observations with configurable sensor noise
//! and delay.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::maze::MazeSpec;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    /// forward depth rays over the field of view
    pub num_rays: usize,
    /// horizontal field of view, radians
    pub fov: f64,
    pub max_range: f64,
    /// control period (5 Hz)
    pub dt: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub omega_max: f64,
    /// episode horizon in control steps
    pub t_max: usize,
    /// 360° scan rays for the privileged critic
    pub privileged_rays: usize,
    pub noise: NoiseParams,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            num_rays: 32,
            fov: 105.0_f64.to_radians(),
            max_range: 10.0,
            dt: 0.2,
            v_min: -0.5,
            v_max: 1.5,
            omega_max: 1.5,
            t_max: 120,
            privileged_rays: 36,
            noise: NoiseParams::default(),
        }
    }
}

/// Uniform observation noise ranges and the control-step observation delay.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseParams {
    pub enabled: bool,
    pub velocity: f64,
    pub angular_velocity: f64,
    pub gravity: f64,
    pub goal_position: f64,
    pub goal_angle: f64,
    /// upper bound on the per-episode delay, in control steps (0–600 ms at 5 Hz)
    pub max_delay_steps: usize,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            enabled: true,
            velocity: 0.2,
            angular_velocity: 0.1,
            gravity: 0.1,
            goal_position: 0.5,
            goal_angle: 0.1,
            max_delay_steps: 3,
        }
    }
}

/// What the agent sees each step.
#[derive(Debug, Clone)]
pub struct Observation {
    pub rays: Vec<f64>,
    pub velocity: f64,
    pub angular_velocity: f64,
    pub gravity: [f64; 3],
    pub prev_action: [f64; 2],
    pub goal_dir: [f64; 2],
    pub goal_logdist: f64,
}

impl Observation {
    pub const PROP_GOAL_DIM: usize = 10;

    /// Proprio + goal vector: [v, ω, n(3), a_prev(2), dir(2), logdist].
    pub fn prop_goal(&self) -> [f64; Self::PROP_GOAL_DIM] {
        [
            self.velocity,
            self.angular_velocity,
            self.gravity[0],
            self.gravity[1],
            self.gravity[2],
            self.prev_action[0],
            self.prev_action[1],
            self.goal_dir[0],
            self.goal_dir[1],
            self.goal_logdist,
        ]
    }
}

/// Unit direction and log-distance encoding of a relative goal position.
/// Returns the zero vector at the goal.
pub fn encode_goal(p: [f64; 2]) -> ([f64; 2], f64) {
    let norm = (p[0] * p[0] + p[1] * p[1]).sqrt();
    if norm < 1e-9 {
        ([0.0, 0.0], 0.0)
    } else {
        ([p[0] / norm, p[1] / norm], norm.ln_1p())
    }
}

/// DDA grid traversal: distance to the first occupied cell along (dx, dy),
/// capped at max_range.
pub fn raycast(maze: &MazeSpec, x: f64, y: f64, angle: f64, max_range: f64) -> f64 {
    let (dx, dy) = (angle.cos(), angle.sin());
    let cell = maze.cell_size;
    let mut cx = (x / cell).floor() as isize;
    let mut cy = (y / cell).floor() as isize;
    let step_x: isize = if dx > 0.0 { 1 } else { -1 };
    let step_y: isize = if dy > 0.0 { 1 } else { -1 };
    // parametric distance to the next vertical/horizontal grid line
    let mut t_max_x = if dx.abs() < 1e-12 {
        f64::INFINITY
    } else {
        let next = if dx > 0.0 { (cx + 1) as f64 * cell } else { cx as f64 * cell };
        (next - x) / dx
    };
    let mut t_max_y = if dy.abs() < 1e-12 {
        f64::INFINITY
    } else {
        let next = if dy > 0.0 { (cy + 1) as f64 * cell } else { cy as f64 * cell };
        (next - y) / dy
    };
    let t_delta_x = if dx.abs() < 1e-12 { f64::INFINITY } else { cell / dx.abs() };
    let t_delta_y = if dy.abs() < 1e-12 { f64::INFINITY } else { cell / dy.abs() };

    loop {
        let t = t_max_x.min(t_max_y);
        if t >= max_range {
            return max_range;
        }
        if t_max_x < t_max_y {
            cx += step_x;
            t_max_x += t_delta_x;
        } else {
            cy += step_y;
            t_max_y += t_delta_y;
        }
        if maze.is_occupied_cell(cx, cy) {
            return t;
        }
    }
}

/// Forward fan of ray angles relative to the heading.
pub fn ray_angles(num_rays: usize, fov: f64) -> Vec<f64> {
    if num_rays == 1 {
        return vec![0.0];
    }
    (0..num_rays).map(|i| -fov / 2.0 + fov * i as f64 / (num_rays - 1) as f64).collect()
}

/// Full-circle scan angles (for the privileged critic).
pub fn scan_angles(num_rays: usize) -> Vec<f64> {
    (0..num_rays).map(|i| 2.0 * std::f64::consts::PI * i as f64 / num_rays as f64).collect()
}

#[derive(Debug, Clone)]
pub struct EnvState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub t: usize,
    pub collided: bool,
    pub prev_action: [f64; 2],
    /// momentum-filtered action a^m
    pub action_momentum: [f64; 2],
    /// last two commanded actions for the acceleration proxy
    pub prev_commands: [[f64; 2]; 2],
    pub reached_goal: bool,
}

/// One simulated robot in one maze, with its observation delay buffer.
#[derive(Debug, Clone)]
pub struct NavEnv {
    pub maze: MazeSpec,
    pub state: EnvState,
    pub config: EnvConfig,
    delay_steps: usize,
    obs_buffer: std::collections::VecDeque<Observation>,
}

impl NavEnv {
    /// Place the robot at a start pose; `rng` picks the pose and the episode's
    /// observation delay.
    pub fn new(maze: MazeSpec, config: EnvConfig, rng: &mut impl Rng) -> Self {
        let &(x, y, heading) = &maze.starts[rng.random_range(0..maze.starts.len())];
        assert!(!maze.is_occupied(x, y), "start pose inside a wall");
        let delay_steps = if config.noise.enabled && config.noise.max_delay_steps > 0 {
            rng.random_range(0..=config.noise.max_delay_steps)
        } else {
            0
        };
        let state = EnvState {
            x,
            y,
            heading,
            t: 0,
            collided: false,
            prev_action: [0.0, 0.0],
            action_momentum: [0.0, 0.0],
            prev_commands: [[0.0, 0.0], [0.0, 0.0]],
            reached_goal: false,
        };
        Self { maze, state, config, delay_steps, obs_buffer: std::collections::VecDeque::new() }
    }

    /// This episode's observation delay in control steps.
    pub fn delay_steps(&self) -> usize {
        self.delay_steps
    }

    /// Relative goal position in the robot frame.
    pub fn relative_goal(&self) -> [f64; 2] {
        let dx = self.maze.goal.0 - self.state.x;
        let dy = self.maze.goal.1 - self.state.y;
        let (s, c) = self.state.heading.sin_cos();
        [c * dx + s * dy, -s * dx + c * dy]
    }

    pub fn goal_distance(&self) -> f64 {
        let g = self.relative_goal();
        (g[0] * g[0] + g[1] * g[1]).sqrt()
    }

    /// Current noiseless observation.
    pub fn observe_clean(&self) -> Observation {
        let rays = ray_angles(self.config.num_rays, self.config.fov)
            .iter()
            .map(|&a| raycast(&self.maze, self.state.x, self.state.y, self.state.heading + a, self.config.max_range))
            .collect();
        let (goal_dir, goal_logdist) = encode_goal(self.relative_goal());
        Observation {
            rays,
            velocity: self.state.prev_action[0],
            angular_velocity: self.state.prev_action[1],
            gravity: [0.0, 0.0, -1.0],
            prev_action: self.state.prev_action,
            goal_dir,
            goal_logdist,
        }
    }

    /// 360° range scan for the privileged critic (always clean).
    pub fn privileged_scan(&self) -> Vec<f64> {
        scan_angles(self.config.privileged_rays)
            .iter()
            .map(|&a| raycast(&self.maze, self.state.x, self.state.y, self.state.heading + a, self.config.max_range))
            .collect()
    }

    /// Actor observation: noise applied, then delayed by the episode lag.
    pub fn observe_actor(&mut self, rng: &mut impl Rng) -> Observation {
        let clean = self.observe_clean();
        let noisy = if self.config.noise.enabled {
            observation_noise(&clean, &self.config.noise, rng)
        } else {
            clean
        };
        self.obs_buffer.push_back(noisy);
        while self.obs_buffer.len() > self.delay_steps + 1 {
            self.obs_buffer.pop_front();
        }
        self.obs_buffer.front().expect("buffer nonempty").clone()
    }

    /// Unicycle step with the commanded (v, ω) clamped to bounds. Colliding
    /// translations are cancelled (rotation still applies) and flagged.
    pub fn step(&mut self, action: [f64; 2]) -> bool {
        let v = action[0].clamp(self.config.v_min, self.config.v_max);
        let omega = action[1].clamp(-self.config.omega_max, self.config.omega_max);
        let dt = self.config.dt;

        let nx = self.state.x + v * self.state.heading.cos() * dt;
        let ny = self.state.y + v * self.state.heading.sin() * dt;
        let collided = self.maze.is_occupied(nx, ny);
        if !collided {
            self.state.x = nx;
            self.state.y = ny;
        }
        self.state.heading = wrap_angle(self.state.heading + omega * dt);
        self.state.collided = collided;
        self.state.prev_commands = [self.state.prev_commands[1], self.state.prev_action];
        self.state.prev_action = [v, omega];
        self.state.t += 1;
        if self.goal_distance() < self.maze.goal_tolerance {
            self.state.reached_goal = true;
        }
        collided
    }

    pub fn done(&self) -> bool {
        self.state.t >= self.config.t_max
    }
}

pub fn wrap_angle(a: f64) -> f64 {
    let mut a = (a + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI);
    if a < 0.0 {
        a += 2.0 * std::f64::consts::PI;
    }
    a - std::f64::consts::PI
}

/// Add uniform noise to proprio and goal channels. The goal is perturbed in
/// position (±goal_position meters) and bearing (±goal_angle radians) before
/// re-encoding; range readings are left untouched here.
pub fn observation_noise(obs: &Observation, params: &NoiseParams, rng: &mut impl Rng) -> Observation {
    let mut u = |half: f64| if half > 0.0 { rng.random_range(-half..half) } else { 0.0 };
    let velocity = obs.velocity + u(params.velocity);
    let angular_velocity = obs.angular_velocity + u(params.angular_velocity);
    let gravity = [
        obs.gravity[0] + u(params.gravity),
        obs.gravity[1] + u(params.gravity),
        obs.gravity[2] + u(params.gravity),
    ];
    // reconstruct a goal point, jitter it, re-encode
    let dist = obs.goal_logdist.exp_m1();
    let p = [obs.goal_dir[0] * dist, obs.goal_dir[1] * dist];
    let rot = u(params.goal_angle);
    let (s, c) = rot.sin_cos();
    let jittered = [
        c * p[0] - s * p[1] + u(params.goal_position),
        s * p[0] + c * p[1] + u(params.goal_position),
    ];
    let (goal_dir, goal_logdist) = encode_goal(jittered);
    Observation {
        rays: obs.rays.clone(),
        velocity,
        angular_velocity,
        gravity,
        prev_action: obs.prev_action,
        goal_dir,
        goal_logdist,
    }
}
