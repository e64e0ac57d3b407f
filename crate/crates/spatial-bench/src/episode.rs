//! Landmark-registration episodes: per step the agent sees one landmark in
//! the current frame, a binary label, and the ego-motion from the previous
//! frame. Targets are every landmark re-expressed in the final frame.

use rand::Rng;

use crate::pose::{sample_motion_with, MotionModel, Pose, RelativeMotion};

pub const STEP_INPUT_DIM: usize = 16;

#[derive(Debug, Clone)]
pub struct LandmarkEpisode {
    /// landmark coordinates in the frame they were observed from
    pub landmarks: Vec<[f64; 3]>,
    /// binary labels, frame-independent
    pub labels: Vec<f64>,
    /// motions[s] maps frame-(s−1) coordinates to frame-s coordinates;
    /// motions[0] is the identity
    pub motions: Vec<RelativeMotion>,
    /// landmarks re-expressed in the final frame
    pub targets: Vec<[f64; 3]>,
}

impl LandmarkEpisode {
    pub fn len(&self) -> usize {
        self.landmarks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.landmarks.is_empty()
    }
}

/// Registration targets: the step-k landmark pushed through the motion chain
/// k+1, …, T−1 into the final frame. The final landmark maps to itself.
pub fn compute_targets(landmarks: &[[f64; 3]], motions: &[RelativeMotion]) -> Vec<[f64; 3]> {
    let t_steps = landmarks.len();
    assert_eq!(motions.len(), t_steps);
    // suffix chains: chain[s] carries frame-s coordinates to frame-(T−1)
    let mut chain = vec![Pose::IDENTITY; t_steps];
    for s in (0..t_steps.saturating_sub(1)).rev() {
        chain[s] = chain[s + 1].compose(&motions[s + 1]);
    }
    landmarks.iter().zip(&chain).map(|(&l, c)| c.transform_point(l)).collect()
}

/// Fresh episode: landmarks U[−5, 5]³, labels U{0, 1}, random motions under
/// the given model (identity at the first step).
pub fn generate_episode_with(
    model: MotionModel,
    t_steps: usize,
    rng: &mut impl Rng,
) -> LandmarkEpisode {
    assert!(t_steps >= 1, "episode needs at least one step");
    let mut landmarks = Vec::with_capacity(t_steps);
    let mut labels = Vec::with_capacity(t_steps);
    let mut motions = Vec::with_capacity(t_steps);
    for s in 0..t_steps {
        let l = [
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
        ];
        let c = f64::from(rng.random_range(0..=1u8));
        let m = if s == 0 { Pose::IDENTITY } else { sample_motion_with(model, rng) };
        landmarks.push(l);
        labels.push(c);
        motions.push(m);
    }
    let targets = compute_targets(&landmarks, &motions);
    LandmarkEpisode { landmarks, labels, motions, targets }
}

/// Fresh episode with full 3D orientations.
pub fn generate_episode(t_steps: usize, rng: &mut impl Rng) -> LandmarkEpisode {
    generate_episode_with(MotionModel::EulerZyx, t_steps, rng)
}

/// 16-dim step input: [l_t (3) | c_t (1) | R row-major (9) | t (3)].
pub fn encode_step_input(landmark: [f64; 3], label: f64, motion: &RelativeMotion) -> [f64; STEP_INPUT_DIM] {
    let mut out = [0.0; STEP_INPUT_DIM];
    out[..3].copy_from_slice(&landmark);
    out[3] = label;
    for i in 0..3 {
        out[4 + 3 * i..4 + 3 * (i + 1)].copy_from_slice(&motion.rotation[i]);
    }
    out[13..16].copy_from_slice(&motion.translation);
    out
}

/// Inverse of `encode_step_input`'s layout.
pub fn decode_step_input(v: &[f64; STEP_INPUT_DIM]) -> ([f64; 3], f64, RelativeMotion) {
    let landmark = [v[0], v[1], v[2]];
    let label = v[3];
    let mut rotation = [[0.0; 3]; 3];
    for i in 0..3 {
        rotation[i].copy_from_slice(&v[4 + 3 * i..4 + 3 * (i + 1)]);
    }
    let translation = [v[13], v[14], v[15]];
    (landmark, label, Pose::new(rotation, translation))
}
