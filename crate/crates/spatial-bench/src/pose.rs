//! SE(3) rigid transforms stored as (rotation, translation).

use rand::Rng;

/// Rigid transform: p' = R·p + t. Rows of `rotation` are stored row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

/// The frame-(t−1) → frame-t coordinate transform between consecutive robot
/// poses.
pub type RelativeMotion = Pose;

impl Pose {
    pub const IDENTITY: Pose = Pose {
        rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        translation: [0.0, 0.0, 0.0],
    };

    pub fn new(rotation: [[f64; 3]; 3], translation: [f64; 3]) -> Self {
        Self { rotation, translation }
    }

    /// Intrinsic z-y-x rotation: R = Rz(yaw)·Ry(pitch)·Rx(roll).
    pub fn from_euler_zyx(yaw: f64, pitch: f64, roll: f64, translation: [f64; 3]) -> Self {
        let (sy, cy) = yaw.sin_cos();
        let (sp, cp) = pitch.sin_cos();
        let (sr, cr) = roll.sin_cos();
        let rotation = [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ];
        Self { rotation, translation }
    }

    pub fn transform_point(&self, p: [f64; 3]) -> [f64; 3] {
        let r = &self.rotation;
        [
            r[0][0] * p[0] + r[0][1] * p[1] + r[0][2] * p[2] + self.translation[0],
            r[1][0] * p[0] + r[1][1] * p[1] + r[1][2] * p[2] + self.translation[1],
            r[2][0] * p[0] + r[2][1] * p[1] + r[2][2] * p[2] + self.translation[2],
        ]
    }

    /// Apply `first`, then `self`: (self ∘ first)(p) = self(first(p)).
    /// R = R₂R₁, t = R₂t₁ + t₂.
    pub fn compose(&self, first: &Pose) -> Pose {
        let mut rotation = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    rotation[i][j] += self.rotation[i][k] * first.rotation[k][j];
                }
            }
        }
        let rt = self.transform_point(first.translation);
        Pose { rotation, translation: rt }
    }

    pub fn inverse(&self) -> Pose {
        let mut rt = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                rt[i][j] = self.rotation[j][i];
            }
        }
        let t = self.translation;
        let translation = [
            -(rt[0][0] * t[0] + rt[0][1] * t[1] + rt[0][2] * t[2]),
            -(rt[1][0] * t[0] + rt[1][1] * t[1] + rt[1][2] * t[2]),
            -(rt[2][0] * t[0] + rt[2][1] * t[1] + rt[2][2] * t[2]),
        ];
        Pose { rotation: rt, translation }
    }

    /// RᵀR = I and det(R) = +1 within `tol`.
    pub fn is_valid(&self, tol: f64) -> bool {
        let r = &self.rotation;
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| r[k][i] * r[k][j]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                if (dot - expect).abs() > tol {
                    return false;
                }
            }
        }
        let det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
            - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
        (det - 1.0).abs() <= tol && self.translation.iter().all(|v| v.is_finite())
    }

    /// Flattened 4×4 homogeneous matrix (row-major), for oracles and dumps.
    pub fn homogeneous(&self) -> [f64; 16] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[0][0], r[0][1], r[0][2], t[0],
            r[1][0], r[1][1], r[1][2], t[1],
            r[2][0], r[2][1], r[2][2], t[2],
            0.0, 0.0, 0.0, 1.0,
        ]
    }
}

/// How random ego-motion orientations are drawn. Translations are always
/// U[−2, 2] per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MotionModel {
    /// one heading angle U[−π, π]; pitch and roll stay zero
    YawPlanar,
    /// three independent Euler angles (z-y-x), each U[−π, π]
    EulerZyx,
}

/// Random ego-motion under the given model. Draw order is fixed:
/// tx, ty, tz, then the angle(s).
pub fn sample_motion_with(model: MotionModel, rng: &mut impl Rng) -> RelativeMotion {
    let tx = rng.random_range(-2.0..2.0);
    let ty = rng.random_range(-2.0..2.0);
    let tz = rng.random_range(-2.0..2.0);
    let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let (pitch, roll) = match model {
        MotionModel::YawPlanar => (0.0, 0.0),
        MotionModel::EulerZyx => (
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        ),
    };
    Pose::from_euler_zyx(yaw, pitch, roll, [tx, ty, tz])
}

/// Random ego-motion with full 3D orientation.
pub fn sample_motion(rng: &mut impl Rng) -> RelativeMotion {
    sample_motion_with(MotionModel::EulerZyx, rng)
}

/// Deterministic planar spiral: each step advances `advance` meters along the
/// heading and turns by `turn` radians. Returned motions are the
/// frame-(t−1) → frame-t coordinate transforms, identity first.
pub fn spiral_trajectory(t_steps: usize, advance: f64, turn: f64) -> Vec<RelativeMotion> {
    assert!(t_steps >= 1);
    let mut motions = Vec::with_capacity(t_steps);
    motions.push(Pose::IDENTITY);
    for _ in 1..t_steps {
        // pose of the new frame expressed in the previous frame
        let increment = Pose::from_euler_zyx(turn, 0.0, 0.0, [advance, 0.0, 0.0]);
        motions.push(increment.inverse());
    }
    motions
}
