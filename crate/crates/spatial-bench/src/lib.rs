//! Spatial-temporal memorization benchmark: a robot moves through random
//! SE(3) poses observing one landmark per step; after T steps a recurrent
//! network must recall every landmark's coordinates in the final frame
//! (spatial task) and the sequence of binary labels (temporal task).

pub mod episode;
pub mod net;
pub mod pose;
pub mod train;

pub use episode::{
    compute_targets, decode_step_input, encode_step_input, generate_episode,
    generate_episode_with, LandmarkEpisode, STEP_INPUT_DIM,
};
pub use net::{batch_targets, BenchmarkNet};
pub use pose::{sample_motion, sample_motion_with, spiral_trajectory, MotionModel, Pose, RelativeMotion};
pub use train::{
    evaluate, evaluate_spatial_error_by_step, loss_curves_csv, per_step_error_csv, train_benchmark,
    BenchConfig, EpochStats, EvalStats, TrainError, TrainReport,
};
