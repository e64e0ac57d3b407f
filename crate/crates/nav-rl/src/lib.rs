//! Desk-scale 2D POMDP navigation harness: egocentric ray observations,
//! sparse time-based rewards with a random mid-episode check, two-stage
//! attention feature compression, recurrent policies with temporally
//! consistent dropout, and PPO with deep mutual learning.

pub mod attention;
pub mod checkpoint;
pub mod env;
pub mod maze;
pub mod policy;
pub mod ppo;
pub mod reward;
pub mod rollout;
pub mod train;

pub use attention::{ray_token_features, AttnParams, AttnRef, AttnTrace};
pub use checkpoint::{load_actor, save_actor, AgentCheckpointError};
pub use env::{encode_goal, observation_noise, ray_angles, raycast, scan_angles, EnvConfig, EnvState, NavEnv, NoiseParams, Observation};
pub use maze::{corridor_maze, dead_end_trap, generate, open_room, pillar_field, MazeError, MazeKind, MazeSpec};
pub use policy::{
    gaussian_kl, gaussian_log_prob, gaussian_sym_kl, tc_dropout_mask, ActorNet, CriticNet,
    Memory, MemoryKind, NetRef, NetStep, PlainState, StateIds, ACTION_DIM,
};
pub use ppo::{peer_outputs, ppo_update, sym_kl_on_tape, PeerOutputs, PpoConfig, UpdateStats};
pub use reward::{combined_reward, pen_reward, reg_reward, task_reward, task_reward_single, RewardConfig};
pub use rollout::{collect_rollout, compute_gae, sample_normal, EnvPool, RolloutBuffer, RolloutParams, RolloutRngs, SegmentRecord, StepRecord};
pub use train::{attention_trace_csv, evaluate_nav, train_nav, Agent, IterationStats, NavError, NavEvalReport, NavTrainConfig, NavTrainReport};
