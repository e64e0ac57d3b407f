//! Manual navigation-training calibration:
//! `cargo run --release -p nav-rl --example nav_calibrate -- sru-ours 60 1`

use nav_rl::{dead_end_trap, evaluate_nav, train_nav, MazeKind, MemoryKind, NavTrainConfig};
use tensor_core::rng::substream;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let memory: MemoryKind = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(MemoryKind::SruOurs);
    let iterations: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(60);
    let seed: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1);

    let config = NavTrainConfig {
        memory,
        iterations,
        maze_kinds: vec![MazeKind::DeadEndTrap],
        ..NavTrainConfig::default()
    };

    let start = std::time::Instant::now();
    let (agents, reports) = train_nav(&config, seed).unwrap();
    let train_time = start.elapsed().as_secs_f64();

    for it in reports[0].iterations.iter().step_by(5.max(iterations / 20)) {
        println!(
            "iter {:3}  reward {:8.4}  rollout-sr {:?}  vloss {:8.4}  dml {:.4}",
            it.iteration, it.mean_step_reward, it.episode_success_rate, it.value_loss, it.dml
        );
    }

    let mut maze_rng = substream(99, "acceptance-nav-mazes", 0);
    let mazes: Vec<_> = (0..20).map(|_| dead_end_trap(15, 15, 0.5, 0.5, &mut maze_rng)).collect();
    let env_config = nav_rl::EnvConfig::default();
    let eval = evaluate_nav(&agents[0].actor, &mazes, 10, &env_config, &[0.0, 3.0, 6.0, 12.0], seed).unwrap();
    println!(
        "{} seed {seed}: train {:.0}s ({:.2}s/iter), eval success {:.3} over {} episodes (mean len {:.0})",
        memory.name(),
        train_time,
        train_time / iterations as f64,
        eval.success_rate,
        eval.episodes,
        eval.mean_episode_steps
    );
}
