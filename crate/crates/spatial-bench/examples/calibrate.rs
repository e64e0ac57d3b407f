//! Manual training-length calibration:
//! `cargo run --release -p spatial-bench --example calibrate -- sru-ours 100 128 10 1`

use recurrent_cells::CellKind;
use spatial_bench::{train_benchmark, BenchConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let cell: CellKind = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(CellKind::SruOurs);
    let epochs: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(100);
    let batch_size: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(128);
    let batches: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(10);
    let seed: u64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(1);
    let spatial_w: f64 = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let retention_bias: f64 = args.get(7).and_then(|s| s.parse().ok()).unwrap_or(0.0);
    let euler: bool = args.get(8).map(|s| s == "euler").unwrap_or(false);
    let linear_input: bool = args.get(9).map(|s| s == "linear").unwrap_or(false);
    let lr_switch: u64 = args.get(10).and_then(|s| s.parse().ok()).unwrap_or(800);

    let config = BenchConfig {
        epochs,
        batch_size,
        batches_per_epoch: batches,
        spatial_loss_weight: spatial_w,
        retention_bias_init: retention_bias,
        motion_model: if euler {
            spatial_bench::MotionModel::EulerZyx
        } else {
            spatial_bench::MotionModel::YawPlanar
        },
        input_tanh: !linear_input,
        lr_switch_epoch: lr_switch,
        ..BenchConfig::default()
    };
    let start = std::time::Instant::now();
    let report = train_benchmark(cell, &config, seed).unwrap();
    for e in report.epochs.iter().step_by(10.max(epochs as usize / 40)) {
        println!(
            "epoch {:4}  mse {:10.4}  bce {:8.5}  acc {:.4}",
            e.epoch, e.spatial_mse, e.temporal_bce, e.temporal_acc
        );
    }
    let ev = &report.final_eval;
    println!(
        "final: mse {:.4} acc {:.4} ({:.1}s)",
        ev.spatial_mse,
        ev.temporal_acc,
        start.elapsed().as_secs_f64()
    );
    println!("per-step (final->initial): {:?}", ev.per_step_error_final_to_initial);
}
