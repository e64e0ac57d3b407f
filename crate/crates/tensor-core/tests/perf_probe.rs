//! Manual throughput probe: `cargo test -p tensor-core --release perf -- --ignored --nocapture`

use std::time::Instant;
use tensor_core::kernels::matmul_acc;

#[test]
#[ignore]
fn perf_matmul_throughput() {
    for &(m, k, n) in &[(256usize, 128usize, 512usize), (256, 128, 128), (16, 64, 64)] {
        let a: Vec<f64> = (0..m * k).map(|i| (i as f64).sin()).collect();
        let b: Vec<f64> = (0..k * n).map(|i| (i as f64).cos()).collect();
        let mut c = vec![0.0; m * n];
        let flops = (2 * m * k * n) as f64;
        let reps = (2e9 / flops).max(1.0) as usize;
        let start = Instant::now();
        for _ in 0..reps {
            c.iter_mut().for_each(|v| *v = 0.0);
            matmul_acc(&a, &b, &mut c, m, k, n);
        }
        let dt = start.elapsed().as_secs_f64();
        println!(
            "[{m}x{k}x{n}] {reps} reps in {dt:.3}s -> {:.2} GFLOP/s",
            reps as f64 * flops / dt / 1e9
        );
    }
}
