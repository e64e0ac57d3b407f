//! Bit-exact agreement between the batched pipeline and the per-pixel oracle,
//! plus the pipeline's fixed points and statistical properties.

use depth_noise::{
    apply_noise, compute_kernels, depth_to_disparity, disparity_to_depth, quantize,
    reference_oracle, DepthImageBatch, NoiseConfig,
};
use rand::Rng;
use tensor_core::rng::substream;

fn random_batch(b: usize, h: usize, w: usize, seed: u64) -> DepthImageBatch {
    let mut rng = substream(seed, "depth-batch", 0);
    let data = (0..b * h * w).map(|_| rng.random_range(0.3..20.0)).collect();
    DepthImageBatch::new(b, h, w, data)
}

fn random_config(seed: u64) -> NoiseConfig {
    let mut rng = substream(seed, "noise-config", 0);
    let rho_min = rng.random_range(0.0..0.9);
    let tau_min = rng.random_range(0.0..1.0);
    NoiseConfig {
        f: rng.random_range(100.0..500.0),
        b: rng.random_range(0.05..0.3),
        filt_size: [1, 3, 5, 7][rng.random_range(0..4usize)],
        tau_min,
        tau_max: tau_min + rng.random_range(0.0..4.0),
        rho_min,
        rho_max: rho_min + rng.random_range(0.0..(1.0 - rho_min)),
        quant_step: [0.0625, 0.125, 0.25][rng.random_range(0..3usize)],
        seed,
        ..NoiseConfig::default()
    }
}

#[test]
fn kernels_match_their_invariants() {
    let k = compute_kernels(1).unwrap();
    assert_eq!(k.mean, vec![1.0]);
    assert_eq!(k.sub, vec![1.0]);

    let k3 = compute_kernels(3).unwrap();
    assert!(k3.mean.iter().all(|&v| v == 1.0 / 9.0));
    assert_eq!(k3.sub.iter().sum::<f64>(), 9.0);
    assert!((k3.mean.iter().sum::<f64>() - 1.0).abs() < 1e-15);

    assert!(compute_kernels(4).is_err());
    assert!(compute_kernels(0).is_err());
}

#[test]
fn disparity_round_trip_and_formula() {
    let disp = depth_to_disparity(&[10.0], 100.0, 0.1, 0.05);
    assert_eq!(disp, vec![1.0]);
    // depth = f·b gives disparity exactly 1
    let disp2 = depth_to_disparity(&[32.0 * 0.25], 32.0, 0.25, 0.05);
    assert_eq!(disp2, vec![1.0]);

    let depth = [0.3, 1.5, 7.25, 19.0];
    let d = depth_to_disparity(&depth, 320.0, 0.12, 0.05);
    let back = disparity_to_depth(&d, 320.0, 0.12, -1.0);
    for (a, b) in depth.iter().zip(&back) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn quantize_hand_cases() {
    assert_eq!(quantize(1.06, 0.125), 1.0); // 1.06/0.125 = 8.48 -> 8
    assert_eq!(quantize(2.375, 0.125), 2.375); // already a multiple
    assert_eq!(quantize(0.1875, 0.125), 0.25); // tie 1.5 -> even 2
}

#[test]
fn batched_path_equals_oracle_bit_exactly_on_100_configs() {
    for seed in 0..100u64 {
        let config = random_config(seed);
        let depth = random_batch(2, 64, 64, seed);
        let fast = apply_noise(&depth, &config).unwrap();
        let slow = reference_oracle(&depth, &config).unwrap();
        assert!(
            fast.data.iter().zip(&slow.data).all(|(a, b)| a.to_bits() == b.to_bits()),
            "seed {seed} diverged"
        );
    }
}

#[test]
fn constant_field_full_match_is_a_fixed_point() {
    // ρ = 1, τ = ∞: every pixel passes, and averaging a constant quantized
    // field reproduces it everywhere
    let config = NoiseConfig {
        rho_min: 1.0,
        rho_max: 1.0,
        tau_min: f64::INFINITY,
        tau_max: f64::INFINITY,
        ..NoiseConfig::default()
    };
    let depth = DepthImageBatch::new(1, 16, 16, vec![4.0; 256]);
    let out = apply_noise(&depth, &config).unwrap();
    let expect_disp = quantize(config.f * config.b / 4.0, config.quant_step);
    let expect_depth = config.f * config.b / expect_disp;
    for &v in &out.data {
        assert!((v - expect_depth).abs() < 1e-12, "{v} vs {expect_depth}");
    }
}

#[test]
fn zero_match_probability_invalidates_every_pixel() {
    let config = NoiseConfig { rho_min: 0.0, rho_max: 0.0, ..NoiseConfig::default() };
    let depth = random_batch(2, 12, 9, 7);
    let out = apply_noise(&depth, &config).unwrap();
    assert!(out.data.iter().all(|&v| v == depth_noise::INVALID_DEPTH));
}

#[test]
fn fixed_seed_is_bit_deterministic() {
    let config = random_config(3);
    let depth = random_batch(3, 32, 24, 3);
    let a = apply_noise(&depth, &config).unwrap();
    let b = apply_noise(&depth, &config).unwrap();
    assert!(a.data.iter().zip(&b.data).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn near_identity_configuration_approximates_input() {
    // ρ = 1, τ = ∞, s = 1, tiny quantization: output within quantization
    // error of the input on valid pixels
    let config = NoiseConfig {
        rho_min: 1.0,
        rho_max: 1.0,
        tau_min: f64::INFINITY,
        tau_max: f64::INFINITY,
        filt_size: 1,
        quant_step: 1e-6,
        ..NoiseConfig::default()
    };
    let depth = random_batch(1, 16, 16, 11);
    let out = apply_noise(&depth, &config).unwrap();
    for (a, b) in depth.data.iter().zip(&out.data) {
        // disparity error of quant_step/2 maps back to roughly d²/(f·b) · step/2
        let max_err = a * a / (config.f * config.b) * config.quant_step;
        assert!((a - b).abs() <= max_err.max(1e-9), "{a} vs {b}");
    }
}

#[test]
fn invalid_fraction_tracks_match_probability() {
    // with τ = ∞ the mask is pure Bernoulli(ρ): invalid fraction ≈ 1 − ρ
    // within 3σ binomial bounds
    let rho = 0.7;
    let config = NoiseConfig {
        rho_min: rho,
        rho_max: rho,
        tau_min: f64::INFINITY,
        tau_max: f64::INFINITY,
        filt_size: 1,
        seed: 21,
        ..NoiseConfig::default()
    };
    let (h, w) = (128, 128);
    let depth = random_batch(1, h, w, 21);
    let out = apply_noise(&depth, &config).unwrap();
    let invalid = out.data.iter().filter(|&&v| v == depth_noise::INVALID_DEPTH).count() as f64;
    let n = (h * w) as f64;
    let expect = (1.0 - rho) * n;
    let sigma = (n * rho * (1.0 - rho)).sqrt();
    assert!((invalid - expect).abs() < 3.0 * sigma, "{invalid} vs {expect} ± {sigma}");
}

#[test]
fn masked_valid_disparities_are_exact_quantization_multiples() {
    // with s = 1, full match, and τ = ∞, the fill averages each pixel with
    // itself, so the output disparities ARE the pre-fill masked values
    let config = NoiseConfig {
        filt_size: 1,
        rho_min: 1.0,
        rho_max: 1.0,
        tau_min: f64::INFINITY,
        tau_max: f64::INFINITY,
        ..NoiseConfig::default()
    };
    let depth = random_batch(2, 16, 16, 13);
    let out = apply_noise(&depth, &config).unwrap();
    for &d in &out.data {
        assert_ne!(d, depth_noise::INVALID_DEPTH);
        let disp = config.f * config.b / d;
        let steps = disp / config.quant_step;
        assert!(
            (steps - steps.round()).abs() < 1e-9,
            "disparity {disp} is not a multiple of {}",
            config.quant_step
        );
    }
}

#[test]
fn raising_rho_min_never_loses_valid_pixels() {
    let base = NoiseConfig { rho_min: 0.2, rho_max: 0.99, seed: 5, ..NoiseConfig::default() };
    let depth = random_batch(2, 32, 32, 5);
    let mut prev_valid = None;
    for rho_min in [0.2, 0.4, 0.6, 0.8, 0.95] {
        let config = NoiseConfig { rho_min, ..base.clone() };
        let out = apply_noise(&depth, &config).unwrap();
        let valid = out.data.iter().filter(|&&v| v != depth_noise::INVALID_DEPTH).count();
        if let Some(p) = prev_valid {
            assert!(valid >= p, "valid count dropped from {p} to {valid} at rho_min {rho_min}");
        }
        prev_valid = Some(valid);
    }
}

#[test]
fn config_invariants_are_enforced() {
    let bad_rho = NoiseConfig { rho_min: 0.9, rho_max: 0.5, ..NoiseConfig::default() };
    assert!(bad_rho.validate().is_err());
    let bad_filt = NoiseConfig { filt_size: 2, ..NoiseConfig::default() };
    assert!(bad_filt.validate().is_err());
    let bad_quant = NoiseConfig { quant_step: 0.0, ..NoiseConfig::default() };
    assert!(bad_quant.validate().is_err());

    // image smaller than the window
    let depth = DepthImageBatch::new(1, 2, 2, vec![1.0; 4]);
    let config = NoiseConfig { filt_size: 5, ..NoiseConfig::default() };
    assert!(apply_noise(&depth, &config).is_err());
}
