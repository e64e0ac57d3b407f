//! Batched fast path. Accumulation order inside every window is kernel
//! row-major, identical to the per-pixel oracle, so the two agree bit-exactly.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::{DepthImageBatch, NoiseConfig, NoiseError, INVALID_DEPTH};

/// Averaging and accumulation kernels for the edge test and the fill.
#[derive(Debug, Clone)]
pub struct Kernels {
    pub size: usize,
    /// uniform box, entries 1/s², sums to 1
    pub mean: Vec<f64>,
    /// all-ones, sums to s²
    pub sub: Vec<f64>,
}

pub fn compute_kernels(filt_size: usize) -> Result<Kernels, NoiseError> {
    if filt_size % 2 == 0 || filt_size == 0 {
        return Err(NoiseError::EvenFilterSize(filt_size));
    }
    let n = filt_size * filt_size;
    Ok(Kernels { size: filt_size, mean: vec![1.0 / n as f64; n], sub: vec![1.0; n] })
}

/// Per-image random draws, in stream order: ρ, then the Bernoulli mask
/// row-major, then τ.
#[derive(Debug, Clone)]
pub struct ImageDraws {
    pub rho: f64,
    pub bernoulli: Vec<bool>,
    pub tau: f64,
}

pub fn sample_draws(
    config: &NoiseConfig,
    batch: usize,
    height: usize,
    width: usize,
    rng: &mut impl Rng,
) -> Vec<ImageDraws> {
    (0..batch)
        .map(|_| {
            let rho = if config.rho_max > config.rho_min {
                rng.random_range(config.rho_min..config.rho_max)
            } else {
                config.rho_min
            };
            let bernoulli = (0..height * width).map(|_| rng.random::<f64>() < rho).collect();
            let tau = if config.tau_max > config.tau_min {
                rng.random_range(config.tau_min..config.tau_max)
            } else {
                config.tau_min
            };
            ImageDraws { rho, bernoulli, tau }
        })
        .collect()
}

/// Elementwise f·b/depth after clamping depth below at `min_depth`.
pub fn depth_to_disparity(depth: &[f64], f: f64, b: f64, min_depth: f64) -> Vec<f64> {
    depth.iter().map(|&d| f * b / d.max(min_depth)).collect()
}

/// Inverse map; `invalid_disp` pixels become the invalid depth marker.
pub fn disparity_to_depth(disp: &[f64], f: f64, b: f64, invalid_disp: f64) -> Vec<f64> {
    disp.iter().map(|&v| if v == invalid_disp { INVALID_DEPTH } else { f * b / v }).collect()
}

/// Round to the nearest multiple of `quant_step`, ties to even.
pub fn quantize(disp: f64, quant_step: f64) -> f64 {
    (disp / quant_step).round_ties_even() * quant_step
}

/// Replicate-padded cross-correlation with an s×s kernel. Border rows/cols
/// clamp indices; interior pixels take a branch-free path with the same
/// kernel-row-major accumulation order.
fn cross_correlate_replicate(input: &[f64], h: usize, w: usize, kernel: &[f64], s: usize, out: &mut [f64]) {
    let half = s / 2;
    for y in 0..h {
        let inner_row = y >= half && y + half < h;
        for x in 0..w {
            let idx = y * w + x;
            let mut acc = 0.0;
            if inner_row && x >= half && x + half < w {
                for ky in 0..s {
                    let base = (y + ky - half) * w + (x - half);
                    for kx in 0..s {
                        acc += kernel[ky * s + kx] * input[base + kx];
                    }
                }
            } else {
                for ky in 0..s {
                    let sy = (y + ky).saturating_sub(half).min(h - 1);
                    for kx in 0..s {
                        let sx = (x + kx).saturating_sub(half).min(w - 1);
                        acc += kernel[ky * s + kx] * input[sy * w + sx];
                    }
                }
            }
            out[idx] = acc;
        }
    }
}

/// The pseudocode body for one image's disparity map, with all randomness
/// supplied through `draws`.
pub fn filter_disparity_image(
    disp: &[f64],
    h: usize,
    w: usize,
    kernels: &Kernels,
    config: &NoiseConfig,
    draws: &ImageDraws,
) -> Vec<f64> {
    let n = h * w;
    let s = kernels.size;

    let mut local_mean = vec![0.0; n];
    cross_correlate_replicate(disp, h, w, &kernels.mean, s, &mut local_mean);

    // M = (|disp − m| < τ) ∧ R ; masked = quantized where M else invalid
    let mut mask = vec![false; n];
    let mut masked = vec![config.invalid_disp; n];
    for i in 0..n {
        let keep = (disp[i] - local_mean[i]).abs() < draws.tau && draws.bernoulli[i];
        mask[i] = keep;
        if keep {
            masked[i] = quantize(disp[i], config.quant_step);
        }
    }

    // normalized fill over the valid neighborhood
    let fill_input: Vec<f64> =
        masked.iter().zip(&mask).map(|(&v, &m)| if m { v } else { 0.0 }).collect();
    let mask_input: Vec<f64> = mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
    let mut num = vec![0.0; n];
    let mut den = vec![0.0; n];
    cross_correlate_replicate(&fill_input, h, w, &kernels.sub, s, &mut num);
    cross_correlate_replicate(&mask_input, h, w, &kernels.sub, s, &mut den);

    let mut filled = vec![0.0; n];
    for i in 0..n {
        let d = den[i] + config.eps;
        filled[i] = if d > config.eps { num[i] / d } else { masked[i] };
    }
    filled
}

/// Batched FilterDisp: one (ρ, R, τ) draw set per image.
pub fn filter_disparity(
    disp: &DepthImageBatch,
    kernels: &Kernels,
    config: &NoiseConfig,
    rng: &mut impl Rng,
) -> Result<DepthImageBatch, NoiseError> {
    config.validate()?;
    if disp.height < kernels.size || disp.width < kernels.size {
        return Err(NoiseError::ImageTooSmall {
            height: disp.height,
            width: disp.width,
            filt_size: kernels.size,
        });
    }
    let draws = sample_draws(config, disp.batch, disp.height, disp.width, rng);
    let mut out = DepthImageBatch::zeros(disp.batch, disp.height, disp.width);
    for b in 0..disp.batch {
        let filtered =
            filter_disparity_image(disp.image(b), disp.height, disp.width, kernels, config, &draws[b]);
        out.image_mut(b).copy_from_slice(&filtered);
    }
    Ok(out)
}

/// Full pipeline: depth → disparity → FilterDisp → depth. Randomness comes
/// from the config seed; a fixed seed gives bit-identical output.
pub fn apply_noise(depth: &DepthImageBatch, config: &NoiseConfig) -> Result<DepthImageBatch, NoiseError> {
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    apply_noise_with_rng(depth, config, &mut rng)
}

pub fn apply_noise_with_rng(
    depth: &DepthImageBatch,
    config: &NoiseConfig,
    rng: &mut impl Rng,
) -> Result<DepthImageBatch, NoiseError> {
    config.validate()?;
    let kernels = compute_kernels(config.filt_size)?;
    let mut disp = DepthImageBatch::zeros(depth.batch, depth.height, depth.width);
    for b in 0..depth.batch {
        let d = depth_to_disparity(depth.image(b), config.f, config.b, config.min_depth);
        disp.image_mut(b).copy_from_slice(&d);
    }
    let filtered = filter_disparity(&disp, &kernels, config, rng)?;
    let mut out = DepthImageBatch::zeros(depth.batch, depth.height, depth.width);
    for b in 0..depth.batch {
        let d = disparity_to_depth(filtered.image(b), config.f, config.b, config.invalid_disp);
        out.image_mut(b).copy_from_slice(&d);
    }
    Ok(out)
}
