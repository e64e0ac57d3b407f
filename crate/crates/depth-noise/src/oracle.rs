//! Unoptimized per-pixel twin of the batched pipeline. Shares only the random
//! stream; all arithmetic is re-derived here with naive loops.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::filter::sample_draws;
use crate::{DepthImageBatch, NoiseConfig, NoiseError, INVALID_DEPTH};

fn window_sum(
    value_at: impl Fn(usize, usize) -> f64,
    kernel_at: impl Fn(usize, usize) -> f64,
    y: usize,
    x: usize,
    h: usize,
    w: usize,
    s: usize,
) -> f64 {
    let half = (s / 2) as isize;
    let mut acc = 0.0;
    for ky in 0..s {
        let sy = (y as isize + ky as isize - half).clamp(0, h as isize - 1) as usize;
        for kx in 0..s {
            let sx = (x as isize + kx as isize - half).clamp(0, w as isize - 1) as usize;
            acc += kernel_at(ky, kx) * value_at(sy, sx);
        }
    }
    acc
}

/// Same contract as `apply_noise`, computed pixel by pixel.
pub fn reference_oracle(depth: &DepthImageBatch, config: &NoiseConfig) -> Result<DepthImageBatch, NoiseError> {
    config.validate()?;
    let (h, w, s) = (depth.height, depth.width, config.filt_size);
    if h < s || w < s {
        return Err(NoiseError::ImageTooSmall { height: h, width: w, filt_size: s });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let draws = sample_draws(config, depth.batch, h, w, &mut rng);
    let mean_entry = 1.0 / (s * s) as f64;

    let mut out = DepthImageBatch::zeros(depth.batch, h, w);
    for b in 0..depth.batch {
        let img = depth.image(b);
        let dr = &draws[b];

        let mut disp = vec![0.0; h * w];
        for i in 0..h * w {
            let clamped = if img[i] < config.min_depth { config.min_depth } else { img[i] };
            disp[i] = config.f * config.b / clamped;
        }

        let mut mask = vec![false; h * w];
        let mut masked = vec![config.invalid_disp; h * w];
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let m = window_sum(|sy, sx| disp[sy * w + sx], |_, _| mean_entry, y, x, h, w, s);
                if (disp[i] - m).abs() < dr.tau && dr.bernoulli[i] {
                    mask[i] = true;
                    masked[i] = (disp[i] / config.quant_step).round_ties_even() * config.quant_step;
                }
            }
        }

        let result = out.image_mut(b);
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let num = window_sum(
                    |sy, sx| if mask[sy * w + sx] { masked[sy * w + sx] } else { 0.0 },
                    |_, _| 1.0,
                    y,
                    x,
                    h,
                    w,
                    s,
                );
                let den = window_sum(
                    |sy, sx| if mask[sy * w + sx] { 1.0 } else { 0.0 },
                    |_, _| 1.0,
                    y,
                    x,
                    h,
                    w,
                    s,
                ) + config.eps;
                let filled = if den > config.eps { num / den } else { masked[i] };
                result[i] =
                    if filled == config.invalid_disp { INVALID_DEPTH } else { config.f * config.b / filled };
            }
        }
    }
    Ok(out)
}
