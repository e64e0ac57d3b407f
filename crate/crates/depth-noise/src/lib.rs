//! Stereo depth noise: depth → disparity, edge masking against a local mean,
//! pseudo-stereo match dropout, subpixel quantization, normalized hole
//! filling, and back to depth. The batched path is checked bit-exactly
//! against a naive per-pixel oracle consuming the identical random stream.

pub mod filter;
pub mod io;
pub mod oracle;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use filter::{apply_noise, compute_kernels, depth_to_disparity, disparity_to_depth, filter_disparity, quantize, sample_draws, ImageDraws, Kernels};
pub use oracle::reference_oracle;

/// B depth maps of H×W meters, row-major. Positive finite entries are valid;
/// `INVALID_DEPTH` marks dropped pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImageBatch {
    pub batch: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

pub const INVALID_DEPTH: f64 = 0.0;

impl DepthImageBatch {
    pub fn new(batch: usize, height: usize, width: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), batch * height * width);
        Self { batch, height, width, data }
    }

    pub fn zeros(batch: usize, height: usize, width: usize) -> Self {
        Self::new(batch, height, width, vec![0.0; batch * height * width])
    }

    pub fn image(&self, b: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[b * n..(b + 1) * n]
    }

    pub fn image_mut(&mut self, b: usize) -> &mut [f64] {
        let n = self.height * self.width;
        &mut self.data[b * n..(b + 1) * n]
    }
}

/// Algorithm parameters. JSON field names mirror the struct.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// focal length, pixels
    pub f: f64,
    /// stereo baseline, meters
    pub b: f64,
    /// odd local window size
    pub filt_size: usize,
    /// edge threshold range, disparity units
    pub tau_min: f64,
    pub tau_max: f64,
    /// pseudo-stereo match probability range
    pub rho_min: f64,
    pub rho_max: f64,
    /// sentinel for dropped disparities
    pub invalid_disp: f64,
    /// disparity quantization step
    pub quant_step: f64,
    /// Denominator guard for the normalized fill. The default is small enough
    /// to vanish against any valid-pixel count in f64 (count + eps == count
    /// for count >= 1), so fully-valid windows average exactly while den > eps
    /// still detects empty neighborhoods.
    pub eps: f64,
    /// lower depth clamp before disparity conversion, meters
    pub min_depth: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            f: 320.0,
            b: 0.12,
            filt_size: 3,
            tau_min: 0.5,
            tau_max: 3.0,
            rho_min: 0.8,
            rho_max: 0.98,
            invalid_disp: 0.0,
            quant_step: 0.125,
            eps: 1e-20,
            min_depth: 0.05,
            seed: 0,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<(), NoiseError> {
        if !(0.0 <= self.rho_min && self.rho_min <= self.rho_max && self.rho_max <= 1.0) {
            return Err(NoiseError::InvalidConfig(format!(
                "rho range [{}, {}] must satisfy 0 <= rho_min <= rho_max <= 1",
                self.rho_min, self.rho_max
            )));
        }
        if !(0.0 <= self.tau_min && self.tau_min <= self.tau_max) {
            return Err(NoiseError::InvalidConfig(format!(
                "tau range [{}, {}] must satisfy 0 <= tau_min <= tau_max",
                self.tau_min, self.tau_max
            )));
        }
        if self.filt_size % 2 == 0 || self.filt_size == 0 {
            return Err(NoiseError::EvenFilterSize(self.filt_size));
        }
        if self.quant_step <= 0.0 {
            return Err(NoiseError::InvalidConfig(format!("quant_step {} must be > 0", self.quant_step)));
        }
        if self.f <= 0.0 || self.b <= 0.0 || self.min_depth <= 0.0 || self.eps <= 0.0 {
            return Err(NoiseError::InvalidConfig("f, b, min_depth, eps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum NoiseError {
    #[error("invalid noise config: {0}")]
    InvalidConfig(String),
    #[error("filter size {0} must be odd and >= 1")]
    EvenFilterSize(usize),
    #[error("image {height}x{width} smaller than filter window {filt_size}")]
    ImageTooSmall { height: usize, width: usize, filt_size: usize },
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error in {path} at byte {offset}: {message}")]
    Parse { path: String, offset: usize, message: String },
}
