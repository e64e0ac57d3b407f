//! Evaluation analytics: PCA projection of feature sets, Mahalanobis distance
//! to a fitted latent distribution, and success-rate-by-distance bucketing.

pub mod buckets;
pub mod csv;
pub mod linalg;
pub mod mahalanobis;
pub mod pca;

pub use buckets::{success_by_distance, DistanceBuckets, EpisodeOutcome};
pub use mahalanobis::{box_stats, BoxStats, ClassConditionalMahalanobis, Mahalanobis};
pub use pca::{pca_fit_project, Pca};

use thiserror::Error;

/// N×D feature matrix with its fitted mean and covariance.
#[derive(Debug, Clone)]
pub struct FeatureSet {
    pub n: usize,
    pub dim: usize,
    /// row-major N×D
    pub data: Vec<f64>,
    /// column means (D)
    pub mean: Vec<f64>,
    /// empirical covariance Σ = (1/N)·Σᵢ(xᵢ−μ)(xᵢ−μ)ᵀ, row-major D×D
    pub covariance: Vec<f64>,
}

impl FeatureSet {
    pub fn fit(data: Vec<f64>, n: usize, dim: usize) -> Result<Self, AnalysisError> {
        if n == 0 || dim == 0 || data.len() != n * dim {
            return Err(AnalysisError::BadShape { n, dim, len: data.len() });
        }
        let mut mean = vec![0.0; dim];
        for row in data.chunks_exact(dim) {
            for (m, &x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        for m in mean.iter_mut() {
            *m /= n as f64;
        }
        let mut covariance = vec![0.0; dim * dim];
        for row in data.chunks_exact(dim) {
            for i in 0..dim {
                let di = row[i] - mean[i];
                for j in i..dim {
                    covariance[i * dim + j] += di * (row[j] - mean[j]);
                }
            }
        }
        for i in 0..dim {
            for j in i..dim {
                covariance[i * dim + j] /= n as f64;
                covariance[j * dim + i] = covariance[i * dim + j];
            }
        }
        Ok(Self { n, dim, data, mean, covariance })
    }
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("feature matrix shape mismatch: n={n}, dim={dim}, data length {len}")]
    BadShape { n: usize, dim: usize, len: usize },
    #[error("PCA requires n > k >= 1, got n={n}, k={k}")]
    BadComponentCount { n: usize, k: usize },
    #[error("covariance is singular; fit with a positive ridge")]
    SingularCovariance,
    #[error("bucket edges must be strictly increasing with at least two entries")]
    BadEdges,
    #[error("csv parse error at line {line}: {message}")]
    Csv { line: usize, message: String },
}
