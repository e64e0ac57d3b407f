use serde::Serialize;

use crate::linalg::{cholesky, forward_substitute};
use crate::{AnalysisError, FeatureSet};

/// Default ridge scale: delta = 1e-6 · trace(Σ)/D added to the diagonal
/// before factorization.
pub const DEFAULT_RIDGE_SCALE: f64 = 1e-6;

/// sqrt((x−μ)ᵀ Σ⁻¹ (x−μ)) against a single fitted Gaussian.
#[derive(Debug, Clone)]
pub struct Mahalanobis {
    dim: usize,
    mean: Vec<f64>,
    chol: Vec<f64>,
}

impl Mahalanobis {
    /// Fit with the default trace-scaled ridge.
    pub fn fit(features: &FeatureSet) -> Result<Self, AnalysisError> {
        let trace: f64 = (0..features.dim).map(|i| features.covariance[i * features.dim + i]).sum();
        let ridge = DEFAULT_RIDGE_SCALE * trace / features.dim as f64;
        Self::fit_with_ridge(features, ridge)
    }

    /// Fit with an explicit ridge; zero ridge on a singular covariance is a
    /// contract error.
    pub fn fit_with_ridge(features: &FeatureSet, ridge: f64) -> Result<Self, AnalysisError> {
        let d = features.dim;
        let mut sigma = features.covariance.clone();
        for i in 0..d {
            sigma[i * d + i] += ridge;
        }
        let chol = cholesky(&sigma, d).ok_or(AnalysisError::SingularCovariance)?;
        Ok(Self { dim: d, mean: features.mean.clone(), chol })
    }

    pub fn distance(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim);
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        // Σ = L·Lᵀ, so (x−μ)ᵀΣ⁻¹(x−μ) = ‖L⁻¹(x−μ)‖²
        let y = forward_substitute(&self.chol, self.dim, &centered);
        y.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Class-conditional variant: per-class means with a pooled covariance; the
/// distance of a query is the minimum over classes.
#[derive(Debug, Clone)]
pub struct ClassConditionalMahalanobis {
    dim: usize,
    class_means: Vec<Vec<f64>>,
    chol: Vec<f64>,
}

impl ClassConditionalMahalanobis {
    pub fn fit(classes: &[FeatureSet]) -> Result<Self, AnalysisError> {
        assert!(!classes.is_empty());
        let d = classes[0].dim;
        let total: usize = classes.iter().map(|c| c.n).sum();
        // pooled Σ = (1/N_total) Σ_c N_c Σ_c
        let mut pooled = vec![0.0; d * d];
        for c in classes {
            assert_eq!(c.dim, d);
            for (p, &v) in pooled.iter_mut().zip(&c.covariance) {
                *p += c.n as f64 * v;
            }
        }
        for p in pooled.iter_mut() {
            *p /= total as f64;
        }
        let trace: f64 = (0..d).map(|i| pooled[i * d + i]).sum();
        for i in 0..d {
            pooled[i * d + i] += DEFAULT_RIDGE_SCALE * trace / d as f64;
        }
        let chol = cholesky(&pooled, d).ok_or(AnalysisError::SingularCovariance)?;
        Ok(Self { dim: d, class_means: classes.iter().map(|c| c.mean.clone()).collect(), chol })
    }

    pub fn distance(&self, x: &[f64]) -> f64 {
        self.class_means
            .iter()
            .map(|mean| {
                let centered: Vec<f64> = x.iter().zip(mean).map(|(a, b)| a - b).collect();
                let y = forward_substitute(&self.chol, self.dim, &centered);
                y.iter().map(|v| v * v).sum::<f64>().sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Five-number summary with linearly interpolated quartiles.
#[derive(Debug, Clone, Serialize)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

pub fn box_stats(values: &[f64]) -> BoxStats {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let quantile = |q: f64| -> f64 {
        let pos = q * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    };
    BoxStats {
        min: sorted[0],
        q1: quantile(0.25),
        median: quantile(0.5),
        q3: quantile(0.75),
        max: *sorted.last().expect("nonempty"),
    }
}
