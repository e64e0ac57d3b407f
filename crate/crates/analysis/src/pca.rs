use crate::linalg::symmetric_eigen;
use crate::{AnalysisError, FeatureSet};

/// Fitted principal components: rows are orthonormal directions, most
/// variance first.
#[derive(Debug, Clone)]
pub struct Pca {
    pub dim: usize,
    pub k: usize,
    /// k×dim, rows orthonormal
    pub components: Vec<f64>,
    /// nonincreasing; tiny negatives from roundoff are clamped to zero
    pub explained_variance: Vec<f64>,
    /// variance in the dropped directions (reconstruction error per sample)
    pub residual_variance: f64,
    pub mean: Vec<f64>,
}

impl Pca {
    /// Project rows of an N×dim matrix onto the components -> N×k.
    pub fn project(&self, data: &[f64], n: usize) -> Vec<f64> {
        assert_eq!(data.len(), n * self.dim);
        let mut out = vec![0.0; n * self.k];
        for (r, row) in data.chunks_exact(self.dim).enumerate() {
            for c in 0..self.k {
                let comp = &self.components[c * self.dim..(c + 1) * self.dim];
                let mut dot = 0.0;
                for i in 0..self.dim {
                    dot += (row[i] - self.mean[i]) * comp[i];
                }
                out[r * self.k + c] = dot;
            }
        }
        out
    }
}

/// Fit top-k components on a feature set and project its own rows.
/// Zero-variance directions are allowed (rank-deficient data).
pub fn pca_fit_project(features: &FeatureSet, k: usize) -> Result<(Vec<f64>, Pca), AnalysisError> {
    if k == 0 || features.n <= k {
        return Err(AnalysisError::BadComponentCount { n: features.n, k });
    }
    let d = features.dim;
    let (eigenvalues, eigenvectors) = symmetric_eigen(&features.covariance, d);
    let k = k.min(d);
    let explained_variance: Vec<f64> = eigenvalues[..k].iter().map(|&v| v.max(0.0)).collect();
    let residual_variance: f64 = eigenvalues[k..].iter().map(|&v| v.max(0.0)).sum();
    let components = eigenvectors[..k * d].to_vec();
    let pca = Pca {
        dim: d,
        k,
        components,
        explained_variance,
        residual_variance,
        mean: features.mean.clone(),
    };
    let projections = pca.project(&features.data, features.n);
    Ok((projections, pca))
}
