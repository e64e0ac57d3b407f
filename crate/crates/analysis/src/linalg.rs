//! Small dense symmetric linear algebra: cyclic Jacobi eigendecomposition and
//! Cholesky factorization. Row-major d×d matrices.

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns (eigenvalues, eigenvectors as rows), sorted by descending
/// eigenvalue. Eigenvector rows are orthonormal.
pub fn symmetric_eigen(matrix: &[f64], d: usize) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(matrix.len(), d * d);
    let mut a = matrix.to_vec();
    // v starts as identity; accumulates rotations as columns
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }

    let off = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    s += a[i * d + j] * a[i * d + j];
                }
            }
        }
        s
    };
    let frob: f64 = matrix.iter().map(|x| x * x).sum::<f64>().max(1e-300);
    let tol = 1e-24 * frob;

    for _sweep in 0..100 {
        if off(&a) <= tol {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = a[p * d + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a[p * d + p];
                let aqq = a[q * d + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| a[j * d + j].partial_cmp(&a[i * d + i]).expect("finite eigenvalues"));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[i * d + i]).collect();
    let mut eigenvectors = vec![0.0; d * d];
    for (row, &col) in order.iter().enumerate() {
        for k in 0..d {
            eigenvectors[row * d + k] = v[k * d + col];
        }
    }
    (eigenvalues, eigenvectors)
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
/// Returns None when the matrix is not positive definite; pivots are judged
/// against a scale-relative tolerance so roundoff cannot mask singularity.
pub fn cholesky(matrix: &[f64], d: usize) -> Option<Vec<f64>> {
    assert_eq!(matrix.len(), d * d);
    let max_diag = (0..d).map(|i| matrix[i * d + i].abs()).fold(0.0f64, f64::max);
    let tol = f64::EPSILON * d as f64 * max_diag;
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut sum = matrix[i * d + j];
            for k in 0..j {
                sum -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if sum <= tol {
                    return None;
                }
                l[i * d + i] = sum.sqrt();
            } else {
                l[i * d + j] = sum / l[j * d + j];
            }
        }
    }
    Some(l)
}

/// Solve L·y = b for lower-triangular L.
pub fn forward_substitute(l: &[f64], d: usize, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; d];
    for i in 0..d {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * d + k] * y[k];
        }
        y[i] = sum / l[i * d + i];
    }
    y
}
