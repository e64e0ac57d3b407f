//! PCA against its eigendecomposition oracle, Mahalanobis reductions and
//! invariances, bucket counting fixtures.

use analysis::{
    box_stats, pca_fit_project, success_by_distance, EpisodeOutcome, FeatureSet, Mahalanobis,
};
use proptest::prelude::*;
use rand::Rng;
use tensor_core::rng::substream;

fn random_features(n: usize, dim: usize, seed: u64) -> FeatureSet {
    let mut rng = substream(seed, "features", 0);
    // anisotropic, correlated data
    let data: Vec<f64> = (0..n)
        .flat_map(|_| {
            let a: f64 = rng.random_range(-1.0..1.0);
            let b: f64 = rng.random_range(-1.0..1.0);
            (0..dim)
                .map(|j| a * (j as f64 + 1.0) + b * ((j * j) as f64 * 0.1) + rng.random_range(-0.05..0.05))
                .collect::<Vec<f64>>()
        })
        .collect();
    FeatureSet::fit(data, n, dim).unwrap()
}

#[test]
fn line_in_2d_gives_first_component_all_variance() {
    let data: Vec<f64> = (0..50).flat_map(|i| vec![i as f64 * 0.3, i as f64 * 0.6]).collect();
    let fs = FeatureSet::fit(data, 50, 2).unwrap();
    let (_, pca) = pca_fit_project(&fs, 2).unwrap();
    assert!(pca.explained_variance[0] > 0.0);
    assert!(pca.explained_variance[1].abs() < 1e-9);
    assert!(pca.residual_variance < 1e-9);
}

#[test]
fn components_are_orthonormal_and_variances_nonincreasing() {
    let fs = random_features(200, 6, 1);
    let (_, pca) = pca_fit_project(&fs, 4).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            let dot: f64 = (0..6)
                .map(|k| pca.components[i * 6 + k] * pca.components[j * 6 + k])
                .sum();
            let expect = if i == j { 1.0 } else { 0.0 };
            assert!((dot - expect).abs() < 1e-9, "component {i}·{j} = {dot}");
        }
    }
    for w in pca.explained_variance.windows(2) {
        assert!(w[0] >= w[1] - 1e-12);
    }
}

#[test]
fn reconstruction_error_equals_sum_of_dropped_eigenvalues() {
    let fs = random_features(300, 5, 2);
    let k = 2;
    let (proj, pca) = pca_fit_project(&fs, k).unwrap();

    // reconstruct from k components and measure mean squared residual
    let mut err_sum = 0.0;
    for (r, row) in fs.data.chunks_exact(5).enumerate() {
        let mut recon = pca.mean.clone();
        for c in 0..k {
            for i in 0..5 {
                recon[i] += proj[r * k + c] * pca.components[c * 5 + i];
            }
        }
        for i in 0..5 {
            err_sum += (row[i] - recon[i]).powi(2);
        }
    }
    let mean_err = err_sum / fs.n as f64;
    assert!(
        (mean_err - pca.residual_variance).abs() < 1e-9,
        "{mean_err} vs {}",
        pca.residual_variance
    );
}

#[test]
fn projections_have_diagonal_nonincreasing_covariance() {
    let fs = random_features(250, 6, 3);
    let (proj, pca) = pca_fit_project(&fs, 3).unwrap();
    let pfs = FeatureSet::fit(proj, fs.n, 3).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                assert!(pfs.covariance[i * 3 + j].abs() < 1e-9);
            }
        }
        assert!((pfs.covariance[i * 3 + i] - pca.explained_variance[i]).abs() < 1e-9);
    }
}

#[test]
fn mahalanobis_reductions() {
    let fs = random_features(100, 4, 4);
    let md = Mahalanobis::fit(&fs).unwrap();
    // x = mean -> 0
    assert!(md.distance(&fs.mean) < 1e-12);

    // identity covariance -> Euclidean
    let iso = FeatureSet {
        n: 10,
        dim: 3,
        data: vec![0.0; 30],
        mean: vec![0.0; 3],
        covariance: vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
    };
    let md_iso = Mahalanobis::fit_with_ridge(&iso, 0.0).unwrap();
    let x = [3.0, -4.0, 12.0];
    let euclid = (9.0f64 + 16.0 + 144.0).sqrt();
    assert!((md_iso.distance(&x) - euclid).abs() < 1e-12);

    // nonnegative, zero iff at the mean (small ridge)
    let q = [0.3, 0.1, -0.2, 0.5];
    assert!(md.distance(&q) > 0.0);
}

#[test]
fn mahalanobis_invariant_under_invertible_linear_maps() {
    let fs = random_features(400, 3, 5);
    let md = Mahalanobis::fit_with_ridge(&fs, 0.0).unwrap();
    let q = [0.4, -0.7, 1.1];
    let d_before = md.distance(&q);

    // apply an invertible map A to data and query
    let a = [1.0, 0.3, -0.2, 0.0, 0.8, 0.5, 0.2, 0.0, 1.5];
    let apply = |x: &[f64]| -> Vec<f64> {
        (0..3).map(|i| (0..3).map(|j| a[i * 3 + j] * x[j]).sum()).collect()
    };
    let mapped: Vec<f64> = fs.data.chunks_exact(3).flat_map(|r| apply(r)).collect();
    let mfs = FeatureSet::fit(mapped, fs.n, 3).unwrap();
    let md2 = Mahalanobis::fit_with_ridge(&mfs, 0.0).unwrap();
    let d_after = md2.distance(&apply(&q));
    assert!((d_before - d_after).abs() < 1e-8, "{d_before} vs {d_after}");
}

#[test]
fn singular_covariance_without_ridge_is_an_error() {
    // rank-1 data
    let data: Vec<f64> = (0..20).flat_map(|i| vec![i as f64, 2.0 * i as f64]).collect();
    let fs = FeatureSet::fit(data, 20, 2).unwrap();
    assert!(Mahalanobis::fit_with_ridge(&fs, 0.0).is_err());
    // the default ridge rescues it
    assert!(Mahalanobis::fit(&fs).is_ok());
}

#[test]
fn bucket_counting_fixtures() {
    let eps = [
        EpisodeOutcome { distance: 12.0, success: true },
        EpisodeOutcome { distance: 3.0, success: true },
        EpisodeOutcome { distance: 7.0, success: false },
        EpisodeOutcome { distance: 19.9, success: false },
    ];
    let b = success_by_distance(&eps, &[0.0, 10.0, 20.0]).unwrap();
    assert_eq!(b.totals, vec![2, 2]);
    assert_eq!(b.successes, vec![1, 1]);

    // single episode at 12 m lands in the second bucket
    let single = [EpisodeOutcome { distance: 12.0, success: true }];
    let b = success_by_distance(&single, &[0.0, 10.0, 20.0]).unwrap();
    assert_eq!(b.totals, vec![0, 1]);
    assert_eq!(b.rates(), vec![None, Some(1.0)]);

    // all successes -> rate 1 everywhere occupied
    let all: Vec<EpisodeOutcome> =
        (0..10).map(|i| EpisodeOutcome { distance: i as f64, success: true }).collect();
    let b = success_by_distance(&all, &[0.0, 5.0, 10.0]).unwrap();
    assert_eq!(b.rates(), vec![Some(1.0), Some(1.0)]);

    assert!(success_by_distance(&all, &[0.0, 0.0]).is_err());
    assert!(success_by_distance(&all, &[5.0]).is_err());
}

#[test]
fn box_stats_median_and_quartiles() {
    let s = box_stats(&[1.0, 2.0, 3.0, 4.0, 5.0]);
    assert_eq!(s.median, 3.0);
    assert_eq!(s.q1, 2.0);
    assert_eq!(s.q3, 4.0);
    assert_eq!((s.min, s.max), (1.0, 5.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn bucket_counts_are_permutation_invariant(seed in 0u64..500) {
        let mut rng = substream(seed, "bucket-prop", 0);
        let mut eps: Vec<EpisodeOutcome> = (0..40)
            .map(|_| EpisodeOutcome {
                distance: rng.random_range(0.0..30.0),
                success: rng.random::<f64>() < 0.5,
            })
            .collect();
        let edges = [0.0, 7.5, 15.0, 30.0];
        let before = success_by_distance(&eps, &edges).unwrap();
        eps.reverse();
        let after = success_by_distance(&eps, &edges).unwrap();
        prop_assert_eq!(before.totals, after.totals);
        prop_assert_eq!(before.successes, after.successes);
    }
}
