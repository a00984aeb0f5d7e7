mod common;

use cohflow::kmeans::{assign, kmeans, kmeans_from_labels, kmeans_warm, wcss, KMeansConfig};
use common::{brute_force_wcss, max_increase, same_partition};
use ndarray::Array2;
use proptest::prelude::*;

fn dataset(max_m: usize, max_p: usize) -> impl Strategy<Value = Array2<f64>> {
    (2..=max_m, 1..=max_p).prop_flat_map(|(m, p)| {
        prop::collection::vec(-50.0..50.0f64, m * p).prop_map(move |v| Array2::from_shape_vec((m, p), v).unwrap())
    })
}

fn naive_assign(data: &Array2<f64>, centroids: &Array2<f64>) -> Vec<usize> {
    data.rows()
        .into_iter()
        .map(|x| {
            let mut best = (f64::INFINITY, 0);
            for (l, c) in centroids.rows().into_iter().enumerate() {
                let d: f64 = x.iter().zip(c.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best.0 {
                    best = (d, l);
                }
            }
            best.1
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wcss_never_increases(data in dataset(40, 6), k in 1usize..6, seed in 0u64..1000) {
        let k = k.min(data.nrows());
        let c = kmeans(data.view(), &KMeansConfig::new(k, seed)).unwrap();
        prop_assert!(max_increase(&c.history) <= 1e-12, "{:?}", c.history);
        prop_assert_eq!(c.history.len(), c.iterations);
        prop_assert!(c.labels.iter().all(|&l| l < k));
        prop_assert!(c.sizes().iter().all(|&s| s > 0));
    }

    #[test]
    fn same_seed_same_result(data in dataset(30, 4), k in 1usize..5, seed in 0u64..1000) {
        let k = k.min(data.nrows());
        let cfg = KMeansConfig::new(k, seed);
        let a = kmeans(data.view(), &cfg).unwrap();
        let b = kmeans(data.view(), &cfg).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn power_of_two_scaling_is_exact(data in dataset(30, 4), k in 1usize..5, seed in 0u64..1000, e in -3i32..4) {
        let k = k.min(data.nrows());
        let s = 2f64.powi(e);
        let cfg = KMeansConfig::new(k, seed);
        let a = kmeans(data.view(), &cfg).unwrap();
        let b = kmeans((&data * s).view(), &cfg).unwrap();
        prop_assert_eq!(&a.labels, &b.labels);
        prop_assert_eq!(a.wcss * s * s, b.wcss);
    }

    #[test]
    fn assignment_matches_naive_argmin(data in dataset(50, 40), k in 1usize..8, seed in 0u64..1000) {
        let k = k.min(data.nrows());
        let c = kmeans(data.view(), &KMeansConfig::new(k, seed).with_max_iterations(2)).unwrap();
        prop_assert_eq!(assign(data.view(), c.centroids.view()).unwrap(), naive_assign(&data, &c.centroids));
    }

    #[test]
    fn best_of_restarts_reaches_brute_force(data in dataset(7, 2), k in 1usize..4) {
        let k = k.min(data.nrows());
        let c = kmeans(data.view(), &KMeansConfig::new(k, 11).with_restarts(10)).unwrap();
        let opt = brute_force_wcss(data.view(), k);
        // the optimum is a fixed point of Lloyd, so a restart landing on it
        // reproduces the brute-force value up to summation order
        prop_assert!(c.wcss >= opt - 1e-9 * (1.0 + opt));
    }

    #[test]
    fn warm_start_never_worse_than_its_seed(data in dataset(30, 3), k in 1usize..5, seed in 0u64..1000) {
        let k = k.min(data.nrows());
        let c0 = kmeans(data.view(), &KMeansConfig::new(k, seed).with_max_iterations(1)).unwrap();
        let start = wcss(data.view(), &assign(data.view(), c0.centroids.view()).unwrap(), c0.centroids.view()).unwrap();
        let c = kmeans_warm(data.view(), c0.centroids.clone(), &KMeansConfig::new(k, seed)).unwrap();
        prop_assert!(c.wcss <= start + 1e-12);
    }

    #[test]
    fn converged_labels_are_a_fixed_point(data in dataset(30, 3), k in 1usize..5, seed in 0u64..1000) {
        let k = k.min(data.nrows());
        let cfg = KMeansConfig::new(k, seed);
        let c = kmeans(data.view(), &cfg).unwrap();
        prop_assume!(c.converged);
        let again = kmeans_from_labels(data.view(), c.labels.clone(), &cfg).unwrap();
        prop_assert_eq!(again.iterations, 1);
        prop_assert_eq!(&again.labels, &c.labels);
    }
}

#[test]
fn twenty_small_instances_match_exhaustive_search() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    for case in 0..20 {
        let m = rng.random_range(3..=8);
        let p = rng.random_range(1..=2);
        let k = rng.random_range(1..=3usize).min(m);
        let data = Array2::from_shape_fn((m, p), |_| rng.random_range(-10.0..10.0));
        let c = kmeans(data.view(), &KMeansConfig::new(k, case).with_restarts(10)).unwrap();
        let opt = brute_force_wcss(data.view(), k);
        assert_eq!(c.wcss, opt, "case {case}");
    }
}

#[test]
fn blob_warm_start_from_coarse_solution_matches_cold() {
    let e = common::two_blob_ensemble(8);
    let coarse = e.subsample(2).unwrap();
    let cfg = KMeansConfig::new(2, 5);
    let c0 = kmeans(coarse.features().view(), &cfg).unwrap();
    let warm = kmeans_from_labels(e.features().view(), c0.labels, &cfg).unwrap();
    let cold = kmeans(e.features().view(), &cfg.clone().with_restarts(10)).unwrap();
    assert!(same_partition(&warm.labels, &cold.labels));
}
