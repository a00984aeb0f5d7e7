//! Fixtures and independent reference computations shared by the
//! integration tests. Nothing here calls into the clustering code.
#![allow(dead_code)]

use cohflow::fields::DuffingVdp;
use cohflow::{build_ensemble, DoubleGyre, GridSpec, TimeSpec, TrajectoryEnsemble};
use ndarray::{Array2, ArrayView2};

/// Exhaustive minimum of the k-means objective over every labeling with `k`
/// nonempty clusters.
pub fn brute_force_wcss(data: ArrayView2<'_, f64>, k: usize) -> f64 {
    let (m, p) = data.dim();
    let mut labels = vec![0usize; m];
    let mut best = f64::INFINITY;
    loop {
        let mut sums = vec![vec![0.0; p]; k];
        let mut card = vec![0usize; k];
        for (j, &l) in labels.iter().enumerate() {
            card[l] += 1;
            for c in 0..p {
                sums[l][c] += data[[j, c]];
            }
        }
        if card.iter().all(|&c| c > 0) {
            // per-point distances first, then the total, so equal partitions
            // give bit-equal objectives
            let mut total = 0.0;
            for (j, &l) in labels.iter().enumerate() {
                let mut d = 0.0;
                for c in 0..p {
                    let mean = sums[l][c] / card[l] as f64;
                    d += (data[[j, c]] - mean).powi(2);
                }
                total += d;
            }
            best = best.min(total);
        }
        // odometer over k^m labelings
        let mut i = 0;
        loop {
            if i == m {
                return best;
            }
            labels[i] += 1;
            if labels[i] < k {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
    }
}

/// Same partition up to renaming of the clusters.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut fwd = std::collections::HashMap::new();
    let mut back = std::collections::HashMap::new();
    a.iter().zip(b).all(|(&x, &y)| *fwd.entry(x).or_insert(y) == y && *back.entry(y).or_insert(x) == x)
}

/// Sample standard deviation of a set of feature rows around their mean,
/// normalized by `n + 1`, then logged. `None` for degenerate sets.
pub fn reference_sd_value(rows: &[Vec<f64>], steps: usize) -> Option<f64> {
    let card = rows.len();
    if card < 2 {
        return None;
    }
    let p = rows[0].len();
    let mean: Vec<f64> = (0..p).map(|c| rows.iter().map(|r| r[c]).sum::<f64>() / card as f64).collect();
    let s: f64 = rows.iter().map(|r| r.iter().zip(&mean).map(|(a, b)| (a - b).powi(2)).sum::<f64>()).sum();
    if s == 0.0 {
        return None;
    }
    Some(((s / (card - 1) as f64).sqrt() / (steps + 1) as f64).ln())
}

/// Two tight, far-apart groups of straight-line trajectories on a 4x3 grid
/// of seeds (12 trajectories, `steps + 1` samples each). The first six drift
/// right from near the origin, the rest drift up from near (10, 10).
pub fn two_blob_ensemble(steps: usize) -> TrajectoryEnsemble {
    let grid = GridSpec::from_counts(0.0, 3.0, 0.0, 2.0, 3, 2).unwrap();
    let time = TimeSpec::new(0.0, 0.5, steps).unwrap();
    let m = grid.node_count();
    let p = 2 * (steps + 1);
    let mut f = Array2::zeros((m, p));
    for j in 0..m {
        let jitter = 0.01 * (j % 6) as f64 + 0.003 * (j * j % 5) as f64;
        let (x0, y0, vx, vy) = if j < m / 2 {
            (jitter, 0.5 * jitter, 1.0, 0.1 * jitter)
        } else {
            (10.0 + jitter, 10.0 - jitter, 0.05 * jitter, 1.0)
        };
        for i in 0..=steps {
            let t = 0.5 * i as f64;
            f[[j, 2 * i]] = x0 + vx * t;
            f[[j, 2 * i + 1]] = y0 + vy * t;
        }
    }
    TrajectoryEnsemble::from_features(grid, time, 2, f).unwrap()
}

/// Double gyre with the benchmark parameters on `[0,2] x [0,1]`.
pub fn double_gyre(h: f64, dt: f64, steps: usize) -> TrajectoryEnsemble {
    let grid = GridSpec::new(0.0, 2.0, 0.0, 1.0, h, h).unwrap();
    let time = TimeSpec::new(0.0, dt, steps).unwrap();
    build_ensemble(&DoubleGyre::default(), &grid, &time).unwrap()
}

/// Duffing-type oscillator on `[-2,2] x [-1.5,1.5]`.
pub fn duffing(h: f64, dt: f64, steps: usize) -> TrajectoryEnsemble {
    let grid = GridSpec::new(-2.0, 2.0, -1.5, 1.5, h, h).unwrap();
    let time = TimeSpec::new(0.0, dt, steps).unwrap();
    build_ensemble(&DuffingVdp, &grid, &time).unwrap()
}

/// Largest increase between consecutive entries (<= 0 for a non-increasing run).
pub fn max_increase(history: &[f64]) -> f64 {
    history.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
}
