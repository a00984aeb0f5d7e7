//! Lloyd's k-means over flattened trajectory features.
//!
//! Labels are zero based. Distances are squared Euclidean over whole rows,
//! i.e. the squared Frobenius norm of the trajectory matrix difference.

use ndarray::{Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const DEFAULT_MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// `k` distinct data rows drawn uniformly with the configured seed.
    RandomPoints,
    /// Caller-supplied `k x p` centroids.
    Centroids(Array2<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iterations: usize,
    pub init: Init,
    pub seed: u64,
    /// Independent random restarts; the lowest final WCSS wins. Only used
    /// with [`Init::RandomPoints`].
    pub restarts: usize,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            init: Init::RandomPoints,
            seed,
            restarts: 1,
        }
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_centroids(mut self, centroids: Array2<f64>) -> Self {
        self.init = Init::Centroids(centroids);
        self
    }

    fn validate(&self, m: usize, p: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidSpec("k must be at least 1".into()));
        }
        if self.k > m {
            return Err(Error::InvalidSpec(format!("k = {} exceeds the number of data points {m}", self.k)));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidSpec("max_iterations must be at least 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidSpec("restarts must be at least 1".into()));
        }
        if let Init::Centroids(c) = &self.init {
            check_centroids(c, self.k, p)?;
        }
        Ok(())
    }
}

fn check_centroids(c: &Array2<f64>, k: usize, p: usize) -> Result<()> {
    if c.nrows() != k || c.ncols() != p {
        return Err(Error::Shape(format!(
            "initial centroids are {}x{}, expected {k}x{p}",
            c.nrows(),
            c.ncols()
        )));
    }
    Ok(())
}

/// Result of a k-means run.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub k: usize,
    /// Cluster of every data row, in `0..k`.
    pub labels: Vec<usize>,
    /// `k x p`, row `l` is the mean of cluster `l`.
    pub centroids: Array2<f64>,
    pub wcss: f64,
    pub iterations: usize,
    /// WCSS after every iteration.
    pub history: Vec<f64>,
    pub seed: u64,
    pub converged: bool,
    /// Nominal assignment work: every pass costs `M k p` coordinate operations.
    pub assignment_ops: u64,
}

impl Clustering {
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn feature_len(&self) -> usize {
        self.centroids.ncols()
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Squared distance, abandoned early once it provably exceeds `bound`
/// (returns `None` then). Summation order matches [`sq_dist`].
#[inline]
fn sq_dist_bounded(a: &[f64], b: &[f64], bound: f64) -> Option<f64> {
    const CHUNK: usize = 16;
    let mut acc = 0.0;
    for (ca, cb) in a.chunks(CHUNK).zip(b.chunks(CHUNK)) {
        for (x, y) in ca.iter().zip(cb) {
            acc += (x - y) * (x - y);
        }
        if acc > bound {
            return None;
        }
    }
    Some(acc)
}

fn row<'a>(a: &'a ArrayView2<'_, f64>, i: usize) -> &'a [f64] {
    a.row(i).to_slice().expect("rows must be contiguous")
}

fn require_standard(data: &ArrayView2<'_, f64>, what: &str) -> Result<()> {
    if data.is_standard_layout() {
        Ok(())
    } else {
        Err(Error::Shape(format!("{what} must be in standard (row-major) layout")))
    }
}

/// Index of the nearest centroid, lowest index on ties.
/// `hint` is evaluated first to tighten the abandonment bound.
fn nearest(x: &[f64], centroids: &ArrayView2<'_, f64>, hint: Option<usize>) -> usize {
    let k = centroids.nrows();
    let start = hint.filter(|&h| h < k).unwrap_or(0);
    let mut best = start;
    let mut best_d = sq_dist(x, row(centroids, start));
    for l in 0..k {
        if l == start {
            continue;
        }
        // a candidate above the current best on ties cannot win
        let bound = best_d;
        match sq_dist_bounded(x, row(centroids, l), bound) {
            Some(d) if d < best_d || (d == best_d && l < best) => {
                best = l;
                best_d = d;
            }
            _ => {}
        }
    }
    best
}

/// Nearest-centroid labels.
pub fn assign(data: ArrayView2<'_, f64>, centroids: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
    assign_hinted(data, centroids, None)
}

fn assign_hinted(
    data: ArrayView2<'_, f64>,
    centroids: ArrayView2<'_, f64>,
    hint: Option<&[usize]>,
) -> Result<Vec<usize>> {
    if data.ncols() != centroids.ncols() {
        return Err(Error::Shape(format!(
            "data has {} features, centroids have {}",
            data.ncols(),
            centroids.ncols()
        )));
    }
    if centroids.nrows() == 0 {
        return Err(Error::Shape("no centroids".into()));
    }
    require_standard(&data, "data")?;
    require_standard(&centroids, "centroids")?;
    let labels = (0..data.nrows())
        .into_par_iter()
        .map(|j| nearest(row(&data, j), &centroids, hint.map(|h| h[j])))
        .collect();
    Ok(labels)
}

fn member_means(data: &ArrayView2<'_, f64>, labels: &[usize], k: usize) -> (Array2<f64>, Vec<usize>) {
    let p = data.ncols();
    let mut sums = Array2::<f64>::zeros((k, p));
    let mut counts = vec![0usize; k];
    for (j, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        let mut dst = sums.row_mut(l);
        for (s, x) in dst.iter_mut().zip(row(data, j)) {
            *s += x;
        }
    }
    for (l, &c) in counts.iter().enumerate() {
        if c > 0 {
            let n = c as f64;
            sums.row_mut(l).mapv_inplace(|v| v / n);
        }
    }
    (sums, counts)
}

/// Recomputes centroids as member means.
///
/// An empty cluster takes over the point that lies farthest from its own
/// centroid (among clusters with at least two members); `labels` is updated to
/// reflect the move, and the affected means are recomputed.
pub fn update(data: ArrayView2<'_, f64>, labels: &mut [usize], k: usize) -> Result<Array2<f64>> {
    if labels.len() != data.nrows() {
        return Err(Error::Shape(format!("{} labels for {} rows", labels.len(), data.nrows())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::InvalidSpec(format!("label {bad} out of range for k = {k}")));
    }
    if k > data.nrows() {
        return Err(Error::InvalidSpec(format!("k = {k} exceeds {} data points", data.nrows())));
    }
    require_standard(&data, "data")?;
    let (mut centroids, mut counts) = member_means(&data, labels, k);
    if counts.iter().all(|&c| c > 0) {
        return Ok(centroids);
    }
    for l in 0..k {
        if counts[l] > 0 {
            continue;
        }
        let mut far: Option<(usize, f64)> = None;
        for (j, &lj) in labels.iter().enumerate() {
            if counts[lj] < 2 {
                continue;
            }
            let d = sq_dist(row(&data, j), centroids.row(lj).as_slice().unwrap());
            if far.is_none_or(|(_, fd)| d > fd) {
                far = Some((j, d));
            }
        }
        let (j, _) = far.expect("k <= M guarantees a cluster with two members");
        counts[labels[j]] -= 1;
        labels[j] = l;
        counts[l] = 1;
        // refresh means so the next empty cluster measures against current centroids
        centroids = member_means(&data, labels, k).0;
    }
    Ok(centroids)
}

/// Within-cluster sum of squared distances.
pub fn wcss(data: ArrayView2<'_, f64>, labels: &[usize], centroids: ArrayView2<'_, f64>) -> Result<f64> {
    if labels.len() != data.nrows() {
        return Err(Error::Shape(format!("{} labels for {} rows", labels.len(), data.nrows())));
    }
    if data.ncols() != centroids.ncols() {
        return Err(Error::Shape(format!(
            "data has {} features, centroids have {}",
            data.ncols(),
            centroids.ncols()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= centroids.nrows()) {
        return Err(Error::InvalidSpec(format!("label {bad} out of range for {} centroids", centroids.nrows())));
    }
    Ok(labels
        .iter()
        .enumerate()
        .map(|(j, &l)| {
            let x = data.row(j);
            let c = centroids.row(l);
            x.iter().zip(c.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        })
        .sum())
}

fn random_points(data: &ArrayView2<'_, f64>, k: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = rand::seq::index::sample(&mut rng, data.nrows(), k);
    data.select(Axis(0), &picks.into_vec())
}

/// Lloyd iterations from `centroids`.
///
/// With `prior` labels whose means are exactly `centroids`, the run stops after
/// one assignment pass if nothing moves. Otherwise it stops when an assignment
/// pass changes no label or an update leaves every centroid unchanged.
pub(crate) fn lloyd(
    data: ArrayView2<'_, f64>,
    mut centroids: Array2<f64>,
    prior: Option<Vec<usize>>,
    max_iterations: usize,
    seed: u64,
) -> Result<Clustering> {
    let (m, p) = data.dim();
    let k = centroids.nrows();
    let ops_per_pass = (m * k * p) as u64;
    let mut labels = prior;
    let mut history = Vec::new();
    let mut assignment_ops = 0u64;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iterations {
        iterations += 1;
        let mut next = assign_hinted(data, centroids.view(), labels.as_deref())?;
        assignment_ops += ops_per_pass;
        if labels.as_deref() == Some(&next[..]) {
            let last = match history.last() {
                Some(&w) => w,
                None => wcss(data, &next, centroids.view())?,
            };
            history.push(last);
            converged = true;
            break;
        }
        let updated = update(data, &mut next, k)?;
        let unchanged = updated
            .iter()
            .zip(centroids.iter())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        centroids = updated;
        history.push(wcss(data, &next, centroids.view())?);
        labels = Some(next);
        if unchanged {
            converged = true;
            break;
        }
    }

    let labels = match labels {
        Some(l) => l,
        None => unreachable!("max_iterations >= 1 runs at least one pass"),
    };
    let total = wcss(data, &labels, centroids.view())?;
    Ok(Clustering {
        k,
        labels,
        centroids,
        wcss: total,
        iterations,
        history,
        seed,
        converged,
        assignment_ops,
    })
}

/// k-means with the configured initialization (and restarts for random init).
pub fn kmeans(data: ArrayView2<'_, f64>, cfg: &KMeansConfig) -> Result<Clustering> {
    let (m, p) = data.dim();
    cfg.validate(m, p)?;
    require_standard(&data, "data")?;
    match &cfg.init {
        Init::Centroids(c) => lloyd(data, c.clone(), None, cfg.max_iterations, cfg.seed),
        Init::RandomPoints => {
            let mut best: Option<Clustering> = None;
            let mut total_ops = 0;
            for r in 0..cfg.restarts {
                let seed = cfg.seed.wrapping_add(r as u64);
                let run = lloyd(data, random_points(&data, cfg.k, seed), None, cfg.max_iterations, seed)?;
                total_ops += run.assignment_ops;
                if best.as_ref().is_none_or(|b| run.wcss < b.wcss) {
                    best = Some(run);
                }
            }
            let mut best = best.expect("restarts >= 1");
            best.assignment_ops = total_ops;
            Ok(best)
        }
    }
}

/// k-means warm-started from `centroids0`; `cfg.init` is ignored.
pub fn kmeans_warm(data: ArrayView2<'_, f64>, centroids0: Array2<f64>, cfg: &KMeansConfig) -> Result<Clustering> {
    let (m, p) = data.dim();
    check_centroids(&centroids0, cfg.k, p)?;
    KMeansConfig {
        init: Init::RandomPoints,
        ..cfg.clone()
    }
    .validate(m, p)?;
    require_standard(&data, "data")?;
    lloyd(data, centroids0, None, cfg.max_iterations, cfg.seed)
}

/// Warm start from a previous partition: centroids are the member means of
/// `data` under `labels`, and `labels` seeds the convergence check.
pub fn kmeans_from_labels(data: ArrayView2<'_, f64>, mut labels: Vec<usize>, cfg: &KMeansConfig) -> Result<Clustering> {
    let (m, p) = data.dim();
    KMeansConfig {
        init: Init::RandomPoints,
        ..cfg.clone()
    }
    .validate(m, p)?;
    let centroids = update(data, &mut labels, cfg.k)?;
    lloyd(data, centroids, Some(labels), cfg.max_iterations, cfg.seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn col(v: &[f64]) -> Array2<f64> {
        Array2::from_shape_vec((v.len(), 1), v.to_vec()).unwrap()
    }

    #[test]
    fn wcss_cases() {
        let d = col(&[1.0, 1.0]);
        assert_eq!(wcss(d.view(), &[0, 0], col(&[1.0]).view()).unwrap(), 0.0);
        let d = col(&[0.0, 2.0]);
        assert_eq!(wcss(d.view(), &[0, 0], col(&[1.0]).view()).unwrap(), 2.0);
        let d = array![[0.0, 1.0], [3.0, -2.0], [5.5, 0.25]];
        assert_eq!(wcss(d.view(), &[0, 1, 2], d.view()).unwrap(), 0.0);
        assert!(wcss(d.view(), &[0, 1], d.view()).is_err());
        assert!(wcss(d.view(), &[0, 1, 2], col(&[0.0, 1.0, 2.0]).view()).is_err());
    }

    #[test]
    fn assign_cases() {
        // equidistant from clusters 0 and 2
        let c = col(&[0.0, 5.0, 2.0]);
        assert_eq!(assign(col(&[1.0]).view(), c.view()).unwrap(), vec![0]);
        let d = array![[0.0, 1.0], [3.0, -2.0], [5.5, 0.25]];
        assert_eq!(assign(d.view(), d.view()).unwrap(), vec![0, 1, 2]);
        let labels = assign(col(&[0.0, 0.4, 1.0]).view(), col(&[0.0, 1.0]).view()).unwrap();
        assert_eq!(labels, vec![0, 0, 1]);
    }

    #[test]
    fn hinted_assignment_matches_plain() {
        let c = col(&[0.0, 2.0, 2.0, 4.0]);
        let d = col(&[1.0, 2.0, 3.0, 0.5, 3.5]);
        let plain = assign(d.view(), c.view()).unwrap();
        for hint in [[0, 0, 0, 0, 0], [3, 3, 3, 3, 3], [2, 2, 2, 2, 2], [1, 2, 3, 0, 1]] {
            assert_eq!(assign_hinted(d.view(), c.view(), Some(&hint)).unwrap(), plain);
        }
        // ties at 1.0 and 3.0, centroids 1 and 2 coincide
        assert_eq!(plain, vec![0, 1, 1, 0, 3]);
    }

    #[test]
    fn update_cases() {
        let d = col(&[0.0, 2.0, 10.0]);
        let mut labels = vec![0, 0, 0];
        assert_eq!(update(d.view(), &mut labels, 1).unwrap(), col(&[4.0]));
        let mut labels = vec![0, 0, 1];
        assert_eq!(update(d.view(), &mut labels, 2).unwrap(), col(&[1.0, 10.0]));
    }

    #[test]
    fn empty_cluster_takes_farthest_point_and_lowers_wcss() {
        let d = col(&[0.0, 1.0, 2.0, 10.0]);
        let mut labels = vec![0, 0, 0, 0];
        let before = wcss(d.view(), &labels, update(d.view(), &mut labels.clone(), 1).unwrap().view()).unwrap();
        let c = update(d.view(), &mut labels, 2).unwrap();
        assert_eq!(labels, vec![0, 0, 0, 1]);
        assert_eq!(c, col(&[1.0, 10.0]));
        let after = wcss(d.view(), &labels, c.view()).unwrap();
        assert!(after < before, "{after} !< {before}");
    }

    #[test]
    fn k_one_is_global_mean() {
        let d = array![[0.0, 1.0], [2.0, 3.0], [4.0, -1.0]];
        let c = kmeans(d.view(), &KMeansConfig::new(1, 7)).unwrap();
        assert_eq!(c.labels, vec![0, 0, 0]);
        assert_eq!(c.centroids, array![[2.0, 1.0]]);
        assert!((c.wcss - (4.0 + 4.0 + 8.0)).abs() < 1e-12);
    }

    #[test]
    fn two_blobs() {
        let d = col(&[0.0, 0.1, 10.0, 10.1]);
        for seed in 0..20 {
            let c = kmeans(d.view(), &KMeansConfig::new(2, seed)).unwrap();
            assert_eq!(c.labels[0], c.labels[1]);
            assert_eq!(c.labels[2], c.labels[3]);
            assert_ne!(c.labels[0], c.labels[2]);
            assert!((c.wcss - 0.01).abs() < 1e-12, "{}", c.wcss);
        }
    }

    #[test]
    fn k_equals_m_from_data_points() {
        let d = array![[0.0, 1.0], [2.0, 3.0], [4.0, -1.0], [4.0, -1.5]];
        let cfg = KMeansConfig::new(4, 0).with_centroids(d.clone());
        let c = kmeans(d.view(), &cfg).unwrap();
        assert_eq!(c.iterations, 1);
        assert_eq!(c.wcss, 0.0);
        assert_eq!(c.labels, vec![0, 1, 2, 3]);
    }

    #[test]
    fn too_many_clusters() {
        let d = col(&[0.0, 1.0]);
        assert!(kmeans(d.view(), &KMeansConfig::new(3, 0)).is_err());
        assert!(kmeans(d.view(), &KMeansConfig::new(0, 0)).is_err());
    }

    #[test]
    fn warm_start_from_optimum_is_immediate() {
        let d = col(&[0.0, 0.1, 10.0, 10.1]);
        let cold = kmeans(d.view(), &KMeansConfig::new(2, 3)).unwrap();
        let warm = kmeans_warm(d.view(), cold.centroids.clone(), &KMeansConfig::new(2, 3)).unwrap();
        assert_eq!(warm.labels, cold.labels);
        assert_eq!(warm.iterations, 1);
        let relabeled = kmeans_from_labels(d.view(), cold.labels.clone(), &KMeansConfig::new(2, 3)).unwrap();
        assert_eq!(relabeled.iterations, 1);
        assert_eq!(relabeled.labels, cold.labels);
    }

    #[test]
    fn warm_start_length_mismatch() {
        let d = col(&[0.0, 0.1, 10.0, 10.1]);
        assert!(kmeans_warm(d.view(), Array2::zeros((2, 2)), &KMeansConfig::new(2, 0)).is_err());
        assert!(kmeans_warm(d.view(), Array2::zeros((3, 1)), &KMeansConfig::new(2, 0)).is_err());
    }

    #[test]
    fn warm_never_worse_than_its_start() {
        let d = array![[0.0, 0.0], [0.2, 0.1], [3.0, 3.1], [2.9, 3.0], [6.0, 0.0], [6.1, 0.3], [1.0, 5.0]];
        let c0 = array![[0.0, 0.0], [3.0, 3.0], [6.0, 6.0]];
        let start = wcss(d.view(), &assign(d.view(), c0.view()).unwrap(), c0.view()).unwrap();
        let warm = kmeans_warm(d.view(), c0, &KMeansConfig::new(3, 0)).unwrap();
        assert!(warm.wcss <= start);
    }

    #[test]
    fn max_iterations_cap() {
        let d = array![[0.0], [1.0], [2.0], [3.0], [4.0], [5.0], [6.0], [7.0], [8.0], [9.0]];
        let cfg = KMeansConfig::new(3, 1).with_centroids(array![[0.0], [0.5], [1.0]]).with_max_iterations(1);
        let c = kmeans(d.view(), &cfg).unwrap();
        assert_eq!(c.iterations, 1);
        assert!(!c.converged);
        assert_eq!(c.assignment_ops, 10 * 3);
    }
}
