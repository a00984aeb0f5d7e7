//! Adaptive refinement: cluster a dyadic subsample of every trajectory, then
//! move level by level to the full resolution, seeding each level with the
//! member means of the previous partition.

use std::collections::BTreeMap;

use ndarray::Array2;

use super::WcssTrace;
use crate::advect::TrajectoryEnsemble;
use crate::error::{Error, Result};
use crate::kmeans::{kmeans, kmeans_from_labels, update, Clustering, KMeansConfig, DEFAULT_MAX_ITERATIONS};
use crate::scalar_field::ScalarField;
use crate::wcve::{wcve_field, WcveOptions};

/// Iteration cap for levels coarser than the full resolution. The coarse
/// partitions only seed the next level and need not be converged.
pub const COARSE_MAX_ITERATIONS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptivePlan {
    /// Deepest level `N`: the first clustering uses every `2^N`-th sample.
    pub levels: u32,
    pub coarse_max_iterations: usize,
    pub fine_max_iterations: usize,
    /// Per-level iteration caps taking precedence over the two defaults.
    pub overrides: BTreeMap<u32, usize>,
}

impl AdaptivePlan {
    pub fn new(levels: u32) -> Self {
        Self {
            levels,
            coarse_max_iterations: COARSE_MAX_ITERATIONS,
            fine_max_iterations: DEFAULT_MAX_ITERATIONS,
            overrides: BTreeMap::new(),
        }
    }

    pub fn max_iterations(&self, level: u32) -> usize {
        if let Some(&n) = self.overrides.get(&level) {
            n
        } else if level == 0 {
            self.fine_max_iterations
        } else {
            self.coarse_max_iterations
        }
    }

    pub fn validate(&self, steps: usize) -> Result<()> {
        if self.levels == 0 {
            return Err(Error::InvalidSpec("adaptive refinement needs at least one level".into()));
        }
        let stride = 1usize
            .checked_shl(self.levels)
            .ok_or_else(|| Error::InvalidSpec(format!("{} levels overflow", self.levels)))?;
        if stride > steps || !steps.is_multiple_of(stride) {
            return Err(Error::InvalidSpec(format!(
                "{steps} steps are not divisible by 2^{} = {stride}",
                self.levels
            )));
        }
        Ok(())
    }
}

/// Smallest multiple of `2^levels` that is at least `steps`.
pub fn aligned_steps(steps: usize, levels: u32) -> usize {
    let stride = 1usize << levels;
    steps.div_ceil(stride) * stride
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelReport {
    pub level: u32,
    pub feature_len: usize,
    pub iterations: usize,
    pub assignment_ops: u64,
    pub wcss: f64,
    /// WCVE of this level's partition, evaluated on the level's subsample.
    pub field: ScalarField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveOutcome {
    /// Full-resolution clustering.
    pub clustering: Clustering,
    pub field: ScalarField,
    pub trace: WcssTrace,
    /// Deepest level first.
    pub levels: Vec<LevelReport>,
}

impl AdaptiveOutcome {
    pub fn assignment_ops(&self) -> u64 {
        self.levels.iter().map(|l| l.assignment_ops).sum()
    }
}

/// Member means of `subsample(e, level)` under `labels`. Empty clusters are
/// repaired as in [`update`], which may move labels.
pub fn upsample_centroids(
    e: &TrajectoryEnsemble,
    labels: &[usize],
    k: usize,
    level: u32,
) -> Result<(Array2<f64>, Vec<usize>)> {
    let data = e.subsample(level)?;
    let mut labels = labels.to_vec();
    let centroids = update(data.features().view(), &mut labels, k)?;
    Ok((centroids, labels))
}

pub fn adaptive_wcve(
    e: &TrajectoryEnsemble,
    k: usize,
    plan: &AdaptivePlan,
    seed: u64,
    opts: WcveOptions,
) -> Result<AdaptiveOutcome> {
    plan.validate(e.steps())?;
    if k == 0 || k > e.len() {
        return Err(Error::InvalidSpec(format!("k = {k} must lie in 1..={}", e.len())));
    }
    let mut trace = WcssTrace::default();
    let mut levels = Vec::with_capacity(plan.levels as usize + 1);
    let mut current: Option<Clustering> = None;

    for level in (0..=plan.levels).rev() {
        let data = e.subsample(level)?;
        let cfg = KMeansConfig::new(k, seed).with_max_iterations(plan.max_iterations(level));
        let c = match current.take() {
            None => kmeans(data.features().view(), &cfg)?,
            Some(prev) => kmeans_from_labels(data.features().view(), prev.labels, &cfg)?,
        };
        trace.record(format!("level-{level}"), &c);
        levels.push(LevelReport {
            level,
            feature_len: c.feature_len(),
            iterations: c.iterations,
            assignment_ops: c.assignment_ops,
            wcss: c.wcss,
            field: wcve_field(&data, &c, opts)?,
        });
        current = Some(c);
    }

    let clustering = current.expect("at least one level");
    let field = levels.last().expect("at least one level").field.clone();
    Ok(AdaptiveOutcome {
        clustering,
        field,
        trace,
        levels,
    })
}
