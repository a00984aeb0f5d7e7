//! Incremental clustering over a growing time prefix.
//!
//! The partition over samples `0..=z` seeds the clustering over `0..=z'`
//! through the member means of the longer (or shorter) trajectories.

use super::WcssTrace;
use crate::advect::TrajectoryEnsemble;
use crate::error::{Error, Result};
use crate::kmeans::{kmeans, kmeans_from_labels, Clustering, KMeansConfig};
use crate::scalar_field::ScalarField;
use crate::wcve::{wcve_field, WcveOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub z: usize,
    pub feature_len: usize,
    pub iterations: usize,
    pub assignment_ops: u64,
    pub wcss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnTheFlyState {
    /// Last observed sample index; features cover `0..=z`.
    pub z: usize,
    pub clustering: Clustering,
    pub config: KMeansConfig,
    pub trace: WcssTrace,
    pub stages: Vec<StageReport>,
}

impl OnTheFlyState {
    pub fn assignment_ops(&self) -> u64 {
        self.stages.iter().map(|s| s.assignment_ops).sum()
    }

    /// WCVE of the current partition over the current prefix.
    pub fn field(&self, e: &TrajectoryEnsemble, opts: WcveOptions) -> Result<ScalarField> {
        wcve_field(&e.prefix(self.z)?, &self.clustering, opts)
    }

    fn record(mut self, z: usize, c: Clustering) -> Self {
        self.trace.record(format!("z-{z}"), &c);
        self.stages.push(StageReport {
            z,
            feature_len: c.feature_len(),
            iterations: c.iterations,
            assignment_ops: c.assignment_ops,
            wcss: c.wcss,
        });
        self.z = z;
        self.clustering = c;
        self
    }
}

fn check_z(z: usize, e: &TrajectoryEnsemble) -> Result<()> {
    if z == 0 || z > e.steps() {
        return Err(Error::InvalidSpec(format!("prefix index {z} outside 1..={}", e.steps())));
    }
    Ok(())
}

/// Cold clustering of the first `z0` steps.
pub fn onthefly_start(e: &TrajectoryEnsemble, z0: usize, cfg: &KMeansConfig) -> Result<OnTheFlyState> {
    check_z(z0, e)?;
    let data = e.prefix(z0)?;
    let c = kmeans(data.features().view(), cfg)?;
    let mut trace = WcssTrace::default();
    trace.record(format!("z-{z0}"), &c);
    Ok(OnTheFlyState {
        z: z0,
        stages: vec![StageReport {
            z: z0,
            feature_len: c.feature_len(),
            iterations: c.iterations,
            assignment_ops: c.assignment_ops,
            wcss: c.wcss,
        }],
        clustering: c,
        config: cfg.clone(),
        trace,
    })
}

fn recluster(s: OnTheFlyState, e: &TrajectoryEnsemble, z: usize) -> Result<OnTheFlyState> {
    let data = e.prefix(z)?;
    let c = kmeans_from_labels(data.features().view(), s.clustering.labels.clone(), &s.config)?;
    Ok(s.record(z, c))
}

/// Takes in `alpha` more samples and re-clusters.
pub fn onthefly_advance(s: OnTheFlyState, e: &TrajectoryEnsemble, alpha: usize) -> Result<OnTheFlyState> {
    if alpha == 0 {
        return Err(Error::InvalidSpec("alpha must be at least 1".into()));
    }
    let z = s.z + alpha;
    if z > e.steps() {
        return Err(Error::InvalidSpec(format!(
            "advancing {} by {alpha} overruns {} steps",
            s.z,
            e.steps()
        )));
    }
    recluster(s, e, z)
}

/// Moves the analysis window end to `z_new`, growing or truncating the features.
pub fn retarget_interval(s: OnTheFlyState, e: &TrajectoryEnsemble, z_new: usize) -> Result<OnTheFlyState> {
    check_z(z_new, e)?;
    if z_new == s.z {
        return Ok(s);
    }
    recluster(s, e, z_new)
}

/// Full incremental sweep: start at `z0` (default `alpha`), advance by `alpha`
/// and clamp the last stage to the final sample.
pub fn onthefly_run(
    e: &TrajectoryEnsemble,
    alpha: usize,
    z0: Option<usize>,
    cfg: &KMeansConfig,
) -> Result<OnTheFlyState> {
    onthefly_run_with(e, alpha, z0, cfg, |_| Ok(()))
}

/// [`onthefly_run`] calling `on_stage` after every clustering, the first included.
pub fn onthefly_run_with<F>(
    e: &TrajectoryEnsemble,
    alpha: usize,
    z0: Option<usize>,
    cfg: &KMeansConfig,
    mut on_stage: F,
) -> Result<OnTheFlyState>
where
    F: FnMut(&OnTheFlyState) -> Result<()>,
{
    if alpha == 0 {
        return Err(Error::InvalidSpec("alpha must be at least 1".into()));
    }
    let n = e.steps();
    let z0 = z0.unwrap_or(alpha).min(n);
    let mut s = onthefly_start(e, z0, cfg)?;
    on_stage(&s)?;
    while s.z < n {
        let step = alpha.min(n - s.z);
        s = onthefly_advance(s, e, step)?;
        on_stage(&s)?;
    }
    Ok(s)
}
