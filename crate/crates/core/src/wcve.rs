//! Within-cluster variability exponent.
//!
//! Every node receives the value of its cluster: the natural log of the
//! within-cluster standard deviation (or mean absolute deviation) of the
//! trajectory features, divided by the number of time samples `n + 1`.
//! Clusters whose spread is zero (singletons included) get no value.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::advect::TrajectoryEnsemble;
use crate::error::{Error, Result};
use crate::kmeans::Clustering;
use crate::scalar_field::ScalarField;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Standard deviation with the `card - 1` denominator.
    #[default]
    Sd,
    /// Mean absolute deviation.
    Mad,
}

impl Variant {
    pub fn quantity(self) -> &'static str {
        match self {
            Variant::Sd => "wcve-sd",
            Variant::Mad => "wcve-mad",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WcveOptions {
    pub variant: Variant,
}

/// Per-cluster accumulators: `sum ||X - m||^2`, `sum ||X - m||`, and size.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClusterSpread {
    pub sum_sq: f64,
    pub sum_abs: f64,
    pub card: usize,
}

impl ClusterSpread {
    pub fn sd_value(&self, steps: usize) -> Option<f64> {
        if self.card < 2 || self.sum_sq == 0.0 {
            return None;
        }
        let sd = (self.sum_sq / (self.card - 1) as f64).sqrt();
        Some((sd / (steps + 1) as f64).ln())
    }

    pub fn mad_value(&self, steps: usize) -> Option<f64> {
        if self.card == 0 || self.sum_abs == 0.0 {
            return None;
        }
        let mad = self.sum_abs / self.card as f64;
        Some((mad / (steps + 1) as f64).ln())
    }

    pub fn value(&self, variant: Variant, steps: usize) -> Option<f64> {
        match variant {
            Variant::Sd => self.sd_value(steps),
            Variant::Mad => self.mad_value(steps),
        }
    }
}

fn spread_of(members: ArrayView2<'_, f64>, centroid: &[f64]) -> Result<ClusterSpread> {
    if members.ncols() != centroid.len() {
        return Err(Error::Shape(format!(
            "members have {} features, centroid has {}",
            members.ncols(),
            centroid.len()
        )));
    }
    let mut s = ClusterSpread::default();
    for x in members.rows() {
        let d2: f64 = x.iter().zip(centroid).map(|(a, b)| (a - b) * (a - b)).sum();
        s.sum_sq += d2;
        s.sum_abs += d2.sqrt();
        s.card += 1;
    }
    Ok(s)
}

/// SD-based value for one cluster. `steps` is `n`, so features hold `n + 1` samples.
pub fn cluster_sd_value(members: ArrayView2<'_, f64>, centroid: &[f64], steps: usize) -> Result<Option<f64>> {
    Ok(spread_of(members, centroid)?.sd_value(steps))
}

/// MAD-based value for one cluster.
pub fn cluster_mad_value(members: ArrayView2<'_, f64>, centroid: &[f64], steps: usize) -> Result<Option<f64>> {
    Ok(spread_of(members, centroid)?.mad_value(steps))
}

/// One pass over the data accumulating every cluster's spread, in row order.
pub fn cluster_spreads(data: ArrayView2<'_, f64>, c: &Clustering) -> Result<Vec<ClusterSpread>> {
    if data.nrows() != c.labels.len() {
        return Err(Error::Shape(format!(
            "{} trajectories but {} labels",
            data.nrows(),
            c.labels.len()
        )));
    }
    if data.ncols() != c.centroids.ncols() {
        return Err(Error::Shape(format!(
            "trajectory features have length {}, centroids {}",
            data.ncols(),
            c.centroids.ncols()
        )));
    }
    let mut spreads = vec![ClusterSpread::default(); c.k];
    for (x, &l) in data.rows().into_iter().zip(&c.labels) {
        let m = c.centroids.row(l);
        let d2: f64 = x.iter().zip(m.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        let s = &mut spreads[l];
        s.sum_sq += d2;
        s.sum_abs += d2.sqrt();
        s.card += 1;
    }
    Ok(spreads)
}

/// Per-node WCVE for a clustering of `e`'s trajectories.
pub fn wcve_field(e: &TrajectoryEnsemble, c: &Clustering, opts: WcveOptions) -> Result<ScalarField> {
    let spreads = cluster_spreads(e.features().view(), c)?;
    let per_cluster: Vec<Option<f64>> = spreads
        .iter()
        .map(|s| s.value(opts.variant, e.steps()))
        .collect();
    let values = c.labels.iter().map(|&l| per_cluster[l]).collect();
    ScalarField::new(
        *e.grid(),
        opts.variant.quantity(),
        e.time().t0,
        e.time().t_end(),
        values,
    )
}
