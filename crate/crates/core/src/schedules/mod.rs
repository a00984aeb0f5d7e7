//! Coarse-to-fine and incremental clustering pipelines.
//!
//! Both pipelines chain warm-started k-means runs over changing feature sets:
//! [`adaptive`] refines dyadic time subsamples, [`onthefly`] grows (or shrinks)
//! the observed time prefix.

pub mod adaptive;
pub mod onthefly;

use std::fmt::Write as _;

pub use adaptive::{adaptive_wcve, aligned_steps, upsample_centroids, AdaptiveOutcome, AdaptivePlan, LevelReport};
pub use onthefly::{onthefly_advance, onthefly_run, onthefly_run_with, onthefly_start, retarget_interval, OnTheFlyState, StageReport};

use crate::kmeans::Clustering;

/// One k-means iteration inside a pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    /// Consecutive entries with the same segment come from one k-means run.
    pub segment: usize,
    pub phase: String,
    pub feature_len: usize,
    pub iteration: usize,
    pub wcss: f64,
}

/// WCSS per iteration across all runs of a pipeline.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WcssTrace {
    pub entries: Vec<TraceEntry>,
    segments: usize,
}

impl WcssTrace {
    pub fn record(&mut self, phase: impl Into<String>, c: &Clustering) {
        let phase = phase.into();
        let segment = self.segments;
        self.segments += 1;
        for (i, &w) in c.history.iter().enumerate() {
            self.entries.push(TraceEntry {
                segment,
                phase: phase.clone(),
                feature_len: c.feature_len(),
                iteration: i + 1,
                wcss: w,
            });
        }
    }

    pub fn segment_count(&self) -> usize {
        self.segments
    }

    /// WCSS values grouped by segment.
    pub fn segments(&self) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new(); self.segments];
        for e in &self.entries {
            out[e.segment].push(e.wcss);
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("segment,phase,feature_len,iteration,wcss\n");
        for e in &self.entries {
            let _ = writeln!(s, "{},{},{},{},{:e}", e.segment, e.phase, e.feature_len, e.iteration, e.wcss);
        }
        s
    }
}
