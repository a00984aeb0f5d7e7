//! Coherent structure detection by clustering whole particle trajectories.
//!
//! Trajectories of seeds on a grid are integrated through an analytic flow
//! ([`advect`]), clustered with k-means ([`kmeans`]), and every seed receives
//! the within-cluster variability exponent of its cluster ([`wcve`]). The
//! classical forward FTLE ([`ftle`]) is available as a baseline, and
//! [`schedules`] holds the coarse-to-fine and incremental pipelines.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` deliberately rejects NaN

pub mod advect;
pub mod error;
pub mod fields;
pub mod ftle;
pub mod io;
pub mod kmeans;
pub mod scalar_field;
pub mod schedules;
pub mod wcve;

pub use advect::{build_ensemble, GridSpec, TimeSpec, Trajectory, TrajectoryEnsemble};
pub use error::{Error, ErrorCategory, Result};
pub use fields::{DoubleGyre, DoubleGyreParams, DuffingVdp, FieldRegistry, LinearSaddle, Uniform, VelocityField};
pub use ftle::{flow_map_from_ensemble, ftle_field, FlowMapGrid};
pub use kmeans::{kmeans, kmeans_warm, Clustering, Init, KMeansConfig};
pub use scalar_field::ScalarField;
pub use wcve::{wcve_field, Variant, WcveOptions};
