//! Particle advection and trajectory ensembles.
//!
//! Seeds sit on a rectangular grid, each one is integrated with fixed-step
//! classical RK4, and the sampled positions are stored as one feature row per
//! trajectory. Rows are time-major: `(x(t0), y(t0), x(t1), y(t1), ...)`.

use ndarray::{s, Array2, ArrayView1, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::VelocityField;

const COMMENSURATE_TOL: f64 = 1e-9;

/// Uniform sampling `t_i = t0 + i dt`, `0 <= i <= steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSpec {
    pub t0: f64,
    pub dt: f64,
    pub steps: usize,
}

impl TimeSpec {
    pub fn new(t0: f64, dt: f64, steps: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidSpec(format!("time step must be positive, got {dt}")));
        }
        if !t0.is_finite() {
            return Err(Error::InvalidSpec("start time must be finite".into()));
        }
        if steps == 0 {
            return Err(Error::InvalidSpec("at least one time step is required".into()));
        }
        Ok(Self { t0, dt, steps })
    }

    /// Number of steps that cover `horizon` with step `dt`, rounded to the nearest integer.
    pub fn steps_for(horizon: f64, dt: f64) -> usize {
        (horizon / dt).round().max(0.0) as usize
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.steps)
    }

    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn samples(&self) -> usize {
        self.steps + 1
    }
}

/// Rectangular seeding grid with `(nx + 1) x (ny + 1)` nodes.
///
/// Bounds and interval counts are the canonical data; spacings are derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
    pub nx: usize,
    pub ny: usize,
}

fn interval_count(lo: f64, hi: f64, h: f64, axis: &str) -> Result<usize> {
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(Error::InvalidSpec(format!("{axis} bounds must satisfy min < max, got [{lo}, {hi}]")));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidSpec(format!("{axis} spacing must be positive, got {h}")));
    }
    let ratio = (hi - lo) / h;
    let count = ratio.round();
    if (ratio - count).abs() > COMMENSURATE_TOL || count < 1.0 {
        return Err(Error::InvalidSpec(format!(
            "{axis} extent {} is not a whole multiple of spacing {h}",
            hi - lo
        )));
    }
    Ok(count as usize)
}

impl GridSpec {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64, dx: f64, dy: f64) -> Result<Self> {
        let nx = interval_count(xmin, xmax, dx, "x")?;
        let ny = interval_count(ymin, ymax, dy, "y")?;
        Ok(Self { xmin, xmax, ymin, ymax, nx, ny })
    }

    pub fn from_counts(xmin: f64, xmax: f64, ymin: f64, ymax: f64, nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidSpec("grid needs at least one interval per axis".into()));
        }
        if !(xmax > xmin && ymax > ymin) {
            return Err(Error::InvalidSpec("grid bounds must satisfy min < max".into()));
        }
        Ok(Self { xmin, xmax, ymin, ymax, nx, ny })
    }

    pub fn dx(&self) -> f64 {
        (self.xmax - self.xmin) / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        (self.ymax - self.ymin) / self.ny as f64
    }

    /// Nodes along x.
    pub fn cols(&self) -> usize {
        self.nx + 1
    }

    /// Nodes along y.
    pub fn rows(&self) -> usize {
        self.ny + 1
    }

    pub fn node_count(&self) -> usize {
        self.cols() * self.rows()
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.nx {
            self.xmax
        } else {
            self.xmin + i as f64 * self.dx()
        }
    }

    pub fn y(&self, j: usize) -> f64 {
        if j == self.ny {
            self.ymax
        } else {
            self.ymin + j as f64 * self.dy()
        }
    }

    /// Row-major node index, x varying fastest.
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.cols() + i
    }

    pub fn node(&self, index: usize) -> [f64; 2] {
        let i = index % self.cols();
        let j = index / self.cols();
        [self.x(i), self.y(j)]
    }
}

/// All grid nodes in row-major order, corners included.
pub fn seed_grid(g: &GridSpec) -> Vec<[f64; 2]> {
    (0..g.node_count()).map(|idx| g.node(idx)).collect()
}

/// Scratch buffers for one RK4 integration.
struct Rk4Scratch {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    stage: Vec<f64>,
}

impl Rk4Scratch {
    fn new(d: usize) -> Self {
        Self {
            k1: vec![0.0; d],
            k2: vec![0.0; d],
            k3: vec![0.0; d],
            k4: vec![0.0; d],
            stage: vec![0.0; d],
        }
    }

    fn step<F: VelocityField + ?Sized>(&mut self, f: &F, x: &[f64], t: f64, dt: f64, out: &mut [f64]) {
        let half = 0.5 * dt;
        f.velocity(x, t, &mut self.k1);
        for (s, (xi, k)) in self.stage.iter_mut().zip(x.iter().zip(&self.k1)) {
            *s = xi + half * k;
        }
        f.velocity(&self.stage, t + half, &mut self.k2);
        for (s, (xi, k)) in self.stage.iter_mut().zip(x.iter().zip(&self.k2)) {
            *s = xi + half * k;
        }
        f.velocity(&self.stage, t + half, &mut self.k3);
        for (s, (xi, k)) in self.stage.iter_mut().zip(x.iter().zip(&self.k3)) {
            *s = xi + dt * k;
        }
        f.velocity(&self.stage, t + dt, &mut self.k4);
        let sixth = dt / 6.0;
        for i in 0..x.len() {
            out[i] = x[i] + sixth * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// One classical fourth-order Runge-Kutta step from `(x, t)`.
pub fn rk4_step<F: VelocityField + ?Sized>(f: &F, x: &[f64], t: f64, dt: f64) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    Rk4Scratch::new(x.len()).step(f, x, t, dt, &mut out);
    out
}

/// A single sampled trajectory, `d x (n + 1)` stored column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dim: usize,
    samples: Vec<f64>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Position at sample `i`.
    pub fn column(&self, i: usize) -> &[f64] {
        &self.samples[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.samples
    }
}

/// Fills `row` (length `d (steps + 1)`) with the RK4 samples of one trajectory.
/// On blow-up returns the offending step.
fn integrate_into<F: VelocityField + ?Sized>(
    f: &F,
    seed: &[f64],
    ts: &TimeSpec,
    row: &mut [f64],
    scratch: &mut Rk4Scratch,
) -> std::result::Result<(), usize> {
    let d = seed.len();
    row[..d].copy_from_slice(seed);
    for i in 0..ts.steps {
        let (done, rest) = row.split_at_mut((i + 1) * d);
        let x = &done[i * d..];
        let next = &mut rest[..d];
        scratch.step(f, x, ts.time(i), ts.dt, next);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(i + 1);
        }
    }
    Ok(())
}

pub fn integrate_trajectory<F: VelocityField + ?Sized>(f: &F, seed: &[f64], ts: &TimeSpec) -> Result<Trajectory> {
    if seed.len() != f.dim() {
        return Err(Error::Shape(format!("seed has {} components, field has dimension {}", seed.len(), f.dim())));
    }
    let d = seed.len();
    let mut samples = vec![0.0; d * ts.samples()];
    let mut scratch = Rk4Scratch::new(d);
    integrate_into(f, seed, ts, &mut samples, &mut scratch).map_err(|step| Error::BlowUp {
        seed: 0,
        x: seed.to_vec(),
        step,
    })?;
    Ok(Trajectory { dim: d, samples })
}

/// `M` trajectories seeded on a grid and sampled on a shared time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    grid: GridSpec,
    time: TimeSpec,
    dim: usize,
    /// `M x d (steps + 1)`, one trajectory per row.
    features: Array2<f64>,
}

impl TrajectoryEnsemble {
    pub fn from_features(grid: GridSpec, time: TimeSpec, dim: usize, features: Array2<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("dimension must be at least 1".into()));
        }
        if features.nrows() != grid.node_count() {
            return Err(Error::Shape(format!(
                "{} trajectories for a grid of {} nodes",
                features.nrows(),
                grid.node_count()
            )));
        }
        if features.ncols() != dim * time.samples() {
            return Err(Error::Shape(format!(
                "feature length {} differs from d (n + 1) = {}",
                features.ncols(),
                dim * time.samples()
            )));
        }
        Ok(Self { grid, time, dim, features })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn time(&self) -> &TimeSpec {
        &self.time
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of trajectories `M`.
    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    pub fn steps(&self) -> usize {
        self.time.steps
    }

    /// Length of one flattened trajectory, `d (n + 1)`.
    pub fn feature_len(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn into_features(self) -> Array2<f64> {
        self.features
    }

    pub fn trajectory(&self, j: usize) -> ArrayView1<'_, f64> {
        self.features.row(j)
    }

    /// Position of trajectory `j` at sample `i`.
    pub fn position(&self, j: usize, i: usize) -> ArrayView1<'_, f64> {
        self.features.slice(s![j, i * self.dim..(i + 1) * self.dim])
    }

    /// Keeps samples `0..=z`.
    pub fn prefix(&self, z: usize) -> Result<Self> {
        if z == 0 || z > self.time.steps {
            return Err(Error::InvalidSpec(format!("prefix length {z} outside 1..={}", self.time.steps)));
        }
        let features = self.features.slice(s![.., ..self.dim * (z + 1)]).to_owned();
        Ok(Self {
            grid: self.grid,
            time: TimeSpec { steps: z, ..self.time },
            dim: self.dim,
            features,
        })
    }

    /// Keeps every `2^level`-th sample; the last sample is always kept.
    pub fn subsample(&self, level: u32) -> Result<Self> {
        if level == 0 {
            return Ok(self.clone());
        }
        let stride = 1usize
            .checked_shl(level)
            .filter(|s| *s <= self.time.steps)
            .ok_or_else(|| Error::InvalidSpec(format!("level {level} is deeper than {} steps allow", self.time.steps)))?;
        if !self.time.steps.is_multiple_of(stride) {
            return Err(Error::InvalidSpec(format!(
                "{} steps are not divisible by 2^{level} = {stride}",
                self.time.steps
            )));
        }
        let steps = self.time.steps / stride;
        let d = self.dim;
        let mut features = Array2::zeros((self.len(), d * (steps + 1)));
        for (mut dst, src) in features.axis_iter_mut(Axis(0)).zip(self.features.axis_iter(Axis(0))) {
            for c in 0..=steps {
                for q in 0..d {
                    dst[c * d + q] = src[c * stride * d + q];
                }
            }
        }
        Ok(Self {
            grid: self.grid,
            time: TimeSpec {
                t0: self.time.t0,
                dt: self.time.dt * stride as f64,
                steps,
            },
            dim: d,
            features,
        })
    }
}

/// Integrates every grid node forward over `ts`.
///
/// Trajectories are independent and computed in parallel; the result does not
/// depend on the thread count. If several trajectories blow up, the one with the
/// lowest seed index is reported.
pub fn build_ensemble<F: VelocityField + ?Sized>(f: &F, g: &GridSpec, ts: &TimeSpec) -> Result<TrajectoryEnsemble> {
    if f.dim() != 2 {
        return Err(Error::Shape(format!("grid seeding is two dimensional, field has dimension {}", f.dim())));
    }
    let d = 2;
    let m = g.node_count();
    let p = d * ts.samples();
    let mut data = vec![0.0; m * p];
    let failures: Vec<(usize, usize)> = data
        .par_chunks_mut(p)
        .enumerate()
        .map_init(
            || Rk4Scratch::new(d),
            |scratch, (j, row)| integrate_into(f, &g.node(j), ts, row, scratch).err().map(|step| (j, step)),
        )
        .flatten()
        .collect();
    if let Some(&(seed, step)) = failures.iter().min() {
        return Err(Error::BlowUp {
            seed,
            x: g.node(seed).to_vec(),
            step,
        });
    }
    let features = Array2::from_shape_vec((m, p), data).expect("shape computed above");
    TrajectoryEnsemble::from_features(*g, *ts, d, features)
}
