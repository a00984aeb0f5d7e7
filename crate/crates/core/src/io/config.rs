//! JSON run configuration.
//!
//! ```json
//! {
//!   "field": { "name": "double-gyre", "epsilon": 0.1 },
//!   "grid": { "xmin": 0, "xmax": 2, "ymin": 0, "ymax": 1, "dx": 0.015625 },
//!   "time": { "dt": 0.1, "horizon": 15 },
//!   "task": "wcve",
//!   "k": 150,
//!   "seed": 1
//! }
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::advect::{GridSpec, TimeSpec};
use crate::error::{Error, Result};
use crate::fields::{FieldParams, FieldRegistry, SharedField};
use crate::kmeans::DEFAULT_MAX_ITERATIONS;
use crate::schedules::adaptive::aligned_steps;
use crate::wcve::Variant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Ftle,
    Wcve,
    Adaptive,
    Onthefly,
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ftle" => Ok(Task::Ftle),
            "wcve" => Ok(Task::Wcve),
            "adaptive" => Ok(Task::Adaptive),
            "onthefly" | "on-the-fly" => Ok(Task::Onthefly),
            other => Err(Error::config("task", format!("unknown task `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub name: String,
    #[serde(flatten)]
    pub params: FieldParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
    pub dx: f64,
    /// Defaults to `dx`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(default)]
    pub t0: f64,
    pub dt: f64,
    /// Either `steps` or `horizon` (`steps = round(horizon / dt)`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportConfig {
    /// Binary trajectory cache.
    #[serde(default)]
    pub ensemble: bool,
    /// Long-format trajectory CSV; only sensible for small grids.
    #[serde(default)]
    pub ensemble_csv: bool,
    #[serde(default = "yes")]
    pub pgm: bool,
    #[serde(default = "yes")]
    pub clustering: bool,
    /// Per-level / per-stage WCVE fields for the pipelines.
    #[serde(default)]
    pub stages: bool,
}

impl Default for ExportConfig {
    fn default() -> Self {
        Self {
            ensemble: false,
            ensemble_csv: false,
            pgm: true,
            clustering: true,
            stages: false,
        }
    }
}

fn default_max_iterations() -> usize {
    DEFAULT_MAX_ITERATIONS
}

fn default_restarts() -> usize {
    1
}

fn default_output() -> PathBuf {
    PathBuf::from("cohflow-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub field: FieldConfig,
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub task: Task,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Deepest refinement level for `adaptive`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<u32>,
    /// Re-clustering stride for `onthefly`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<usize>,
    /// First prefix for `onthefly`, defaults to `alpha`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z0: Option<usize>,
    #[serde(default)]
    pub variant: Variant,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub export: ExportConfig,
    /// Worker threads; unset means the process default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

/// Validated numeric setup derived from a [`RunConfig`].
pub struct ResolvedRun {
    pub field: SharedField,
    pub grid: GridSpec,
    pub time: TimeSpec,
    /// Steps before alignment to the refinement stride.
    pub requested_steps: usize,
    pub notes: Vec<String>,
}

impl std::fmt::Debug for ResolvedRun {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ResolvedRun")
            .field("grid", &self.grid)
            .field("time", &self.time)
            .field("requested_steps", &self.requested_steps)
            .field("notes", &self.notes)
            .finish_non_exhaustive()
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn resolve(&self) -> Result<ResolvedRun> {
        self.resolve_with(&FieldRegistry::with_builtins())
    }

    pub fn resolve_with(&self, registry: &FieldRegistry) -> Result<ResolvedRun> {
        let field = registry.build(&self.field.name, &self.field.params).map_err(|e| match e {
            Error::UnknownField(name) => Error::config("field.name", format!("unknown field `{name}`")),
            other => other,
        })?;

        let g = &self.grid;
        positive("grid.dx", g.dx)?;
        let dy = g.dy.unwrap_or(g.dx);
        positive("grid.dy", dy)?;
        let grid = GridSpec::new(g.xmin, g.xmax, g.ymin, g.ymax, g.dx, dy)
            .map_err(|e| Error::config("grid", e.to_string()))?;

        let t = &self.time;
        positive("time.dt", t.dt)?;
        if !t.t0.is_finite() {
            return Err(Error::config("time.t0", "must be finite"));
        }
        let requested_steps = match (t.steps, t.horizon) {
            (Some(_), Some(_)) => return Err(Error::config("time", "give either `steps` or `horizon`, not both")),
            (Some(n), None) => n,
            (None, Some(h)) => {
                positive("time.horizon", h)?;
                let n = TimeSpec::steps_for(h, t.dt);
                if ((n as f64) * t.dt - h).abs() > 1e-9 * h.max(1.0) {
                    return Err(Error::config(
                        "time.horizon",
                        format!("horizon {h} is not a whole number of steps of {}", t.dt),
                    ));
                }
                n
            }
            (None, None) => return Err(Error::config("time", "one of `steps` or `horizon` is required")),
        };
        if requested_steps == 0 {
            return Err(Error::config("time.steps", "must be at least 1"));
        }

        if self.max_iterations == 0 {
            return Err(Error::config("max_iterations", "must be at least 1"));
        }
        if self.restarts == 0 {
            return Err(Error::config("restarts", "must be at least 1"));
        }
        if self.threads == Some(0) {
            return Err(Error::config("threads", "must be at least 1"));
        }

        let mut steps = requested_steps;
        let mut notes = Vec::new();
        let m = grid.node_count();
        if self.task != Task::Ftle {
            let k = self.k.ok_or_else(|| Error::config("k", "required for clustering tasks"))?;
            if k == 0 || k > m {
                return Err(Error::config("k", format!("must lie in 1..={m} (number of seeds), got {k}")));
            }
        } else if grid.nx < 2 || grid.ny < 2 {
            return Err(Error::config("grid", "FTLE needs at least 3 nodes per axis"));
        }
        match self.task {
            Task::Adaptive => {
                let levels = self.levels.ok_or_else(|| Error::config("levels", "required for task `adaptive`"))?;
                if levels == 0 || levels > 20 {
                    return Err(Error::config("levels", format!("must lie in 1..=20, got {levels}")));
                }
                steps = aligned_steps(requested_steps, levels);
                if steps != requested_steps {
                    notes.push(format!(
                        "steps adjusted from {requested_steps} to {steps} so that 2^{levels} divides them; \
                         the horizon grows from {:.6} to {:.6}",
                        requested_steps as f64 * t.dt,
                        steps as f64 * t.dt
                    ));
                }
            }
            Task::Onthefly => {
                let alpha = self.alpha.ok_or_else(|| Error::config("alpha", "required for task `onthefly`"))?;
                if alpha == 0 || alpha > steps {
                    return Err(Error::config("alpha", format!("must lie in 1..={steps}, got {alpha}")));
                }
                if let Some(z0) = self.z0 {
                    if z0 == 0 || z0 > steps {
                        return Err(Error::config("z0", format!("must lie in 1..={steps}, got {z0}")));
                    }
                }
            }
            Task::Ftle | Task::Wcve => {}
        }
        let time = TimeSpec::new(t.t0, t.dt, steps).map_err(|e| Error::config("time", e.to_string()))?;
        Ok(ResolvedRun {
            field,
            grid,
            time,
            requested_steps,
            notes,
        })
    }
}

/// Parses and validates a JSON configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = serde_json::from_str(text)?;
    cfg.resolve()?;
    Ok(cfg)
}
