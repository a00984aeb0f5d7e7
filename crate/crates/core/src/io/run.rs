//! End-to-end runs: integrate, cluster or differentiate, export, and write a
//! manifest that is sufficient to repeat the run.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};

use super::binary::{ensemble_to_csv, write_clustering, write_ensemble};
use super::config::{ResolvedRun, RunConfig, Task};
use super::export::{export_field_csv, export_field_pgm};
use crate::advect::{build_ensemble, TrajectoryEnsemble};
use crate::error::{Error, Result};
use crate::ftle::{flow_map_from_ensemble, ftle_field};
use crate::kmeans::{kmeans, Clustering, KMeansConfig};
use crate::scalar_field::ScalarField;
use crate::schedules::{adaptive_wcve, onthefly_run_with, AdaptivePlan, WcssTrace};
use crate::wcve::{wcve_field, WcveOptions};

pub const MANIFEST_FILE: &str = "manifest.json";

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub output: PathBuf,
    pub field: ScalarField,
    pub clustering: Option<Clustering>,
    pub artifacts: Vec<PathBuf>,
    pub notes: Vec<String>,
    pub manifest: Value,
}

struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.written.push(PathBuf::from(name));
        p
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let p = self.path(name);
        fs::write(p, body)?;
        Ok(())
    }

    fn field(&mut self, stem: &str, f: &ScalarField, pgm: bool) -> Result<()> {
        let p = self.path(&format!("{stem}.csv"));
        export_field_csv(f, &p)?;
        if pgm {
            // an all-undefined field has nothing to draw
            if f.finite().next().is_some() {
                let p = self.path(&format!("{stem}.pgm"));
                export_field_pgm(f, &p)?;
            }
        }
        Ok(())
    }
}

fn millis(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Runs `cfg`, writing artifacts under `cfg.output`.
pub fn run(cfg: &RunConfig) -> Result<RunReport> {
    let resolved = cfg.resolve()?;
    match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config("threads", e.to_string()))?
            .install(|| run_resolved(cfg, resolved)),
        None => run_resolved(cfg, resolved),
    }
}

fn run_resolved(cfg: &RunConfig, r: ResolvedRun) -> Result<RunReport> {
    fs::create_dir_all(&cfg.output)?;
    let mut out = Outputs {
        dir: cfg.output.clone(),
        written: Vec::new(),
    };

    let started = Instant::now();
    let ensemble = build_ensemble(&r.field, &r.grid, &r.time)?;
    let advect_ms = millis(started);

    if cfg.export.ensemble {
        let p = out.path("ensemble.bin");
        write_ensemble(&ensemble, &p)?;
    }
    if cfg.export.ensemble_csv {
        out.text("ensemble.csv", &ensemble_to_csv(&ensemble))?;
    }

    let started = Instant::now();
    let (field, clustering, summary) = compute(cfg, &ensemble, &mut out)?;
    let compute_ms = millis(started);

    let started = Instant::now();
    let stem = match cfg.task {
        Task::Ftle => "ftle",
        _ => "wcve",
    };
    out.field(stem, &field, cfg.export.pgm)?;
    if let (Some(c), true) = (&clustering, cfg.export.clustering) {
        let p = out.path("clustering.bin");
        write_clustering(c, &p)?;
    }
    let export_ms = millis(started);

    let manifest = json!({
        "tool": "cohflow",
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "resolved": {
            "grid": r.grid,
            "time": r.time,
            "requested_steps": r.requested_steps,
            "steps": r.time.steps,
            "steps_adjusted": r.requested_steps != r.time.steps,
            "trajectories": ensemble.len(),
            "feature_len": ensemble.feature_len(),
        },
        "notes": r.notes,
        "seed": cfg.seed,
        "summary": summary,
        "timings_ms": {
            "advect": advect_ms,
            "compute": compute_ms,
            "export": export_ms,
        },
        "artifacts": out.written,
    });
    let manifest_path = cfg.output.join(MANIFEST_FILE);
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest).expect("json value") + "\n")?;
    out.written.push(PathBuf::from(MANIFEST_FILE));

    Ok(RunReport {
        output: cfg.output.clone(),
        field,
        clustering,
        artifacts: out.written,
        notes: r.notes,
        manifest,
    })
}

fn clustering_summary(c: &Clustering) -> Value {
    json!({
        "k": c.k,
        "wcss": c.wcss,
        "iterations": c.iterations,
        "converged": c.converged,
        "assignment_ops": c.assignment_ops,
        "seed": c.seed,
    })
}

fn compute(
    cfg: &RunConfig,
    e: &TrajectoryEnsemble,
    out: &mut Outputs,
) -> Result<(ScalarField, Option<Clustering>, Value)> {
    let opts = WcveOptions { variant: cfg.variant };
    let k = cfg.k.unwrap_or(0);
    let kcfg = KMeansConfig::new(k, cfg.seed)
        .with_max_iterations(cfg.max_iterations)
        .with_restarts(cfg.restarts);
    match cfg.task {
        Task::Ftle => {
            let f = ftle_field(&flow_map_from_ensemble(e)?)?;
            Ok((f, None, json!({})))
        }
        Task::Wcve => {
            let c = kmeans(e.features().view(), &kcfg)?;
            let f = wcve_field(e, &c, opts)?;
            let mut trace = WcssTrace::default();
            trace.record("full", &c);
            out.text("wcss_trace.csv", &trace.to_csv())?;
            let summary = clustering_summary(&c);
            Ok((f, Some(c), summary))
        }
        Task::Adaptive => {
            let levels = cfg.levels.expect("validated");
            let mut plan = AdaptivePlan::new(levels);
            plan.fine_max_iterations = cfg.max_iterations;
            let res = adaptive_wcve(e, k, &plan, cfg.seed, opts)?;
            out.text("wcss_trace.csv", &res.trace.to_csv())?;
            if cfg.export.stages {
                fs::create_dir_all(out.dir.join("stages"))?;
                for l in &res.levels {
                    out.field(&format!("stages/level-{}", l.level), &l.field, cfg.export.pgm)?;
                }
            }
            let mut summary = clustering_summary(&res.clustering);
            summary["assignment_ops"] = res.assignment_ops().into();
            summary["levels"] = res
                .levels
                .iter()
                .map(|l| {
                    json!({
                        "level": l.level,
                        "feature_len": l.feature_len,
                        "iterations": l.iterations,
                        "assignment_ops": l.assignment_ops,
                        "wcss": l.wcss,
                    })
                })
                .collect();
            Ok((res.field, Some(res.clustering), summary))
        }
        Task::Onthefly => {
            let alpha = cfg.alpha.expect("validated");
            if cfg.export.stages {
                fs::create_dir_all(out.dir.join("stages"))?;
            }
            let s = onthefly_run_with(e, alpha, cfg.z0, &kcfg, |st| {
                if cfg.export.stages {
                    out.field(&format!("stages/z-{}", st.z), &st.field(e, opts)?, cfg.export.pgm)?;
                }
                Ok(())
            })?;
            out.text("wcss_trace.csv", &s.trace.to_csv())?;
            let f = s.field(e, opts)?;
            let mut summary = clustering_summary(&s.clustering);
            summary["assignment_ops"] = s.assignment_ops().into();
            summary["stages"] = s
                .stages
                .iter()
                .map(|st| {
                    json!({
                        "z": st.z,
                        "feature_len": st.feature_len,
                        "iterations": st.iterations,
                        "assignment_ops": st.assignment_ops,
                        "wcss": st.wcss,
                    })
                })
                .collect();
            Ok((f, Some(s.clustering), summary))
        }
    }
}

/// Reads the configuration recorded in a manifest.
pub fn config_from_manifest(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    let v: Value = serde_json::from_str(&text)?;
    let cfg = v.get("config").ok_or_else(|| Error::Format {
        path: path.to_path_buf(),
        message: "manifest has no `config` entry".into(),
    })?;
    let cfg: RunConfig = serde_json::from_value(cfg.clone())?;
    cfg.resolve()?;
    Ok(cfg)
}

/// Repeats the run described by a manifest, optionally into another directory.
pub fn rerun(manifest: &Path, output: Option<&Path>) -> Result<RunReport> {
    let mut cfg = config_from_manifest(manifest)?;
    if let Some(o) = output {
        cfg.output = o.to_path_buf();
    }
    run(&cfg)
}
