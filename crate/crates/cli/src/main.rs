use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cohflow::io::{config_from_manifest, parse_config, run, RunReport, Task};
use cohflow::{Error, ErrorCategory};

/// Default worker count when neither `--threads` nor the config sets one.
const THREADS_ENV: &str = "COHFLOW_THREADS";

#[derive(Parser)]
#[command(name = "cohflow", version, about = "Coherent structures from clustered particle trajectories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// ftle, wcve, adaptive or onthefly.
        #[arg(long)]
        task: Option<Task>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (overrides the config and $COHFLOW_THREADS).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Repeat a run from its manifest.json.
    Rerun {
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e.category() {
        ErrorCategory::Config => 2,
        ErrorCategory::Integration => 3,
        ErrorCategory::Io => 4,
        ErrorCategory::Numeric => 5,
    }
}

fn env_threads() -> Result<Option<usize>, Error> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::config(THREADS_ENV, format!("expected a thread count, got `{v}`"))),
        Err(_) => Ok(None),
    }
}

fn execute(cmd: Command) -> Result<RunReport, Error> {
    let (mut cfg, out, threads) = match cmd {
        Command::Run {
            config,
            k,
            seed,
            task,
            out,
            threads,
        } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", config.display()))))?;
            let mut cfg = parse_config(&text)?;
            if let Some(k) = k {
                cfg.k = Some(k);
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(task) = task {
                cfg.task = task;
            }
            (cfg, out, threads)
        }
        Command::Rerun { manifest, out, threads } => (config_from_manifest(&manifest)?, out, threads),
    };
    if let Some(out) = out {
        cfg.output = out;
    }
    cfg.threads = match threads {
        Some(n) => Some(n),
        None if cfg.threads.is_some() => cfg.threads,
        None => env_threads()?,
    };
    run(&cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(report) => {
            for note in &report.notes {
                eprintln!("note: {note}");
            }
            let s = &report.field;
            println!(
                "{}: {} of {} nodes defined, range [{}, {}]",
                s.quantity,
                s.values().len() - s.undefined_count(),
                s.values().len(),
                s.min_finite().map_or("-".into(), |v| format!("{v:.6}")),
                s.max_finite().map_or("-".into(), |v| format!("{v:.6}")),
            );
            if let Some(c) = &report.clustering {
                println!("k-means: k = {}, wcss = {:.6e}, {} iterations", c.k, c.wcss, c.iterations);
            }
            for a in &report.artifacts {
                println!("wrote {}", report.output.join(a).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
