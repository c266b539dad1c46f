use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Parser, Subcommand};
use tweedie_prox_cli::{registry, resolve_output_dir, run_experiment, validate, CliError, ExperimentConfig, Result};

#[derive(Parser)]
#[command(name = "tweedie-prox", version, about = "Run and check proximal-operator experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more experiment configs.
    Run {
        /// Config file; repeat to run a batch.
        #[arg(long = "config", required = true)]
        configs: Vec<PathBuf>,
        /// Output directory. With several configs, each writes to a subdirectory named after its file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Configs run concurrently in a batch.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// `key=value` overrides applied to every config.
        overrides: Vec<String>,
    },
    /// List registered experiments.
    List {
        #[arg(long)]
        json: bool,
        /// Substring of the experiment name.
        filter: Option<String>,
    },
    /// Check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
        overrides: Vec<String>,
    },
}

fn load(path: &Path, seed: Option<u64>, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(path)?;
    for o in overrides {
        config.set_override(o)?;
    }
    if let Some(seed) = seed {
        config.set_override(&format!("seed={seed}"))?;
    }
    Ok(config)
}

struct Job {
    path: PathBuf,
    config: ExperimentConfig,
    dir: PathBuf,
}

fn prepare(configs: &[PathBuf], out: Option<&Path>, seed: Option<u64>, overrides: &[String]) -> Result<Vec<Job>> {
    let mut jobs = Vec::new();
    let mut seen = BTreeSet::new();
    for path in configs {
        let config = load(path, seed, overrides)?;
        validate(&config)?;
        let dir = match out {
            Some(dir) if configs.len() > 1 => {
                let stem = path.file_stem().unwrap_or(path.as_os_str());
                dir.join(stem)
            }
            other => resolve_output_dir(&config, other)?,
        };
        if !seen.insert(dir.clone()) {
            return Err(CliError::ConfigInvalid(format!(
                "{}: output directory {} is used by another config in the batch",
                path.display(),
                dir.display()
            )));
        }
        jobs.push(Job {
            path: path.clone(),
            config,
            dir,
        });
    }
    Ok(jobs)
}

fn run_one(job: &Job) -> Result<()> {
    let summary = run_experiment(&job.config, &job.dir)?;
    let mut text = format!("{} -> {}\n", job.path.display(), job.dir.display());
    for c in &summary.manifest.checks {
        text.push_str(&format!("{} {}: {}\n", c.status, c.name, c.detail));
    }
    print!("{text}");
    summary.into_result().map(|_| ())
}

fn run(configs: &[PathBuf], out: Option<&Path>, seed: Option<u64>, jobs: usize, overrides: &[String]) -> u8 {
    let batch = match prepare(configs, out, seed, overrides) {
        Ok(b) => b,
        Err(e) => return report(&e),
    };
    let next = AtomicUsize::new(0);
    let worst = Mutex::new(0u8);
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, batch.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = batch.get(i) else { break };
                if let Err(e) = run_one(job) {
                    let code = report(&e);
                    let mut w = worst.lock().expect("exit-code lock");
                    *w = (*w).max(code);
                }
            });
        }
    });
    worst.into_inner().expect("exit-code lock")
}

fn report(e: &CliError) -> u8 {
    eprintln!("error: {e}");
    e.exit_code() as u8
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            configs,
            out,
            seed,
            jobs,
            overrides,
        } => run(&configs, out.as_deref(), seed, jobs, &overrides),
        Command::List { json, filter } => {
            if json {
                println!("{}", registry::list_json(filter.as_deref()));
            } else {
                print!("{}", registry::list_text(filter.as_deref()));
            }
            0
        }
        Command::Validate { config, overrides } => match load(&config, None, &overrides).and_then(|c| validate(&c)) {
            Ok(_) => {
                println!("{}: ok", config.display());
                0
            }
            Err(e) => report(&e),
        },
    };
    ExitCode::from(code)
}
