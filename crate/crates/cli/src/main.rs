//! `bolab` command line: run experiments, validate configurations, inspect
//! manifests. Exit codes from `run`: 0 when all enabled checks pass or are
//! inconclusive, 1 on any hard failure, 2 on blow-up.

use bolab_core::config::{
    parse_config_file, ExperimentConfig, ExperimentKind, OUTPUT_DIR_ENV,
};
use bolab_core::error::Error;
use bolab_core::experiments::{format_verdicts, run_experiment};
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "bolab",
    about = "Benjamin-Ono / stochastic Benjamin-Ono-Burgers experiment driver",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment and write its artifacts
    Run {
        /// Experiment name (conservation | linear-oracle | stationary |
        /// inviscid | recurrence | full-suite); defaults to the config's
        experiment: Option<String>,
        /// Configuration file (TOML); defaults are used when absent
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (overrides config and the env default)
        #[arg(long)]
        output: Option<PathBuf>,
        /// Worker threads (0 = automatic)
        #[arg(long)]
        threads: Option<usize>,
        /// Base random seed
        #[arg(long)]
        seed: Option<u64>,
        /// Viscosity values (repeatable), e.g. --alpha 0.5 --alpha 0.25
        #[arg(long = "alpha")]
        alphas: Vec<f64>,
    },
    /// Parse and validate a configuration file, reporting every error
    Validate {
        config: PathBuf,
    },
    /// Print the manifest of a finished (or interrupted) run
    ShowManifest {
        /// Manifest file or run directory
        path: PathBuf,
    },
}

fn load_config(
    experiment: Option<&str>,
    config: Option<&Path>,
) -> Result<ExperimentConfig, Error> {
    let mut cfg = match config {
        Some(path) => parse_config_file(path)?,
        None => {
            let name = experiment.ok_or_else(|| {
                Error::Config(vec![
                    "an experiment name or a --config file is required".into()
                ])
            })?;
            let kind = ExperimentKind::from_name(name).ok_or_else(|| {
                let names: Vec<&str> =
                    ExperimentKind::ALL.iter().map(|k| k.name()).collect();
                Error::Config(vec![format!(
                    "unknown experiment \"{name}\"; expected one of {}",
                    names.join(", ")
                )])
            })?;
            ExperimentConfig::defaults(kind)
        }
    };
    if let (Some(name), Some(_)) = (experiment, config) {
        let kind = ExperimentKind::from_name(name).ok_or_else(|| {
            Error::Config(vec![format!("unknown experiment \"{name}\"")])
        })?;
        cfg.experiment = kind;
    }
    Ok(cfg)
}

fn cmd_run(
    experiment: Option<String>,
    config: Option<PathBuf>,
    output: Option<PathBuf>,
    threads: Option<usize>,
    seed: Option<u64>,
    alphas: Vec<f64>,
) -> ExitCode {
    let mut cfg = match load_config(experiment.as_deref(), config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    if let Some(dir) = output {
        cfg.output_dir = dir;
    }
    if let Some(t) = threads {
        cfg.threads = t;
    }
    if let Some(s) = seed {
        cfg.sim.seed = s;
    }
    if !alphas.is_empty() {
        cfg.alphas = alphas.clone();
        cfg.sim.alpha = alphas[0];
    }
    println!(
        "running {} -> {} (fingerprint {})",
        cfg.experiment.name(),
        cfg.output_dir.display(),
        cfg.fingerprint()
    );
    match run_experiment(&cfg) {
        Ok(outcome) => {
            print!("{}", format_verdicts(&outcome.verdicts));
            let code = outcome.exit_code();
            if code == 0 {
                println!("all checks passed");
            }
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(if matches!(e, Error::BlowUp { .. }) { 2 } else { 1 })
        }
    }
}

fn cmd_validate(path: &Path) -> ExitCode {
    match parse_config_file(path) {
        Ok(cfg) => {
            println!(
                "ok: {} experiment, fingerprint {}",
                cfg.experiment.name(),
                cfg.fingerprint()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}

fn cmd_show_manifest(path: &Path) -> ExitCode {
    let file = if path.is_dir() { path.join("manifest.toml") } else { path.to_path_buf() };
    match std::fs::read_to_string(&file) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("cannot read {}: {e}", file.display());
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    // a single env var supplies the default output root
    let _ = OUTPUT_DIR_ENV;
    match cli.cmd {
        Cmd::Run { experiment, config, output, threads, seed, alphas } => {
            cmd_run(experiment, config, output, threads, seed, alphas)
        }
        Cmd::Validate { config } => cmd_validate(&config),
        Cmd::ShowManifest { path } => cmd_show_manifest(&path),
    }
}
