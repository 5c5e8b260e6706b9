//! Experiment drivers behind a common trait, registered by name and
//! selected at runtime; `run_experiment` is the single entry point used by
//! the command line.

pub mod balance;
mod conservation;
mod inviscid;
mod linear_oracle;
mod output;
mod recurrence;
mod stationary;

pub use conservation::{drift, initial_datum, ConservationExperiment};
pub use inviscid::{median, reference_datum, InviscidExperiment};
pub use linear_oracle::LinearOracleExperiment;
pub use output::OutputWriter;
pub use recurrence::RecurrenceExperiment;
pub use stationary::{h1_mean, StationaryExperiment};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::Result;
use crate::measure::{CheckStatus, CheckVerdict};

/// One experiment family: a reproducible driver producing artifact files
/// and a verdict list.
pub trait Experiment: Send + Sync {
    fn name(&self) -> &'static str;
    fn run(&self, cfg: &ExperimentConfig, out: &OutputWriter) -> Result<ExperimentOutcome>;
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub verdicts: Vec<CheckVerdict>,
    pub blow_up: bool,
}

impl ExperimentOutcome {
    pub fn from_verdicts(verdicts: Vec<CheckVerdict>) -> Self {
        ExperimentOutcome { verdicts, blow_up: false }
    }

    pub fn blow_up(experiment: &str, step: usize, time: f64, reason: &str) -> Self {
        ExperimentOutcome {
            verdicts: vec![CheckVerdict {
                check: format!("{experiment}/blow-up"),
                status: CheckStatus::Fail,
                statistic: time,
                threshold: f64::NAN,
                detail: format!("trajectory blew up at step {step} (t = {time:.4}): {reason}"),
            }],
            blow_up: true,
        }
    }

    pub fn merge(&mut self, other: ExperimentOutcome) {
        self.verdicts.extend(other.verdicts);
        self.blow_up |= other.blow_up;
    }

    /// 0 when every check passes or is inconclusive, 1 on any hard failure,
    /// 2 on blow-up.
    pub fn exit_code(&self) -> i32 {
        if self.blow_up {
            2
        } else if self.verdicts.iter().any(|v| v.hard_failure()) {
            1
        } else {
            0
        }
    }
}

/// All runnable experiments. `full-suite` is a driver over this registry
/// rather than a member of it.
pub fn registry() -> Vec<Box<dyn Experiment>> {
    vec![
        Box::new(ConservationExperiment),
        Box::new(LinearOracleExperiment),
        Box::new(StationaryExperiment),
        Box::new(InviscidExperiment),
        Box::new(RecurrenceExperiment),
    ]
}

pub fn experiment_by_name(name: &str) -> Option<Box<dyn Experiment>> {
    registry().into_iter().find(|e| e.name() == name)
}

/// Human-readable verdict table.
pub fn format_verdicts(verdicts: &[CheckVerdict]) -> String {
    let mut s = String::new();
    let width = verdicts.iter().map(|v| v.check.len()).max().unwrap_or(8).max(8);
    for v in verdicts {
        let status = match v.status {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Inconclusive => "INCONCLUSIVE",
        };
        s.push_str(&format!("{:>12}  {:width$}  {}\n", status, v.check, v.detail));
    }
    s
}

fn run_single(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let out = OutputWriter::create(&cfg.output_dir, cfg.format)?;
    out.write_manifest(cfg, false)?;
    let exp = experiment_by_name(cfg.experiment.name()).expect("registry covers all kinds");
    let outcome = exp.run(cfg, &out)?;
    out.write_json("verdicts.json", &outcome.verdicts)?;
    out.write_text("verdicts.txt", &format_verdicts(&outcome.verdicts))?;
    out.write_manifest(cfg, true)?;
    Ok(outcome)
}

/// Run an experiment (or the full suite) inside a worker pool of the
/// configured size. Results are merged in a fixed order, so the artifacts
/// are byte-identical across thread counts.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| crate::error::Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| {
        if cfg.experiment == ExperimentKind::FullSuite {
            let root = OutputWriter::create(&cfg.output_dir, cfg.format)?;
            root.write_manifest(cfg, false)?;
            let mut total = ExperimentOutcome::from_verdicts(vec![]);
            let mut subs: Vec<(String, ExperimentConfig)> = ExperimentKind::ALL
                .into_iter()
                .filter(|k| *k != ExperimentKind::FullSuite)
                .map(|k| (k.name().to_string(), ExperimentConfig::defaults(k)))
                .collect();
            // the qualitative-property suite is the stationary experiment at
            // the A0 = 1/(2e) scale
            subs.push(("qualitative".to_string(), ExperimentConfig::qualitative_defaults()));
            for (label, mut sub) in subs {
                sub.output_dir = cfg.output_dir.join(&label);
                sub.format = cfg.format;
                sub.threads = cfg.threads;
                let mut outcome = run_single(&sub)?;
                for v in &mut outcome.verdicts {
                    v.check = format!("{label}/{}", v.check);
                }
                total.merge(outcome);
            }
            root.write_json("verdicts.json", &total.verdicts)?;
            root.write_text("verdicts.txt", &format_verdicts(&total.verdicts))?;
            root.write_manifest(cfg, true)?;
            Ok(total)
        } else {
            run_single(cfg)
        }
    })
}
