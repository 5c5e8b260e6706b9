//! Recurrence witness: run the deterministic flow from a small single-mode
//! datum and look for returns near the initial state.

use super::{Experiment, ExperimentOutcome, OutputWriter};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::measure::{detect_recurrence, CheckStatus, CheckVerdict};
use crate::spectral::{sobolev_norm, Field};

pub struct RecurrenceExperiment;

impl Experiment for RecurrenceExperiment {
    fn name(&self) -> &'static str {
        "recurrence"
    }

    fn run(&self, cfg: &ExperimentConfig, out: &OutputWriter) -> Result<ExperimentOutcome> {
        let sim = cfg.sim_config_for_alpha(0.0)?;
        let w = Field::harmonic(sim.grid, 1, cfg.recurrence.amplitude, 0.0);
        let ref_norm = sobolev_norm(&w, 2.0);
        let tol = cfg.recurrence.tol_rel * ref_norm;
        let scan = match detect_recurrence(&w, &sim, &cfg.recurrence.norms, tol) {
            Ok(s) => s,
            Err(Error::BlowUp { step, time, reason }) => {
                return Ok(ExperimentOutcome::blow_up(self.name(), step, time, &reason));
            }
            Err(e) => return Err(e),
        };

        let rows: Vec<String> = scan
            .minima
            .iter()
            .map(|(t, d)| format!("{t},{d},{}", d / ref_norm))
            .collect();
        out.write_csv("local_minima.csv", "t,distance,distance_rel", &rows)?;

        let best = scan
            .minima
            .iter()
            .map(|&(_, d)| d)
            .fold(f64::INFINITY, f64::min);
        let verdict = CheckVerdict {
            check: "recurrence-return".into(),
            status: if scan.hits.is_empty() { CheckStatus::Fail } else { CheckStatus::Pass },
            statistic: best / ref_norm,
            threshold: cfg.recurrence.tol_rel,
            detail: match scan.hits.first() {
                Some((t, d)) => format!(
                    "first return at t = {t:.2} with distance {:.4}·||w||; {} returns, {} minima",
                    d / ref_norm,
                    scan.hits.len(),
                    scan.minima.len()
                ),
                None => format!(
                    "no return below {:.3}·||w||; best distance {:.4}·||w|| over {} minima",
                    cfg.recurrence.tol_rel,
                    best / ref_norm,
                    scan.minima.len()
                ),
            },
        };
        Ok(ExperimentOutcome::from_verdicts(vec![verdict]))
    }
}
