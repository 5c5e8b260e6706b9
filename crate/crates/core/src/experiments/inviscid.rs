//! Inviscid-limit experiment: couple the stochastic flow to the
//! deterministic one through a shared noise path and fit the rate at which
//! sup_t ‖S_{t,α}w - S_t w‖₂ vanishes with α.

use super::{Experiment, ExperimentOutcome, OutputWriter};
use crate::config::ExperimentConfig;
use crate::dynamics::coupled_inviscid_run;
use crate::error::Result;
use crate::measure::{CheckStatus, CheckVerdict};
use crate::spectral::{sobolev_norm, Field, Grid};
use crate::stats::line_fit;
use rayon::prelude::*;

pub struct InviscidExperiment;

/// Smooth reference datum with ‖w‖₃ = 1.
pub fn reference_datum(grid: Grid) -> Field {
    let w = &Field::harmonic(grid, 1, 1.0, 0.0) + &Field::harmonic(grid, 2, 0.0, 0.5);
    &w * (1.0 / sobolev_norm(&w, 3.0))
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl Experiment for InviscidExperiment {
    fn name(&self) -> &'static str {
        "inviscid"
    }

    fn run(&self, cfg: &ExperimentConfig, out: &OutputWriter) -> Result<ExperimentOutcome> {
        let sim = cfg.sim_config_for_alpha(0.0)?;
        let w = reference_datum(sim.grid);
        let alphas = cfg.alphas.clone();
        let t_final = cfg.inviscid.t_final;

        let per_seed: Vec<Vec<(f64, Result<f64>)>> = (0..cfg.inviscid.n_seeds as u64)
            .into_par_iter()
            .map(|seed_idx| coupled_inviscid_run(&sim, &w, &alphas, t_final, seed_idx))
            .collect();

        let mut rows = Vec::new();
        let mut slopes = Vec::new();
        let mut blow_ups = 0usize;
        for (seed_idx, results) in per_seed.iter().enumerate() {
            let mut la = Vec::new();
            let mut ls = Vec::new();
            for (alpha, result) in results {
                match result {
                    Ok(sup) => {
                        rows.push(format!("{seed_idx},{alpha},{sup}"));
                        la.push(alpha.ln());
                        ls.push(sup.ln());
                    }
                    Err(e) => {
                        blow_ups += 1;
                        rows.push(format!("{seed_idx},{alpha},blow-up:{e}"));
                    }
                }
            }
            if la.len() >= 2 {
                let (slope, _) = line_fit(&la, &ls);
                slopes.push(slope);
            }
        }
        out.write_csv("sup_differences.csv", "seed,alpha,sup_h2_difference", &rows)?;
        let slope_rows: Vec<String> =
            slopes.iter().enumerate().map(|(i, s)| format!("{i},{s}")).collect();
        out.write_csv("slopes.csv", "seed,slope", &slope_rows)?;

        let med = median(&slopes);
        let mut verdicts = vec![CheckVerdict {
            check: "inviscid-slope".into(),
            status: if med >= cfg.inviscid.slope_min && med <= cfg.inviscid.slope_max {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            statistic: med,
            threshold: cfg.inviscid.slope_max,
            detail: format!(
                "median log-log slope {med:.3} over {} seeds, band [{}, {}]; per-seed {:?}",
                slopes.len(),
                cfg.inviscid.slope_min,
                cfg.inviscid.slope_max,
                slopes.iter().map(|s| (s * 1e3).round() / 1e3).collect::<Vec<_>>()
            ),
        }];
        if blow_ups > 0 {
            verdicts.push(CheckVerdict {
                check: "inviscid-blow-ups".into(),
                status: CheckStatus::Fail,
                statistic: blow_ups as f64,
                threshold: 0.0,
                detail: format!("{blow_ups} coupled trajectories blew up"),
            });
        }
        Ok(ExperimentOutcome::from_verdicts(verdicts))
    }
}
