//! Long-run stationary statistics per viscosity: a single ergodic trajectory
//! with autocorrelation-corrected errors, an independent-seed ensemble
//! cross-check, and the named verdict checks over the resulting report.

use super::{Experiment, ExperimentOutcome, OutputWriter};
use crate::config::ExperimentConfig;
use crate::conservation::{dissipation_ratio, EnergyLaw};
use crate::dynamics::{evolve, SimConfig, TrajectoryRecord};
use crate::error::Result;
use crate::measure::{
    check_by_name, AccumulateOpts, CheckStatus, CheckVerdict, StationaryReport,
};
use crate::stats::mean;
use rayon::prelude::*;

pub struct StationaryExperiment;

fn alpha_label(alpha: f64) -> String {
    format!("alpha-{alpha}")
}

struct AlphaRun {
    alpha: f64,
    report: StationaryReport,
    verdicts: Vec<CheckVerdict>,
}

fn run_alpha(
    cfg: &ExperimentConfig,
    alpha: f64,
    out: &OutputWriter,
) -> Result<std::result::Result<AlphaRun, ExperimentOutcome>> {
    let mut sim = cfg.sim_config_for_alpha(alpha)?;
    if sim.checkpoint_every.is_none() {
        // sparse checkpoints feed the dissipation-pairing diagnostics
        sim.checkpoint_every = Some((sim.n_steps() / 32).max(1));
    }
    let u0 = crate::spectral::Field::zeros(sim.grid);
    let traj = match evolve(&sim, &u0, 0) {
        Ok(t) => t,
        Err(b) => {
            out.write_samples("trajectory", &b.partial.samples)?;
            return Ok(Err(ExperimentOutcome::blow_up("stationary", b.step, b.time, &b.reason)));
        }
    };
    out.write_samples("trajectory", &traj.samples)?;
    if cfg.sim.checkpoint_every.is_some() {
        // explicit request: persist the binary states alongside the samples
        out.write_checkpoints(&traj.checkpoints)?;
    }

    let opts = AccumulateOpts {
        e_tilde_c: cfg.stationary.e_tilde_c,
        e_tilde_b: cfg.stationary.e_tilde_b,
        ..Default::default()
    };
    let mut report = StationaryReport::from_trajectory(&traj, &sim, &opts)?;
    for law in [EnergyLaw::E1, EnergyLaw::E2] {
        let ratios: Vec<f64> = traj
            .checkpoints
            .iter()
            .filter(|(t, _)| *t >= sim.burn_in)
            .map(|(_, u)| dissipation_ratio(law, u))
            .collect();
        if !ratios.is_empty() {
            report
                .diagnostics
                .insert(format!("dissipation_ratio_{}", law.name()), mean(&ratios));
        }
    }

    let mut verdicts = Vec::new();
    for name in &cfg.stationary.checks {
        if let Some(check) = check_by_name(name) {
            verdicts.extend(check.run(&report, &sim.spectrum, &cfg.checks));
        }
    }

    // independent-seed ensemble cross-check against metastability: shorter
    // members, disjoint trajectory ids, compared on the H1 observable
    if cfg.ensemble_size > 1 {
        let members = cfg.ensemble_size - 1;
        let member_t = sim.burn_in + (sim.t_final - sim.burn_in) / 2.0;
        let member_cfg = SimConfig { t_final: member_t, checkpoint_every: None, ..sim.clone() };
        let member_means: Vec<Result<f64>> = (1..=members as u64)
            .into_par_iter()
            .map(|id| -> Result<f64> {
                let t = evolve(&member_cfg, &u0, id)
                    .map_err(|b| crate::error::Error::from(*b))?;
                let acc = crate::measure::accumulate_with(&t, member_cfg.burn_in, &opts)?;
                Ok(acc.mean("h1_sq"))
            })
            .collect();
        let mut means = Vec::new();
        let mut failures = 0usize;
        for m in member_means {
            match m {
                Ok(v) => means.push(v),
                Err(_) => failures += 1,
            }
        }
        let single = &report.means["h1_sq"];
        let v = if failures > 0 || means.len() < 2 {
            CheckVerdict {
                check: "ensemble-consistency".into(),
                status: CheckStatus::Inconclusive,
                statistic: f64::NAN,
                threshold: f64::NAN,
                detail: format!("{failures} member failures, {} usable members", means.len()),
            }
        } else {
            let m = mean(&means);
            let se = (crate::stats::variance(&means) / means.len() as f64).sqrt();
            let band = 3.0 * (se * se + single.se * single.se).sqrt();
            CheckVerdict {
                check: "ensemble-consistency".into(),
                status: if (m - single.mean).abs() <= band {
                    CheckStatus::Pass
                } else {
                    CheckStatus::Fail
                },
                statistic: m - single.mean,
                threshold: band,
                detail: format!(
                    "ensemble mean ||u||_1^2 = {:.4} ({} members) vs single-run {:.4}",
                    m,
                    means.len(),
                    single.mean
                ),
            }
        };
        verdicts.push(v);
    }

    write_report_artifacts(out, &report)?;
    Ok(Ok(AlphaRun { alpha, report, verdicts }))
}

fn write_report_artifacts(out: &OutputWriter, report: &StationaryReport) -> Result<()> {
    out.write_json("report.json", report)?;
    let edges = report.hist_norm.bin_edges();
    let rows: Vec<String> = report
        .hist_norm
        .counts
        .iter()
        .enumerate()
        .map(|(i, c)| format!("{},{},{}", edges[i], edges[i + 1], c))
        .collect();
    out.write_csv("hist_norm.csv", "lo,hi,count", &rows)?;
    let edges = report.hist_e1_tilde.bin_edges();
    let rows: Vec<String> = report
        .hist_e1_tilde
        .counts
        .iter()
        .enumerate()
        .map(|(i, c)| format!("{},{},{}", edges[i], edges[i + 1], c))
        .collect();
    out.write_csv("hist_e1_tilde.csv", "lo,hi,count", &rows)?;
    let rows: Vec<String> = report
        .tail
        .iter()
        .map(|p| format!("{},{},{}", p.r, p.count_above, p.survival))
        .collect();
    out.write_csv("tail.csv", "r,count_above,survival", &rows)?;
    Ok(())
}

impl Experiment for StationaryExperiment {
    fn name(&self) -> &'static str {
        "stationary"
    }

    fn run(&self, cfg: &ExperimentConfig, out: &OutputWriter) -> Result<ExperimentOutcome> {
        let mut runs: Vec<AlphaRun> = Vec::new();
        let mut verdicts = Vec::new();
        for &alpha in &cfg.alphas {
            let sub = out.subdir(&alpha_label(alpha))?;
            match run_alpha(cfg, alpha, &sub)? {
                Ok(mut run) => {
                    for v in &mut run.verdicts {
                        v.check = format!("{}/{}", alpha_label(alpha), v.check);
                    }
                    verdicts.extend(run.verdicts.clone());
                    runs.push(run);
                }
                Err(outcome) => return Ok(outcome),
            }
        }

        // the H1 target A0/2 carries no alpha: estimates must agree pairwise
        for i in 0..runs.len() {
            for j in i + 1..runs.len() {
                let (a, b) = (&runs[i], &runs[j]);
                let (ma, mb) = (&a.report.means["h1_sq"], &b.report.means["h1_sq"]);
                let band = 3.0 * (ma.se * ma.se + mb.se * mb.se).sqrt();
                let diff = ma.mean - mb.mean;
                verdicts.push(CheckVerdict {
                    check: format!(
                        "h1-alpha-independence-{}-{}",
                        alpha_label(a.alpha),
                        alpha_label(b.alpha)
                    ),
                    status: if diff.abs() <= band { CheckStatus::Pass } else { CheckStatus::Fail },
                    statistic: diff,
                    threshold: band,
                    detail: format!(
                        "mean at alpha = {}: {:.4}; at alpha = {}: {:.4}; 3 combined SE = {:.4}",
                        a.alpha, ma.mean, b.alpha, mb.mean, band
                    ),
                });
            }
        }
        Ok(ExperimentOutcome::from_verdicts(verdicts))
    }
}

/// Long-run mean of ‖u‖₁² with its corrected SE, for external suites.
pub fn h1_mean(traj: &TrajectoryRecord, burn_in: f64) -> Result<crate::stats::MeanWithError> {
    let xs: Vec<f64> = traj
        .samples
        .iter()
        .filter(|o| o.t >= burn_in)
        .map(|o| o.h1 * o.h1)
        .collect();
    if xs.len() < 4 {
        return Err(crate::error::Error::InsufficientData(format!(
            "{} post-burn-in samples",
            xs.len()
        )));
    }
    Ok(crate::stats::mean_with_error(&xs))
}
