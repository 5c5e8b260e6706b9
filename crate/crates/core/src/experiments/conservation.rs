//! Deterministic conservation-drift experiment: integrate the flow from a
//! reference datum and report the relative drift of every explicit law.

use super::{Experiment, ExperimentOutcome, OutputWriter};
use crate::config::ExperimentConfig;
use crate::conservation::ObservableVector;
use crate::dynamics::evolve;
use crate::error::{Error, Result};
use crate::measure::{CheckStatus, CheckVerdict};
use crate::spectral::{Field, Grid};

pub const E0_DRIFT_TOL: f64 = 1e-8;
pub const EHALF_DRIFT_TOL: f64 = 1e-8;
pub const E1_DRIFT_TOL: f64 = 1e-5;
pub const E2_DRIFT_TOL: f64 = 1e-5;
pub const F1_DRIFT_TOL: f64 = 1e-8;
/// Absolute, since F₂ vanishes on the single-mode datum.
pub const F2_DRIFT_TOL: f64 = 1e-8;

pub fn initial_datum(name: &str, grid: Grid) -> Result<Field> {
    match name {
        "sin" => Ok(Field::harmonic(grid, 1, 1.0, 0.0)),
        "sin-plus-half-cos2" => {
            Ok(&Field::harmonic(grid, 1, 1.0, 0.0) + &Field::harmonic(grid, 2, 0.0, 0.5))
        }
        other => Err(Error::InvalidArgument(format!("unknown conservation datum \"{other}\""))),
    }
}

/// Max over samples of |v(t) - v(0)|, relative to |v(0)| unless it vanishes.
pub fn drift(samples: &[ObservableVector], pick: impl Fn(&ObservableVector) -> f64) -> f64 {
    let v0 = pick(&samples[0]);
    let dev = samples
        .iter()
        .map(|ov| (pick(ov) - v0).abs())
        .fold(0.0f64, f64::max);
    if v0.abs() > 1e-9 {
        dev / v0.abs()
    } else {
        dev
    }
}

fn verdict(name: &str, value: f64, tol: f64, relative: bool) -> CheckVerdict {
    CheckVerdict {
        check: name.into(),
        status: if value <= tol { CheckStatus::Pass } else { CheckStatus::Fail },
        statistic: value,
        threshold: tol,
        detail: format!(
            "{} drift {value:.3e} vs tolerance {tol:.1e}",
            if relative { "relative" } else { "absolute" }
        ),
    }
}

pub struct ConservationExperiment;

impl Experiment for ConservationExperiment {
    fn name(&self) -> &'static str {
        "conservation"
    }

    fn run(&self, cfg: &ExperimentConfig, out: &OutputWriter) -> Result<ExperimentOutcome> {
        let sim = cfg.sim_config_for_alpha(0.0)?;
        let u0 = initial_datum(&cfg.conservation.datum, sim.grid)?;
        let traj = match evolve(&sim, &u0, 0) {
            Ok(t) => t,
            Err(b) => {
                out.write_samples("trajectory", &b.partial.samples)?;
                return Ok(ExperimentOutcome::blow_up(self.name(), b.step, b.time, &b.reason));
            }
        };
        out.write_samples("trajectory", &traj.samples)?;
        out.write_checkpoints(&traj.checkpoints)?;

        let s = &traj.samples;
        let mut verdicts = vec![
            verdict("E0-drift", drift(s, |o| o.e0), E0_DRIFT_TOL, true),
            verdict("E1/2-drift", drift(s, |o| o.e_half), EHALF_DRIFT_TOL, true),
            verdict("E1-drift", drift(s, |o| o.e1), E1_DRIFT_TOL, true),
            verdict("E2-drift", drift(s, |o| o.e2), E2_DRIFT_TOL, true),
            verdict("F1-drift", drift(s, |o| o.f1), F1_DRIFT_TOL, true),
        ];
        // F2 is conserved only while the trajectory stays in the set where
        // ∫u²H∂ₓ²u vanishes; report it for the single-mode datum that starts
        // there, along with the observed defect excursion.
        if cfg.conservation.datum == "sin" {
            let mut v = verdict("F2-drift", drift(s, |o| o.f2), F2_DRIFT_TOL, false);
            let max_defect = s.iter().map(|o| o.o_defect.abs()).fold(0.0f64, f64::max);
            v.detail = format!("{}; max |o_defect| along run {max_defect:.3e}", v.detail);
            verdicts.push(v);
        }
        Ok(ExperimentOutcome::from_verdicts(verdicts))
    }
}
