//! Linear stochastic runs against the closed-form Ornstein-Uhlenbeck
//! statistics: ensemble norms vs the oracle, and the discrete Ito balance
//! residual at two step sizes.

use super::balance::{run_balance_ensemble, BalanceStats};
use super::{Experiment, ExperimentOutcome, OutputWriter};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::measure::{CheckStatus, CheckVerdict};

pub const ORACLE_REL_TOL: f64 = 0.02;
pub const ORACLE_Z_MAX: f64 = 3.0;

pub struct LinearOracleExperiment;

fn oracle_verdict(s: &BalanceStats) -> CheckVerdict {
    let z = s.z_score();
    let rel = s.relative_error();
    let pass = z.abs() <= ORACLE_Z_MAX && rel <= ORACLE_REL_TOL;
    CheckVerdict {
        check: format!("ou-oracle-n{}-dt{}", s.order, s.dt),
        status: if pass { CheckStatus::Pass } else { CheckStatus::Fail },
        statistic: z,
        threshold: ORACLE_Z_MAX,
        detail: format!(
            "sim {:.6} +- {:.6} vs oracle {:.6} (z = {:+.2}, rel = {:.3}%)",
            s.final_norm_sq_mean,
            s.final_norm_sq_se,
            s.oracle,
            z,
            rel * 100.0
        ),
    }
}

fn residual_verdict(s: &BalanceStats) -> CheckVerdict {
    let band = 3.0 * s.residual_se + s.quadrature_band;
    CheckVerdict {
        check: format!("ito-balance-n{}-dt{}", s.order, s.dt),
        status: if s.residual_mean.abs() <= band { CheckStatus::Pass } else { CheckStatus::Fail },
        statistic: s.residual_mean,
        threshold: band,
        detail: format!(
            "residual {:+.3e} vs 3SE {:.3e} + O(dt) quadrature band {:.3e}",
            s.residual_mean,
            3.0 * s.residual_se,
            s.quadrature_band
        ),
    }
}

fn shrink_verdict(coarse: &BalanceStats, fine: &BalanceStats) -> CheckVerdict {
    // the residual must shrink at least linearly with dt, up to MC noise
    let noise = 3.0 * (coarse.residual_se + fine.residual_se);
    let allowed = (fine.dt / coarse.dt) * coarse.residual_mean.abs() * 1.5 + noise;
    CheckVerdict {
        check: format!("ito-balance-shrink-n{}", coarse.order),
        status: if fine.residual_mean.abs() <= allowed {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
        statistic: fine.residual_mean.abs(),
        threshold: allowed,
        detail: format!(
            "|residual| {:.3e} at dt = {} vs {:.3e} at dt = {}",
            fine.residual_mean.abs(),
            fine.dt,
            coarse.residual_mean.abs(),
            coarse.dt
        ),
    }
}

impl Experiment for LinearOracleExperiment {
    fn name(&self) -> &'static str {
        "linear-oracle"
    }

    fn run(&self, cfg: &ExperimentConfig, out: &OutputWriter) -> Result<ExperimentOutcome> {
        let sim = cfg.sim_config_for_alpha(cfg.alphas[0])?;
        let mut dts = cfg.linear_oracle.dts.clone();
        dts.sort_by(|a, b| b.total_cmp(a)); // coarse first
        let mut all: Vec<Vec<BalanceStats>> = Vec::new();
        for &dt in &dts {
            let stats = run_balance_ensemble(
                sim.grid,
                &sim.spectrum,
                sim.alpha,
                dt,
                sim.t_final,
                cfg.ensemble_size,
                sim.seed,
                sim.dealias_rule,
                false,
                &cfg.linear_oracle.orders,
            )?;
            all.push(stats);
        }

        let mut verdicts = Vec::new();
        for stats in &all {
            for s in stats {
                verdicts.push(oracle_verdict(s));
                verdicts.push(residual_verdict(s));
            }
        }
        if all.len() >= 2 {
            let (first, last) = (&all[0], &all[all.len() - 1]);
            for (c, f) in first.iter().zip(last.iter()) {
                verdicts.push(shrink_verdict(c, f));
            }
        }

        let flat: Vec<&BalanceStats> = all.iter().flatten().collect();
        out.write_json("oracle_table.json", &flat)?;
        let rows: Vec<String> = flat
            .iter()
            .map(|s| {
                format!(
                    "{},{},{},{},{},{},{},{}",
                    s.order,
                    s.dt,
                    s.final_norm_sq_mean,
                    s.final_norm_sq_se,
                    s.oracle,
                    s.z_score(),
                    s.residual_mean,
                    s.residual_se
                )
            })
            .collect();
        out.write_csv(
            "oracle_table.csv",
            "order,dt,sim_mean,sim_se,oracle,z,ito_residual,ito_residual_se",
            &rows,
        )?;
        Ok(ExperimentOutcome::from_verdicts(verdicts))
    }
}
