use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use rayon::prelude::*;

use super::run_trial;
use crate::config::{Scenario, SweepParam};
use crate::error::{Error, Result};
use crate::policies::{Planner, PolicyKind};

pub const SWEEP_COLUMNS: &str =
    "sweep_param,value,policy,trials,mean_eta_a,std_eta_a,mean_solve_ms,mean_sim_ms";

/// Aggregate of all trials for one (value, policy) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub param: SweepParam,
    pub value: f64,
    pub policy: PolicyKind,
    pub trials: usize,
    pub mean_eta_a: f64,
    /// Sample standard deviation across trials.
    pub std_eta_a: f64,
    pub mean_solve_ms: f64,
    pub mean_sim_ms: f64,
    /// Per-trial success ratios in trial order.
    pub etas: Vec<f64>,
    pub filter_resets: u64,
}

impl SweepRow {
    /// Standard error of `mean_eta_a`.
    pub fn std_error(&self) -> f64 {
        self.std_eta_a / (self.trials as f64).sqrt()
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{:.6},{:.6},{:.3},{:.3}",
            self.param.name(),
            self.value,
            self.policy,
            self.trials,
            self.mean_eta_a,
            self.std_eta_a,
            self.mean_solve_ms,
            self.mean_sim_ms
        )
    }
}

#[derive(Clone, Debug, Default)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    /// Cells that were skipped, with the reason.
    pub notices: Vec<String>,
    /// Set when the sweep stopped early on request.
    pub truncated: bool,
}

impl SweepOutcome {
    pub fn row(&self, value: f64, policy: PolicyKind) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.policy == policy && (r.value - value).abs() < 1e-12)
    }
}

pub fn sweep_csv_header(config_hash: &str, seed: u64) -> String {
    format!("# config_hash={config_hash} seed={seed}\n{SWEEP_COLUMNS}\n")
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs every policy at every value of `param`, re-solving per value.
///
/// A policy whose preparation is refused (state space too large for the
/// exact solver) is skipped with a notice. Setting `cancel` stops the sweep
/// after the cell in progress; the rows finished so far are returned.
pub fn run_sweep(
    base: &Scenario,
    param: SweepParam,
    values: &[f64],
    policies: &[PolicyKind],
    cancel: &AtomicBool,
    mut on_row: impl FnMut(&SweepRow),
) -> Result<SweepOutcome> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Config(format!("sweep value {v} is not finite")));
    }
    let mut out = SweepOutcome::default();
    for &value in values {
        let scenario = base.with_param(param, value);
        scenario.validate()?;
        let model = scenario.build_model()?;
        let solver = scenario.solver_config();
        let sim = scenario.sim_config();
        for &policy in policies {
            if cancel.load(Ordering::SeqCst) {
                out.truncated = true;
                return Ok(out);
            }
            let prepared = match Planner::prepare(policy, &model, &solver) {
                Ok(p) => p,
                Err(Error::Refused(msg)) => {
                    out.notices.push(format!("{}={value} {policy}: skipped, {msg}", param.name()));
                    continue;
                }
                Err(e) => return Err(e),
            };
            let timed: Vec<(f64, f64, u64)> = (0..sim.trials as u64)
                .into_par_iter()
                .map(|t| {
                    let start = Instant::now();
                    let r = run_trial(&model, &prepared.planner, &sim, t)?;
                    Ok((r.eta_a, start.elapsed().as_secs_f64() * 1e3, r.filter_resets))
                })
                .collect::<Result<_>>()?;
            let etas: Vec<f64> = timed.iter().map(|x| x.0).collect();
            let (mean, std) = mean_std(&etas);
            let row = SweepRow {
                param,
                value,
                policy,
                trials: sim.trials,
                mean_eta_a: mean,
                std_eta_a: std,
                mean_solve_ms: prepared.solve_ms,
                mean_sim_ms: timed.iter().map(|x| x.1).sum::<f64>() / timed.len() as f64,
                etas,
                filter_resets: timed.iter().map(|x| x.2).sum(),
            };
            on_row(&row);
            out.rows.push(row);
        }
    }
    Ok(out)
}
