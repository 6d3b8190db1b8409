//! Regret experiments comparing horizon policies of the adaptive controller.
//!
//! Every mode is run on the same seeds: seed `s` uses the run seed
//! `derive_seed(master, [s])`, so modes face identical noise.

use rayon::prelude::*;
use serde::Serialize;

use super::config::{self, AdaptiveParams, ExperimentConfig, ModeSpec, Params};
use super::emit::{fmt_f64, Report};
use super::stats;
use super::HarnessError;
use crate::adaptive::{self, AdaptiveConfig, EpochRecord, ModelSource, RegretSummary, SigmaSchedule};
use crate::bounds;
use crate::error::Error;
use crate::model::{CostSpec, LinearSystem};
use crate::riccati::OptimalSolution;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Checkpoint {
    pub t: u64,
    pub regret: f64,
    pub sqrt_t_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRow {
    pub t: u64,
    pub epoch: u32,
    pub stage_cost: f64,
    pub cum_regret: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Divergence {
    pub step: u64,
    pub epoch: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub mode: String,
    pub seed_index: usize,
    pub seed: u64,
    pub diverged: Option<Divergence>,
    pub summary: Option<RegretSummary>,
    /// Regret after `t = 2, 4, 8, ...` steps and after the final step.
    pub checkpoints: Vec<Checkpoint>,
    pub epochs: Vec<EpochRecord>,
    /// Per-step trace; written to CSV only.
    #[serde(skip)]
    pub steps: Vec<StepRow>,
}

impl RunResult {
    pub fn regret_after(&self, t: u64) -> Option<f64> {
        self.checkpoints.iter().find(|c| c.t == t).map(|c| c.regret)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSummary {
    pub mode: String,
    pub runs: usize,
    pub diverged: usize,
    /// Median of `Regret(t)/sqrt(t)` over the runs that finished, per checkpoint.
    pub median_sqrt_t_ratio: Vec<(u64, f64)>,
    pub median_linear_slope: Option<f64>,
    pub min_linear_slope: Option<f64>,
}

impl ModeSummary {
    pub fn ratio_at(&self, t: u64) -> Option<f64> {
        self.median_sqrt_t_ratio.iter().find(|(s, _)| *s == t).map(|(_, r)| *r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptiveResult {
    pub seed: u64,
    pub total_steps: u64,
    pub j_star: f64,
    pub beta_star: Option<f64>,
    pub gamma_bar: Option<f64>,
    pub modes: Vec<ModeSummary>,
    pub runs: Vec<RunResult>,
    #[serde(skip)]
    pub record_stride: u64,
}

impl AdaptiveResult {
    pub fn mode(&self, label: &str) -> Option<&ModeSummary> {
        self.modes.iter().find(|m| m.mode == label)
    }

    pub fn runs_for<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a RunResult> + 'a {
        self.runs.iter().filter(move |r| r.mode == label)
    }
}

impl Report for AdaptiveResult {
    fn csv_header(&self) -> Vec<&'static str> {
        vec!["seed", "mode", "t", "epoch", "stage_cost", "cum_regret"]
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        let stride = self.record_stride.max(1);
        let mut rows = Vec::new();
        for run in &self.runs {
            let last = run.steps.len().saturating_sub(1);
            for (i, s) in run.steps.iter().enumerate() {
                if s.t % stride != 0 && i != last {
                    continue;
                }
                rows.push(vec![
                    run.seed.to_string(),
                    run.mode.clone(),
                    s.t.to_string(),
                    s.epoch.to_string(),
                    fmt_f64(s.stage_cost),
                    fmt_f64(s.cum_regret),
                ]);
            }
        }
        rows
    }
}

fn checkpoints(steps: &[StepRow]) -> Vec<Checkpoint> {
    let total = steps.len() as u64;
    let mut ts: Vec<u64> = (1..64).map(|k| 1u64 << k).take_while(|&t| t <= total).collect();
    if total > 0 && ts.last() != Some(&total) {
        ts.push(total);
    }
    ts.into_iter()
        .map(|t| {
            let regret = steps[(t - 1) as usize].cum_regret;
            Checkpoint {
                t,
                regret,
                sqrt_t_ratio: regret / (t as f64).sqrt(),
            }
        })
        .collect()
}

/// Builds the controller configuration for one run.
pub fn adaptive_config(
    sys: &LinearSystem,
    cost: &CostSpec,
    opt: &OptimalSolution,
    params: &AdaptiveParams,
    mode: ModeSpec,
    gamma_bar: f64,
    seed: u64,
) -> Result<AdaptiveConfig, HarnessError> {
    let k0 = match &params.k0_gain {
        Some(rows) => config::matrix(rows, "params.k0_gain")?,
        None => opt.k_star.clone(),
    };
    let mut cfg = AdaptiveConfig::new(k0, params.total_steps, mode.0, gamma_bar, seed);
    cfg.warmup_epochs = params.warmup_epochs;
    cfg.sigma_schedule = match params.sigma_constant {
        Some(s) => SigmaSchedule::Constant(s),
        None => SigmaSchedule::Power(params.sigma_power),
    };
    cfg.warmup_sigma = params.warmup_sigma;
    cfg.max_horizon = params.max_horizon;
    cfg.info_threshold = params.info_threshold;
    cfg.overflow_guard = params.overflow_guard;
    cfg.model_source = if params.oracle {
        ModelSource::Oracle
    } else {
        ModelSource::Estimated
    };
    cost.check_system(sys)?;
    cfg.validate(sys).map_err(|e| match e {
        Error::Unstable { .. } => HarnessError::Config(format!("params.k0_gain: {e}")),
        e => HarnessError::Config(format!("params: {e}")),
    })?;
    Ok(cfg)
}

pub fn regret_experiment(
    sys: &LinearSystem,
    cost: &CostSpec,
    params: &AdaptiveParams,
    seed: u64,
) -> Result<AdaptiveResult, HarnessError> {
    let opt = OptimalSolution::solve(sys, cost)?;
    let beta = bounds::beta_star(opt.p_star(), cost.q()).ok();
    let gamma_bar = params.gamma_bar.or(beta.map(bounds::gamma_bar));
    let needs_rate = params
        .modes
        .iter()
        .any(|m| m.0 == adaptive::HorizonMode::AdaptiveLog);
    let rate = match gamma_bar {
        Some(g) if g > 0.0 && g < 1.0 => g,
        _ if needs_rate => {
            return Err(HarnessError::Config(
                "params.gamma_bar: required when Q is singular".into(),
            ))
        }
        // Unused by fixed-horizon runs.
        _ => 0.5,
    };

    let ns = params.seeds;
    let jobs: Vec<(ModeSpec, usize)> = params
        .modes
        .iter()
        .flat_map(|&m| (0..ns).map(move |s| (m, s)))
        .collect();
    let configs = jobs
        .iter()
        .map(|&(m, s)| adaptive_config(sys, cost, &opt, params, m, rate, rng::derive_seed(seed, &[s as u64])))
        .collect::<Result<Vec<_>, _>>()?;

    let runs = jobs
        .par_iter()
        .zip(configs.par_iter())
        .map(|(&(mode, s), cfg)| {
            let base = RunResult {
                mode: mode.label(),
                seed_index: s,
                seed: cfg.seed,
                diverged: None,
                summary: None,
                checkpoints: Vec::new(),
                epochs: Vec::new(),
                steps: Vec::new(),
            };
            match adaptive::run_adaptive(sys, cost, cfg) {
                Ok(trace) => {
                    let steps: Vec<StepRow> = trace
                        .steps
                        .iter()
                        .map(|r| StepRow {
                            t: r.t,
                            epoch: r.epoch,
                            stage_cost: r.stage_cost,
                            cum_regret: r.cum_regret,
                        })
                        .collect();
                    Ok(RunResult {
                        summary: Some(adaptive::regret_summary(&trace)),
                        checkpoints: checkpoints(&steps),
                        epochs: trace.epochs,
                        steps,
                        ..base
                    })
                }
                Err(Error::Diverged { step, epoch }) => Ok(RunResult {
                    diverged: Some(Divergence { step, epoch }),
                    ..base
                }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>, Error>>()?;

    let modes = params
        .modes
        .iter()
        .map(|m| {
            let label = m.label();
            let mine: Vec<&RunResult> = runs.iter().filter(|r| r.mode == label).collect();
            let done: Vec<&RunResult> = mine.iter().copied().filter(|r| r.diverged.is_none()).collect();
            let ts: Vec<u64> = done.first().map(|r| r.checkpoints.iter().map(|c| c.t).collect()).unwrap_or_default();
            let median_sqrt_t_ratio = ts
                .iter()
                .filter_map(|&t| {
                    stats::median(done.iter().filter_map(|r| {
                        r.checkpoints.iter().find(|c| c.t == t).map(|c| c.sqrt_t_ratio)
                    }))
                    .map(|v| (t, v))
                })
                .collect();
            let slopes = stats::sorted(done.iter().filter_map(|r| r.summary.map(|s| s.linear_slope)));
            ModeSummary {
                mode: label,
                runs: mine.len(),
                diverged: mine.len() - done.len(),
                median_sqrt_t_ratio,
                median_linear_slope: stats::quantile(&slopes, 0.5),
                min_linear_slope: slopes.first().copied(),
            }
        })
        .collect();

    Ok(AdaptiveResult {
        seed,
        total_steps: params.total_steps,
        j_star: opt.j_star,
        beta_star: beta,
        gamma_bar,
        modes,
        runs,
        record_stride: params.record_stride,
    })
}

pub fn run_adaptive_experiment(cfg: &ExperimentConfig) -> Result<AdaptiveResult, HarnessError> {
    let Params::Adaptive(p) = &cfg.params else {
        return Err(HarnessError::Config("kind: expected adaptive".into()));
    };
    regret_experiment(&cfg.system, &cfg.cost, p, cfg.seed)
}
