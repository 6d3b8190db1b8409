//! Identification error versus the number of rollouts.
//!
//! Seed `s` of the experiment uses the run seed `derive_seed(master, [s])` for
//! every `T` in the grid, so the rollouts for a small `T` are a prefix of
//! those for a larger one.

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, IdentifyParams, Params};
use super::emit::{fmt_opt, Report};
use super::stats;
use super::HarnessError;
use crate::error::Error;
use crate::model::LinearSystem;
use crate::rng;
use crate::sysid;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentifyCell {
    #[serde(rename = "T")]
    pub t: usize,
    pub seed_index: usize,
    pub seed: u64,
    /// Missing when the regressor was rank deficient.
    pub eps_measured: Option<f64>,
    pub regressor_min_singular: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentifyRow {
    #[serde(rename = "T")]
    pub t: usize,
    pub median: Option<f64>,
    pub q1: Option<f64>,
    pub q3: Option<f64>,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentifyResult {
    pub seed: u64,
    pub t_h: usize,
    pub sigma_u: f64,
    pub sigma_w: f64,
    pub rows: Vec<IdentifyRow>,
    /// Log-log slope of the median error against `T`.
    pub slope: Option<f64>,
    pub cells: Vec<IdentifyCell>,
}

impl Report for IdentifyResult {
    fn csv_header(&self) -> Vec<&'static str> {
        vec!["T", "median_eps", "q1_eps", "q3_eps", "failures"]
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    r.t.to_string(),
                    fmt_opt(r.median),
                    fmt_opt(r.q1),
                    fmt_opt(r.q3),
                    r.failures.to_string(),
                ]
            })
            .collect()
    }
}

pub fn identify(
    sys: &LinearSystem,
    params: &IdentifyParams,
    seed: u64,
) -> Result<IdentifyResult, HarnessError> {
    let grid = &params.t_grid;
    let ns = params.seeds;
    let cells = (0..grid.len() * ns)
        .into_par_iter()
        .map(|c| {
            let (ti, s) = (c / ns, c % ns);
            let run_seed = rng::derive_seed(seed, &[s as u64]);
            let data = sysid::generate_rollouts(sys, params.sigma_u, grid[ti], params.t_h, run_seed)?;
            let (eps, sv) = match sysid::ls_estimate(&data, Some(sys)) {
                Ok(est) => (est.eps_measured, Some(est.regressor_min_singular)),
                Err(Error::RankDeficient { min_singular }) => (None, Some(min_singular)),
                Err(e) => return Err(e),
            };
            Ok(IdentifyCell {
                t: grid[ti],
                seed_index: s,
                seed: run_seed,
                eps_measured: eps,
                regressor_min_singular: sv,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;

    let rows: Vec<IdentifyRow> = grid
        .iter()
        .enumerate()
        .map(|(ti, &t)| {
            let chunk = &cells[ti * ns..(ti + 1) * ns];
            let v = stats::sorted(chunk.iter().filter_map(|c| c.eps_measured));
            IdentifyRow {
                t,
                median: stats::quantile(&v, 0.5),
                q1: stats::quantile(&v, 0.25),
                q3: stats::quantile(&v, 0.75),
                failures: ns - v.len(),
            }
        })
        .collect();
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.median.map(|m| (r.t as f64, m)))
        .collect();

    Ok(IdentifyResult {
        seed,
        t_h: params.t_h,
        sigma_u: params.sigma_u,
        sigma_w: sys.sigma_w(),
        slope: stats::loglog_slope(&pts),
        rows,
        cells,
    })
}

pub fn run_identify(cfg: &ExperimentConfig) -> Result<IdentifyResult, HarnessError> {
    let Params::Identify(p) = &cfg.params else {
        return Err(HarnessError::Config("kind: expected identify".into()));
    };
    identify(&cfg.system, p, cfg.seed)
}
