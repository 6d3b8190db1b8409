//! Horizon sweep over randomly perturbed nominal models.
//!
//! Model `i` perturbs every entry of `A` and then of `B` (column-major order)
//! by independent `U(-r, r)` draws from the stream keyed by `(seed, i)`. The
//! same draw is used across all horizons.

use nalgebra::DMatrix;
use rand::distr::{Distribution, Uniform};
use rayon::prelude::*;
use serde::Serialize;

use super::config::{self, ExperimentConfig, SweepParams};
use super::emit::{fmt_opt, Report};
use super::HarnessError;
use crate::linalg::serde_rows;
use crate::model::{CostSpec, LinearSystem, RhcConfig};
use crate::performance;
use crate::riccati::{self, OptimalSolution};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    pub model_index: usize,
    #[serde(rename = "N")]
    pub horizon: usize,
    pub stable: bool,
    pub spectral_radius: Option<f64>,
    pub gap: Option<f64>,
    /// `gap / max gap` over the stable entries; missing when unstable.
    pub normalized_gap: Option<f64>,
    /// Set when the gain could not be computed at all.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelDraw {
    pub model_index: usize,
    #[serde(with = "serde_rows")]
    pub a: DMatrix<f64>,
    #[serde(with = "serde_rows")]
    pub b: DMatrix<f64>,
    pub eps_m: f64,
}

/// Where a model's best horizon falls on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ArgminClass {
    Smallest,
    Largest,
    Interior,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSummary {
    pub model_index: usize,
    /// Stable at every horizon of the grid.
    pub stable_curve: bool,
    /// Best horizon over the stable entries; ties go to the smaller horizon.
    pub argmin_n: Option<usize>,
    pub class: Option<ArgminClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub seed: u64,
    pub perturbation_range: f64,
    pub horizons: Vec<usize>,
    #[serde(with = "serde_rows")]
    pub terminal: DMatrix<f64>,
    pub j_star: f64,
    pub max_gap: Option<f64>,
    pub models: Vec<ModelDraw>,
    pub entries: Vec<SweepEntry>,
    pub summaries: Vec<ModelSummary>,
}

impl SweepResult {
    /// Share of stable-curve models whose best horizon is an end of the grid.
    pub fn endpoint_fraction(&self) -> Option<f64> {
        let curves: Vec<_> = self.summaries.iter().filter(|s| s.stable_curve).collect();
        if curves.is_empty() {
            return None;
        }
        let ends = curves
            .iter()
            .filter(|s| matches!(s.class, Some(ArgminClass::Smallest | ArgminClass::Largest)))
            .count();
        Some(ends as f64 / curves.len() as f64)
    }

    /// Some stable-curve model has its best horizon strictly inside the grid.
    pub fn has_interior_argmin(&self) -> bool {
        self.summaries
            .iter()
            .any(|s| s.stable_curve && s.class == Some(ArgminClass::Interior))
    }

    pub fn gap_curve(&self, model_index: usize) -> Vec<Option<f64>> {
        self.entries
            .iter()
            .filter(|e| e.model_index == model_index)
            .map(|e| e.gap)
            .collect()
    }
}

impl Report for SweepResult {
    fn csv_header(&self) -> Vec<&'static str> {
        vec!["model_index", "N", "stable", "gap", "normalized_gap"]
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        self.entries
            .iter()
            .map(|e| {
                vec![
                    e.model_index.to_string(),
                    e.horizon.to_string(),
                    e.stable.to_string(),
                    fmt_opt(e.gap),
                    fmt_opt(e.normalized_gap),
                ]
            })
            .collect()
    }
}

/// Draws the nominal model with index `i`.
pub fn perturbed_model(
    truth: &LinearSystem,
    range: f64,
    seed: u64,
    i: usize,
) -> Result<LinearSystem, HarnessError> {
    if range == 0.0 {
        return Ok(truth.clone());
    }
    let dist = Uniform::new(-range, range)
        .map_err(|e| HarnessError::Config(format!("params.perturbation_range: {e}")))?;
    let mut r = rng::stream(seed, &[i as u64]);
    let a = truth.a().map(|v| v + dist.sample(&mut r));
    let b = truth.b().map(|v| v + dist.sample(&mut r));
    Ok(truth.with_matrices(a, b)?)
}

fn classify(argmin: usize, horizons: &[usize]) -> ArgminClass {
    let lo = *horizons.iter().min().expect("non-empty grid");
    let hi = *horizons.iter().max().expect("non-empty grid");
    if argmin == lo {
        ArgminClass::Smallest
    } else if argmin == hi {
        ArgminClass::Largest
    } else {
        ArgminClass::Interior
    }
}

fn cell(
    truth: &LinearSystem,
    nominal: &LinearSystem,
    cost: &CostSpec,
    opt: &OptimalSolution,
    terminal: &DMatrix<f64>,
    model_index: usize,
    horizon: usize,
) -> SweepEntry {
    let outcome = RhcConfig::new(horizon, terminal.clone())
        .and_then(|rhc| riccati::mpc_gain(nominal, cost, &rhc))
        .and_then(|k| performance::evaluate(truth, cost, &k, opt));
    match outcome {
        Ok(rep) => SweepEntry {
            model_index,
            horizon,
            stable: rep.stable,
            spectral_radius: Some(rep.spectral_radius),
            gap: rep.gap,
            normalized_gap: None,
            error: None,
        },
        Err(e) => SweepEntry {
            model_index,
            horizon,
            stable: false,
            spectral_radius: None,
            gap: None,
            normalized_gap: None,
            error: Some(e.to_string()),
        },
    }
}

/// Runs the sweep; cells are evaluated in parallel and merged in index order.
pub fn sweep(
    truth: &LinearSystem,
    cost: &CostSpec,
    terminal: &DMatrix<f64>,
    params: &SweepParams,
    seed: u64,
) -> Result<SweepResult, HarnessError> {
    let opt = OptimalSolution::solve(truth, cost)?;
    let nominals = (0..params.num_models)
        .map(|i| perturbed_model(truth, params.perturbation_range, seed, i))
        .collect::<Result<Vec<_>, _>>()?;
    let nh = params.horizons.len();
    let mut entries: Vec<SweepEntry> = (0..params.num_models * nh)
        .into_par_iter()
        .map(|c| {
            let (i, j) = (c / nh, c % nh);
            cell(truth, &nominals[i], cost, &opt, terminal, i, params.horizons[j])
        })
        .collect();

    let max_gap = entries
        .iter()
        .filter(|e| e.stable)
        .filter_map(|e| e.gap)
        .fold(None, |m: Option<f64>, g| Some(m.map_or(g, |m| m.max(g))));
    for e in entries.iter_mut().filter(|e| e.stable) {
        e.normalized_gap = match (e.gap, max_gap) {
            (Some(g), Some(m)) if m > 0.0 => Some(g / m),
            (Some(_), Some(_)) => Some(0.0),
            _ => None,
        };
    }

    let summaries = (0..params.num_models)
        .map(|i| {
            let row = &entries[i * nh..(i + 1) * nh];
            let stable_curve = row.iter().all(|e| e.stable);
            let argmin = row
                .iter()
                .filter(|e| e.stable)
                .filter_map(|e| e.gap.map(|g| (e.horizon, g)))
                .fold(None, |best: Option<(usize, f64)>, (n, g)| match best {
                    Some((bn, bg)) if bg < g || (bg == g && bn <= n) => Some((bn, bg)),
                    _ => Some((n, g)),
                })
                .map(|(n, _)| n);
            ModelSummary {
                model_index: i,
                stable_curve,
                argmin_n: argmin,
                class: argmin.map(|n| classify(n, &params.horizons)),
            }
        })
        .collect();

    let models = nominals
        .iter()
        .enumerate()
        .map(|(i, m)| {
            Ok(ModelDraw {
                model_index: i,
                a: m.a().clone(),
                b: m.b().clone(),
                eps_m: truth.model_error(m)?,
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;

    Ok(SweepResult {
        seed,
        perturbation_range: params.perturbation_range,
        horizons: params.horizons.clone(),
        terminal: terminal.clone(),
        j_star: opt.j_star,
        max_gap,
        models,
        entries,
        summaries,
    })
}

/// Sweep as described by `cfg`, which must hold sweep parameters.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult, HarnessError> {
    let config::Params::Sweep(p) = &cfg.params else {
        return Err(HarnessError::Config("kind: expected sweep".into()));
    };
    let n = cfg.system.n();
    let terminal = match &p.terminal {
        Some(t) => config::square_matrix(t, n, "params.terminal")?,
        None if cfg.default_system => config::reference_terminal(),
        None => DMatrix::zeros(n, n),
    };
    sweep(&cfg.system, &cfg.cost, &terminal, p, cfg.seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::emit::fmt_f64;

    #[test]
    fn zero_range_reproduces_exact_model_curve() {
        let sys = config::reference_system(1.0);
        let cost = CostSpec::identity(2, 1);
        let params = SweepParams {
            num_models: 3,
            perturbation_range: 0.0,
            horizons: (1..=6).collect(),
            terminal: None,
        };
        let res = sweep(&sys, &cost, &config::reference_terminal(), &params, 1).unwrap();
        let c0 = res.gap_curve(0);
        assert_eq!(c0, res.gap_curve(2));
        assert!(res.models.iter().all(|m| m.eps_m == 0.0));
        // With P != P* and the exact model the gap shrinks with the horizon.
        let g: Vec<f64> = c0.iter().map(|g| g.unwrap()).collect();
        assert!(g.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{g:?}");
        assert_eq!(fmt_f64(res.entries[0].normalized_gap.unwrap()), "1");
    }

    #[test]
    fn classification() {
        let h = [1, 2, 3, 4];
        assert_eq!(classify(1, &h), ArgminClass::Smallest);
        assert_eq!(classify(4, &h), ArgminClass::Largest);
        assert_eq!(classify(2, &h), ArgminClass::Interior);
    }

    #[test]
    fn perturbation_is_bounded_and_deterministic() {
        let sys = config::reference_system(1.0);
        let m1 = perturbed_model(&sys, 0.5, 9, 4).unwrap();
        let m2 = perturbed_model(&sys, 0.5, 9, 4).unwrap();
        assert_eq!(m1, m2);
        assert!((m1.a() - sys.a()).amax() <= 0.5);
        assert!((m1.b() - sys.b()).amax() <= 0.5);
        assert_ne!(m1, perturbed_model(&sys, 0.5, 9, 5).unwrap());
    }
}
