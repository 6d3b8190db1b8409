//! Single-instance commands: DARE solve, gain synthesis, evaluation, bounds.
//!
//! Their CSV form is a long table `quantity,row,col,value`; scalars leave
//! `row` and `col` empty.

use nalgebra::DMatrix;
use serde::Serialize;

use super::config::{self, BoundParams, EvaluateParams, ExperimentConfig, Params, SynthesizeParams};
use super::emit::{fmt_f64, fmt_opt, Report};
use super::HarnessError;
use crate::bounds::{self, BoundContext, EhatDecomposition, HorizonRecommendation};
use crate::linalg::{self, serde_rows};
use crate::model::{Assumptions, CostSpec, LinearSystem, RhcConfig};
use crate::performance::{self, EmpiricalCost, PerformanceReport};
use crate::riccati::{self, OptimalSolution};

#[derive(Default)]
struct LongTable(Vec<Vec<String>>);

impl LongTable {
    fn scalar(&mut self, name: &str, v: f64) -> &mut Self {
        self.0.push(vec![name.into(), String::new(), String::new(), fmt_f64(v)]);
        self
    }

    fn opt(&mut self, name: &str, v: Option<f64>) -> &mut Self {
        self.0.push(vec![name.into(), String::new(), String::new(), fmt_opt(v)]);
        self
    }

    fn text(&mut self, name: &str, v: impl ToString) -> &mut Self {
        self.0.push(vec![name.into(), String::new(), String::new(), v.to_string()]);
        self
    }

    fn matrix(&mut self, name: &str, m: &DMatrix<f64>) -> &mut Self {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                self.0.push(vec![name.into(), i.to_string(), j.to_string(), fmt_f64(m[(i, j)])]);
            }
        }
        self
    }
}

const LONG_HEADER: [&str; 4] = ["quantity", "row", "col", "value"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DareResult {
    pub solution: OptimalSolution,
    pub closed_loop_spectral_radius: f64,
    /// Undefined when `Q` is singular.
    pub beta_star: Option<f64>,
    pub gamma_bar: Option<f64>,
}

impl Report for DareResult {
    fn csv_header(&self) -> Vec<&'static str> {
        LONG_HEADER.to_vec()
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        let s = &self.solution;
        let mut t = LongTable::default();
        t.matrix("p_star", s.p_star())
            .matrix("k_star", &s.k_star)
            .matrix("l_star", &s.l_star)
            .scalar("j_star", s.j_star)
            .text("iterations", s.riccati.iterations)
            .scalar("residual", s.riccati.residual)
            .scalar("closed_loop_spectral_radius", self.closed_loop_spectral_radius)
            .opt("beta_star", self.beta_star)
            .opt("gamma_bar", self.gamma_bar);
        t.0
    }
}

pub fn dare(sys: &LinearSystem, cost: &CostSpec, tol: f64, max_iter: usize) -> Result<DareResult, HarnessError> {
    let solution = OptimalSolution::solve_with(sys, cost, tol, max_iter)?;
    let rho = linalg::spectral_radius(&solution.l_star)?;
    let beta = bounds::beta_star(solution.p_star(), cost.q()).ok();
    Ok(DareResult {
        closed_loop_spectral_radius: rho,
        beta_star: beta,
        gamma_bar: beta.map(bounds::gamma_bar),
        solution,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthesizeResult {
    pub horizon: usize,
    #[serde(with = "serde_rows")]
    pub terminal: DMatrix<f64>,
    /// `max(|A - A^|, |B - B^|)` between the true and nominal models.
    pub eps_m: f64,
    #[serde(with = "serde_rows")]
    pub gain: DMatrix<f64>,
    /// Spectral radius of the true closed loop `A - B K`.
    pub spectral_radius: f64,
    pub stabilizing: bool,
}

impl Report for SynthesizeResult {
    fn csv_header(&self) -> Vec<&'static str> {
        LONG_HEADER.to_vec()
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        let mut t = LongTable::default();
        t.text("horizon", self.horizon)
            .scalar("eps_m", self.eps_m)
            .matrix("gain", &self.gain)
            .scalar("spectral_radius", self.spectral_radius)
            .text("stabilizing", self.stabilizing);
        t.0
    }
}

fn nominal_and_terminal(
    cfg: &ExperimentConfig,
    nominal: Option<&config::ModelSpec>,
    terminal: Option<&Vec<Vec<f64>>>,
) -> Result<(LinearSystem, DMatrix<f64>), HarnessError> {
    let n = cfg.system.n();
    let nominal = match nominal {
        Some(m) => config::nominal_system(m, &cfg.system, "params.nominal")?,
        None => cfg.system.clone(),
    };
    let terminal = match terminal {
        Some(t) => config::square_matrix(t, n, "params.terminal")?,
        None => DMatrix::zeros(n, n),
    };
    Ok((nominal, terminal))
}

pub fn synthesize(cfg: &ExperimentConfig, p: &SynthesizeParams) -> Result<SynthesizeResult, HarnessError> {
    let (nominal, terminal) = nominal_and_terminal(cfg, p.nominal.as_ref(), p.terminal.as_ref())?;
    let rhc = RhcConfig::new(p.horizon, terminal.clone())
        .map_err(|e| HarnessError::Config(format!("params.terminal: {e}")))?;
    let gain = riccati::mpc_gain(&nominal, &cfg.cost, &rhc)?;
    let (_, rho) = performance::closed_loop_matrix(&cfg.system, &gain)?;
    Ok(SynthesizeResult {
        horizon: p.horizon,
        terminal,
        eps_m: cfg.system.model_error(&nominal)?,
        gain,
        spectral_radius: rho,
        stabilizing: rho < performance::STABILITY_MARGIN,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluateResult {
    pub j_star: f64,
    pub report: PerformanceReport,
    pub empirical: Option<EmpiricalCost>,
}

impl Report for EvaluateResult {
    fn csv_header(&self) -> Vec<&'static str> {
        LONG_HEADER.to_vec()
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        let r = &self.report;
        let mut t = LongTable::default();
        t.matrix("gain", &r.k)
            .text("stable", r.stable)
            .scalar("spectral_radius", r.spectral_radius)
            .opt("cost", r.cost)
            .scalar("j_star", self.j_star)
            .opt("gap", r.gap);
        if let Some(s) = &r.sigma {
            t.matrix("sigma", s);
        }
        if let Some(e) = &self.empirical {
            t.scalar("empirical_mean", e.mean)
                .scalar("empirical_stderr", e.stderr)
                .text("empirical_trials", e.trials);
        }
        t.0
    }
}

pub fn evaluate(cfg: &ExperimentConfig, p: &EvaluateParams) -> Result<EvaluateResult, HarnessError> {
    let opt = OptimalSolution::solve(&cfg.system, &cfg.cost)?;
    let gain = match &p.gain {
        Some(rows) => config::matrix(rows, "params.gain")?,
        None => {
            let s = synthesize(
                cfg,
                &SynthesizeParams {
                    horizon: p.horizon.unwrap_or(SynthesizeParams::default().horizon),
                    terminal: p.terminal.clone(),
                    nominal: p.nominal.clone(),
                },
            )?;
            s.gain
        }
    };
    let report = performance::evaluate(&cfg.system, &cfg.cost, &gain, &opt)?;
    let empirical = match (&p.empirical, report.stable) {
        (Some(e), true) => Some(performance::empirical_cost(
            &cfg.system,
            &cfg.cost,
            &gain,
            e.steps,
            e.trials,
            cfg.seed,
        )?),
        _ => None,
    };
    Ok(EvaluateResult {
        j_star: opt.j_star,
        report,
        empirical,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    #[serde(rename = "N")]
    pub horizon: usize,
    /// Bound on `|R^(N-1)(P) - P*|` for the nominal iterates.
    pub e_hat: f64,
    pub mpc_gap_bound: f64,
    pub preconditions_met: bool,
    pub failed_conditions: Vec<&'static str>,
    /// Exact-model bound; only reported when `eps_m = 0`.
    pub known_model_gap_bound: Option<f64>,
    pub simplified_shape: f64,
    /// Actual gap of the nominal controller, when the nominal model and
    /// terminal weight are known.
    pub measured_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundResult {
    pub context: BoundContext,
    pub assumptions: Assumptions,
    pub upsilon: f64,
    pub psi: f64,
    pub gamma1: f64,
    /// Missing when `eps_m` is at or above the admissible limit.
    pub alpha: Option<f64>,
    pub gamma2: Option<f64>,
    pub psi_tilde: f64,
    pub decomposition: Option<EhatDecomposition>,
    pub recommendation: Option<HorizonRecommendation>,
    pub gamma_bar: f64,
    pub rows: Vec<BoundRow>,
}

impl Report for BoundResult {
    fn csv_header(&self) -> Vec<&'static str> {
        vec![
            "N",
            "e_hat",
            "mpc_gap_bound",
            "preconditions_met",
            "failed_conditions",
            "known_model_gap_bound",
            "simplified_shape",
            "measured_gap",
        ]
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    r.horizon.to_string(),
                    fmt_f64(r.e_hat),
                    fmt_f64(r.mpc_gap_bound),
                    r.preconditions_met.to_string(),
                    r.failed_conditions.join(";"),
                    fmt_opt(r.known_model_gap_bound),
                    fmt_f64(r.simplified_shape),
                    fmt_opt(r.measured_gap),
                ]
            })
            .collect()
    }
}

pub fn bound(cfg: &ExperimentConfig, p: &BoundParams) -> Result<BoundResult, HarnessError> {
    let sys = &cfg.system;
    let cost = &cfg.cost;
    let opt = OptimalSolution::solve(sys, cost)?;
    let nominal = match &p.nominal {
        Some(m) => Some(config::nominal_system(m, sys, "params.nominal")?),
        None if p.eps_m.is_none() => Some(sys.clone()),
        None => None,
    };
    let terminal = match &p.terminal {
        Some(t) => Some(config::square_matrix(t, sys.n(), "params.terminal")?),
        None if p.eps_p.is_none() => Some(DMatrix::zeros(sys.n(), sys.n())),
        None => None,
    };
    let eps_m = match (&nominal, p.eps_m) {
        (_, Some(e)) => e,
        (Some(m), None) => sys.model_error(m)?,
        (None, None) => 0.0,
    };
    let eps_p = match (&terminal, p.eps_p) {
        (_, Some(e)) => e,
        (Some(t), None) => linalg::spectral_norm(&(t - opt.p_star())),
        (None, None) => linalg::spectral_norm(opt.p_star()),
    };
    let ctx = BoundContext::from_matrices(sys, cost, &opt, eps_m, eps_p).map_err(|e| match e {
        crate::Error::SingularQ => HarnessError::Config(format!("cost.q: {e}")),
        e => HarnessError::Numerical(e),
    })?;
    let ag = bounds::alpha_gamma2(&ctx).ok();

    let mut rows = Vec::with_capacity(p.horizons.len());
    for &n in &p.horizons {
        let g = bounds::mpc_gap_bound(&ctx, n)?;
        let measured_gap = match (&nominal, &terminal) {
            (Some(m), Some(t)) => {
                let k = riccati::mpc_gain(m, cost, &RhcConfig::new(n, t.clone())?)?;
                performance::evaluate(sys, cost, &k, &opt)?.gap
            }
            _ => None,
        };
        rows.push(BoundRow {
            horizon: n,
            e_hat: bounds::e_hat(&ctx, n - 1).value,
            mpc_gap_bound: g.value,
            preconditions_met: g.preconditions_met,
            failed_conditions: g.failed_conditions,
            known_model_gap_bound: if eps_m == 0.0 {
                Some(bounds::known_model_gap_bound(&ctx, n)?.value)
            } else {
                None
            },
            simplified_shape: bounds::simplified_bound(&ctx, n)?.shape,
            measured_gap,
        });
    }

    Ok(BoundResult {
        assumptions: cost.assumptions(sys),
        upsilon: ctx.upsilon(),
        psi: bounds::psi(&ctx),
        gamma1: bounds::gamma1(&ctx),
        alpha: ag.map(|(a, _)| a),
        gamma2: ag.map(|(_, g)| g),
        psi_tilde: bounds::psi_tilde(&ctx),
        decomposition: bounds::e_hat_decomposition(&ctx).ok(),
        recommendation: bounds::horizon_recommendation(&ctx).ok(),
        gamma_bar: bounds::gamma_bar(ctx.beta()),
        context: ctx,
        rows,
    })
}

pub fn run_dare(cfg: &ExperimentConfig) -> Result<DareResult, HarnessError> {
    let Params::Dare(p) = &cfg.params else {
        return Err(HarnessError::Config("kind: expected dare".into()));
    };
    dare(&cfg.system, &cfg.cost, p.tol, p.max_iter)
}

pub fn run_synthesize(cfg: &ExperimentConfig) -> Result<SynthesizeResult, HarnessError> {
    let Params::Synthesize(p) = &cfg.params else {
        return Err(HarnessError::Config("kind: expected synthesize".into()));
    };
    synthesize(cfg, p)
}

pub fn run_evaluate(cfg: &ExperimentConfig) -> Result<EvaluateResult, HarnessError> {
    let Params::Evaluate(p) = &cfg.params else {
        return Err(HarnessError::Config("kind: expected evaluate".into()));
    };
    evaluate(cfg, p)
}

pub fn run_bound(cfg: &ExperimentConfig) -> Result<BoundResult, HarnessError> {
    let Params::Bound(p) = &cfg.params else {
        return Err(HarnessError::Config("kind: expected bound".into()));
    };
    bound(cfg, p)
}
