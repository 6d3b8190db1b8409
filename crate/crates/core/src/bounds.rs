//! Scalar performance bounds, decay rates and their preconditions.
//!
//! Every evaluator works on a [`BoundContext`], which bundles the modeling
//! error `eps_m`, the terminal error `eps_p` and the handful of system
//! constants the bounds depend on. Bounds with side conditions return a
//! [`BoundReport`] listing the conditions that failed; nothing is assumed
//! silently.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{Assumptions, CostSpec, LinearSystem};
use crate::riccati::OptimalSolution;

/// Tolerance on the horizon criterion below which the recommendation is a tie.
pub const CRITERION_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundContext {
    eps_m: f64,
    eps_p: f64,
    upsilon_base: f64,
    beta: f64,
    p_star_norm: f64,
    sigma_w: f64,
    m_dim: usize,
    r_min: f64,
    r_max: f64,
    q_min: f64,
    assumptions: Option<Assumptions>,
}

/// Raw inputs for [`BoundContext::new`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    pub eps_m: f64,
    pub eps_p: f64,
    /// Bound on `|A*|, |B*|, |P*|`; raised to `max(1, eps_m)` if smaller.
    pub upsilon: f64,
    pub beta: f64,
    pub p_star_norm: f64,
    pub sigma_w: f64,
    pub m_dim: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub q_min: f64,
}

fn nonneg(x: f64, name: &str) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be finite and nonnegative, got {x}")))
    }
}

fn positive(x: f64, name: &str) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be finite and positive, got {x}")))
    }
}

impl BoundContext {
    pub fn new(p: BoundParams) -> Result<Self> {
        nonneg(p.eps_m, "eps_m")?;
        nonneg(p.eps_p, "eps_p")?;
        nonneg(p.sigma_w, "sigma_w")?;
        positive(p.upsilon, "upsilon")?;
        positive(p.p_star_norm, "p_star_norm")?;
        positive(p.r_min, "r_min")?;
        positive(p.r_max, "r_max")?;
        positive(p.q_min, "q_min")?;
        if !(p.beta.is_finite() && p.beta >= 1.0) {
            return Err(Error::InvalidArgument(format!("beta must be at least 1, got {}", p.beta)));
        }
        if p.m_dim == 0 {
            return Err(Error::InvalidArgument("m must be positive".into()));
        }
        if p.r_min > p.r_max {
            return Err(Error::InvalidArgument("r_min exceeds r_max".into()));
        }
        Ok(Self {
            eps_m: p.eps_m,
            eps_p: p.eps_p,
            upsilon_base: p.upsilon,
            beta: p.beta,
            p_star_norm: p.p_star_norm,
            sigma_w: p.sigma_w,
            m_dim: p.m_dim,
            r_min: p.r_min,
            r_max: p.r_max,
            q_min: p.q_min,
            assumptions: None,
        })
    }

    /// Context for the true system, with `Upsilon = max(|A*|, |B*|, |P*|, 1, eps_m)`.
    pub fn from_matrices(
        sys: &LinearSystem,
        cost: &CostSpec,
        opt: &OptimalSolution,
        eps_m: f64,
        eps_p: f64,
    ) -> Result<Self> {
        let p_star = opt.p_star();
        let beta = beta_star(p_star, cost.q())?;
        let p_norm = linalg::spectral_norm(p_star);
        let upsilon = linalg::spectral_norm(sys.a())
            .max(linalg::spectral_norm(sys.b()))
            .max(p_norm);
        let mut ctx = Self::new(BoundParams {
            eps_m,
            eps_p,
            upsilon,
            beta,
            p_star_norm: p_norm,
            sigma_w: sys.sigma_w(),
            m_dim: sys.m(),
            r_min: cost.r_min(),
            r_max: cost.r_max(),
            q_min: cost.q_min(),
        })?;
        ctx.assumptions = Some(cost.assumptions(sys));
        Ok(ctx)
    }

    /// Same constants, different error levels.
    pub fn with_errors(&self, eps_m: f64, eps_p: f64) -> Result<Self> {
        nonneg(eps_m, "eps_m")?;
        nonneg(eps_p, "eps_p")?;
        Ok(Self {
            eps_m,
            eps_p,
            ..self.clone()
        })
    }

    pub fn eps_m(&self) -> f64 {
        self.eps_m
    }

    pub fn eps_p(&self) -> f64 {
        self.eps_p
    }

    /// `max(supplied, 1, eps_m)`.
    pub fn upsilon(&self) -> f64 {
        self.upsilon_base.max(1.0).max(self.eps_m)
    }

    /// Whether the supplied Upsilon had to be raised to `max(1, eps_m)`.
    pub fn upsilon_adjusted(&self) -> bool {
        self.upsilon() > self.upsilon_base
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn p_star_norm(&self) -> f64 {
        self.p_star_norm
    }

    pub fn sigma_w(&self) -> f64 {
        self.sigma_w
    }

    pub fn m_dim(&self) -> usize {
        self.m_dim
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn q_min(&self) -> f64 {
        self.q_min
    }

    pub fn assumptions(&self) -> Option<Assumptions> {
        self.assumptions
    }

    /// `1 - 1/beta`, the squared Riccati contraction factor.
    pub fn contraction(&self) -> f64 {
        1.0 - 1.0 / self.beta
    }

    /// `1 / (8 |P*|^2)`; `eps_m` must stay strictly below this.
    pub fn alpha_limit(&self) -> f64 {
        1.0 / (8.0 * self.p_star_norm.powi(2))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub value: f64,
    pub preconditions_met: bool,
    pub failed_conditions: Vec<&'static str>,
}

impl BoundReport {
    fn new(value: f64, failed: Vec<&'static str>) -> Self {
        Self {
            value,
            preconditions_met: failed.is_empty(),
            failed_conditions: failed,
        }
    }
}

fn assumption_failures(ctx: &BoundContext, failed: &mut Vec<&'static str>) {
    if let Some(a) = ctx.assumptions {
        if !a.strong_weights {
            failed.push("strong_weights");
        }
    }
}

fn check_horizon(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    Ok(())
}

/// `sigma_max(P*) / sigma_min(Q)`.
pub fn beta_star(p_star: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<f64> {
    if !p_star.is_square() || p_star.shape() != q.shape() {
        return Err(Error::Dimension("P* and Q must be square and equal in size".into()));
    }
    let (q_min, _) = linalg::sym_eigen_range(q);
    if !(q_min > 0.0) {
        return Err(Error::SingularQ);
    }
    Ok(linalg::spectral_norm(p_star) / q_min)
}

/// `beta (1 - 1/beta)^i * diff_norm`.
pub fn lipschitz_bound(ctx: &BoundContext, i: usize, diff_norm: f64) -> f64 {
    ctx.beta * ctx.contraction().powi(i as i32) * diff_norm
}

/// Gap bound for the exact-model controller with horizon `n`.
pub fn known_model_gap_bound(ctx: &BoundContext, n: usize) -> Result<BoundReport> {
    check_horizon(n)?;
    let up = ctx.upsilon();
    let p = ctx.p_star_norm;
    let decay = lipschitz_bound(ctx, n - 1, ctx.eps_p);
    let value = 32.0
        * ctx.m_dim as f64
        * ctx.sigma_w.powi(2)
        * up.powi(4)
        * (p.sqrt() + 1.0).powi(2)
        * p
        * (ctx.r_max + up.powi(3))
        * decay.powi(2);
    let mut failed = Vec::new();
    assumption_failures(ctx, &mut failed);
    if up < decay {
        failed.push("upsilon_dominates_terminal_error");
    }
    if decay > ctx.r_min / (40.0 * up.powi(4) * p.powf(1.5)) {
        failed.push("terminal_error_small");
    }
    Ok(BoundReport::new(value, failed))
}

/// `eps_m [1 + (eps_m + 2 Upsilon)^2 (beta eps_p + Upsilon)]`.
pub fn psi(ctx: &BoundContext) -> f64 {
    let (em, up) = (ctx.eps_m, ctx.upsilon());
    em * (1.0 + (em + 2.0 * up).powi(2) * (ctx.beta * ctx.eps_p + up))
}

/// Decay rate of the perturbed transition products along the true iterates.
pub fn gamma1(ctx: &BoundContext) -> f64 {
    ctx.beta.sqrt() * psi(ctx) + ctx.contraction().sqrt()
}

/// `(alpha, gamma2)` with `alpha = (1 - 8|P*|^2 eps_m)^{-1/2}`.
pub fn alpha_gamma2(ctx: &BoundContext) -> Result<(f64, f64)> {
    let limit = ctx.alpha_limit();
    if ctx.eps_m >= limit {
        return Err(Error::ModelErrorTooLarge {
            eps_m: ctx.eps_m,
            limit,
        });
    }
    let alpha = (1.0 - 8.0 * ctx.p_star_norm.powi(2) * ctx.eps_m).powf(-0.5);
    let gamma2 = (1.0 - 1.0 / (alpha * ctx.beta)).sqrt();
    Ok((alpha, gamma2))
}

/// `(eps_m^2 + 2 Upsilon eps_m) [Upsilon + (eps_m + Upsilon)^2 Upsilon^2]`.
///
/// This upper-bounds the norm of the mismatch term rather than equalling it,
/// so every bound built on it is conservative.
pub fn psi_tilde(ctx: &BoundContext) -> f64 {
    let (em, up) = (ctx.eps_m, ctx.upsilon());
    (em * em + 2.0 * up * em) * (up + (em + up).powi(2) * up * up)
}

/// `E^(i) = scale * [criterion * rate^i + plateau]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EhatDecomposition {
    pub alpha: f64,
    /// `gamma1 * gamma2`.
    pub rate: f64,
    /// `sqrt(alpha) * beta`.
    pub scale: f64,
    /// `psi_tilde / (1 - rate)`.
    pub plateau: f64,
    /// `eps_p - plateau`; its sign decides how the bound moves with the horizon.
    pub criterion: f64,
}

pub fn e_hat_decomposition(ctx: &BoundContext) -> Result<EhatDecomposition> {
    let (alpha, g2) = alpha_gamma2(ctx)?;
    let rate = gamma1(ctx) * g2;
    if rate >= 1.0 {
        return Err(Error::RateProductNotContractive { product: rate });
    }
    let plateau = psi_tilde(ctx) / (1.0 - rate);
    Ok(EhatDecomposition {
        alpha,
        rate,
        scale: alpha.sqrt() * ctx.beta,
        plateau,
        criterion: ctx.eps_p - plateau,
    })
}

fn e_hat_failures(ctx: &BoundContext) -> (Option<(f64, f64)>, Vec<&'static str>) {
    let mut failed = Vec::new();
    assumption_failures(ctx, &mut failed);
    match alpha_gamma2(ctx) {
        Err(_) => {
            failed.push("model_error_below_alpha_limit");
            (None, failed)
        }
        Ok((alpha, g2)) => {
            let rate = gamma1(ctx) * g2;
            if rate >= 1.0 {
                failed.push("rate_product_contractive");
                (None, failed)
            } else {
                (Some((alpha, rate)), failed)
            }
        }
    }
}

/// Bound on `|R^(i)_nominal(P) - P*|` for `|P - P*| <= eps_p`.
///
/// Infinite when `eps_m >= 1/(8|P*|^2)` or `gamma1 * gamma2 >= 1`.
pub fn e_hat(ctx: &BoundContext, i: usize) -> BoundReport {
    let (params, failed) = e_hat_failures(ctx);
    let value = match params {
        None => f64::INFINITY,
        Some((alpha, rate)) => {
            let ri = rate.powi(i as i32);
            alpha.sqrt() * ctx.beta * (ri * ctx.eps_p + psi_tilde(ctx) * (1.0 - ri) / (1.0 - rate))
        }
    };
    BoundReport::new(value, failed)
}

/// Gap bound for the nominal controller with horizon `n`.
pub fn mpc_gap_bound(ctx: &BoundContext, n: usize) -> Result<BoundReport> {
    check_horizon(n)?;
    let e = e_hat(ctx, n - 1);
    let mut failed = e.failed_conditions;
    let up = ctx.upsilon();
    let p = ctx.p_star_norm;
    let total = ctx.eps_m + e.value;
    if !(total <= 1.0 / (40.0 * up.powi(4) * p * p)) {
        failed.push("errors_within_stability_margin");
    }
    let value = if e.value.is_finite() {
        128.0
            * ctx.m_dim as f64
            * ctx.sigma_w.powi(2)
            * (ctx.r_max + up.powi(3))
            * up.powi(4)
            * p
            * p
            * total.powi(2)
    } else {
        f64::INFINITY
    };
    Ok(BoundReport::new(value, failed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HorizonRecommendation {
    IncreaseToInfinity,
    DecreaseToOne,
    Indifferent,
}

/// Which end of the horizon range minimizes the nominal gap bound.
pub fn horizon_recommendation(ctx: &BoundContext) -> Result<HorizonRecommendation> {
    let d = e_hat_decomposition(ctx)?;
    Ok(if d.criterion.abs() <= CRITERION_TIE_TOL {
        HorizonRecommendation::Indifferent
    } else if d.criterion > 0.0 {
        HorizonRecommendation::IncreaseToInfinity
    } else {
        HorizonRecommendation::DecreaseToOne
    })
}

/// `Upsilon^2 (sqrt|P*| + 1)(3 eps_m + 4 eps) / sigma_min(R)`, a bound on
/// `|K - K*|` for a gain computed from the nominal model and a matrix within
/// `eps` of `P*`. Valid when `Upsilon >= eps`.
pub fn gain_gap_bound(ctx: &BoundContext, eps: f64) -> f64 {
    ctx.upsilon().powi(2) * (ctx.p_star_norm.sqrt() + 1.0) * (3.0 * ctx.eps_m + 4.0 * eps)
        / ctx.r_min
}

/// Gap bound for the nominal gain computed from a matrix within `eps` of `P*`.
pub fn controller_gap_bound(ctx: &BoundContext, eps: f64) -> Result<BoundReport> {
    nonneg(eps, "eps")?;
    let up = ctx.upsilon();
    let p = ctx.p_star_norm;
    let total = ctx.eps_m + eps;
    let value = 32.0
        * ctx.m_dim as f64
        * ctx.sigma_w.powi(2)
        * (ctx.r_max + up.powi(3))
        * up.powi(4)
        * (p.sqrt() + 1.0).powi(2)
        * p
        * total.powi(2)
        / ctx.r_min.powi(2);
    let mut failed = Vec::new();
    assumption_failures(ctx, &mut failed);
    if up < eps {
        failed.push("upsilon_dominates_eps");
    }
    if 8.0 * up.powi(4) * total / ctx.r_min > 0.2 * p.powf(-1.5) {
        failed.push("errors_within_gain_margin");
    }
    Ok(BoundReport::new(value, failed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimplifiedBound {
    /// `sqrt(1 - 1/(sqrt(2) beta))`.
    pub gamma_bar: f64,
    /// `(gamma_bar^(N-1) + eps_m)^2`; the gap bound up to an unspecified constant.
    pub shape: f64,
}

pub fn gamma_bar(beta: f64) -> f64 {
    (1.0 - 1.0 / (beta * std::f64::consts::SQRT_2)).sqrt()
}

/// Zero-terminal gap shape for horizon `n`.
pub fn simplified_bound(ctx: &BoundContext, n: usize) -> Result<SimplifiedBound> {
    check_horizon(n)?;
    let gb = gamma_bar(ctx.beta);
    Ok(SimplifiedBound {
        gamma_bar: gb,
        shape: (gb.powi(n as i32 - 1) + ctx.eps_m).powi(2),
    })
}
