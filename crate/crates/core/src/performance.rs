//! Closed-loop performance of a static gain on the true plant.
//!
//! For `u = -K x` the stationary state covariance solves
//! `Sigma = L Sigma L' + sigma_w^2 I` with `L = A - B K`, and the average
//! infinite-horizon cost is `tr((Q + K'RK) Sigma)`. The Monte-Carlo estimator
//! is kept as an independent check of that closed form.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, serde_rows};
use crate::model::{CostSpec, LinearSystem};
use crate::riccati::OptimalSolution;
use crate::rng;

/// Closed loops with spectral radius at or above this are treated as unstable.
pub const STABILITY_MARGIN: f64 = 1.0 - 1e-9;
pub const LYAPUNOV_TOL: f64 = 1e-12;
const LYAPUNOV_MAX_DOUBLINGS: usize = 200;
/// State norm treated as divergence in simulations.
pub const DIVERGENCE_NORM: f64 = 1e100;

pub use crate::linalg::spectral_radius;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerformanceReport {
    #[serde(with = "serde_rows")]
    pub k: DMatrix<f64>,
    pub stable: bool,
    pub spectral_radius: f64,
    #[serde(serialize_with = "linalg::serde_opt_rows::serialize")]
    pub sigma: Option<DMatrix<f64>>,
    pub cost: Option<f64>,
    /// `J_K - J*`.
    pub gap: Option<f64>,
}


fn check_gain(sys: &LinearSystem, k: &DMatrix<f64>) -> Result<()> {
    if k.shape() != (sys.m(), sys.n()) {
        return Err(Error::Dimension(format!(
            "gain is {}x{}, expected {}x{}",
            k.nrows(),
            k.ncols(),
            sys.m(),
            sys.n()
        )));
    }
    if !linalg::is_finite(k) {
        return Err(Error::NonFinite("K"));
    }
    Ok(())
}

/// `A - B K` together with its spectral radius.
pub fn closed_loop_matrix(sys: &LinearSystem, k: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    check_gain(sys, k)?;
    let l = sys.a() - sys.b() * k;
    let rho = spectral_radius(&l)?;
    Ok((l, rho))
}

pub fn is_stabilizing(sys: &LinearSystem, k: &DMatrix<f64>) -> Result<bool> {
    Ok(closed_loop_matrix(sys, k)?.1 < STABILITY_MARGIN)
}

/// Solves `X = L X L' + W` for a Schur-stable `L` by doubling the partial sums
/// `X_{k+1} = X_k + L^{2^k} X_k (L^{2^k})'`.
pub fn lyapunov_series(l: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let rho = spectral_radius(l)?;
    if rho >= STABILITY_MARGIN {
        return Err(Error::Unstable { spectral_radius: rho });
    }
    let mut x = w.clone();
    let mut power = l.clone();
    let scale = |x: &DMatrix<f64>| linalg::spectral_norm(x).max(f64::MIN_POSITIVE);
    let residual =
        |x: &DMatrix<f64>| linalg::spectral_norm(&(x - l * x * l.transpose() - w)) / scale(x);
    for _ in 0..LYAPUNOV_MAX_DOUBLINGS {
        let add = &power * &x * power.transpose();
        x += &add;
        x = linalg::symmetrize(&x);
        power = &power * &power;
        if !linalg::is_finite(&x) {
            break;
        }
        if linalg::spectral_norm(&add) <= f64::EPSILON * scale(&x) && residual(&x) <= LYAPUNOV_TOL {
            return Ok(x);
        }
        if power.amax() == 0.0 {
            return Ok(x);
        }
    }
    let r = residual(&x);
    if r <= LYAPUNOV_TOL {
        Ok(x)
    } else {
        Err(Error::NonConvergence {
            iterations: LYAPUNOV_MAX_DOUBLINGS,
            residual: r,
        })
    }
}

/// Stationary covariance `Sigma_K` of `x' = (A - BK) x + w`.
pub fn solve_lyapunov(sys: &LinearSystem, k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (l, rho) = closed_loop_matrix(sys, k)?;
    if rho >= STABILITY_MARGIN {
        return Err(Error::Unstable { spectral_radius: rho });
    }
    let n = sys.n();
    lyapunov_series(&l, &(DMatrix::identity(n, n) * sys.sigma_w().powi(2)))
}

/// `tr((Q + K'RK) Sigma_K)`.
pub fn infinite_horizon_cost(sys: &LinearSystem, cost: &CostSpec, k: &DMatrix<f64>) -> Result<f64> {
    cost.check_system(sys)?;
    let sigma = solve_lyapunov(sys, k)?;
    Ok(cost_from_sigma(cost, k, &sigma))
}

fn cost_from_sigma(cost: &CostSpec, k: &DMatrix<f64>, sigma: &DMatrix<f64>) -> f64 {
    ((cost.q() + k.transpose() * cost.r() * k) * sigma).trace()
}

/// `J_K - J*` with `K*` from the true system's DARE.
pub fn performance_gap(sys: &LinearSystem, cost: &CostSpec, k: &DMatrix<f64>) -> Result<f64> {
    let opt = OptimalSolution::solve(sys, cost)?;
    performance_gap_with(sys, cost, k, &opt)
}

/// Like [`performance_gap`] with a precomputed optimum.
pub fn performance_gap_with(
    sys: &LinearSystem,
    cost: &CostSpec,
    k: &DMatrix<f64>,
    opt: &OptimalSolution,
) -> Result<f64> {
    let j = infinite_horizon_cost(sys, cost, k)?;
    let j_star = infinite_horizon_cost(sys, cost, &opt.k_star)?;
    Ok(j - j_star)
}

/// Full report; an unstable gain is a valid outcome here, not an error.
pub fn evaluate(
    sys: &LinearSystem,
    cost: &CostSpec,
    k: &DMatrix<f64>,
    opt: &OptimalSolution,
) -> Result<PerformanceReport> {
    cost.check_system(sys)?;
    let (_, rho) = closed_loop_matrix(sys, k)?;
    if rho >= STABILITY_MARGIN {
        return Ok(PerformanceReport {
            k: k.clone(),
            stable: false,
            spectral_radius: rho,
            sigma: None,
            cost: None,
            gap: None,
        });
    }
    let sigma = solve_lyapunov(sys, k)?;
    let j = cost_from_sigma(cost, k, &sigma);
    let j_star = infinite_horizon_cost(sys, cost, &opt.k_star)?;
    Ok(PerformanceReport {
        k: k.clone(),
        stable: true,
        spectral_radius: rho,
        sigma: Some(sigma),
        cost: Some(j),
        gap: Some(j - j_star),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalCost {
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
}

/// Monte-Carlo average of `(1/T) sum_t l(x_t, u_t)` under `u = -Kx`, `x_0 = 0`.
///
/// Trial `i` draws from the stream keyed by `(seed, i)`.
pub fn empirical_cost(
    sys: &LinearSystem,
    cost: &CostSpec,
    k: &DMatrix<f64>,
    horizon: usize,
    trials: usize,
    seed: u64,
) -> Result<EmpiricalCost> {
    cost.check_system(sys)?;
    check_gain(sys, k)?;
    if horizon == 0 || trials == 0 {
        return Err(Error::InvalidArgument("T and trials must be at least 1".into()));
    }
    let averages = (0..trials)
        .into_par_iter()
        .map(|i| simulate_average(sys, cost, k, horizon, seed, i as u64))
        .collect::<Result<Vec<_>>>()?;
    let mean = averages.iter().sum::<f64>() / trials as f64;
    let stderr = if trials > 1 {
        let var = averages.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        (var / trials as f64).sqrt()
    } else {
        0.0
    };
    Ok(EmpiricalCost {
        mean,
        stderr,
        trials,
    })
}

fn simulate_average(
    sys: &LinearSystem,
    cost: &CostSpec,
    k: &DMatrix<f64>,
    horizon: usize,
    seed: u64,
    trial: u64,
) -> Result<f64> {
    let mut rng = rng::stream(seed, &[trial]);
    let n = sys.n();
    let sigma_w = sys.sigma_w();
    let mut x = DVector::zeros(n);
    let mut total = 0.0;
    for t in 0..horizon {
        let u = -(k * &x);
        total += cost.stage_cost(&x, &u);
        let w = DVector::from_fn(n, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sigma_w * z
        });
        x = sys.step(&x, &u) + w;
        if !(x.norm() < DIVERGENCE_NORM) {
            return Err(Error::Diverged {
                step: t as u64 + 1,
                epoch: 0,
            });
        }
    }
    Ok(total / horizon as f64)
}
