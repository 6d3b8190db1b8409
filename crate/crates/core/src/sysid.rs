//! Rollout generation and least-squares model estimation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, serde_rows};
use crate::model::LinearSystem;
use crate::rng;

/// Regressors with a smaller singular value are treated as rank deficient.
pub const RANK_TOL: f64 = 1e-10;

/// `T` independent rollouts from `x_0 = 0`; `states[l]` has `t_h + 1` entries
/// and `inputs[l]` has `t_h`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RolloutData {
    pub states: Vec<Vec<Vec<f64>>>,
    pub inputs: Vec<Vec<Vec<f64>>>,
    pub num_rollouts: usize,
    pub t_h: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateResult {
    #[serde(with = "serde_rows")]
    pub a_hat: DMatrix<f64>,
    #[serde(with = "serde_rows")]
    pub b_hat: DMatrix<f64>,
    /// `max(|A^ - A*|, |B^ - B*|)` when the truth was supplied.
    pub eps_measured: Option<f64>,
    pub regressor_min_singular: f64,
    /// Sum of squared one-step prediction errors on the fitting data.
    pub residual: f64,
}

impl EstimateResult {
    /// The estimate as a model carrying `template`'s noise levels.
    pub fn to_system(&self, template: &LinearSystem) -> Result<LinearSystem> {
        template.with_matrices(self.a_hat.clone(), self.b_hat.clone())
    }
}

pub(crate) fn gaussian_vector<R: Rng>(rng: &mut R, dim: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    })
}

/// Rollout `l` draws inputs and noise from the stream keyed by `(seed, l)`.
pub fn generate_rollouts(
    sys: &LinearSystem,
    sigma_u: f64,
    num_rollouts: usize,
    t_h: usize,
    seed: u64,
) -> Result<RolloutData> {
    if num_rollouts == 0 || t_h == 0 {
        return Err(Error::InvalidArgument("T and t_h must be at least 1".into()));
    }
    if !(sigma_u.is_finite() && sigma_u >= 0.0) {
        return Err(Error::InvalidArgument("sigma_u must be finite and nonnegative".into()));
    }
    let (n, m) = (sys.n(), sys.m());
    let (states, inputs): (Vec<_>, Vec<_>) = (0..num_rollouts)
        .into_par_iter()
        .map(|l| {
            let mut rng = rng::stream(seed, &[l as u64]);
            let mut x = DVector::zeros(n);
            let mut xs = vec![linalg::to_vec(&x)];
            let mut us = Vec::with_capacity(t_h);
            for _ in 0..t_h {
                let u = gaussian_vector(&mut rng, m, sigma_u);
                let w = gaussian_vector(&mut rng, n, sys.sigma_w());
                x = sys.step(&x, &u) + w;
                us.push(linalg::to_vec(&u));
                xs.push(linalg::to_vec(&x));
            }
            (xs, us)
        })
        .unzip();
    Ok(RolloutData {
        states,
        inputs,
        num_rollouts,
        t_h,
        seed,
    })
}

/// Least-squares fit of `x_next = A x + B u` over the given transitions.
///
/// Returns `(A, B, min singular value of [X U], residual)`.
pub fn fit_transitions(
    xs: &[DVector<f64>],
    us: &[DVector<f64>],
    next: &[DVector<f64>],
    rank_tol: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>, f64, f64)> {
    let rows = xs.len();
    if rows == 0 || us.len() != rows || next.len() != rows {
        return Err(Error::Dimension("transition arrays differ in length".into()));
    }
    let n = xs[0].len();
    let m = us[0].len();
    if rows < n + m {
        return Err(Error::RankDeficient { min_singular: 0.0 });
    }
    let z = DMatrix::from_fn(rows, n + m, |r, c| if c < n { xs[r][c] } else { us[r][c - n] });
    let y = DMatrix::from_fn(rows, n, |r, c| next[r][c]);
    let svd = z.clone().svd(true, true);
    let min_sv = svd.singular_values.min();
    if !(min_sv >= rank_tol) {
        return Err(Error::RankDeficient { min_singular: min_sv });
    }
    let theta_t = svd
        .solve(&y, 0.0)
        .map_err(|e| Error::Numerical(format!("least squares: {e}")))?;
    let residual = (&z * &theta_t - &y).norm_squared();
    let theta = theta_t.transpose();
    let a = theta.columns(0, n).into_owned();
    let b = theta.columns(n, m).into_owned();
    Ok((a, b, min_sv, residual))
}

fn check_rollouts(data: &RolloutData) -> Result<(usize, usize)> {
    let n = data
        .states
        .first()
        .and_then(|s| s.first())
        .map(Vec::len)
        .ok_or_else(|| Error::Dimension("empty rollout data".into()))?;
    let m = data
        .inputs
        .first()
        .and_then(|s| s.first())
        .map(Vec::len)
        .ok_or_else(|| Error::Dimension("empty rollout data".into()))?;
    let ok = data.states.len() == data.num_rollouts
        && data.inputs.len() == data.num_rollouts
        && data.states.iter().all(|s| s.len() == data.t_h + 1 && s.iter().all(|x| x.len() == n))
        && data.inputs.iter().all(|s| s.len() == data.t_h && s.iter().all(|u| u.len() == m));
    if !ok {
        return Err(Error::Dimension("inconsistent rollout data".into()));
    }
    Ok((n, m))
}

/// Fits `(A, B)` from the final transition of each rollout only.
pub fn ls_estimate(data: &RolloutData, truth: Option<&LinearSystem>) -> Result<EstimateResult> {
    check_rollouts(data)?;
    let t = data.t_h;
    let xs: Vec<_> = data.states.iter().map(|s| DVector::from_vec(s[t - 1].clone())).collect();
    let us: Vec<_> = data.inputs.iter().map(|s| DVector::from_vec(s[t - 1].clone())).collect();
    let next: Vec<_> = data.states.iter().map(|s| DVector::from_vec(s[t].clone())).collect();
    estimate_from(&xs, &us, &next, truth)
}

/// Fits `(A, B)` from every transition of a single trajectory.
pub fn ls_estimate_trajectory(
    states: &[DVector<f64>],
    inputs: &[DVector<f64>],
    truth: Option<&LinearSystem>,
) -> Result<EstimateResult> {
    if states.len() != inputs.len() + 1 {
        return Err(Error::Dimension("need one more state than inputs".into()));
    }
    estimate_from(&states[..inputs.len()], inputs, &states[1..], truth)
}

fn estimate_from(
    xs: &[DVector<f64>],
    us: &[DVector<f64>],
    next: &[DVector<f64>],
    truth: Option<&LinearSystem>,
) -> Result<EstimateResult> {
    let (a_hat, b_hat, min_sv, residual) = fit_transitions(xs, us, next, RANK_TOL)?;
    let eps_measured = match truth {
        Some(sys) => {
            if sys.a().shape() != a_hat.shape() || sys.b().shape() != b_hat.shape() {
                return Err(Error::Dimension("truth does not match the data".into()));
            }
            Some(
                linalg::spectral_norm(&(&a_hat - sys.a()))
                    .max(linalg::spectral_norm(&(&b_hat - sys.b()))),
            )
        }
        None => None,
    };
    Ok(EstimateResult {
        a_hat,
        b_hat,
        eps_measured,
        regressor_min_singular: min_sv,
        residual,
    })
}
