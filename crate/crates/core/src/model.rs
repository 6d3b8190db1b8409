//! Plant, cost and receding-horizon configuration types.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, serde_rows};

/// A discrete-time linear plant `x' = A x + B u + w` with `w ~ N(0, sigma_w^2 I)`.
///
/// The same type holds both the true plant and any nominal (estimated) model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearSystem {
    #[serde(with = "serde_rows")]
    a: DMatrix<f64>,
    #[serde(with = "serde_rows")]
    b: DMatrix<f64>,
    sigma_w: f64,
    sigma_x: f64,
}

impl LinearSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, sigma_w: f64, sigma_x: f64) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || !a.is_square() {
            return Err(Error::Dimension(format!(
                "A must be square and non-empty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(Error::Dimension(format!(
                "B must be {n}xm with m >= 1, got {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        if !linalg::is_finite(&a) {
            return Err(Error::NonFinite("A"));
        }
        if !linalg::is_finite(&b) {
            return Err(Error::NonFinite("B"));
        }
        if !(sigma_w.is_finite() && sigma_w >= 0.0) || !(sigma_x.is_finite() && sigma_x >= 0.0) {
            return Err(Error::InvalidArgument(
                "noise scales must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            a,
            b,
            sigma_w,
            sigma_x,
        })
    }

    /// Noise-free model with the given matrices; handy for nominal models.
    pub fn deterministic(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        Self::new(a, b, 0.0, 0.0)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn sigma_w(&self) -> f64 {
        self.sigma_w
    }

    pub fn sigma_x(&self) -> f64 {
        self.sigma_x
    }

    pub fn with_noise(mut self, sigma_w: f64) -> Self {
        self.sigma_w = sigma_w.max(0.0);
        self
    }

    /// Same dimensions and noise, different matrices.
    pub fn with_matrices(&self, a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        self.check_shape(&a, &b)?;
        Self::new(a, b, self.sigma_w, self.sigma_x)
    }

    pub fn same_shape(&self, other: &LinearSystem) -> bool {
        self.n() == other.n() && self.m() == other.m()
    }

    fn check_shape(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
        if a.shape() != self.a.shape() || b.shape() != self.b.shape() {
            return Err(Error::Dimension("model shapes differ".into()));
        }
        Ok(())
    }

    /// `max(|A - A'|, |B - B'|)` in spectral norm.
    pub fn model_error(&self, other: &LinearSystem) -> Result<f64> {
        if !self.same_shape(other) {
            return Err(Error::Dimension("model shapes differ".into()));
        }
        Ok(linalg::spectral_norm(&(&self.a - &other.a))
            .max(linalg::spectral_norm(&(&self.b - &other.b))))
    }

    /// Noise-free one step `A x + B u`.
    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u
    }
}

/// Quadratic stage cost `x'Qx + u'Ru`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSpec {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    r_inv: DMatrix<f64>,
    q_min: f64,
    r_min: f64,
    r_max: f64,
}

impl CostSpec {
    /// Symmetrizes both weights; requires `R > 0` and `Q >= 0`.
    pub fn new(q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        if !q.is_square() || !r.is_square() || q.is_empty() || r.is_empty() {
            return Err(Error::Dimension("Q and R must be square".into()));
        }
        if !linalg::is_finite(&q) {
            return Err(Error::NonFinite("Q"));
        }
        if !linalg::is_finite(&r) {
            return Err(Error::NonFinite("R"));
        }
        let q = linalg::symmetrize(&q);
        let r = linalg::symmetrize(&r);
        if !linalg::is_psd(&q) {
            return Err(Error::NotPositiveSemidefinite("Q"));
        }
        let r_inv = r
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite("R"))?
            .inverse();
        let (q_min, _) = linalg::sym_eigen_range(&q);
        let (r_min, r_max) = linalg::sym_eigen_range(&r);
        if r_min <= 0.0 {
            return Err(Error::NotPositiveDefinite("R"));
        }
        Ok(Self {
            q,
            r,
            r_inv,
            q_min: q_min.max(0.0),
            r_min,
            r_max,
        })
    }

    pub fn identity(n: usize, m: usize) -> Self {
        Self::new(DMatrix::identity(n, n), DMatrix::identity(m, m))
            .expect("identity weights are valid")
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// Smallest eigenvalue of Q.
    pub fn q_min(&self) -> f64 {
        self.q_min
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn q_positive_definite(&self) -> bool {
        self.q_min > 0.0
    }

    /// `Q >= I` and `R >= I`, the strong weight assumption.
    pub fn strong_weights(&self) -> bool {
        self.q_min >= 1.0 - 1e-12 && self.r_min >= 1.0 - 1e-12
    }

    /// `B R^{-1} B'`.
    pub fn input_gramian(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        linalg::symmetrize(&(b * &self.r_inv * b.transpose()))
    }

    pub fn stage_cost(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        (x.transpose() * &self.q * x)[(0, 0)] + (u.transpose() * &self.r * u)[(0, 0)]
    }

    pub fn check_system(&self, sys: &LinearSystem) -> Result<()> {
        if self.q.nrows() != sys.n() || self.r.nrows() != sys.m() {
            return Err(Error::Dimension(format!(
                "cost is ({}, {}) but system is (n={}, m={})",
                self.q.nrows(),
                self.r.nrows(),
                sys.n(),
                sys.m()
            )));
        }
        Ok(())
    }

    /// Which standing assumptions hold for `sys` under this cost.
    pub fn assumptions(&self, sys: &LinearSystem) -> Assumptions {
        Assumptions {
            strong_weights: self.strong_weights() && sys.m() <= sys.n(),
            q_positive_definite: self.q_positive_definite(),
        }
    }
}

/// Flags recording which weight assumptions an instance satisfies.
///
/// Stabilizability and detectability are not checked here; the DARE solver
/// reports their failure as non-convergence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assumptions {
    /// `m <= n`, `Q >= I`, `R >= I`.
    pub strong_weights: bool,
    /// `Q > 0`, which the decay and Lipschitz results need.
    pub q_positive_definite: bool,
}

/// Horizon and terminal weight of the receding-horizon problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhcConfig {
    horizon: usize,
    #[serde(with = "serde_rows")]
    terminal: DMatrix<f64>,
}

impl RhcConfig {
    pub fn new(horizon: usize, terminal: DMatrix<f64>) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()));
        }
        if !terminal.is_square() {
            return Err(Error::Dimension("terminal weight must be square".into()));
        }
        let terminal = linalg::symmetrize(&terminal);
        if !linalg::is_psd(&terminal) {
            return Err(Error::NotPositiveSemidefinite("terminal weight"));
        }
        Ok(Self { horizon, terminal })
    }

    /// Zero terminal weight.
    pub fn zero_terminal(horizon: usize, n: usize) -> Result<Self> {
        Self::new(horizon, DMatrix::zeros(n, n))
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn terminal(&self) -> &DMatrix<f64> {
        &self.terminal
    }
}
