//! Riccati maps, iterations, gains and state-transition products.
//!
//! Conventions: for a model `(A, B)` and cost `(Q, R)`, with `S = B R^{-1} B'`,
//!
//! * `riccati_map(P)  = A' P (I + S P)^{-1} A + Q`
//! * `gain(F)         = (R + B' F B)^{-1} B' F A`
//! * `closed_loop(P)  = (I + S P)^{-1} A = A - B gain(P)`
//!
//! `phi(P, j, i)` is the product `L(R^j(P)) ... L(R^{i-1}(P))` of closed-loop
//! matrices along the Riccati iterates, and `phi_bar` is its counterpart for a
//! nominal model driven along the true model's iterates. Everything is a pure
//! function; symmetric outputs are symmetrized before they are returned.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, serde_rows};
use crate::model::{Assumptions, CostSpec, LinearSystem, RhcConfig};

pub const DARE_TOL: f64 = 1e-12;
pub const DARE_MAX_ITER: usize = 100_000;

/// Fixed point of the Riccati map together with solver diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiccatiSolution {
    #[serde(with = "serde_rows")]
    pub p: DMatrix<f64>,
    pub iterations: usize,
    /// `|P - R(P)|` for the returned `P`.
    pub residual: f64,
}

/// `(P*, K*, L*, J*)` for the true system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalSolution {
    pub riccati: RiccatiSolution,
    #[serde(with = "serde_rows")]
    pub k_star: DMatrix<f64>,
    #[serde(with = "serde_rows")]
    pub l_star: DMatrix<f64>,
    /// `sigma_w^2 tr(P*)`.
    pub j_star: f64,
    pub assumptions: Assumptions,
}

impl OptimalSolution {
    pub fn solve(sys: &LinearSystem, cost: &CostSpec) -> Result<Self> {
        Self::solve_with(sys, cost, DARE_TOL, DARE_MAX_ITER)
    }

    pub fn solve_with(
        sys: &LinearSystem,
        cost: &CostSpec,
        tol: f64,
        max_iter: usize,
    ) -> Result<Self> {
        let riccati = solve_dare(sys, cost, tol, max_iter)?;
        let k_star = gain(sys, cost, &riccati.p)?;
        let l_star = sys.a() - sys.b() * &k_star;
        let j_star = sys.sigma_w().powi(2) * riccati.p.trace();
        Ok(Self {
            riccati,
            k_star,
            l_star,
            j_star,
            assumptions: cost.assumptions(sys),
        })
    }

    pub fn p_star(&self) -> &DMatrix<f64> {
        &self.riccati.p
    }
}

fn check_square(sys: &LinearSystem, p: &DMatrix<f64>, what: &'static str) -> Result<()> {
    let n = sys.n();
    if p.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "{what} is {}x{}, expected {n}x{n}",
            p.nrows(),
            p.ncols()
        )));
    }
    if !linalg::is_finite(p) {
        return Err(Error::NonFinite(what));
    }
    Ok(())
}

fn check_psd_arg(sys: &LinearSystem, cost: &CostSpec, p: &DMatrix<f64>) -> Result<()> {
    cost.check_system(sys)?;
    check_square(sys, p, "P")?;
    if !linalg::is_psd(p) {
        return Err(Error::NotPositiveSemidefinite("P"));
    }
    Ok(())
}

/// `(I + S P)^{-1} A` for a precomputed `S`.
fn closed_loop_with(s: &DMatrix<f64>, p: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    linalg::solve(&(DMatrix::identity(n, n) + s * p), a, "closed loop (I + S P)")
}

fn map_with(
    a: &DMatrix<f64>,
    s: &DMatrix<f64>,
    q: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let l = closed_loop_with(s, p, a)?;
    Ok(linalg::symmetrize(&(a.transpose() * p * l + q)))
}

/// `R^(0..=count)(P)` for one model; element `k` is the k-fold map.
fn iterates_with(
    a: &DMatrix<f64>,
    s: &DMatrix<f64>,
    q: &DMatrix<f64>,
    p: &DMatrix<f64>,
    count: usize,
) -> Result<Vec<DMatrix<f64>>> {
    let mut out = Vec::with_capacity(count + 1);
    out.push(p.clone());
    for k in 0..count {
        let next = map_with(a, s, q, &out[k])?;
        out.push(next);
    }
    Ok(out)
}

/// One application of the Riccati map.
pub fn riccati_map(sys: &LinearSystem, cost: &CostSpec, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_psd_arg(sys, cost, p)?;
    let s = cost.input_gramian(sys.b());
    map_with(sys.a(), &s, cost.q(), p)
}

/// `i`-fold composition of the Riccati map; `i = 0` returns `P`.
pub fn riccati_iterate(
    sys: &LinearSystem,
    cost: &CostSpec,
    p: &DMatrix<f64>,
    i: usize,
) -> Result<DMatrix<f64>> {
    check_psd_arg(sys, cost, p)?;
    let s = cost.input_gramian(sys.b());
    let mut x = p.clone();
    for _ in 0..i {
        x = map_with(sys.a(), &s, cost.q(), &x)?;
    }
    Ok(x)
}

/// All iterates `R^(0)(P), ..., R^(count)(P)`.
pub fn riccati_sequence(
    sys: &LinearSystem,
    cost: &CostSpec,
    p: &DMatrix<f64>,
    count: usize,
) -> Result<Vec<DMatrix<f64>>> {
    check_psd_arg(sys, cost, p)?;
    let s = cost.input_gramian(sys.b());
    iterates_with(sys.a(), &s, cost.q(), p, count)
}

/// Fixed-point iteration of the Riccati map from `P0 = Q`.
///
/// Stops once `|P_{k+1} - P_k| <= tol * max(1, |P_{k+1}|)`. Failure to reach
/// the tolerance usually means the pair is not stabilizable or `(A, Q^{1/2})`
/// is not detectable.
pub fn solve_dare(
    sys: &LinearSystem,
    cost: &CostSpec,
    tol: f64,
    max_iter: usize,
) -> Result<RiccatiSolution> {
    cost.check_system(sys)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("DARE tolerance must be positive".into()));
    }
    let s = cost.input_gramian(sys.b());
    let a = sys.a();
    let q = cost.q();
    let mut p = q.clone();
    let mut step = f64::INFINITY;
    for k in 1..=max_iter {
        let next = map_with(a, &s, q, &p)?;
        if !linalg::is_finite(&next) {
            return Err(Error::NonConvergence {
                iterations: k,
                residual: f64::INFINITY,
            });
        }
        step = linalg::spectral_norm(&(&next - &p));
        let scale = linalg::spectral_norm(&next).max(1.0);
        p = next;
        if step <= tol * scale {
            let residual = linalg::spectral_norm(&(&p - map_with(a, &s, q, &p)?));
            return Ok(RiccatiSolution {
                p,
                iterations: k,
                residual,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: step,
    })
}

/// Feedback gain `(R + B' F B)^{-1} B' F A`.
pub fn gain(sys: &LinearSystem, cost: &CostSpec, f: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_psd_arg(sys, cost, f)?;
    gain_unchecked(sys.a(), sys.b(), cost.r(), f)
}

fn gain_unchecked(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    r: &DMatrix<f64>,
    f: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let btf = b.transpose() * f;
    let lhs = r + &btf * b;
    let chol = lhs
        .cholesky()
        .ok_or(Error::NotPositiveDefinite("R + B'FB"))?;
    Ok(chol.solve(&(btf * a)))
}

/// Closed-loop matrix `(I + S P)^{-1} A`.
pub fn closed_loop(sys: &LinearSystem, cost: &CostSpec, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_psd_arg(sys, cost, p)?;
    closed_loop_with(&cost.input_gramian(sys.b()), p, sys.a())
}

/// Static gain equivalent to the unconstrained receding-horizon controller
/// designed on `nominal`: `gain(R^(N-1)(P))`.
pub fn mpc_gain(nominal: &LinearSystem, cost: &CostSpec, rhc: &RhcConfig) -> Result<DMatrix<f64>> {
    let f = riccati_iterate(nominal, cost, rhc.terminal(), rhc.horizon() - 1)?;
    gain_unchecked(nominal.a(), nominal.b(), cost.r(), &f)
}

/// Ordered product of `mats[j..i]`, identity when empty.
fn ordered_product(mats: &[DMatrix<f64>], n: usize) -> DMatrix<f64> {
    mats.iter()
        .fold(DMatrix::identity(n, n), |acc, m| acc * m)
}

/// State-transition matrix `L(R^j(P)) ... L(R^{i-1}(P))`.
pub fn phi(
    sys: &LinearSystem,
    cost: &CostSpec,
    p: &DMatrix<f64>,
    j: usize,
    i: usize,
) -> Result<DMatrix<f64>> {
    if j > i {
        return Err(Error::InvalidRange { j, i });
    }
    check_psd_arg(sys, cost, p)?;
    let s = cost.input_gramian(sys.b());
    let iterates = iterates_with(sys.a(), &s, cost.q(), p, i.saturating_sub(1))?;
    let factors = iterates[j..i]
        .iter()
        .map(|x| closed_loop_with(&s, x, sys.a()))
        .collect::<Result<Vec<_>>>()?;
    Ok(ordered_product(&factors, sys.n()))
}

/// Precomputed pieces for the nominal-versus-true comparisons.
struct Pair<'a> {
    a_true: &'a DMatrix<f64>,
    a_nom: &'a DMatrix<f64>,
    s_true: DMatrix<f64>,
    s_nom: DMatrix<f64>,
    q: &'a DMatrix<f64>,
    n: usize,
}

impl<'a> Pair<'a> {
    fn new(true_sys: &'a LinearSystem, nominal: &'a LinearSystem, cost: &'a CostSpec) -> Result<Self> {
        if !true_sys.same_shape(nominal) {
            return Err(Error::Dimension("true and nominal models differ in shape".into()));
        }
        cost.check_system(true_sys)?;
        Ok(Self {
            a_true: true_sys.a(),
            a_nom: nominal.a(),
            s_true: cost.input_gramian(true_sys.b()),
            s_nom: cost.input_gramian(nominal.b()),
            q: cost.q(),
            n: true_sys.n(),
        })
    }

    fn eye(&self) -> DMatrix<f64> {
        DMatrix::identity(self.n, self.n)
    }

    /// `W(P) [H(P) + L*(P)]` with `W = I + (S* - S^) P`, `H = (I + S* P)^{-1}(A^ - A*)`.
    fn perturbed_closed_loop(&self, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let w = self.eye() + (&self.s_true - &self.s_nom) * p;
        let h = closed_loop_with(&self.s_true, p, &(self.a_nom - self.a_true))?;
        let l = closed_loop_with(&self.s_true, p, self.a_true)?;
        Ok(w * (h + l))
    }

    fn mismatch(&self, p1: &DMatrix<f64>, p2: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let a_hat = self.a_nom;
        let a_star = self.a_true;
        let x_hat = closed_loop_with(&self.s_true, p2, a_hat)?;
        let x_star = closed_loop_with(&self.s_true, p2, a_star)?;
        let first = a_hat.transpose() * p2 * &x_hat;
        let second = a_star.transpose() * p2 * x_star;
        let inner = p2 * (&self.s_true - &self.s_nom) * p2 * &x_hat;
        let third = a_hat.transpose()
            * linalg::solve(&(self.eye() + p1 * &self.s_nom), &inner, "mismatch (I + P S^)")?;
        Ok(first - second + third)
    }
}

/// Perturbed closed-loop factor used by `phi_bar`.
pub fn perturbed_closed_loop(
    true_sys: &LinearSystem,
    nominal: &LinearSystem,
    cost: &CostSpec,
    p: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    check_psd_arg(true_sys, cost, p)?;
    Pair::new(true_sys, nominal, cost)?.perturbed_closed_loop(p)
}

/// Product of perturbed closed-loop factors along the true model's iterates.
pub fn phi_bar(
    true_sys: &LinearSystem,
    nominal: &LinearSystem,
    cost: &CostSpec,
    p: &DMatrix<f64>,
    j: usize,
    i: usize,
) -> Result<DMatrix<f64>> {
    if j > i {
        return Err(Error::InvalidRange { j, i });
    }
    check_psd_arg(true_sys, cost, p)?;
    let pair = Pair::new(true_sys, nominal, cost)?;
    let iterates = iterates_with(pair.a_true, &pair.s_true, pair.q, p, i.saturating_sub(1))?;
    let factors = iterates[j..i]
        .iter()
        .map(|x| pair.perturbed_closed_loop(x))
        .collect::<Result<Vec<_>>>()?;
    Ok(ordered_product(&factors, pair.n))
}

/// Modeling-error term `M(P1, P2)` of the nominal-versus-true one-step difference:
///
/// `A^' P2 (I + S* P2)^{-1} A^ - A*' P2 (I + S* P2)^{-1} A*
///  + A^' (I + P1 S^)^{-1} P2 (S* - S^) P2 (I + S* P2)^{-1} A^`
pub fn model_mismatch_term(
    true_sys: &LinearSystem,
    nominal: &LinearSystem,
    cost: &CostSpec,
    p1: &DMatrix<f64>,
    p2: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    check_psd_arg(true_sys, cost, p1)?;
    check_psd_arg(true_sys, cost, p2)?;
    Pair::new(true_sys, nominal, cost)?.mismatch(p1, p2)
}

/// The two pieces of `R^(i)_nominal(P1) - R^(i)_true(P2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiDifference {
    /// `Phi_nominal(0:i)(P1)' (P1 - P2) Phi_bar(0:i)(P2)`.
    pub term_a: DMatrix<f64>,
    /// Accumulated modeling-error contributions.
    pub term_b: DMatrix<f64>,
}

impl RiccatiDifference {
    pub fn total(&self) -> DMatrix<f64> {
        &self.term_a + &self.term_b
    }
}

/// Decomposes the difference between `i` nominal and `i` true Riccati steps.
///
/// With `P^_k = R^(k)_nominal(P1)` and `P_k = R^(k)_true(P2)`,
/// `term_b = sum_{a=1..i} Phi_nominal(a:i)(P1)' M(P^_{a-1}, P_{a-1}) Phi_bar(a:i)(P2)`.
pub fn riccati_difference_terms(
    true_sys: &LinearSystem,
    nominal: &LinearSystem,
    cost: &CostSpec,
    p1: &DMatrix<f64>,
    p2: &DMatrix<f64>,
    i: usize,
) -> Result<RiccatiDifference> {
    check_psd_arg(true_sys, cost, p1)?;
    check_psd_arg(true_sys, cost, p2)?;
    let pair = Pair::new(true_sys, nominal, cost)?;
    let nominal_iterates = iterates_with(pair.a_nom, &pair.s_nom, pair.q, p1, i)?;
    let true_iterates = iterates_with(pair.a_true, &pair.s_true, pair.q, p2, i)?;

    // suffix[a] = Phi(a:i); filled from the back.
    let mut hat_suffix = vec![pair.eye(); i + 1];
    let mut bar_suffix = vec![pair.eye(); i + 1];
    for a in (0..i).rev() {
        let l_hat = closed_loop_with(&pair.s_nom, &nominal_iterates[a], pair.a_nom)?;
        let l_bar = pair.perturbed_closed_loop(&true_iterates[a])?;
        hat_suffix[a] = l_hat * &hat_suffix[a + 1];
        bar_suffix[a] = l_bar * &bar_suffix[a + 1];
    }

    let term_a = hat_suffix[0].transpose() * (p1 - p2) * &bar_suffix[0];
    let mut term_b = DMatrix::zeros(pair.n, pair.n);
    for a in 1..=i {
        let m = pair.mismatch(&nominal_iterates[a - 1], &true_iterates[a - 1])?;
        term_b += hat_suffix[a].transpose() * m * &bar_suffix[a];
    }
    Ok(RiccatiDifference { term_a, term_b })
}
