//! Test-only oracles and instance samplers.
//!
//! The oracles use textbook forms (gain form of the Riccati map, explicit
//! inverses, Kronecker Lyapunov solve, backward dynamic programming) rather
//! than the library's implementation.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rhc_lq::rng::StreamRng;
use rhc_lq::{CostSpec, LinearSystem};

pub fn gaussian(r: &mut StreamRng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(r))
}

pub fn norm(x: &DMatrix<f64>) -> f64 {
    x.clone().svd(false, false).singular_values.max()
}

pub fn inv(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.clone().try_inverse().expect("invertible")
}

/// Relative difference `|x - y| / max(1, |x|, |y|)` in spectral norm.
pub fn rel_diff(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    norm(&(x - y)) / norm(x).max(norm(y)).max(1.0)
}

/// Random symmetric positive semidefinite matrix `G G' * scale`.
pub fn random_psd(r: &mut StreamRng, n: usize, scale: f64) -> DMatrix<f64> {
    let g = gaussian(r, n, n);
    &g * g.transpose() * scale
}

/// Random symmetric matrix with spectral norm exactly `size`.
pub fn random_sym_with_norm(r: &mut StreamRng, n: usize, size: f64) -> DMatrix<f64> {
    let g = gaussian(r, n, n);
    let s = &g + g.transpose();
    &s * (size / norm(&s))
}

/// Random matrix with spectral norm exactly `size`.
pub fn random_with_norm(r: &mut StreamRng, rows: usize, cols: usize, size: f64) -> DMatrix<f64> {
    let g = gaussian(r, rows, cols);
    &g * (size / norm(&g))
}

pub fn log_uniform(r: &mut StreamRng, lo: f64, hi: f64) -> f64 {
    (r.random_range(lo.ln()..hi.ln())).exp()
}

/// Random orthogonal matrix from the QR factor of a Gaussian matrix.
pub fn random_orthogonal(r: &mut StreamRng, n: usize) -> DMatrix<f64> {
    gaussian(r, n, n).qr().q()
}

/// Generic random plant: `A` Gaussian scaled to spectral radius `rho`, `B` Gaussian.
pub fn random_plant(r: &mut StreamRng, n: usize, m: usize, rho: f64) -> LinearSystem {
    let g = gaussian(r, n, n);
    let sr = g.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    let a = &g * (rho / sr.max(1e-12));
    let b = gaussian(r, n, m);
    LinearSystem::new(a, b, 1.0, 0.0).unwrap()
}

/// Random weights with `Q >= q_floor I` and `R >= r_floor I`.
pub fn random_cost(r: &mut StreamRng, n: usize, m: usize, q_floor: f64, r_floor: f64) -> CostSpec {
    let q = random_psd(r, n, 0.3) + DMatrix::identity(n, n) * q_floor;
    let rr = random_psd(r, m, 0.3) + DMatrix::identity(m, m) * r_floor;
    CostSpec::new(q, rr).unwrap()
}

/// `Q + A'PA - A'PB (R + B'PB)^{-1} B'PA`.
pub fn riccati_gain_form(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>, p: &DMatrix<f64>) -> DMatrix<f64> {
    let bpa = b.transpose() * p * a;
    q + a.transpose() * p * a - bpa.transpose() * inv(&(r + b.transpose() * p * b)) * bpa
}

pub fn riccati_iter(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>, p: &DMatrix<f64>, i: usize) -> DMatrix<f64> {
    (0..i).fold(p.clone(), |x, _| riccati_gain_form(a, b, q, r, &x))
}

/// `(R + B'FB)^{-1} B'FA`.
pub fn gain(a: &DMatrix<f64>, b: &DMatrix<f64>, r: &DMatrix<f64>, f: &DMatrix<f64>) -> DMatrix<f64> {
    inv(&(r + b.transpose() * f * b)) * b.transpose() * f * a
}

pub fn closed_loop(a: &DMatrix<f64>, b: &DMatrix<f64>, r: &DMatrix<f64>, p: &DMatrix<f64>) -> DMatrix<f64> {
    a - b * gain(a, b, r, p)
}

/// Left-to-right product of closed loops along the iterates `j..i`.
pub fn phi(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>, p: &DMatrix<f64>, j: usize, i: usize) -> DMatrix<f64> {
    let n = a.nrows();
    (j..i).fold(DMatrix::identity(n, n), |acc, k| acc * closed_loop(a, b, r, &riccati_iter(a, b, q, r, p, k)))
}

pub struct Pair {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub ah: DMatrix<f64>,
    pub bh: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl Pair {
    pub fn new(truth: &LinearSystem, nominal: &LinearSystem, cost: &CostSpec) -> Self {
        Self {
            a: truth.a().clone(),
            b: truth.b().clone(),
            ah: nominal.a().clone(),
            bh: nominal.b().clone(),
            q: cost.q().clone(),
            r: cost.r().clone(),
        }
    }

    fn s(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        b * inv(&self.r) * b.transpose()
    }

    /// `W(P) [H(P) + L*(P)]`.
    pub fn l_bar(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.a.nrows();
        let eye = DMatrix::identity(n, n);
        let (ss, sh) = (self.s(&self.b), self.s(&self.bh));
        let w = &eye + (&ss - &sh) * p;
        let h = inv(&(&eye + &ss * p)) * (&self.ah - &self.a);
        w * (h + closed_loop(&self.a, &self.b, &self.r, p))
    }

    pub fn phi_bar(&self, p: &DMatrix<f64>, j: usize, i: usize) -> DMatrix<f64> {
        let n = self.a.nrows();
        (j..i).fold(DMatrix::identity(n, n), |acc, k| {
            acc * self.l_bar(&riccati_iter(&self.a, &self.b, &self.q, &self.r, p, k))
        })
    }

    pub fn phi_hat(&self, p: &DMatrix<f64>, j: usize, i: usize) -> DMatrix<f64> {
        phi(&self.ah, &self.bh, &self.q, &self.r, p, j, i)
    }

    pub fn mismatch(&self, p1: &DMatrix<f64>, p2: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.a.nrows();
        let eye = DMatrix::identity(n, n);
        let (ss, sh) = (self.s(&self.b), self.s(&self.bh));
        let x = inv(&(&eye + &ss * p2));
        self.ah.transpose() * p2 * &x * &self.ah - self.a.transpose() * p2 * &x * &self.a
            + self.ah.transpose() * inv(&(&eye + p1 * &sh)) * p2 * (&ss - &sh) * p2 * &x * &self.ah
    }

    /// Right-hand side of the perturbed Riccati difference identity.
    pub fn difference_rhs(&self, p1: &DMatrix<f64>, p2: &DMatrix<f64>, i: usize) -> DMatrix<f64> {
        let mut out = self.phi_hat(p1, 0, i).transpose() * (p1 - p2) * self.phi_bar(p2, 0, i);
        for j in 1..=i {
            let ph = riccati_iter(&self.ah, &self.bh, &self.q, &self.r, p1, i - j);
            let pt = riccati_iter(&self.a, &self.b, &self.q, &self.r, p2, i - j);
            out += self.phi_hat(p1, i - j + 1, i).transpose()
                * self.mismatch(&ph, &pt)
                * self.phi_bar(p2, i - j + 1, i);
        }
        out
    }
}

/// First-stage gain of the `N`-step problem by backward dynamic programming,
/// with the cost-to-go updated in Joseph form.
pub fn dp_gain(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>, terminal: &DMatrix<f64>, horizon: usize) -> DMatrix<f64> {
    let mut v = terminal.clone();
    let mut k = DMatrix::zeros(b.ncols(), a.nrows());
    for _ in 0..horizon {
        k = inv(&(r + b.transpose() * &v * b)) * b.transpose() * &v * a;
        let l = a - b * &k;
        v = q + k.transpose() * r * &k + l.transpose() * &v * &l;
    }
    k
}

/// Solves `X = L X L' + W` through `(I - L kron L) vec X = vec W`.
pub fn kron_lyapunov(l: &DMatrix<f64>, w: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let lk = l.kronecker(l);
    let lhs = DMatrix::identity(n * n, n * n) - lk;
    let vec_w = DMatrix::from_column_slice(n * n, 1, w.as_slice());
    let x = lhs.lu().solve(&vec_w).expect("stable closed loop");
    DMatrix::from_column_slice(n, n, x.as_slice())
}

/// `tr((Q + K'RK) Sigma_K)` with the Kronecker covariance.
pub fn cost_of_gain(sys: &LinearSystem, cost: &CostSpec, k: &DMatrix<f64>) -> f64 {
    let l = sys.a() - sys.b() * k;
    let n = sys.n();
    let sigma = kron_lyapunov(&l, &(DMatrix::identity(n, n) * sys.sigma_w().powi(2)));
    ((cost.q() + k.transpose() * cost.r() * k) * sigma).trace()
}

/// Value-iteration fixed point of the gain-form Riccati map.
pub fn dare_by_iteration(sys: &LinearSystem, cost: &CostSpec) -> DMatrix<f64> {
    // Stops at 1e-13 or once the steps stall at roundoff level.
    let mut p = cost.q().clone();
    let mut prev = f64::INFINITY;
    for _ in 0..100_000 {
        // Without symmetrizing, the skew part of the iterate grows and the
        // iteration drifts away from the fixed point.
        let next = riccati_gain_form(sys.a(), sys.b(), cost.q(), cost.r(), &p);
        let next = (&next + next.transpose()) * 0.5;
        let scale = norm(&next).max(1.0);
        let step = norm(&(&next - &p));
        p = next;
        if step <= 1e-13 * scale || (step <= 1e-10 * scale && step >= prev) {
            break;
        }
        prev = step;
    }
    p
}

/// Instance for the bound checks: true plant, nominal model within `eps_m`,
/// terminal weight within `eps_p` of `P*`, and a horizon.
pub struct BoundInstance {
    pub truth: LinearSystem,
    pub nominal: LinearSystem,
    pub cost: CostSpec,
    pub terminal: DMatrix<f64>,
    pub eps_m: f64,
    pub eps_p: f64,
    pub horizon: usize,
}

/// Small well-conditioned plants with tiny model errors, the regime in which
/// the nominal-controller bounds have satisfiable side conditions.
pub fn sample_bound_instance(r: &mut StreamRng) -> BoundInstance {
    let n = r.random_range(2..=3);
    let u = random_orthogonal(r, n);
    let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| r.random_range(-0.5..0.5)));
    let a = &u * lam * u.transpose();
    let b = gaussian(r, n, 1) * 0.3;
    let truth = LinearSystem::new(a.clone(), b.clone(), 1.0, 0.0).unwrap();
    let cost = CostSpec::identity(n, 1);
    let eps_m = log_uniform(r, 1e-5, 3e-4);
    let ah = &a + random_with_norm(r, n, n, eps_m);
    let bh = &b + random_with_norm(r, n, 1, eps_m);
    let nominal = truth.with_matrices(ah, bh).unwrap();
    let p_star = dare_by_iteration(&truth, &cost);
    let eps_p = log_uniform(r, 1e-4, 1.0);
    let terminal = &p_star + random_sym_with_norm(r, n, eps_p);
    let horizon = r.random_range(1..=10);
    BoundInstance {
        truth,
        nominal,
        cost,
        terminal,
        eps_m,
        eps_p,
        horizon,
    }
}
