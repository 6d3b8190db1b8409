//! Small dense helpers shared by the numerical modules.
//!
//! Everything here works on `DMatrix<f64>` and targets state dimensions of
//! ten or less, so clarity wins over blocking or workspace reuse.

use nalgebra::{DMatrix, DVector, Schur};

use crate::error::{Error, Result};

/// Relative eigenvalue slack accepted when testing for semidefiniteness.
pub const PSD_TOLERANCE: f64 = 1e-10;

pub fn symmetrize(x: &DMatrix<f64>) -> DMatrix<f64> {
    (x + x.transpose()) * 0.5
}

pub fn is_finite(x: &DMatrix<f64>) -> bool {
    x.iter().all(|v| v.is_finite())
}

/// Spectral norm (largest singular value). Vectors give their l2 norm.
pub fn spectral_norm(x: &DMatrix<f64>) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    if x.ncols() == 1 || x.nrows() == 1 {
        return x.norm();
    }
    if !is_finite(x) {
        return f64::NAN;
    }
    x.singular_values().max()
}

pub fn min_singular_value(x: &DMatrix<f64>) -> f64 {
    if x.is_empty() || !is_finite(x) {
        return 0.0;
    }
    x.singular_values().min()
}

/// Extreme eigenvalues `(min, max)` of the symmetric part of `x`.
pub fn sym_eigen_range(x: &DMatrix<f64>) -> (f64, f64) {
    let eig = symmetrize(x).symmetric_eigen();
    (eig.eigenvalues.min(), eig.eigenvalues.max())
}

/// PSD test with eigenvalues allowed down to `-PSD_TOLERANCE * |x|`.
pub fn is_psd(x: &DMatrix<f64>) -> bool {
    if !x.is_square() || !is_finite(x) {
        return false;
    }
    let (lo, _) = sym_eigen_range(x);
    lo >= -PSD_TOLERANCE * spectral_norm(x).max(f64::MIN_POSITIVE)
}

pub fn is_symmetric(x: &DMatrix<f64>, tol: f64) -> bool {
    x.is_square() && (x - x.transpose()).amax() <= tol
}

/// Solves `a * x = b` with partial-pivot LU.
pub fn solve(a: &DMatrix<f64>, b: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    a.clone()
        .lu()
        .solve(b)
        .filter(is_finite)
        .ok_or_else(|| Error::Numerical(format!("singular system in {what}")))
}

/// Largest eigenvalue modulus via a real Schur decomposition.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "spectral radius of a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.is_empty() {
        return Ok(0.0);
    }
    if !is_finite(m) {
        return Err(Error::NonFinite("spectral radius input"));
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("Schur iteration did not converge".into()))?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

pub fn trace(x: &DMatrix<f64>) -> f64 {
    x.trace()
}

pub fn to_rows(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    x.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Dimension("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn to_vec(x: &DVector<f64>) -> Vec<f64> {
    x.iter().copied().collect()
}

/// Serde adapter writing a matrix as a list of rows.
pub mod serde_rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(x: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        super::to_rows(x).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        super::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for an optional matrix written as rows.
pub mod serde_opt_rows {
    use nalgebra::DMatrix;
    use serde::{Serialize, Serializer};

    pub fn serialize<S: Serializer>(x: &Option<DMatrix<f64>>, s: S) -> Result<S::Ok, S::Error> {
        x.as_ref().map(super::to_rows).serialize(s)
    }
}
