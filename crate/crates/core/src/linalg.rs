//! Small dense linear-algebra helpers shared by the control modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative threshold under which singular values count as zero.
pub const RANK_TOL: f64 = 1e-9;

/// Relative slack of the positive-semidefinite test.
pub const PSD_TOL: f64 = 1e-9;

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

pub fn is_symmetric(m: &Mat, rel_tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.amax().max(1.0);
    (m - m.transpose()).amax() <= rel_tol * scale
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn sym_eigenvalues(m: &Mat) -> Vector {
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Vector::from_vec(values)
}

pub fn lambda_min(m: &Mat) -> f64 {
    sym_eigenvalues(m).min()
}

pub fn lambda_max(m: &Mat) -> f64 {
    sym_eigenvalues(m).max()
}

/// PSD test: min eigenvalue ≥ −tol·max(1, max eigenvalue).
pub fn is_psd(m: &Mat) -> bool {
    let ev = sym_eigenvalues(m);
    ev.min() >= -PSD_TOL * ev.max().max(1.0)
}

pub fn is_pd(m: &Mat) -> bool {
    lambda_min(m) > 0.0
}

/// `lo ⪯ hi` in the Loewner order.
pub fn loewner_leq(lo: &Mat, hi: &Mat) -> bool {
    is_psd(&(hi - lo))
}

/// Largest singular value.
pub fn spectral_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

pub fn numerical_rank(m: &Mat) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.singular_values();
    let largest = sv.max();
    if largest == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOL * largest).count()
}

/// Solves `g · x = rhs` for symmetric positive-definite `g`.
pub fn solve_spd(g: &Mat, rhs: &Mat) -> Result<Mat> {
    let chol =
        g.clone().cholesky().ok_or_else(|| Error::Numerical("matrix R + BᵀPB is not positive definite".into()))?;
    Ok(chol.solve(rhs))
}

pub fn all_finite(m: &Mat) -> bool {
    m.iter().all(|v| v.is_finite())
}

pub fn vec_finite(v: &Vector) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Quadratic form `xᵀ M x`.
pub fn quad(m: &Mat, x: &Vector) -> f64 {
    x.dot(&(m * x))
}
