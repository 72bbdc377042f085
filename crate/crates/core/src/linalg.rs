//! Small shared helpers over nalgebra. Every linear system in this crate is
//! symmetric positive definite (Gram matrix plus a nonnegative ridge), so a
//! Cholesky factorization is the only solver; explicit inverses are never
//! formed.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

pub(crate) fn cholesky(a: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(a.clone())
        .ok_or_else(|| Error::SingularSystem(format!("{what}: factorization failed")))
}

pub(crate) fn solve_spd_vec(
    a: &DMatrix<f64>,
    rhs: &DVector<f64>,
    what: &str,
) -> Result<DVector<f64>> {
    Ok(cholesky(a, what)?.solve(rhs))
}

/// Solves X A = M for X with A symmetric positive definite: X = (A^-1 M^T)^T.
pub(crate) fn right_solve_spd(
    m: &DMatrix<f64>,
    a: &DMatrix<f64>,
    what: &str,
) -> Result<DMatrix<f64>> {
    Ok(cholesky(a, what)?.solve(&m.transpose()).transpose())
}

pub(crate) fn add_scaled_identity(a: &mut DMatrix<f64>, s: f64) {
    for i in 0..a.nrows().min(a.ncols()) {
        a[(i, i)] += s;
    }
}

/// X - c 1^T.
pub(crate) fn sub_col_broadcast(x: &DMatrix<f64>, c: &DVector<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    for mut col in out.column_iter_mut() {
        col -= c;
    }
    out
}

/// W X + c 1^T.
pub(crate) fn affine_map(w: &DMatrix<f64>, x: &DMatrix<f64>, c: &DVector<f64>) -> DMatrix<f64> {
    let mut out = w * x;
    for mut col in out.column_iter_mut() {
        col += c;
    }
    out
}

/// Column mean, i.e. (1/m) X 1.
pub(crate) fn mean_cols(x: &DMatrix<f64>) -> DVector<f64> {
    x.column_sum() / x.ncols() as f64
}
