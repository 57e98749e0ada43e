//! Median (least absolute deviations) regression by iteratively reweighted
//! least squares.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const SMOOTHING: f64 = 1e-8;
const STEP_TOL: f64 = 1e-9;
const MAX_ITER: usize = 1000;

pub fn lad_objective(y: &DVector<f64>, x: &DMatrix<f64>, beta: &DVector<f64>) -> f64 {
    (y - x * beta).abs().sum()
}

/// Errors with [`Error::RankDeficient`] unless `x` has full column rank.
pub(crate) fn check_rank(x: &DMatrix<f64>) -> Result<()> {
    if x.ncols() == 0 || x.nrows() < x.ncols() {
        return Err(Error::RankDeficient);
    }
    let sv = x.singular_values();
    let max = sv.max();
    if !(max > 0.0) || sv.min() <= 1e-10 * max {
        return Err(Error::RankDeficient);
    }
    Ok(())
}

/// Least squares for full-column-rank `x`.
pub(crate) fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    check_rank(x)?;
    x.clone().svd(true, true).solve(y, 0.0).map_err(|_| Error::RankDeficient)
}

fn weighted_ls(x: &DMatrix<f64>, y: &DVector<f64>, w: &DVector<f64>) -> Option<DVector<f64>> {
    let mut xtw = x.transpose();
    for (mut col, wi) in xtw.column_iter_mut().zip(w.iter()) {
        col *= *wi;
    }
    let lhs = &xtw * x;
    let rhs = &xtw * y;
    match lhs.clone().cholesky() {
        Some(c) => Some(c.solve(&rhs)),
        None => lhs.lu().solve(&rhs),
    }
}

/// Minimises `Σ |yᵢ − xᵢᵀβ|`, starting from OLS and reweighting with
/// `1 / max(|rᵢ|, 1e−8)` until the coefficients move less than `1e−9`.
pub fn lad_regression(y: &[f64], x: &DMatrix<f64>) -> Result<DVector<f64>> {
    if x.nrows() != y.len() || x.nrows() <= x.ncols() {
        return Err(Error::Config(format!(
            "median regression needs more rows than columns and one response per row ({}×{}, {} responses)",
            x.nrows(),
            x.ncols(),
            y.len()
        )));
    }
    let y = DVector::from_column_slice(y);
    let mut beta = ols(x, &y)?;
    #[cfg(debug_assertions)]
    let mut objective = lad_objective(&y, x, &beta);
    for _ in 0..MAX_ITER {
        let resid = &y - x * &beta;
        let w = resid.map(|r| 1.0 / r.abs().max(SMOOTHING));
        let Some(next) = weighted_ls(x, &y, &w) else { break };
        let step = (&next - &beta).amax();
        beta = next;
        #[cfg(debug_assertions)]
        {
            // Majorize–minimize: the smoothing floor can cost at most ε per row.
            let new_obj = lad_objective(&y, x, &beta);
            let slack = y.len() as f64 * SMOOTHING + 1e-9 * objective.max(1.0);
            debug_assert!(new_obj <= objective + slack, "LAD objective rose: {objective} -> {new_obj}");
            objective = new_obj;
        }
        if step < STEP_TOL * (1.0 + beta.amax()) {
            break;
        }
    }
    Ok(beta)
}
