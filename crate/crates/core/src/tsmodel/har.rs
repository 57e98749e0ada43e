//! Median-regression analogue of the HAR realized-volatility model on
//! per-cycle empirical variances:
//! `log σ̂²ₜ₊₁ = β₀ + β₁ log σ̂²ₜ + β₂ log σ̂²ₜ,w`, with the weekly term the
//! average of the last five variances.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::lad::lad_regression;
use crate::error::{Error, Result};

const MIN_LEN: usize = 30;
const WEEK: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarFit {
    /// `(β₀, β₁, β₂)`; regressors dropped for collinearity keep a zero.
    pub beta: [f64; 3],
    /// Number of leading design columns actually used (3, 2 or 1).
    pub columns: usize,
    /// In-sample fitted log variances for targets `t = 6, …, n`.
    pub fitted: Vec<f64>,
    /// Exponentiated one-step-ahead forecast of `σ²ₙ₊₁`.
    pub forecast: f64,
}

pub fn fit_har(sigma2: &[f64]) -> Result<HarFit> {
    let n = sigma2.len();
    if n < MIN_LEN {
        return Err(Error::InsufficientData(format!(
            "HAR needs at least {MIN_LEN} cycles, got {n}"
        )));
    }
    if let Some((t, &v)) = sigma2.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::NonpositiveVariance { cycle: t + 1, value: v });
    }
    let daily: Vec<f64> = sigma2.iter().map(|v| v.ln()).collect();
    let weekly: Vec<f64> = (0..n)
        .map(|t| {
            if t + 1 < WEEK {
                f64::NAN
            } else {
                (sigma2[t + 1 - WEEK..=t].iter().sum::<f64>() / WEEK as f64).ln()
            }
        })
        .collect();
    let rows: Vec<usize> = (WEEK - 1..n - 1).collect();
    let y: Vec<f64> = rows.iter().map(|&t| daily[t + 1]).collect();
    let regressor = |t: usize, c: usize| match c {
        0 => 1.0,
        1 => daily[t],
        _ => weekly[t],
    };

    // A flat or collinear history cannot identify all three coefficients;
    // fall back to nested designs.
    for cols in (1..=3).rev() {
        let x = DMatrix::from_fn(rows.len(), cols, |r, c| regressor(rows[r], c));
        match lad_regression(&y, &x) {
            Ok(b) => {
                let mut beta = [0.0; 3];
                beta[..cols].copy_from_slice(b.as_slice());
                let predict = |t: usize| (0..cols).map(|c| beta[c] * regressor(t, c)).sum::<f64>();
                let fitted = rows.iter().map(|&t| predict(t)).collect();
                let forecast = predict(n - 1).exp();
                return Ok(HarFit { beta, columns: cols, fitted, forecast });
            }
            Err(Error::RankDeficient) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::RankDeficient)
}

pub fn har_forecast(sigma2: &[f64]) -> Result<f64> {
    fit_har(sigma2).map(|f| f.forecast)
}
