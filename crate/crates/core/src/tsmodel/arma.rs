//! ARMA(p, q) estimation by conditional sum of squares.
//!
//! The model is `xₜ − μ = Σ φᵢ (xₜ₋ᵢ − μ) + eₜ + Σ θⱼ eₜ₋ⱼ`. Residuals are set
//! to zero for the first `p` observations and recursed from there. Fitting
//! runs on the standardised series: a Hannan–Rissanen regression provides the
//! starting point and a Nelder–Mead search refines `(μ, φ, θ)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::lad::ols;
use super::simplex::nelder_mead;
use crate::error::{Error, Result};

const CSS_REL_TOL: f64 = 1e-10;
const ROOT_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmaFit {
    /// `(p_ar, q_ma)`.
    pub order: (usize, usize),
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    /// Process mean `μ`.
    pub intercept: f64,
    /// Innovation variance `CSS / (n − p)`.
    pub sigma2: f64,
    pub aic: f64,
    pub residuals: Vec<f64>,
    /// Set when the AR polynomial has a root within `1 + 1e−6` of the unit
    /// circle.
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AicEntry {
    pub order: (usize, usize),
    pub aic: Option<f64>,
    pub error: Option<String>,
}

/// CSS residuals for the given parameters; the first `ar.len()` are zero.
pub fn css_residuals(x: &[f64], mu: f64, ar: &[f64], ma: &[f64]) -> Vec<f64> {
    let p = ar.len();
    let mut e = vec![0.0; x.len()];
    for t in p..x.len() {
        let mut v = x[t] - mu;
        for (i, phi) in ar.iter().enumerate() {
            v -= phi * (x[t - 1 - i] - mu);
        }
        for (j, th) in ma.iter().enumerate() {
            if t > j {
                v -= th * e[t - 1 - j];
            }
        }
        e[t] = v;
    }
    e
}

fn css(x: &[f64], mu: f64, ar: &[f64], ma: &[f64]) -> f64 {
    css_residuals(x, mu, ar, ma)[ar.len()..].iter().map(|v| v * v).sum()
}

/// Hannan–Rissanen starting values on a zero-mean series.
fn hannan_rissanen(z: &[f64], p: usize, q: usize) -> (Vec<f64>, Vec<f64>) {
    let n = z.len();
    let zeros = (vec![0.0; p], vec![0.0; q]);
    if p + q == 0 {
        return zeros;
    }
    let mut proxy = vec![0.0; n];
    let mut start = p;
    if q > 0 {
        let m = ((n as f64 / 10.0).min(20.0)).ceil() as usize;
        let rows = n - m;
        let xm = DMatrix::from_fn(rows, m, |r, c| z[m + r - 1 - c]);
        let ym = DVector::from_fn(rows, |r, _| z[m + r]);
        let Ok(phi) = ols(&xm, &ym) else { return zeros };
        let fitted = &xm * &phi;
        for r in 0..rows {
            proxy[m + r] = ym[r] - fitted[r];
        }
        start = p.max(m + q);
    }
    if start >= n {
        return zeros;
    }
    let rows = n - start;
    let x = DMatrix::from_fn(rows, p + q, |r, c| {
        let t = start + r;
        if c < p {
            z[t - 1 - c]
        } else {
            proxy[t - 1 - (c - p)]
        }
    });
    let y = DVector::from_fn(rows, |r, _| z[start + r]);
    match ols(&x, &y) {
        Ok(b) => (b.rows(0, p).iter().copied().collect(), b.rows(p, q).iter().copied().collect()),
        Err(_) => zeros,
    }
}

/// Whether all roots of `1 − φ₁z − … − φₚzᵖ` lie outside `|z| = 1 + 1e−6`.
fn ar_stationary(ar: &[f64]) -> bool {
    let p = ar.len();
    if p == 0 {
        return true;
    }
    // Companion eigenvalues are the reciprocal roots.
    let companion = DMatrix::from_fn(p, p, |r, c| {
        if r == 0 {
            ar[c]
        } else if r == c + 1 {
            1.0
        } else {
            0.0
        }
    });
    let limit = 1.0 / (1.0 + ROOT_MARGIN);
    companion.complex_eigenvalues().iter().all(|l| l.norm() < limit)
}

pub fn fit_arma(series: &[f64], p: usize, q: usize) -> Result<ArmaFit> {
    let n = series.len();
    let k = p + q + 1;
    if n < 10 * k {
        return Err(Error::InsufficientData(format!(
            "ARMA({p},{q}) needs at least {} observations, got {n}",
            10 * k
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("series contains non-finite values".into()));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let sd = (series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    if !(sd > 1e-14 * mean.abs()) || sd == 0.0 {
        return Err(Error::Data("series has zero variance".into()));
    }
    let z: Vec<f64> = series.iter().map(|v| (v - mean) / sd).collect();

    let unpack = |v: &[f64]| (v[0], v[1..=p].to_vec(), v[p + 1..].to_vec());
    let objective = |v: &[f64]| {
        let (mu, ar, ma) = unpack(v);
        css(&z, mu, &ar, &ma)
    };

    let (ar0, ma0) = hannan_rissanen(&z, p, q);
    let mut start: Vec<f64> = std::iter::once(0.0).chain(ar0).chain(ma0).collect();
    if !objective(&start).is_finite() {
        start = vec![0.0; k];
    }
    let max_iter = 500 * k;
    let step = vec![0.1; k];
    let mut best = nelder_mead(objective, &start, &step, CSS_REL_TOL, max_iter);
    // One restart around the optimum guards against a collapsed simplex.
    let again = nelder_mead(objective, &best.x, &step, CSS_REL_TOL, max_iter);
    if again.value < best.value {
        best = again;
    }

    let (mu_z, ar, ma) = unpack(&best.x);
    let intercept = mean + sd * mu_z;
    let residuals: Vec<f64> =
        css_residuals(&z, mu_z, &ar, &ma).into_iter().map(|e| e * sd).collect();
    let sigma2 = residuals[p..].iter().map(|e| e * e).sum::<f64>() / (n - p) as f64;
    let aic = n as f64 * sigma2.ln() + 2.0 * k as f64;
    let warning = (!ar_stationary(&ar))
        .then(|| "AR polynomial has a root on or inside the unit circle".to_string());
    Ok(ArmaFit { order: (p, q), ar, ma, intercept, sigma2, aic, residuals, warning })
}

/// One-step-ahead conditional expectation given the fitted residuals.
pub fn forecast_arma(fit: &ArmaFit, series: &[f64]) -> f64 {
    let n = series.len();
    let mu = fit.intercept;
    let mut f = mu;
    for (i, phi) in fit.ar.iter().enumerate() {
        if n > i {
            f += phi * (series[n - 1 - i] - mu);
        }
    }
    let r = &fit.residuals;
    for (j, th) in fit.ma.iter().enumerate() {
        if r.len() > j {
            f += th * r[r.len() - 1 - j];
        }
    }
    f
}

/// Fits every candidate order and returns the minimum-AIC fit with the table.
pub fn select_arma(series: &[f64], orders: &[(usize, usize)]) -> Result<(ArmaFit, Vec<AicEntry>)> {
    let mut table = Vec::with_capacity(orders.len());
    let mut best: Option<ArmaFit> = None;
    let mut first_err = None;
    for &(p, q) in orders {
        match fit_arma(series, p, q) {
            Ok(fit) => {
                table.push(AicEntry { order: (p, q), aic: Some(fit.aic), error: None });
                if best.as_ref().is_none_or(|b| fit.aic < b.aic) {
                    best = Some(fit);
                }
            }
            Err(e) => {
                table.push(AicEntry { order: (p, q), aic: None, error: Some(e.to_string()) });
                first_err.get_or_insert(e);
            }
        }
    }
    match best {
        Some(fit) => Ok((fit, table)),
        None => Err(first_err
            .unwrap_or_else(|| Error::Config("no candidate ARMA orders supplied".into()))),
    }
}
