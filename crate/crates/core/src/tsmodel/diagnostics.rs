//! Ljung–Box portmanteau test and the Diebold–Mariano test of equal
//! predictive accuracy.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LjungBox {
    pub statistic: f64,
    pub p_value: f64,
    pub lags: usize,
}

/// `Q = n(n+2) Σₖ ρ̂ₖ² / (n−k)` against `χ²(lags)`.
pub fn ljung_box(series: &[f64], lags: usize) -> Result<LjungBox> {
    let n = series.len();
    if lags == 0 || 2 * lags >= n {
        return Err(Error::Config(format!("Ljung–Box needs 0 < lags < n/2 (lags {lags}, n {n})")));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let c0: f64 = dev.iter().map(|v| v * v).sum();
    if !(c0 > 0.0) {
        return Err(Error::Undefined("series has zero variance".into()));
    }
    let nf = n as f64;
    let q = (1..=lags)
        .map(|k| {
            let ck: f64 = dev[k..].iter().zip(&dev).map(|(a, b)| a * b).sum();
            let rho = ck / c0;
            rho * rho / (nf - k as f64)
        })
        .sum::<f64>()
        * nf
        * (nf + 2.0);
    let chi = ChiSquared::new(lags as f64).expect("positive degrees of freedom");
    Ok(LjungBox { statistic: q, p_value: chi.sf(q), lags })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmTest {
    pub statistic: f64,
    pub p_two_sided: f64,
    /// p-value against the alternative that forecast `a` is more accurate.
    pub p_one_sided: f64,
    /// Bartlett truncation lag `⌊T^{1/3}⌋`.
    pub lag: usize,
}

/// Diebold–Mariano test under squared loss. The loss differential is
/// `e_a² − e_b²`, so a negative statistic favours `a`.
pub fn diebold_mariano(errors_a: &[f64], errors_b: &[f64]) -> Result<DmTest> {
    let t = errors_a.len();
    if t != errors_b.len() {
        return Err(Error::Config(format!(
            "error series differ in length ({t} vs {})",
            errors_b.len()
        )));
    }
    if t < 10 {
        return Err(Error::InsufficientData(format!("Diebold–Mariano needs ≥ 10 errors, got {t}")));
    }
    let d: Vec<f64> = errors_a.iter().zip(errors_b).map(|(a, b)| a * a - b * b).collect();
    let tf = t as f64;
    let mean = d.iter().sum::<f64>() / tf;
    let dev: Vec<f64> = d.iter().map(|v| v - mean).collect();
    let autocov = |k: usize| dev[k..].iter().zip(&dev).map(|(a, b)| a * b).sum::<f64>() / tf;
    let lag = (tf.cbrt() + 1e-9).floor() as usize;
    let lrv = autocov(0)
        + 2.0 * (1..=lag).map(|k| (1.0 - k as f64 / (lag as f64 + 1.0)) * autocov(k)).sum::<f64>();
    if !(lrv > 0.0) || !lrv.is_finite() {
        return Err(Error::Undefined("loss differential has zero long-run variance".into()));
    }
    let statistic = mean / (lrv / tf).sqrt();
    let normal = Normal::standard();
    Ok(DmTest {
        statistic,
        p_two_sided: 2.0 * normal.cdf(-statistic.abs()),
        p_one_sided: normal.cdf(statistic),
        lag,
    })
}
