//! Functionals of reconstructed and forecast CDFs.
//!
//! `F̃` is always carried as a coefficient vector over the observed ECDFs, so
//! evaluation and moments are exact; only the quantile needs a grid.

use super::SpectralModel;
use crate::ecdf::{signed_combo_moment, CyclePanel};
use crate::error::{Error, Result};

/// Points added on top of the pooled observations in [`evaluation_grid`].
const GRID_POINTS: usize = 512;

fn check_component(model: &SpectralModel, d: usize) -> Result<()> {
    if d > model.kept() {
        return Err(Error::Config(format!(
            "requested {d} components but the model keeps {}",
            model.kept()
        )));
    }
    Ok(())
}

/// `ψ̂ⱼ(x)` for the 0-based component `j`.
pub fn eigenfunction_eval(model: &SpectralModel, panel: &CyclePanel, j: usize, x: f64) -> f64 {
    model.eigfun_coeffs[j]
        .iter()
        .zip(panel.cycles())
        .map(|(c, f)| c * f.eval(x))
        .sum()
}

/// `ψ̂ⱼ` on an ascending grid.
pub fn eigenfunction_trace(
    model: &SpectralModel,
    panel: &CyclePanel,
    j: usize,
    xs: &[f64],
) -> Vec<f64> {
    panel.eval_combination(&model.eigfun_coeffs[j], xs)
}

fn combine(model: &SpectralModel, weights: &[f64]) -> Vec<f64> {
    let mut c = model.mean_coeffs.clone();
    for (w, e) in weights.iter().zip(&model.eigfun_coeffs) {
        for (ci, ei) in c.iter_mut().zip(e) {
            *ci += w * ei;
        }
    }
    c
}

/// Coefficients of `F̃ₜ = ÊF₀ + Σ_{j<d} Ŵₜⱼ ψ̂ⱼ` over the ECDFs.
pub fn reconstruct_cdf(model: &SpectralModel, t: usize, d: usize) -> Result<Vec<f64>> {
    check_component(model, d)?;
    if t >= model.n {
        return Err(Error::Config(format!("cycle {t} out of range for n = {}", model.n)));
    }
    let w: Vec<f64> = model.scores[..d].iter().map(|s| s[t]).collect();
    Ok(combine(model, &w))
}

/// Coefficients of `ÊF₀ + Σⱼ wⱼ ψ̂ⱼ` for a forecast score vector.
pub fn forecast_cdf(model: &SpectralModel, w_next: &[f64]) -> Result<Vec<f64>> {
    check_component(model, w_next.len())?;
    Ok(combine(model, w_next))
}

/// Pooled observations plus 512 equispaced points reaching one spacing past
/// either end. Every jump of `F̃` sits on an observation, so the grid captures
/// `F̃` exactly.
pub fn evaluation_grid(panel: &CyclePanel) -> Vec<f64> {
    let (lo, hi) = panel.min_max();
    let h = if hi > lo { (hi - lo) / (GRID_POINTS - 3) as f64 } else { 1.0 };
    let mut grid = panel.pooled();
    grid.extend((0..GRID_POINTS).map(|i| lo - h + i as f64 * h));
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Repairs grid values into a CDF: running maximum, clamp to `[0, 1]`,
/// rescale so the last point is 1.
pub fn monotonize(values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut run = f64::NEG_INFINITY;
    for &v in values {
        run = run.max(v);
        out.push(run.clamp(0.0, 1.0));
    }
    match out.last().copied() {
        Some(end) if end > 0.0 && end < 1.0 => out.iter_mut().for_each(|v| *v /= end),
        Some(end) if end <= 0.0 => *out.last_mut().unwrap() = 1.0,
        _ => {}
    }
    out
}

pub fn mean_from_cdf(coeffs: &[f64], panel: &CyclePanel) -> f64 {
    signed_combo_moment(panel, coeffs, 1)
}

/// `∫x² F̃(dx) − (∫x F̃(dx))²`; errors when `F̃` is too far from monotone for
/// this to be a variance.
pub fn variance_from_cdf(coeffs: &[f64], panel: &CyclePanel) -> Result<f64> {
    let m1 = signed_combo_moment(panel, coeffs, 1);
    let m2 = signed_combo_moment(panel, coeffs, 2);
    let var = m2 - m1 * m1;
    if var < -1e-12 * m2.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::NegativeVariance(var));
    }
    Ok(var.max(0.0))
}

/// Mean and variance of a grid CDF by Stieltjes sums.
pub fn grid_moments(grid: &[f64], cdf: &[f64]) -> (f64, f64) {
    let mut prev = 0.0;
    let (mut m1, mut m2) = (0.0, 0.0);
    for (&x, &f) in grid.iter().zip(cdf) {
        let mass = f - prev;
        m1 += x * mass;
        m2 += x * x * mass;
        prev = f;
    }
    (m1, (m2 - m1 * m1).max(0.0))
}

/// Leftmost grid point where the monotonized `F̃` reaches `tau`.
pub fn quantile_from_cdf(coeffs: &[f64], panel: &CyclePanel, grid: &[f64], tau: f64) -> f64 {
    let cdf = monotonize(&panel.eval_combination(coeffs, grid));
    let k = cdf.partition_point(|&f| f < tau);
    grid[k.min(grid.len() - 1)]
}
