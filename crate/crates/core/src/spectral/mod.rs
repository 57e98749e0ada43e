//! Spectral decomposition of the lag-covariance operator `R̂` through the
//! `(n−p)×(n−p)` matrix `M = (n−p)⁻² (Σₖ Bₖ) A`, where `A` and `Bₖ` are the
//! leading and `k`-shifted principal blocks of the centered Gram matrix.
//!
//! `M` is not symmetric. Its nonzero eigenpairs are obtained from the
//! symmetric PSD matrix `A^{1/2} B A^{1/2}`, which shares the spectrum and
//! maps back through `γ = A^{−1/2} u`. Eigenfunctions and scores are then
//! expressed as linear combinations of the observed ECDFs, so nothing is ever
//! discretized.

mod reconstruct;

pub use reconstruct::{
    eigenfunction_eval, eigenfunction_trace, evaluation_grid, forecast_cdf, grid_moments,
    mean_from_cdf, monotonize, quantile_from_cdf, reconstruct_cdf, variance_from_cdf,
};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::ecdf::{mean_inner_products_with, CenteredGram, CyclePanel};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::measure::WeightMeasure;

/// Pseudo-root cutoff for `A`, relative to its largest eigenvalue.
const ROOT_CUTOFF: f64 = 1e-12;
/// Eigenpairs below this fraction of `θ̂₁` are reported but not kept.
const KEEP_REL: f64 = 1e-8;
const RESIDUAL_TOL: f64 = 1e-6;
const TIE_GAP: f64 = 1e-6;

/// Rule for the number `d̂` of retained components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum DimRule {
    Fixed { d: usize },
    /// `d̂ = #{j : θ̂ⱼ ≥ c θ̂₁ n^{−exponent}}`.
    Threshold { c: f64, exponent: f64 },
}

impl Default for DimRule {
    fn default() -> Self {
        DimRule::Threshold { c: 1.0, exponent: 0.4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    /// Number of lags `p` summed into `R̂`.
    pub lag: usize,
    pub dim_rule: DimRule,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self { lag: 5, dim_rule: DimRule::default() }
    }
}

impl SpectralConfig {
    pub fn new(lag: usize, dim_rule: DimRule) -> Result<Self> {
        let cfg = Self { lag, dim_rule };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lag < 1 {
            return Err(Error::Config("lag p must be at least 1".into()));
        }
        if let DimRule::Threshold { c, exponent } = self.dim_rule {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Config(format!("threshold constant must be > 0, got {c}")));
            }
            if !(exponent > 0.0 && exponent < 0.5) {
                return Err(Error::Config(format!(
                    "threshold exponent must lie in (0, 0.5), got {exponent}"
                )));
            }
        }
        Ok(())
    }
}

/// Fitted spectral model. Cycle indices are 0-based throughout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralModel {
    pub n: usize,
    pub p: usize,
    /// All `n−p` eigenvalues of `M`, nonincreasing, clamped at zero.
    pub theta: Vec<f64>,
    /// Unit-norm eigenvectors `γⱼ` of `M` for the kept (numerically nonzero)
    /// eigenvalues.
    pub gamma: Vec<Vec<f64>>,
    /// `‖ψ̃ⱼ‖` for each kept component.
    pub psi_norms: Vec<f64>,
    /// `scores[j][t] = Ŵₜⱼ` for every cycle `t`.
    pub scores: Vec<Vec<f64>>,
    /// Coefficients `(1/n, …, 1/n)` of `ÊF₀` over the ECDFs.
    pub mean_coeffs: Vec<f64>,
    /// `eigfun_coeffs[j]` expresses `ψ̂ⱼ = Σₜ cₜ F̂ₜ`; each sums to zero.
    pub eigfun_coeffs: Vec<Vec<f64>>,
    pub d_hat: usize,
    /// Kept components whose eigenvalue is within a relative gap of `1e−6`
    /// of a neighbour.
    pub tied: Vec<bool>,
}

impl SpectralModel {
    pub fn kept(&self) -> usize {
        self.gamma.len()
    }

    /// First cycle whose score uses Gram entries outside the `A` block of `M`.
    pub fn boundary_start(&self) -> usize {
        self.n - self.p
    }
}

/// Leading block `A` and the lag sum `Σₖ Bₖ`.
pub fn lag_blocks(gram: &CenteredGram, p: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = gram.n();
    if p < 1 || p >= n {
        return Err(Error::Config(format!("lag p = {p} requires 1 ≤ p < n = {n}")));
    }
    let m = n - p;
    let g = gram.entries();
    let a = g.view((0, 0), (m, m)).into_owned();
    let mut b = DMatrix::zeros(m, m);
    for k in 1..=p {
        b += g.view((k, k), (m, m));
    }
    Ok((a, b))
}

/// `M = (n−p)⁻² (Σₖ Bₖ) A`.
pub fn build_m(gram: &CenteredGram, p: usize) -> Result<DMatrix<f64>> {
    let (a, b) = lag_blocks(gram, p)?;
    let m = a.nrows() as f64;
    Ok(b * a / (m * m))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSolution {
    /// Every eigenvalue, nonincreasing and clamped at zero.
    pub theta: Vec<f64>,
    /// Eigenvectors for the kept eigenvalues, unit norm, largest-magnitude
    /// entry positive.
    pub gamma: Vec<DVector<f64>>,
}

/// Eigenpairs of `scale · B · A` for symmetric PSD `A`, `B`.
pub fn eig_m(a: &DMatrix<f64>, b: &DMatrix<f64>, scale: f64) -> Result<EigenSolution> {
    eig_m_with_floor(a, b, scale, 0.0)
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// As [`eig_m`], treating eigenvalues `≤ floor` as exact zeros.
pub fn eig_m_with_floor(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    scale: f64,
    floor: f64,
) -> Result<EigenSolution> {
    let m = a.nrows();
    assert!(a.is_square() && b.shape() == a.shape(), "A and B must be square and equal-sized");

    let ea = SymmetricEigen::new(symmetrize(a));
    let lmax = ea.eigenvalues.iter().copied().fold(0.0, f64::max);
    if lmax <= 0.0 {
        return Ok(EigenSolution { theta: vec![0.0; m], gamma: Vec::new() });
    }
    let cutoff = ROOT_CUTOFF * lmax;
    let in_range: Vec<bool> = ea.eigenvalues.iter().map(|&l| l > cutoff).collect();
    let truncated = in_range.iter().any(|r| !r);
    let root = DVector::from_iterator(
        m,
        ea.eigenvalues.iter().zip(&in_range).map(|(&l, &r)| if r { l.sqrt() } else { 0.0 }),
    );
    let inv_root = root.map(|r| if r > 0.0 { 1.0 / r } else { 0.0 });
    let q = &ea.eigenvectors;
    let a_half = q * DMatrix::from_diagonal(&root) * q.transpose();
    let a_inv_half = q * DMatrix::from_diagonal(&inv_root) * q.transpose();

    let s = symmetrize(&(&a_half * b * &a_half * scale));
    let es = SymmetricEigen::new(s);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| es.eigenvalues[j].total_cmp(&es.eigenvalues[i]));

    let top = es.eigenvalues[order[0]].max(0.0);
    let keep_tol = (KEEP_REL * top).max(floor);

    // Projector onto range(A), used to measure the residual modulo null(A).
    let range_proj = if truncated {
        let mask = DVector::from_iterator(m, in_range.iter().map(|&r| if r { 1.0 } else { 0.0 }));
        Some(q * DMatrix::from_diagonal(&mask) * q.transpose())
    } else {
        None
    };

    let mut theta = Vec::with_capacity(m);
    let mut gamma = Vec::new();
    for (rank, &i) in order.iter().enumerate() {
        let val = es.eigenvalues[i];
        if val <= floor {
            theta.push(0.0);
            continue;
        }
        theta.push(val);
        if val <= keep_tol {
            continue;
        }
        let u = es.eigenvectors.column(i);
        let mut g = &a_inv_half * u;
        let norm = g.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Degenerate {
                index: rank + 1,
                detail: "eigenvector lies in the null space of A".into(),
            });
        }
        g /= norm;
        let lead = g.iter().enumerate().fold(0, |best, (k, v)| {
            if v.abs() > g[best].abs() {
                k
            } else {
                best
            }
        });
        if g[lead] < 0.0 {
            g.neg_mut();
        }
        let mut resid = b * (a * &g) * scale - &g * val;
        if let Some(p) = &range_proj {
            resid = p * resid;
        }
        if resid.norm() > RESIDUAL_TOL * val {
            return Err(Error::Degenerate {
                index: rank + 1,
                detail: format!(
                    "residual {:e} exceeds tolerance for eigenvalue {val:e}",
                    resid.norm()
                ),
            });
        }
        gamma.push(g);
    }
    Ok(EigenSolution { theta, gamma })
}

/// `#{j : θ̂ⱼ ≥ threshold}`.
pub fn count_at_least(theta: &[f64], threshold: f64) -> usize {
    theta.iter().take_while(|&&t| t >= threshold).count()
}

/// Selects `d̂`. When `θ̂₁ = 0` the threshold rule returns 0.
pub fn select_dimension(theta: &[f64], n: usize, rule: DimRule) -> usize {
    let positive = theta.iter().filter(|&&t| t > 0.0).count();
    match rule {
        DimRule::Fixed { d } => d.min(positive),
        DimRule::Threshold { c, exponent } => {
            let top = theta.first().copied().unwrap_or(0.0);
            if top <= 0.0 {
                return 0;
            }
            count_at_least(theta, c * top * (n as f64).powf(-exponent))
        }
    }
}

pub fn fit(panel: &CyclePanel, m: &WeightMeasure, cfg: &SpectralConfig) -> Result<SpectralModel> {
    fit_with(panel, m, cfg, Exec::default())
}

pub fn fit_with(
    panel: &CyclePanel,
    m: &WeightMeasure,
    cfg: &SpectralConfig,
    exec: Exec,
) -> Result<SpectralModel> {
    cfg.validate()?;
    if cfg.lag >= panel.len() {
        return Err(Error::InsufficientData(format!(
            "{} cycles cannot support lag p = {}",
            panel.len(),
            cfg.lag
        )));
    }
    let gram = mean_inner_products_with(panel, m, exec);
    fit_gram(&gram, cfg)
}

/// Fits from a precomputed centered Gram matrix.
pub fn fit_gram(gram: &CenteredGram, cfg: &SpectralConfig) -> Result<SpectralModel> {
    cfg.validate()?;
    let n = gram.n();
    let p = cfg.lag;
    if p >= n {
        return Err(Error::InsufficientData(format!("{n} cycles cannot support lag p = {p}")));
    }
    let (a, b) = lag_blocks(gram, p)?;
    let m = n - p;
    let scale = 1.0 / (m as f64 * m as f64);
    // Rounding in the centering leaves residues of order ε·‖raw‖ even when
    // every cycle is identical; eigenvalues at that level are zero.
    let raw_scale = gram.raw().diagonal().iter().copied().fold(0.0, f64::max);
    let floor = (1e-12 * raw_scale).powi(2);
    let sol = eig_m_with_floor(&a, &b, scale, floor)?;

    let g = gram.entries();
    let nf = n as f64;
    let mut psi_norms = Vec::with_capacity(sol.gamma.len());
    let mut scores = Vec::with_capacity(sol.gamma.len());
    let mut eigfun_coeffs = Vec::with_capacity(sol.gamma.len());
    for (j, gam) in sol.gamma.iter().enumerate() {
        let norm2 = (gam.transpose() * &a * gam)[(0, 0)];
        if !(norm2 > 0.0) {
            return Err(Error::Degenerate {
                index: j + 1,
                detail: format!("eigenfunction has nonpositive squared norm {norm2:e}"),
            });
        }
        let norm = norm2.sqrt();
        let w: Vec<f64> = (0..n)
            .map(|t| (0..m).map(|s| gam[s] * g[(t, s)]).sum::<f64>() / norm)
            .collect();
        let shift = gam.sum() / (norm * nf);
        let coeffs: Vec<f64> =
            (0..n).map(|t| if t < m { gam[t] / norm } else { 0.0 } - shift).collect();
        psi_norms.push(norm);
        scores.push(w);
        eigfun_coeffs.push(coeffs);
    }

    let kept = sol.gamma.len();
    let tied = (0..kept)
        .map(|j| {
            let close = |k: usize| {
                let (x, y) = (sol.theta[j], sol.theta[k]);
                (x - y).abs() < TIE_GAP * x.max(y)
            };
            (j > 0 && close(j - 1)) || (j + 1 < sol.theta.len() && close(j + 1))
        })
        .collect();
    let d_hat = select_dimension(&sol.theta, n, cfg.dim_rule).min(kept);

    Ok(SpectralModel {
        n,
        p,
        theta: sol.theta,
        gamma: sol.gamma.iter().map(|v| v.iter().copied().collect()).collect(),
        psi_norms,
        scores,
        mean_coeffs: vec![1.0 / nf; n],
        eigfun_coeffs,
        d_hat,
        tied,
    })
}
