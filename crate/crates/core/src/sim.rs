//! The AR(1)-driven distribution process used as ground truth.
//!
//! `Fₜ = H + Wₜ ψ` on `[−1, 1]` with `H` uniform and
//! `ψ(x) = ∫₋₁ˣ (1/2 − |v|) dv`, i.e. `x(1+x)/2` on `[−1, 0]` and `x(1−x)/2`
//! on `[0, 1]`. The weights follow `Wₜ = αWₜ₋₁ + uₜ` with
//! `uₜ ~ U[−1+|α|, 1−|α|]`, so `|Wₜ| ≤ 1` and every `Fₜ` is a CDF. Under
//! Lebesgue measure on `[−1, 1]`, `‖ψ‖² = 1/60` and the lag-1 operator has the
//! single eigenvalue `α² (‖ψ‖² E W₀²)²`.
//!
//! Randomness comes from ChaCha8 streams: stream 0 of the seed drives the
//! latent path and stream `t + 1` drives the draws of cycle `t`, so changing
//! `q` never reshuffles another cycle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ecdf::CyclePanel;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::measure::WeightMeasure;
use crate::spectral::{self, DimRule, SpectralConfig};

/// `‖ψ‖²` under Lebesgue measure on `[−1, 1]`.
pub const PSI_NORM_SQ: f64 = 1.0 / 60.0;

/// How the latent AR(1) reaches stationarity before the first recorded cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartMode {
    /// Run the recursion `burn_in` steps from `W = 0`.
    #[default]
    BurnIn,
    /// Start from the MA(∞) sum truncated where `|α|ᵏ < 1e−17`.
    TruncatedMa,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub alpha: f64,
    pub n: usize,
    pub q: usize,
    pub seed: u64,
    pub burn_in: usize,
    #[serde(default)]
    pub start: StartMode,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { alpha: 0.5, n: 200, q: 200, seed: 20_240_601, burn_in: 1000, start: StartMode::BurnIn }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.abs() < 1.0) {
            return Err(Error::Config(format!("|alpha| must be < 1, got {}", self.alpha)));
        }
        if self.n < 1 || self.q < 1 {
            return Err(Error::Config("n and q must be at least 1".into()));
        }
        Ok(())
    }

    /// Population eigenvalue `α²λ²` of the lag-1 operator.
    pub fn target_theta(&self) -> f64 {
        let half_width = 1.0 - self.alpha.abs();
        let var_w = half_width * half_width / 3.0 / (1.0 - self.alpha * self.alpha);
        let lambda = PSI_NORM_SQ * var_w;
        self.alpha * self.alpha * lambda * lambda
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentPath {
    pub w: Vec<f64>,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// SplitMix64 finalizer; decorrelates replication seeds.
pub fn replication_seed(seed: u64, rep: u64) -> u64 {
    let mut z = seed.wrapping_add(rep.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn simulate_latent(cfg: &SimConfig) -> Result<LatentPath> {
    cfg.validate()?;
    let mut rng = stream(cfg.seed, 0);
    let half = 1.0 - cfg.alpha.abs();
    let mut draw = || -half + 2.0 * half * rng.random::<f64>();
    let mut w = match cfg.start {
        StartMode::BurnIn => {
            let mut w = 0.0;
            for _ in 0..cfg.burn_in {
                w = cfg.alpha * w + draw();
            }
            w
        }
        StartMode::TruncatedMa => {
            let terms = if cfg.alpha == 0.0 {
                1
            } else {
                (1e-17f64.ln() / cfg.alpha.abs().ln()).ceil() as usize + 1
            };
            let mut acc = 0.0;
            let mut pow = 1.0;
            for _ in 0..terms {
                acc += pow * draw();
                pow *= cfg.alpha;
            }
            acc
        }
    };
    let mut out = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        w = cfg.alpha * w + draw();
        out.push(w);
    }
    Ok(LatentPath { w: out })
}

/// Uniform CDF on `[−1, 1]`.
pub fn base_cdf(x: f64) -> f64 {
    ((x + 1.0) / 2.0).clamp(0.0, 1.0)
}

pub fn psi(x: f64) -> f64 {
    if x <= -1.0 || x >= 1.0 {
        0.0
    } else if x <= 0.0 {
        x * (1.0 + x) / 2.0
    } else {
        x * (1.0 - x) / 2.0
    }
}

/// `Fₜ(x) = H(x) + wψ(x)`.
pub fn latent_cdf_eval(w: f64, x: f64) -> Result<f64> {
    if !(w.abs() <= 1.0) {
        return Err(Error::Domain(format!("latent weight {w} outside [-1, 1]")));
    }
    Ok(if x <= -1.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        base_cdf(x) + w * psi(x)
    })
}

fn cdf_unchecked(w: f64, x: f64) -> f64 {
    if x <= -1.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        base_cdf(x) + w * psi(x)
    }
}

/// Solves `Fₜ(x) = u`.
pub fn inverse_cdf(w: f64, u: f64) -> f64 {
    if w.abs() < 1e-10 {
        return (2.0 * u - 1.0).clamp(-1.0, 1.0);
    }
    // On each half the equation is a quadratic a x² + (1+w) x + (1−2u) = 0
    // with a = w left of 0 and a = −w right of 0; the root continuous in w is
    // −2c / (b + √D).
    let left = u < 0.5;
    let a = if left { w } else { -w };
    let b = 1.0 + w;
    let c = 1.0 - 2.0 * u;
    let disc = b * b - 4.0 * a * c;
    let denom = b + disc.max(0.0).sqrt();
    let x = if denom > 0.0 { -2.0 * c / denom } else { 0.0 };
    let (lo, hi) = if left { (-1.0, 0.0) } else { (0.0, 1.0) };
    if x.is_finite() && (lo..=hi).contains(&x) {
        return x;
    }
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if cdf_unchecked(w, mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `q` independent draws from `Fₜ`, sorted.
pub fn sample_day<R: Rng + ?Sized>(w: f64, q: usize, rng: &mut R) -> Vec<f64> {
    let mut xs: Vec<f64> = (0..q).map(|_| inverse_cdf(w, rng.random::<f64>())).collect();
    xs.sort_by(f64::total_cmp);
    xs
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPanel {
    pub latent: LatentPath,
    pub cycles: Vec<Vec<f64>>,
}

impl SimulatedPanel {
    pub fn panel(&self) -> Result<CyclePanel> {
        CyclePanel::new(self.cycles.clone())
    }
}

pub fn simulate_panel(cfg: &SimConfig) -> Result<SimulatedPanel> {
    let latent = simulate_latent(cfg)?;
    let cycles = latent
        .w
        .iter()
        .enumerate()
        .map(|(t, &w)| sample_day(w, cfg.q, &mut stream(cfg.seed, t as u64 + 1)))
        .collect();
    Ok(SimulatedPanel { latent, cycles })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McSettings {
    pub lag: usize,
    pub dim_rule: DimRule,
    /// Midpoint-rule cells on `[−1, 1]` for the `L²` norms.
    pub grid: usize,
}

impl Default for McSettings {
    fn default() -> Self {
        Self { lag: 1, dim_rule: DimRule::default(), grid: 2048 }
    }
}

/// One Monte Carlo replication. Error fields are `NaN` when the fit failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRecord {
    pub rep: usize,
    pub seed: u64,
    /// Leading eigenvalues (up to five).
    pub theta: Vec<f64>,
    pub d_hat: usize,
    /// Sign `s` minimising `‖sψ̂₁ − ψ/‖ψ‖‖`.
    pub psi_sign: f64,
    pub psi_error: f64,
    /// `maxₜ |s Ŵₜ₁ − Wₜ ‖ψ‖|`.
    pub score_max_error: f64,
    /// `‖F̃₁ − F₁‖` with `F̃₁` built from one component.
    pub ftilde_error: f64,
    pub fhat_error: f64,
    pub fhat_sup_error: f64,
    /// `‖ÊF₀ − H‖`.
    pub mean_error: f64,
    pub error: Option<String>,
}

fn l2_grid(f: &[f64], h: f64) -> f64 {
    (f.iter().map(|v| v * v).sum::<f64>() * h).sqrt()
}

fn ks_distance(sample: &[f64], w: f64) -> f64 {
    let q = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf_unchecked(w, x);
            (f - i as f64 / q).abs().max(((i + 1) as f64 / q - f).abs())
        })
        .fold(0.0, f64::max)
}

fn replicate(cfg: &SimConfig, settings: &McSettings, rep: usize) -> McRecord {
    let seed = replication_seed(cfg.seed, rep as u64);
    let rcfg = SimConfig { seed, ..*cfg };
    let mut rec = McRecord {
        rep,
        seed,
        theta: Vec::new(),
        d_hat: 0,
        psi_sign: f64::NAN,
        psi_error: f64::NAN,
        score_max_error: f64::NAN,
        ftilde_error: f64::NAN,
        fhat_error: f64::NAN,
        fhat_sup_error: f64::NAN,
        mean_error: f64::NAN,
        error: None,
    };
    let sim = match simulate_panel(&rcfg) {
        Ok(s) => s,
        Err(e) => {
            rec.error = Some(e.to_string());
            return rec;
        }
    };
    let panel = match sim.panel() {
        Ok(p) => p,
        Err(e) => {
            rec.error = Some(e.to_string());
            return rec;
        }
    };
    let h = 2.0 / settings.grid as f64;
    let grid: Vec<f64> = (0..settings.grid).map(|i| -1.0 + (i as f64 + 0.5) * h).collect();
    let n = panel.len();

    let mean_coeffs = vec![1.0 / n as f64; n];
    let ef0 = panel.eval_combination(&mean_coeffs, &grid);
    let diff: Vec<f64> = ef0.iter().zip(&grid).map(|(e, &x)| e - base_cdf(x)).collect();
    rec.mean_error = l2_grid(&diff, h);

    let w1 = sim.latent.w[0];
    let f1: Vec<f64> = grid.iter().map(|&x| cdf_unchecked(w1, x)).collect();
    let fhat1 = panel.cycle(0).eval_sorted(&grid);
    let diff: Vec<f64> = fhat1.iter().zip(&f1).map(|(a, b)| a - b).collect();
    rec.fhat_error = l2_grid(&diff, h);
    rec.fhat_sup_error = ks_distance(panel.cycle(0).samples(), w1);

    let measure = WeightMeasure::Lebesgue { lower: -1.0, upper: 1.0 };
    let scfg = SpectralConfig { lag: settings.lag, dim_rule: settings.dim_rule };
    let model = match spectral::fit_with(&panel, &measure, &scfg, Exec::Sequential) {
        Ok(m) => m,
        Err(e) => {
            rec.error = Some(e.to_string());
            return rec;
        }
    };
    rec.theta = model.theta.iter().take(5).copied().collect();
    rec.d_hat = model.d_hat;
    if model.kept() == 0 {
        rec.error = Some("no nonzero eigenvalue".into());
        return rec;
    }

    let psi_norm = PSI_NORM_SQ.sqrt();
    let psi_hat = spectral::eigenfunction_trace(&model, &panel, 0, &grid);
    let target: Vec<f64> = grid.iter().map(|&x| psi(x) / psi_norm).collect();
    let err = |s: f64| {
        let d: Vec<f64> = psi_hat.iter().zip(&target).map(|(a, b)| s * a - b).collect();
        l2_grid(&d, h)
    };
    let (plus, minus) = (err(1.0), err(-1.0));
    let sign = if plus <= minus { 1.0 } else { -1.0 };
    rec.psi_sign = sign;
    rec.psi_error = plus.min(minus);

    rec.score_max_error = model.scores[0]
        .iter()
        .zip(&sim.latent.w)
        .map(|(wh, w)| (sign * wh - w * psi_norm).abs())
        .fold(0.0, f64::max);

    match spectral::reconstruct_cdf(&model, 0, 1) {
        Ok(coeffs) => {
            let ft = panel.eval_combination(&coeffs, &grid);
            let d: Vec<f64> = ft.iter().zip(&f1).map(|(a, b)| a - b).collect();
            rec.ftilde_error = l2_grid(&d, h);
        }
        Err(e) => rec.error = Some(e.to_string()),
    }
    rec
}

pub fn run_monte_carlo(cfg: &SimConfig, reps: usize, settings: &McSettings) -> Result<Vec<McRecord>> {
    run_monte_carlo_with(cfg, reps, settings, Exec::default())
}

/// Replications are independent; replication `r` uses
/// [`replication_seed`]`(cfg.seed, r)` whatever the execution order.
pub fn run_monte_carlo_with(
    cfg: &SimConfig,
    reps: usize,
    settings: &McSettings,
    exec: Exec,
) -> Result<Vec<McRecord>> {
    cfg.validate()?;
    if reps < 1 {
        return Err(Error::Config("at least one replication is required".into()));
    }
    if cfg.n < 2 {
        return Err(Error::Config("Monte Carlo needs n ≥ 2 cycles".into()));
    }
    SpectralConfig::new(settings.lag, settings.dim_rule)?;
    Ok(exec.map_indexed(reps, |r| replicate(cfg, settings, r)))
}

/// Linear-interpolation sample quantile of finite values.
pub fn sample_quantile(values: &[f64], prob: f64) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let pos = prob.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

pub fn median(values: &[f64]) -> f64 {
    sample_quantile(values, 0.5)
}
