//! Independent oracles and Monte Carlo drivers shared by the integration
//! tests and the acceptance harness. Nothing here calls the library's
//! inner-product or eigen code.
#![allow(dead_code)]

use latentcdf::tsmodel::{self, diebold_mariano, fit_arma, ljung_box, select_arma};
use latentcdf::WeightMeasure;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gauss–Legendre nodes and weights on `[−1, 1]` by Newton iteration on `Pₖ`.
pub fn gauss_legendre(k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; k];
    let mut weights = vec![0.0; k];
    for i in 0..k {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (k as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=k {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = k as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(20);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let (lo, hi) = (a + k as f64 * h, a + (k + 1) as f64 * h);
        let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        total += half * nodes.iter().zip(&weights).map(|(x, w)| w * f(mid + half * x)).sum::<f64>();
    }
    total
}

fn density(m: &WeightMeasure, x: f64) -> f64 {
    match *m {
        WeightMeasure::Lebesgue { lower, upper } => {
            if (lower..=upper).contains(&x) {
                1.0
            } else {
                0.0
            }
        }
        WeightMeasure::Laplace { location, scale } => (-(x - location).abs() / scale).exp() / (2.0 * scale),
    }
}

/// Right end beyond which the measure carries no (or < 1e−21 relative) mass.
fn support(m: &WeightMeasure) -> (f64, f64) {
    match *m {
        WeightMeasure::Lebesgue { lower, upper } => (lower, upper),
        WeightMeasure::Laplace { location, scale } => (location - 50.0 * scale, location + 50.0 * scale),
    }
}

fn kinks(m: &WeightMeasure) -> Vec<f64> {
    match *m {
        WeightMeasure::Lebesgue { lower, upper } => vec![lower, upper],
        WeightMeasure::Laplace { location, .. } => vec![location],
    }
}

/// `μ[a, b)` by quadrature of the density, split at its kinks.
pub fn quad_mass(m: &WeightMeasure, a: f64, b: f64) -> f64 {
    let (lo, hi) = support(m);
    let (a, b) = (a.max(lo), b.min(hi));
    if a >= b {
        return 0.0;
    }
    let mut cuts = vec![a];
    cuts.extend(kinks(m).into_iter().filter(|&k| k > a && k < b));
    cuts.push(b);
    let unit = match *m {
        WeightMeasure::Lebesgue { .. } => f64::INFINITY,
        WeightMeasure::Laplace { scale, .. } => scale,
    };
    cuts.windows(2)
        .map(|w| {
            let panels = ((w[1] - w[0]) / unit).ceil().clamp(1.0, 200.0) as usize;
            integrate(|x| density(m, x), w[0], w[1], panels)
        })
        .sum()
}

fn ecdf_at(sorted: &[f64], x: f64) -> f64 {
    sorted.iter().filter(|&&v| v <= x).count() as f64 / sorted.len() as f64
}

/// `∫ F̂ₓ F̂ᵧ dμ` by quadrature over the intervals between breakpoints.
pub fn quadrature_inner(xs: &[f64], ys: &[f64], m: &WeightMeasure) -> f64 {
    let mut xs = xs.to_vec();
    let mut ys = ys.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let mut breaks: Vec<f64> = xs.iter().chain(&ys).copied().collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let far = support(m).1.max(*breaks.last().unwrap()) + 1.0;
    breaks.push(far);
    breaks
        .windows(2)
        .map(|w| ecdf_at(&xs, w[0]) * ecdf_at(&ys, w[0]) * quad_mass(m, w[0], w[1]))
        .sum()
}

pub fn random_cycles<R: Rng>(rng: &mut R, n: usize, q: usize, ties: bool) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            (0..q)
                .map(|_| {
                    let v: f64 = rng.random_range(-2.0..2.0);
                    if ties {
                        (v * 4.0).round() / 4.0
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect()
}

pub fn random_measure<R: Rng>(rng: &mut R, laplace: bool) -> WeightMeasure {
    if laplace {
        WeightMeasure::Laplace { location: rng.random_range(-0.5..0.5), scale: rng.random_range(0.2..2.0) }
    } else {
        WeightMeasure::Lebesgue { lower: rng.random_range(-2.5..-0.5), upper: rng.random_range(0.5..2.5) }
    }
}

/// A grid of `size` distinct points containing every observation, with
/// cell weights `μ[xᵢ, xᵢ₊₁)` (the last cell runs to `+∞`).
pub fn step_grid(cycles: &[Vec<f64>], m: &WeightMeasure, size: usize) -> (Vec<f64>, Vec<f64>) {
    let mut pts: Vec<f64> = cycles.iter().flatten().copied().collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    assert!(pts.len() <= size, "grid too small for {} observations", pts.len());
    let (lo, hi) = (pts[0], *pts.last().unwrap());
    let fill = size - pts.len();
    // Irrational offset keeps fill points off tied observations; a rare
    // collision only shrinks the grid, which stays exact.
    let offset = 0.5 + 0.1 * std::f64::consts::FRAC_1_SQRT_2;
    pts.extend((0..fill).map(|i| lo + (hi - lo) * (i as f64 + offset) / fill as f64));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let far = support(m).1.max(hi) + 1.0;
    let weights = (0..pts.len())
        .map(|i| quad_mass(m, pts[i], if i + 1 < pts.len() { pts[i + 1] } else { far }))
        .collect();
    (pts, weights)
}

/// Nonzero eigenvalues of the discretised lag operator, descending.
pub fn grid_operator_eigenvalues(cycles: &[Vec<f64>], m: &WeightMeasure, p: usize, size: usize) -> Vec<f64> {
    let n = cycles.len();
    let mm = n - p;
    let (grid, w) = step_grid(cycles, m, size);
    let sorted: Vec<Vec<f64>> = cycles
        .iter()
        .map(|c| {
            let mut c = c.clone();
            c.sort_by(f64::total_cmp);
            c
        })
        .collect();
    let f = DMatrix::from_fn(grid.len(), n, |i, t| ecdf_at(&sorted[t], grid[i]));
    let mean = DVector::from_fn(grid.len(), |i, _| f.row(i).sum() / n as f64);
    let y = DMatrix::from_fn(grid.len(), n, |i, t| f[(i, t)] - mean[i]);
    let wmat = DMatrix::from_diagonal(&DVector::from_vec(w.clone()));
    let mut bsum = DMatrix::zeros(mm, mm);
    for k in 1..=p {
        let yk = y.columns(k, mm);
        bsum += yk.transpose() * &wmat * yk;
    }
    bsum /= (mm * mm) as f64;
    let root = DMatrix::from_diagonal(&DVector::from_iterator(w.len(), w.iter().map(|v| v.sqrt())));
    let left = root * y.columns(0, mm);
    let s = &left * bsum * left.transpose();
    let s = (&s + s.transpose()) * 0.5;
    let mut eig: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    eig
}

/// Largest eigenvalue by power iteration.
pub fn power_iteration(mat: &DMatrix<f64>) -> f64 {
    let mut v = DVector::from_fn(mat.nrows(), |i, _| 1.0 + (i as f64 + 1.0).sqrt());
    let mut theta = 0.0;
    for _ in 0..10_000 {
        let next = mat * &v;
        let norm = next.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = next / norm;
        let est = next.dot(&(mat * &next));
        let done = (est - theta).abs() <= 1e-15 * est.abs();
        theta = est;
        v = next;
        if done {
            break;
        }
    }
    theta
}

pub fn normal_series<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn ar1_series<R: Rng>(rng: &mut R, phi: f64, n: usize) -> Vec<f64> {
    let mut x = 0.0;
    for _ in 0..500 {
        x = phi * x + rng.sample::<f64, _>(StandardNormal);
    }
    (0..n)
        .map(|_| {
            x = phi * x + rng.sample::<f64, _>(StandardNormal);
            x
        })
        .collect()
}

pub fn median(v: &[f64]) -> f64 {
    latentcdf::sim::median(v)
}

/// Median `φ̂` of ARMA(1,0) fits to `AR(1)` series.
pub fn ar1_recovery(phi: f64, n: usize, seeds: u64) -> f64 {
    let est: Vec<f64> =
        (0..seeds).map(|s| fit_arma(&ar1_series(&mut rng(1000 + s), phi, n), 1, 0).unwrap().ar[0]).collect();
    median(&est)
}

/// Share of white-noise series for which AIC picks `(0, 0)`.
pub fn white_noise_aic_rate(n: usize, seeds: u64) -> f64 {
    let orders = [(0, 0), (1, 0), (0, 1), (1, 1)];
    let hits = (0..seeds)
        .filter(|&s| select_arma(&normal_series(&mut rng(2000 + s), n), &orders).unwrap().0.order == (0, 0))
        .count();
    hits as f64 / seeds as f64
}

pub const LB_LAGS: usize = 10;

pub fn ljung_box_size(n: usize, seeds: u64) -> f64 {
    let rejections = (0..seeds)
        .filter(|&s| ljung_box(&normal_series(&mut rng(3000 + s), n), LB_LAGS).unwrap().p_value < 0.05)
        .count();
    rejections as f64 / seeds as f64
}

/// Largest p-value across persistent `AR(1)` series.
pub fn ljung_box_power_max_p(phi: f64, n: usize, seeds: u64) -> f64 {
    (0..seeds)
        .map(|s| ljung_box(&ar1_series(&mut rng(4000 + s), phi, n), LB_LAGS).unwrap().p_value)
        .fold(0.0, f64::max)
}

/// Median LAD coefficients for `y = 1 + 2x + Laplace noise`.
pub fn lad_recovery(n: usize, seeds: u64) -> (f64, f64) {
    let mut b0 = Vec::new();
    let mut b1 = Vec::new();
    for s in 0..seeds {
        let mut r = rng(5000 + s);
        let x: Vec<f64> = (0..n).map(|_| r.random_range(-3.0..3.0)).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|xi| {
                let e1: f64 = r.sample(Exp1);
                let e2: f64 = r.sample(Exp1);
                1.0 + 2.0 * xi + (e1 - e2)
            })
            .collect();
        let design = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { x[i] });
        let beta = tsmodel::lad_regression(&y, &design).unwrap();
        b0.push(beta[0]);
        b1.push(beta[1]);
    }
    (median(&b0), median(&b1))
}

/// Two-sided 5% rejection rate of DM under equal accuracy.
pub fn dm_size(n: usize, seeds: u64) -> f64 {
    let rejections = (0..seeds)
        .filter(|&s| {
            let mut r = rng(6000 + s);
            let a = normal_series(&mut r, n);
            let b = normal_series(&mut r, n);
            diebold_mariano(&a, &b).unwrap().p_two_sided < 0.05
        })
        .count();
    rejections as f64 / seeds as f64
}
