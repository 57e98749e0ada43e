//! Empirical CDFs of the per-cycle samples and their exact `L²(μ)` inner
//! products.
//!
//! For step functions the integral `∫ F̂ₜ F̂ₛ dμ` collapses to a double sum of
//! tail masses at `max(Xᵢₜ, Xⱼₛ)`. Sorted samples let us evaluate that sum in a
//! single merge pass: at every distinct value `v` of the union the number of
//! pairs whose maximum equals `v` is `#x≤v · #y≤v − #x<v · #y<v`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::measure::WeightMeasure;

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    samples: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Data("empirical CDF needs at least one observation".into()));
        }
        if let Some(bad) = samples.iter().find(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite observation {bad}")));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `(1/q) #{i : Xᵢ ≤ x}`.
    pub fn eval(&self, x: f64) -> f64 {
        self.samples.partition_point(|&v| v <= x) as f64 / self.len() as f64
    }

    /// Evaluates at every point of an ascending grid in one pass.
    pub fn eval_sorted(&self, xs: &[f64]) -> Vec<f64> {
        let q = self.len() as f64;
        let mut k = 0;
        xs.iter()
            .map(|&x| {
                while k < self.samples.len() && self.samples[k] <= x {
                    k += 1;
                }
                k as f64 / q
            })
            .collect()
    }

    /// `(1/q) Σ Xᵢᵏ`.
    pub fn raw_moment(&self, k: i32) -> f64 {
        self.samples.iter().map(|x| x.powi(k)).sum::<f64>() / self.len() as f64
    }

    pub fn mean(&self) -> f64 {
        self.raw_moment(1)
    }

    /// Empirical variance with divisor `q`, i.e. the variance of `F̂`.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / self.len() as f64
    }
}

/// Exact `⟨F̂ₜ, F̂ₛ⟩_μ` for sorted samples `x`, `y` with their tail masses.
///
/// Terms are added in ascending order of the merged support and pair counts
/// are integers, so the result is bit-identical under argument swap.
fn merge_inner(x: &[f64], tx: &[f64], y: &[f64], ty: &[f64]) -> f64 {
    let (nx, ny) = (x.len(), y.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut sum = 0.0;
    while i < nx || j < ny {
        let (v, t) = if j == ny || (i < nx && x[i] <= y[j]) {
            (x[i], tx[i])
        } else {
            (y[j], ty[j])
        };
        let below = (i * j) as u64;
        while i < nx && x[i] == v {
            i += 1;
        }
        while j < ny && y[j] == v {
            j += 1;
        }
        sum += t * ((i * j) as u64 - below) as f64;
    }
    sum / (nx as f64 * ny as f64)
}

/// Closed-form inner product of two ECDFs in `L²(μ)`, in `O(q_t + q_s)`.
pub fn inner_product(ft: &EmpiricalCdf, fs: &EmpiricalCdf, m: &WeightMeasure) -> f64 {
    let tx: Vec<f64> = ft.samples.iter().map(|&v| m.tail_mass(v)).collect();
    let ty: Vec<f64> = fs.samples.iter().map(|&v| m.tail_mass(v)).collect();
    merge_inner(&ft.samples, &tx, &fs.samples, &ty)
}

/// The direct `O(q_t q_s)` double sum; kept as a reference for the merge scan.
pub fn inner_product_naive(ft: &EmpiricalCdf, fs: &EmpiricalCdf, m: &WeightMeasure) -> f64 {
    let mut sum = 0.0;
    for &a in &ft.samples {
        for &b in &fs.samples {
            sum += m.tail_mass(a.max(b));
        }
    }
    sum / (ft.len() as f64 * fs.len() as f64)
}

/// Observations `X_it`, one sorted sample per cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CyclePanel {
    cycles: Vec<EmpiricalCdf>,
    labels: Option<Vec<String>>,
}

impl CyclePanel {
    pub fn new(cycles: Vec<Vec<f64>>) -> Result<Self> {
        if cycles.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "a panel needs at least 2 cycles, got {}",
                cycles.len()
            )));
        }
        let cycles = cycles
            .into_iter()
            .enumerate()
            .map(|(t, c)| {
                EmpiricalCdf::new(c).map_err(|e| Error::Data(format!("cycle {}: {e}", t + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { cycles, labels: None })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.cycles.len() {
            return Err(Error::Data(format!(
                "{} labels for {} cycles",
                labels.len(),
                self.cycles.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }

    pub fn cycle(&self, t: usize) -> &EmpiricalCdf {
        &self.cycles[t]
    }

    pub fn cycles(&self) -> &[EmpiricalCdf] {
        &self.cycles
    }

    /// The first `n` cycles.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n < 2 || n > self.len() {
            return Err(Error::InsufficientData(format!(
                "prefix of {n} cycles from a panel of {}",
                self.len()
            )));
        }
        Ok(Self {
            cycles: self.cycles[..n].to_vec(),
            labels: self.labels.as_ref().map(|l| l[..n].to_vec()),
        })
    }

    /// Subtracts each cycle's own sample mean.
    pub fn demeaned(&self) -> Self {
        let cycles = self
            .cycles
            .iter()
            .map(|c| {
                let m = c.mean();
                EmpiricalCdf { samples: c.samples.iter().map(|x| x - m).collect() }
            })
            .collect();
        Self { cycles, labels: self.labels.clone() }
    }

    /// Per-cycle empirical variances `σ̂²ₜ`.
    pub fn variances(&self) -> Vec<f64> {
        self.cycles.iter().map(EmpiricalCdf::variance).collect()
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.cycles.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
            (lo.min(c.samples[0]), hi.max(c.samples[c.len() - 1]))
        })
    }

    /// Pools all observations, sorted ascending.
    pub fn pooled(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.cycles.iter().flat_map(|c| c.samples.iter().copied()).collect();
        all.sort_by(f64::total_cmp);
        all
    }

    /// Evaluates `Σₜ cₜ F̂ₜ` on an ascending grid.
    pub fn eval_combination(&self, coeffs: &[f64], xs: &[f64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.len(), "one coefficient per cycle");
        let mut out = vec![0.0; xs.len()];
        for (c, f) in coeffs.iter().zip(&self.cycles) {
            if *c == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(f.eval_sorted(xs)) {
                *o += c * v;
            }
        }
        out
    }
}

/// `k`-th Stieltjes moment of the signed measure `Σ cₜ dF̂ₜ`.
pub fn signed_combo_moment(panel: &CyclePanel, coeffs: &[f64], k: i32) -> f64 {
    assert_eq!(coeffs.len(), panel.len(), "one coefficient per cycle");
    coeffs
        .iter()
        .zip(panel.cycles())
        .map(|(c, f)| if *c == 0.0 { 0.0 } else { c * f.raw_moment(k) })
        .sum()
}

/// Matrix of raw inner products `⟨F̂ₜ, F̂ₛ⟩_μ`.
pub fn raw_gram(panel: &CyclePanel, m: &WeightMeasure, exec: Exec) -> DMatrix<f64> {
    let n = panel.len();
    let tails: Vec<Vec<f64>> = exec.map_indexed(n, |t| {
        panel.cycles[t].samples.iter().map(|&v| m.tail_mass(v)).collect()
    });
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|t| (t..n).map(move |s| (t, s))).collect();
    let values = exec.map_indexed(pairs.len(), |k| {
        let (t, s) = pairs[k];
        merge_inner(&panel.cycles[t].samples, &tails[t], &panel.cycles[s].samples, &tails[s])
    });
    let mut g = DMatrix::zeros(n, n);
    for (&(t, s), v) in pairs.iter().zip(values) {
        g[(t, s)] = v;
        g[(s, t)] = v;
    }
    g
}

/// Centered inner products `⟨F̂ₜ − ÊF₀, F̂ₛ − ÊF₀⟩_μ`, together with the raw
/// matrix they were derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredGram {
    entries: DMatrix<f64>,
    raw: DMatrix<f64>,
}

impl CenteredGram {
    /// Centers a raw Gram matrix with the four-term expansion.
    pub fn from_raw(raw: DMatrix<f64>) -> Self {
        let n = raw.nrows();
        assert_eq!(n, raw.ncols(), "Gram matrix must be square");
        let nf = n as f64;
        let row_means: Vec<f64> = (0..n).map(|t| raw.row(t).iter().sum::<f64>() / nf).collect();
        let grand = row_means.iter().sum::<f64>() / nf;
        let mut entries = DMatrix::zeros(n, n);
        for t in 0..n {
            for s in t..n {
                let v = raw[(t, s)] - row_means[t] - row_means[s] + grand;
                entries[(t, s)] = v;
                entries[(s, t)] = v;
            }
        }
        Self { entries, raw }
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn raw(&self) -> &DMatrix<f64> {
        &self.raw
    }

    /// Re-centers the leading `n×n` block of the raw matrix, i.e. the Gram
    /// of the first `n` cycles alone.
    pub fn leading(&self, n: usize) -> Self {
        Self::from_raw(self.raw.view((0, 0), (n, n)).into_owned())
    }

    /// `cᵀ G c`, the squared norm of `Σ cₜ (F̂ₜ − ÊF₀)`.
    pub fn quadratic_form(&self, c: &[f64]) -> f64 {
        let v = nalgebra::DVector::from_column_slice(c);
        (v.transpose() * &self.entries * &v)[(0, 0)]
    }
}

pub fn mean_inner_products(panel: &CyclePanel, m: &WeightMeasure) -> CenteredGram {
    mean_inner_products_with(panel, m, Exec::default())
}

pub fn mean_inner_products_with(panel: &CyclePanel, m: &WeightMeasure, exec: Exec) -> CenteredGram {
    CenteredGram::from_raw(raw_gram(panel, m, exec))
}
