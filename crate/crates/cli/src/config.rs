//! Run configuration, read from a single TOML or JSON document.

use std::path::{Path, PathBuf};

use latentcdf::sim::{McSettings, SimConfig, StartMode};
use latentcdf::tsmodel::DEFAULT_ORDERS;
use latentcdf::{DimRule, SpectralConfig, WeightMeasure};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Seed used by `simulate` and `montecarlo` unless overridden.
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub measure: WeightMeasure,
    /// Lag window `p`.
    pub p: usize,
    pub dim_rule: DimRule,
    /// Subtract each cycle's own mean before estimation.
    pub demean_per_cycle: bool,
    /// Candidate `(ar, ma)` orders for score forecasting.
    pub arma_orders: Vec<(usize, usize)>,
    pub quantiles: Vec<f64>,
    /// First forecast origin of the backtest.
    pub n0: usize,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub sim: SimSection,
    pub montecarlo: MonteCarloSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub alpha: f64,
    pub n: usize,
    pub q: usize,
    pub burn_in: usize,
    pub start: StartMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloSection {
    pub reps: usize,
    pub lag: usize,
    pub dim_rule: DimRule,
    pub grid: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            measure: WeightMeasure::Laplace { location: 0.0, scale: 1.0 },
            p: 5,
            dim_rule: DimRule::default(),
            demean_per_cycle: true,
            arma_orders: DEFAULT_ORDERS.to_vec(),
            quantiles: vec![0.01, 0.05, 0.5, 0.95, 0.99],
            n0: 350,
            out_dir: PathBuf::from("out"),
            seed: DEFAULT_SEED,
            sim: SimSection::default(),
            montecarlo: MonteCarloSection::default(),
        }
    }
}

impl Default for SimSection {
    fn default() -> Self {
        let d = SimConfig::default();
        Self { alpha: d.alpha, n: d.n, q: d.q, burn_in: d.burn_in, start: d.start }
    }
}

impl Default for MonteCarloSection {
    fn default() -> Self {
        let d = McSettings::default();
        Self { reps: 100, lag: d.lag, dim_rule: d.dim_rule, grid: d.grid }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
        let cfg: RunConfig = match ext.as_str() {
            "toml" => toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?,
            "json" => serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?,
            _ => {
                return Err(CliError::Config(format!(
                    "{}: config must end in .toml or .json",
                    path.display()
                )))
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.measure.validate()?;
        self.spectral().validate()?;
        if self.arma_orders.is_empty() {
            return Err(CliError::Config("arma_orders must not be empty".into()));
        }
        if let Some(tau) = self.quantiles.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(CliError::Config(format!("quantile level {tau} outside (0, 1)")));
        }
        self.sim_config().validate()?;
        if self.montecarlo.reps < 1 || self.montecarlo.grid < 1 {
            return Err(CliError::Config("montecarlo.reps and montecarlo.grid must be positive".into()));
        }
        SpectralConfig::new(self.montecarlo.lag, self.montecarlo.dim_rule)?;
        Ok(())
    }

    pub fn spectral(&self) -> SpectralConfig {
        SpectralConfig { lag: self.p, dim_rule: self.dim_rule }
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            alpha: self.sim.alpha,
            n: self.sim.n,
            q: self.sim.q,
            seed: self.seed,
            burn_in: self.sim.burn_in,
            start: self.sim.start,
        }
    }

    pub fn mc_settings(&self) -> McSettings {
        McSettings { lag: self.montecarlo.lag, dim_rule: self.montecarlo.dim_rule, grid: self.montecarlo.grid }
    }
}
