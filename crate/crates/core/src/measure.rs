//! Weight measures `μ` for the `L²(μ)` embedding of distribution functions.
//!
//! Every closed-form inner product between empirical CDFs reduces to the
//! tail mass `μ[x, ∞)`, so that is the only primitive a measure must supply.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum WeightMeasure {
    /// Lebesgue measure restricted to `[lower, upper]`.
    Lebesgue { lower: f64, upper: f64 },
    /// The Laplace probability distribution.
    Laplace { location: f64, scale: f64 },
}

impl WeightMeasure {
    pub fn lebesgue(lower: f64, upper: f64) -> Result<Self> {
        let m = WeightMeasure::Lebesgue { lower, upper };
        m.validate()?;
        Ok(m)
    }

    pub fn laplace(location: f64, scale: f64) -> Result<Self> {
        let m = WeightMeasure::Laplace { location, scale };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            WeightMeasure::Lebesgue { lower, upper } => {
                if !(lower.is_finite() && upper.is_finite() && lower < upper) {
                    return Err(Error::Config(format!(
                        "lebesgue measure needs finite lower < upper, got [{lower}, {upper}]"
                    )));
                }
            }
            WeightMeasure::Laplace { location, scale } => {
                if !(location.is_finite() && scale.is_finite() && scale > 0.0) {
                    return Err(Error::Config(format!(
                        "laplace measure needs finite location and scale > 0, got ({location}, {scale})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `μ(ℝ)`.
    pub fn total_mass(&self) -> f64 {
        match *self {
            WeightMeasure::Lebesgue { lower, upper } => upper - lower,
            WeightMeasure::Laplace { .. } => 1.0,
        }
    }

    /// `μ[x, ∞)`, closed at `x`.
    pub fn tail_mass(&self, x: f64) -> f64 {
        match *self {
            WeightMeasure::Lebesgue { lower, upper } => {
                if x <= lower {
                    upper - lower
                } else if x >= upper {
                    0.0
                } else {
                    upper - x
                }
            }
            WeightMeasure::Laplace { location, scale } => {
                let z = (x - location) / scale;
                if z >= 0.0 {
                    0.5 * (-z).exp()
                } else {
                    1.0 - 0.5 * z.exp()
                }
            }
        }
    }

    /// Lebesgue density of `μ` (for quadrature-based checks and plotting).
    pub fn density(&self, x: f64) -> f64 {
        match *self {
            WeightMeasure::Lebesgue { lower, upper } => {
                if (lower..=upper).contains(&x) {
                    1.0
                } else {
                    0.0
                }
            }
            WeightMeasure::Laplace { location, scale } => {
                0.5 / scale * (-(x - location).abs() / scale).exp()
            }
        }
    }

    /// `μ[a, b)` for `a ≤ b`.
    pub fn interval_mass(&self, a: f64, b: f64) -> f64 {
        self.tail_mass(a) - self.tail_mass(b)
    }
}
