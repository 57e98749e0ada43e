//! Scalar time-series tools for the latent scores and the variance baseline.

mod arma;
mod diagnostics;
mod har;
mod lad;
mod simplex;

pub use arma::{css_residuals, fit_arma, forecast_arma, select_arma, AicEntry, ArmaFit};
pub use diagnostics::{diebold_mariano, ljung_box, DmTest, LjungBox};
pub use har::{fit_har, har_forecast, HarFit};
pub use lad::{lad_objective, lad_regression};
pub use simplex::{nelder_mead, SimplexResult};

/// Default candidate `(p_ar, q_ma)` orders for AIC selection.
pub const DEFAULT_ORDERS: [(usize, usize); 7] =
    [(0, 0), (1, 0), (0, 1), (1, 1), (1, 2), (2, 1), (2, 2)];
