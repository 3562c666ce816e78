//! Semi-parametric and non-parametric quantile models: historical simulation
//! and the CAViaR family with joint (VaR, ES) estimation.

pub mod caviar;
pub mod hs;

pub use caviar::{fit_caviar, forecast_caviar, CaviarFit, CaviarForm, CaviarSpec};
pub use hs::{hs_forecast, hs_insample_path, HsSpec};
