//! One-step-ahead tail-risk forecasting with forecast combination.
//!
//! The crate estimates Value-at-Risk (VaR) and Expected Shortfall (ES) at
//! small tail probabilities from a universe of volatility, historical
//! simulation, and CAViaR-style quantile models, scores the forecasts with
//! strictly consistent joint (VaR, ES) loss functions, prunes the universe
//! each step with a Model Confidence Set over a training window, and combines
//! the survivors with equal-weight, median, relative-score, and
//! minimum-score weighting schemes. A rolling out-of-sample pipeline ties the
//! pieces together and a backtest layer (coverage tests and ES regressions)
//! evaluates the resulting forecasts.
//!
//! Everything downstream of a user-supplied seed is deterministic: model
//! fits, bootstrap replicates, and random multi-starts all derive their RNG
//! streams from stable (seed, purpose, index) tags, so results are
//! byte-identical across runs and worker counts.

pub mod backtest;
pub mod combine;
pub mod data;
pub mod dist;
pub mod error;
pub mod mcs;
pub mod models;
pub mod optim;
pub mod pipeline;
pub mod quantile;
pub mod rng;
pub mod scoring;

pub use data::{ForecastPanel, ReturnSeries, RiskForecastPair, WindowPlan};
pub use error::{Error, Result};
