//! Historical simulation: order-statistic VaR and tail-mean ES over a fixed
//! lookback window.

use crate::data::RiskForecastPair;
use crate::error::{Error, Result};

/// Historical-simulation specification.
#[derive(Debug, Clone, Copy)]
pub struct HsSpec {
    /// Lookback length in days (the universe uses 25/50/100/250/500).
    pub w: usize,
    pub tau: f64,
}

/// Lower order-statistic index k = ⌈τw⌉ (1-based), computed with a small
/// slack so that exact products like 0.01·500 = 5 do not round up.
fn order_index(tau: f64, w: usize) -> usize {
    ((tau * w as f64 - 1e-9).ceil() as usize).max(1).min(w)
}

/// VaR/ES of one fully-populated lookback slice.
fn var_es_of_slice(slice: &[f64], tau: f64) -> RiskForecastPair {
    let mut sorted = slice.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = order_index(tau, sorted.len());
    let var = sorted[k - 1];
    // Tail mean over every window return ≤ VaR (ties included); if nothing
    // lies strictly below VaR the mean collapses to VaR itself.
    let tail: Vec<f64> = sorted.iter().copied().take_while(|v| *v <= var).collect();
    let es = tail.iter().sum::<f64>() / tail.len() as f64;
    RiskForecastPair { var, es }
}

/// One-step HS forecast from the last `w` returns of `window`.
pub fn hs_forecast(window: &[f64], spec: &HsSpec) -> Result<RiskForecastPair> {
    if spec.w == 0 {
        return Err(Error::Config("HS lookback w must be positive".to_string()));
    }
    if !(spec.tau > 0.0 && spec.tau < 0.5) {
        return Err(Error::Config(format!("tau must lie in (0, 0.5), got {}", spec.tau)));
    }
    if spec.w > window.len() {
        return Err(Error::Config(format!(
            "HS lookback {} exceeds available history {}",
            spec.w,
            window.len()
        )));
    }
    Ok(var_es_of_slice(&window[window.len() - spec.w..], spec.tau))
}

/// In-sample HS path over a window: day i is scored with the lookback
/// `returns[max(0, i−w) .. i]`, truncated early in the window. Day 0 has no
/// history and is backfilled from the first observation alone; it only ever
/// seeds the training loss window.
pub fn hs_insample_path(returns: &[f64], w: usize, tau: f64) -> Vec<RiskForecastPair> {
    (0..returns.len())
        .map(|i| {
            let lo = i.saturating_sub(w);
            let hi = i.max(1);
            var_es_of_slice(&returns[lo..hi], tau)
        })
        .collect()
}
