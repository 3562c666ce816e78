//! RiskMetrics exponentially weighted moving-average variance.
//!
//! `h_i = ζ h_{i−1} + (1−ζ) r²_{i−1}` with the decay ζ fixed at the
//! conventional daily value 0.94 — no parameters are estimated, which makes
//! this the cheapest model in the universe and a useful robustness anchor.
//! The recursion is seeded with the window's sample variance. Tail
//! parameters (t degrees of freedom or Cornish–Fisher moments) are still
//! estimated from the standardized residuals of the fixed path.

use super::{
    check_window, gaussian_loglik, resolve_tail_from_residuals, student_t_loglik, TailKind,
    VarianceFit,
};
use crate::dist::TailSpec;
use crate::error::Result;

/// Fixed daily decay of the EWMA recursion.
pub const RISKMETRICS_DECAY: f64 = 0.94;

/// Fit the RiskMetrics model on an estimation window.
pub fn fit_riskmetrics(returns: &[f64], tail: TailKind) -> Result<VarianceFit> {
    check_window("riskmetrics", returns)?;
    let n = returns.len();
    let z = RISKMETRICS_DECAY;
    let h0 = super::zero_mean_variance(returns);
    let mut h_path = Vec::with_capacity(n);
    h_path.push(h0);
    for i in 1..n {
        let prev = h_path[i - 1];
        h_path.push(z * prev + (1.0 - z) * returns[i - 1] * returns[i - 1]);
    }
    let h_next = z * h_path[n - 1] + (1.0 - z) * returns[n - 1] * returns[n - 1];
    let residuals: Vec<f64> = returns
        .iter()
        .zip(&h_path)
        .map(|(r, h)| r / h.sqrt())
        .collect();
    let (tail_spec, cf_degraded) =
        resolve_tail_from_residuals(tail, returns, &h_path, &residuals);
    let loglik = match tail_spec {
        TailSpec::StudentT { nu } => student_t_loglik(returns, &h_path, nu),
        _ => gaussian_loglik(returns, &h_path),
    };
    Ok(VarianceFit {
        params: vec![("zeta", z)],
        h_path,
        residuals,
        loglik,
        converged: true,
        tail: tail_spec,
        cf_degraded,
        h_next,
    })
}
