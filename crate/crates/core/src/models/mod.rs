//! Parametric conditional-variance models.
//!
//! Four families share one interface: RiskMetrics (fixed-decay EWMA), GARCH,
//! GJR-GARCH (threshold asymmetry), and a linear Realized GARCH driven by a
//! realized volatility measure. Returns are treated as zero-mean:
//! `r_i = √h_i · η_i` with standardized innovation η, so a fit consists of a
//! conditional-variance path plus a tail spec for η, and one-step (VaR, ES)
//! forecasts compose the variance forecast with the tail quantile and tail
//! mean.
//!
//! Estimation is Gaussian quasi-maximum-likelihood, or full MLE with a
//! unit-variance Student-t innovation density when the t tail is requested.
//! Optimization runs a Nelder–Mead simplex in an unconstrained
//! reparameterization (log/logistic transforms enforce positivity and
//! stationarity), seeded by a fixed grid of 8 starting points; the best
//! starts are refined further and the best refined minimum wins. Everything
//! is deterministic: no randomness enters any fit.

mod garch;
mod gjr;
mod rgarch;
mod riskmetrics;

pub use garch::fit_garch;
pub use gjr::fit_gjr;
pub use rgarch::fit_rgarch;
pub use riskmetrics::{fit_riskmetrics, RISKMETRICS_DECAY};

use crate::data::RiskForecastPair;
use crate::dist::{self, TailSpec};
use crate::error::{Error, Result};
use crate::optim::{golden_section, nelder_mead, NmOptions};
use serde::{Deserialize, Serialize};

/// Innovation-tail request attached to a variance model. Tail *parameters*
/// (t degrees of freedom, Cornish–Fisher moments) are estimated from the
/// window, so the spec only carries the kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailKind {
    Normal,
    NormalCf,
    StudentT,
}

impl TailKind {
    /// Suffix used in model identifiers ("N", "N-CF", "t").
    pub fn id_suffix(&self) -> &'static str {
        match self {
            TailKind::Normal => "N",
            TailKind::NormalCf => "N-CF",
            TailKind::StudentT => "t",
        }
    }
}

/// Bounds for the Student-t degrees-of-freedom transform.
pub const NU_LO: f64 = 2.1;
pub const NU_HI: f64 = 100.0;

/// Minimum window length for models with estimated parameters.
pub const MIN_FIT_WINDOW: usize = 250;

/// Fitted variance model: parameter estimates, in-sample variance path,
/// standardized residuals, resolved tail, and the one-step-ahead variance.
#[derive(Clone, Debug)]
pub struct VarianceFit {
    /// Named natural-scale parameter estimates (family-specific).
    pub params: Vec<(&'static str, f64)>,
    /// In-sample conditional variances h_i, one per window day.
    pub h_path: Vec<f64>,
    /// Standardized residuals r_i / √h_i.
    pub residuals: Vec<f64>,
    /// Maximized log-likelihood (quasi or full, per the tail).
    pub loglik: f64,
    /// True when the refined simplex met its tolerance.
    pub converged: bool,
    /// Resolved innovation tail (ν estimated, CF moments computed, or plain
    /// normal). CF specs that failed the monotonicity probe are degraded to
    /// `Normal` with `cf_degraded` set.
    pub tail: TailSpec,
    pub cf_degraded: bool,
    /// One-step-ahead conditional variance from the window end.
    pub h_next: f64,
}

impl VarianceFit {
    /// One-step-ahead (VaR, ES) at level τ.
    pub fn forecast_var_es(&self, tau: f64) -> Result<RiskForecastPair> {
        dist::var_es_from_variance(self.h_next, &self.tail, tau)
    }

    /// In-sample fitted (VaR, ES) pairs along the variance path.
    pub fn insample_var_es(&self, tau: f64) -> Result<Vec<RiskForecastPair>> {
        let q = dist::quantile(&self.tail, tau)?;
        let m = dist::es_multiplier(&self.tail, tau)?;
        Ok(self
            .h_path
            .iter()
            .map(|h| {
                let s = h.sqrt();
                RiskForecastPair::new(s * q, s * m)
            })
            .collect())
    }
}

/// Sample variance around zero (returns are modelled without a mean term).
pub(crate) fn zero_mean_variance(returns: &[f64]) -> f64 {
    returns.iter().map(|r| r * r).sum::<f64>() / returns.len() as f64
}

/// Σ ln(x_i) for strictly positive inputs, accumulated as a running product
/// with periodic log-extraction. Cuts one transcendental call per
/// observation out of every likelihood evaluation, which matters in the
/// multi-start loops.
pub(crate) fn fast_sum_ln(values: &[f64]) -> f64 {
    let mut acc = 1.0f64;
    let mut out = 0.0f64;
    for &v in values {
        acc *= v;
        if !(1e-250..=1e250).contains(&acc) {
            out += acc.ln();
            acc = 1.0;
        }
    }
    out + acc.ln()
}

/// Gaussian quasi-log-likelihood for a zero-mean return series with variance
/// path `h` (which must be strictly positive).
pub(crate) fn gaussian_loglik(returns: &[f64], h: &[f64]) -> f64 {
    debug_assert_eq!(returns.len(), h.len());
    let n = returns.len() as f64;
    let mut quad = 0.0;
    for (r, hi) in returns.iter().zip(h) {
        quad += r * r / hi;
    }
    -0.5 * (n * (2.0 * std::f64::consts::PI).ln() + fast_sum_ln(h) + quad)
}

/// Log-likelihood under a unit-variance Student-t innovation with ν degrees
/// of freedom.
pub(crate) fn student_t_loglik(returns: &[f64], h: &[f64], nu: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    debug_assert_eq!(returns.len(), h.len());
    let n = returns.len() as f64;
    let scale = nu - 2.0;
    let norm = ln_gamma((nu + 1.0) / 2.0)
        - ln_gamma(nu / 2.0)
        - 0.5 * (scale * std::f64::consts::PI).ln();
    // ln f(r|h) = norm - (ν+1)/2 · ln(1 + (r²/h)/(ν−2)) − ½ ln h
    let mut kernels: Vec<f64> = Vec::with_capacity(h.len());
    for (r, hi) in returns.iter().zip(h) {
        kernels.push(1.0 + (r * r / hi) / scale);
    }
    n * norm - 0.5 * (nu + 1.0) * fast_sum_ln(&kernels) - 0.5 * fast_sum_ln(h)
}

/// Sample skewness and excess kurtosis of a residual series, computed after
/// re-centering and re-scaling by its own moments.
pub(crate) fn residual_moments(residuals: &[f64]) -> (f64, f64) {
    let n = residuals.len() as f64;
    let mean = residuals.iter().sum::<f64>() / n;
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    for r in residuals {
        let d = r - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let skew = m3 / m2.powf(1.5);
    let exkurt = m4 / (m2 * m2) - 3.0;
    (skew, exkurt)
}

/// Resolve the requested tail kind for a fitted variance path.
///
/// - `Normal`: nothing to estimate.
/// - `NormalCf`: moments from the standardized residuals, with the
///   monotonicity fallback.
/// - `StudentT`: 1-D MLE for ν on the standardized residuals given the
///   fitted path (used by RiskMetrics, whose variance path has no free
///   parameters; likelihood-estimated families pass their jointly fitted ν
///   directly instead).
pub(crate) fn resolve_tail_from_residuals(
    kind: TailKind,
    returns: &[f64],
    h_path: &[f64],
    residuals: &[f64],
) -> (TailSpec, bool) {
    match kind {
        TailKind::Normal => (TailSpec::Normal, false),
        TailKind::NormalCf => {
            let (skew, exkurt) = residual_moments(residuals);
            TailSpec::normal_cf_checked(skew, exkurt)
        }
        TailKind::StudentT => {
            let (x, _) = golden_section(
                |x| {
                    let nu = crate::optim::to_bounded(x, NU_LO, NU_HI);
                    -student_t_loglik(returns, h_path, nu)
                },
                crate::optim::from_bounded(4.0, NU_LO, NU_HI) - 4.0,
                crate::optim::from_bounded(4.0, NU_LO, NU_HI) + 6.0,
                1e-7,
                120,
            );
            let nu = crate::optim::to_bounded(x, NU_LO, NU_HI);
            (TailSpec::StudentT { nu }, false)
        }
    }
}

/// Staged multi-start simplex minimization shared by the likelihood fits:
/// every grid start gets a short refinement, then the best two continue to
/// full tolerance. Returns (parameters, objective value, converged).
pub(crate) fn multi_start_minimize<F>(
    objective: F,
    starts: &[Vec<f64>],
    coarse_evals: usize,
    fine_evals: usize,
) -> (Vec<f64>, f64, bool)
where
    F: Fn(&[f64]) -> f64,
{
    let coarse = NmOptions {
        max_evals: coarse_evals,
        ftol: 1e-7,
        initial_step: 0.4,
    };
    let fine = NmOptions {
        max_evals: fine_evals,
        ftol: 1e-10,
        initial_step: 0.1,
    };
    let mut stage1: Vec<crate::optim::NmResult> = starts
        .iter()
        .map(|s| nelder_mead(|x| objective(x), s, &coarse))
        .collect();
    stage1.sort_by(|a, b| a.fval.partial_cmp(&b.fval).unwrap_or(std::cmp::Ordering::Equal));
    let mut best: Option<crate::optim::NmResult> = None;
    for cand in stage1.iter().take(2) {
        let refined = nelder_mead(|x| objective(x), &cand.x, &fine);
        let better = match &best {
            None => true,
            Some(b) => refined.fval < b.fval,
        };
        if better {
            best = Some(refined);
        }
    }
    let best = best.expect("at least one start");
    (best.x, best.fval, best.converged)
}

/// Validate a fitting window for likelihood-estimated families.
pub(crate) fn check_window(model: &str, returns: &[f64]) -> Result<()> {
    if returns.len() < MIN_FIT_WINDOW {
        return Err(Error::fit(
            model,
            format!(
                "window of {} observations is below the minimum of {MIN_FIT_WINDOW}",
                returns.len()
            ),
        ));
    }
    let var = zero_mean_variance(returns);
    if !(var.is_finite() && var > 0.0) {
        return Err(Error::fit(model, "window has zero variance".to_string()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn fast_sum_ln_matches_naive() {
        let values: Vec<f64> = (1..600)
            .map(|i| 1e-5 * (1.0 + (i as f64 * 0.37).sin().abs()) )
            .collect();
        let naive: f64 = values.iter().map(|v| v.ln()).sum();
        assert_abs_diff_eq!(fast_sum_ln(&values), naive, epsilon = 1e-9 * naive.abs());
    }

    #[test]
    fn gaussian_loglik_matches_direct_formula() {
        let r: [f64; 4] = [0.01, -0.02, 0.005, 0.0];
        let h: [f64; 4] = [1e-4, 2e-4, 1.5e-4, 1e-4];
        let direct: f64 = r
            .iter()
            .zip(&h)
            .map(|(ri, hi)| {
                -0.5 * ((2.0 * std::f64::consts::PI).ln() + hi.ln() + ri * ri / hi)
            })
            .sum();
        assert_abs_diff_eq!(gaussian_loglik(&r, &h), direct, epsilon = 1e-12);
    }

    #[test]
    fn t_loglik_approaches_gaussian_for_large_nu() {
        let r = [0.012, -0.03, 0.004, -0.008, 0.0];
        let h = [1.1e-4, 2.3e-4, 1.4e-4, 9e-5, 1e-4];
        let g = gaussian_loglik(&r, &h);
        let t = student_t_loglik(&r, &h, 5e4);
        assert_abs_diff_eq!(g, t, epsilon = 2e-3 * g.abs());
    }

    #[test]
    fn residual_moments_recover_known_shape() {
        // Deterministic mixture with visible skew: mostly ±1 with a few -4s.
        let mut xs = Vec::new();
        for i in 0..600 {
            xs.push(if i % 2 == 0 { 1.0 } else { -1.0 });
        }
        for _ in 0..30 {
            xs.push(-4.0);
        }
        let (skew, exkurt) = residual_moments(&xs);
        assert!(skew < -0.5, "expected clear negative skew, got {skew}");
        assert!(exkurt > 0.5, "expected tails heavier than normal, got {exkurt}");
    }
}
