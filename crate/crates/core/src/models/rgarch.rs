//! Linear Realized GARCH(1,1) driven by a realized volatility measure.
//!
//! Variance equation:   `h_i = c + β h_{i−1} + α x_{i−1}`
//! Measurement equation: `x_i = ξ + δ h_i + τ₁ η_i + τ₂(η²_i − 1) + σ_u u_i`
//!
//! where x is the realized measure on the *variance* scale and η_i = r_i/√h_i.
//! Realized measures arrive in volatility units (same scale as |returns|)
//! and are squared before fitting. The joint quasi-likelihood is the return
//! part (Gaussian or unit-variance Student-t) plus a Gaussian measurement
//! part. Positivity of the variance path follows from c, α > 0, β ∈ [0, 1)
//! and positive measures; covariance stationarity of the reduced form needs
//! β + αδ < 1, enforced as a barrier.

use super::{
    check_window, gaussian_loglik, multi_start_minimize, residual_moments, student_t_loglik,
    TailKind, VarianceFit, NU_HI, NU_LO,
};
use crate::dist::TailSpec;
use crate::error::{Error, Result};
use crate::optim::{from_bounded, to_bounded};

#[derive(Clone, Copy)]
struct RgParams {
    c: f64,
    beta: f64,
    alpha: f64,
    xi: f64,
    delta: f64,
    tau1: f64,
    tau2: f64,
    sigma_u: f64,
    nu: Option<f64>,
}

fn decode(x: &[f64], with_nu: bool) -> RgParams {
    RgParams {
        c: x[0].exp(),
        beta: to_bounded(x[1], 0.0, 1.0),
        alpha: x[2].exp(),
        xi: x[3],
        delta: x[4].exp(),
        tau1: x[5],
        tau2: x[6],
        sigma_u: x[7].exp(),
        nu: if with_nu {
            Some(to_bounded(x[8], NU_LO, NU_HI))
        } else {
            None
        },
    }
}

#[allow(clippy::too_many_arguments)]
fn encode(
    c: f64,
    beta: f64,
    alpha: f64,
    xi: f64,
    delta: f64,
    tau1: f64,
    tau2: f64,
    sigma_u: f64,
    nu: Option<f64>,
) -> Vec<f64> {
    let mut x = vec![
        c.ln(),
        from_bounded(beta, 0.0, 1.0),
        alpha.ln(),
        xi,
        delta.ln(),
        tau1,
        tau2,
        sigma_u.ln(),
    ];
    if let Some(nu) = nu {
        x.push(from_bounded(nu, NU_LO, NU_HI));
    }
    x
}

/// Variance recursion given the realized-measure series (variance scale).
fn variance_path(x_meas: &[f64], p: &RgParams, h0: f64, out: &mut Vec<f64>) -> bool {
    out.clear();
    out.push(h0);
    for i in 1..x_meas.len() {
        let h = p.c + p.beta * out[i - 1] + p.alpha * x_meas[i - 1];
        if !(h.is_finite() && h > 0.0) {
            return false;
        }
        out.push(h);
    }
    true
}

/// Gaussian log-likelihood of the measurement equation.
fn measurement_loglik(x_meas: &[f64], returns: &[f64], h: &[f64], p: &RgParams) -> f64 {
    let n = x_meas.len() as f64;
    let mut quad = 0.0;
    for i in 0..x_meas.len() {
        let eta = returns[i] / h[i].sqrt();
        let u = x_meas[i] - p.xi - p.delta * h[i] - p.tau1 * eta - p.tau2 * (eta * eta - 1.0);
        quad += u * u;
    }
    -0.5 * (n * ((2.0 * std::f64::consts::PI).ln() + 2.0 * p.sigma_u.ln())
        + quad / (p.sigma_u * p.sigma_u))
}

/// Fit the linear Realized GARCH.
///
/// `realized_vol` is the realized measure in volatility units; it is squared
/// to the variance scale internally and must be strictly positive.
pub fn fit_rgarch(returns: &[f64], realized_vol: &[f64], tail: TailKind) -> Result<VarianceFit> {
    check_window("rgarch", returns)?;
    if realized_vol.len() != returns.len() {
        return Err(Error::fit(
            "rgarch",
            format!(
                "realized measure length {} does not match window {}",
                realized_vol.len(),
                returns.len()
            ),
        ));
    }
    if let Some(bad) = realized_vol.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::fit(
            "rgarch",
            format!("realized measure must be strictly positive, found {bad}"),
        ));
    }
    let with_nu = tail == TailKind::StudentT;
    let x_meas: Vec<f64> = realized_vol.iter().map(|v| v * v).collect();
    let sample_var = super::zero_mean_variance(returns);
    let sx = {
        let m = x_meas.iter().sum::<f64>() / x_meas.len() as f64;
        (x_meas.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x_meas.len() as f64).sqrt()
    }
    .max(1e-12);

    let base_grid: &[(f64, f64)] = &[(0.55, 0.35), (0.70, 0.25), (0.40, 0.50), (0.80, 0.15)];
    let mut starts = Vec::new();
    if with_nu {
        for &(beta, alpha) in &base_grid[..2] {
            for &tau1 in &[-0.1 * sx, 0.0] {
                for &nu in &[6.0, 12.0] {
                    let c = sample_var * (1.0 - beta - alpha).max(0.02);
                    starts.push(encode(c, beta, alpha, 0.0, 1.0, tau1, 0.0, 0.5 * sx, Some(nu)));
                }
            }
        }
    } else {
        for &(beta, alpha) in base_grid {
            for &tau1 in &[-0.1 * sx, 0.0] {
                let c = sample_var * (1.0 - beta - alpha).max(0.02);
                starts.push(encode(c, beta, alpha, 0.0, 1.0, tau1, 0.0, 0.5 * sx, None));
            }
        }
    }

    let objective = |x: &[f64]| {
        let p = decode(x, with_nu);
        if p.beta + p.alpha * p.delta >= 0.999 {
            return f64::INFINITY;
        }
        let mut h = Vec::new();
        if !variance_path(&x_meas, &p, sample_var, &mut h) {
            return f64::INFINITY;
        }
        let ret_ll = match p.nu {
            Some(nu) => student_t_loglik(returns, &h, nu),
            None => gaussian_loglik(returns, &h),
        };
        -(ret_ll + measurement_loglik(&x_meas, returns, &h, &p))
    };

    let (x, fval, converged) = multi_start_minimize(objective, &starts, 260, 1400);
    if !fval.is_finite() {
        return Err(Error::fit(
            "rgarch",
            "no start produced a finite likelihood",
        ));
    }
    let p = decode(&x, with_nu);
    let mut h_path = Vec::new();
    variance_path(&x_meas, &p, sample_var, &mut h_path);
    let n = returns.len();
    let h_next = p.c + p.beta * h_path[n - 1] + p.alpha * x_meas[n - 1];
    let residuals: Vec<f64> = returns
        .iter()
        .zip(&h_path)
        .map(|(r, h)| r / h.sqrt())
        .collect();

    let (tail_spec, cf_degraded) = match tail {
        TailKind::Normal => (TailSpec::Normal, false),
        TailKind::NormalCf => {
            let (skew, exkurt) = residual_moments(&residuals);
            TailSpec::normal_cf_checked(skew, exkurt)
        }
        TailKind::StudentT => (TailSpec::StudentT { nu: p.nu.unwrap() }, false),
    };

    let mut named = vec![
        ("const", p.c),
        ("beta", p.beta),
        ("alpha", p.alpha),
        ("xi", p.xi),
        ("delta", p.delta),
        ("tau1", p.tau1),
        ("tau2", p.tau2),
        ("sigma_u", p.sigma_u),
    ];
    if let Some(nu) = p.nu {
        named.push(("nu", nu));
    }
    Ok(VarianceFit {
        params: named,
        h_path,
        residuals,
        loglik: -fval,
        converged,
        tail: tail_spec,
        cf_degraded,
        h_next,
    })
}
