//! GARCH(1,1): `h_i = ω + α r²_{i−1} + β h_{i−1}`.
//!
//! Constraints ω > 0, α, β ≥ 0, α + β < 1 are enforced through a smooth
//! reparameterization: ω = exp(x₀), persistence p = α + β = logistic(x₁) and
//! ARCH share u = α / p = logistic(x₂). The fixed multi-start grid covers
//! low-to-extreme persistence and small-to-large ARCH shares, with ω set by
//! variance targeting at each grid point.

use super::{
    check_window, gaussian_loglik, multi_start_minimize, residual_moments, student_t_loglik,
    TailKind, VarianceFit, NU_HI, NU_LO,
};
use crate::dist::TailSpec;
use crate::error::{Error, Result};
use crate::optim::{from_bounded, to_bounded};

/// Natural-scale parameters extracted from an optimizer vector.
#[derive(Clone, Copy)]
struct GarchParams {
    omega: f64,
    alpha: f64,
    beta: f64,
    nu: Option<f64>,
}

fn decode(x: &[f64], with_nu: bool) -> GarchParams {
    let omega = x[0].exp();
    let p = to_bounded(x[1], 0.0, 1.0);
    let u = to_bounded(x[2], 0.0, 1.0);
    GarchParams {
        omega,
        alpha: p * u,
        beta: p * (1.0 - u),
        nu: if with_nu {
            Some(to_bounded(x[3], NU_LO, NU_HI))
        } else {
            None
        },
    }
}

fn encode(omega: f64, p: f64, u: f64, nu: Option<f64>) -> Vec<f64> {
    let mut x = vec![
        omega.ln(),
        from_bounded(p, 0.0, 1.0),
        from_bounded(u, 0.0, 1.0),
    ];
    if let Some(nu) = nu {
        x.push(from_bounded(nu, NU_LO, NU_HI));
    }
    x
}

/// Variance recursion over the window, seeded with the sample variance.
/// Returns None if the path leaves the finite positive range.
fn variance_path(returns: &[f64], p: &GarchParams, h0: f64, out: &mut Vec<f64>) -> bool {
    out.clear();
    out.push(h0);
    for i in 1..returns.len() {
        let prev = out[i - 1];
        let r = returns[i - 1];
        let h = p.omega + p.alpha * r * r + p.beta * prev;
        if !(h.is_finite() && h > 0.0) {
            return false;
        }
        out.push(h);
    }
    true
}

/// Fit a GARCH(1,1) with the requested innovation tail.
pub fn fit_garch(returns: &[f64], tail: TailKind) -> Result<VarianceFit> {
    check_window("garch", returns)?;
    let with_nu = tail == TailKind::StudentT;
    let sample_var = super::zero_mean_variance(returns);

    // Fixed start grid: persistence x ARCH share, omega by variance
    // targeting; t starts sweep nu over moderate and heavy tails.
    let starts: Vec<Vec<f64>> = if with_nu {
        let mut s = Vec::new();
        for &p in &[0.90, 0.985] {
            for &u in &[0.06, 0.25] {
                for &nu in &[6.0, 12.0] {
                    s.push(encode(sample_var * (1.0 - p), p, u, Some(nu)));
                }
            }
        }
        s
    } else {
        let mut s = Vec::new();
        for &p in &[0.80, 0.90, 0.95, 0.985] {
            for &u in &[0.06, 0.25] {
                s.push(encode(sample_var * (1.0 - p), p, u, None));
            }
        }
        s
    };

    let objective = |x: &[f64]| {
        let params = decode(x, with_nu);
        let mut h = Vec::new();
        if !variance_path(returns, &params, sample_var, &mut h) {
            return f64::INFINITY;
        }
        -match params.nu {
            Some(nu) => student_t_loglik(returns, &h, nu),
            None => gaussian_loglik(returns, &h),
        }
    };

    let (x, fval, converged) = multi_start_minimize(objective, &starts, 150, 700);
    if !fval.is_finite() {
        return Err(Error::fit("garch", "no start produced a finite likelihood"));
    }
    let params = decode(&x, with_nu);
    let mut h_path = Vec::new();
    variance_path(returns, &params, sample_var, &mut h_path);
    let n = returns.len();
    let r_last = returns[n - 1];
    let h_next = params.omega + params.alpha * r_last * r_last + params.beta * h_path[n - 1];
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
        TailKind::StudentT => (TailSpec::StudentT { nu: params.nu.unwrap() }, false),
    };

    let mut named = vec![
        ("omega", params.omega),
        ("alpha", params.alpha),
        ("beta", params.beta),
    ];
    if let Some(nu) = params.nu {
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
