//! GJR-GARCH(1,1): `h_i = ω + (α + γ·1{r_{i−1}<0}) r²_{i−1} + β h_{i−1}`.
//!
//! The leverage term γ lets negative returns raise variance more than
//! positive ones. Constraints ω > 0, α, γ, β ≥ 0 and α + γ/2 + β < 1
//! (covariance stationarity under a symmetric innovation) are enforced by
//! splitting the persistence p = α + γ/2 + β across the three components
//! with a softmax: (α, γ/2, β) = p · softmax(c₁, c₂, 0).

use super::{
    check_window, gaussian_loglik, multi_start_minimize, residual_moments, student_t_loglik,
    TailKind, VarianceFit, NU_HI, NU_LO,
};
use crate::dist::TailSpec;
use crate::error::{Error, Result};
use crate::optim::{from_bounded, to_bounded};

#[derive(Clone, Copy)]
struct GjrParams {
    omega: f64,
    alpha: f64,
    gamma: f64,
    beta: f64,
    nu: Option<f64>,
}

fn decode(x: &[f64], with_nu: bool) -> GjrParams {
    let omega = x[0].exp();
    let p = to_bounded(x[1], 0.0, 1.0);
    let (c1, c2) = (x[2], x[3]);
    let m = c1.max(c2).max(0.0);
    let e1 = (c1 - m).exp();
    let e2 = (c2 - m).exp();
    let e3 = (-m).exp();
    let z = e1 + e2 + e3;
    GjrParams {
        omega,
        alpha: p * e1 / z,
        gamma: 2.0 * p * e2 / z,
        beta: p * e3 / z,
        nu: if with_nu {
            Some(to_bounded(x[4], NU_LO, NU_HI))
        } else {
            None
        },
    }
}

/// Encode a natural-scale start (shares are of the persistence budget:
/// alpha-share, half-gamma-share, remainder beta).
fn encode(omega: f64, p: f64, a_share: f64, g_share: f64, nu: Option<f64>) -> Vec<f64> {
    let b_share = (1.0 - a_share - g_share).max(1e-6);
    let mut x = vec![
        omega.ln(),
        from_bounded(p, 0.0, 1.0),
        (a_share / b_share).ln(),
        (g_share / b_share).ln(),
    ];
    if let Some(nu) = nu {
        x.push(from_bounded(nu, NU_LO, NU_HI));
    }
    x
}

fn variance_path(returns: &[f64], p: &GjrParams, h0: f64, out: &mut Vec<f64>) -> bool {
    out.clear();
    out.push(h0);
    for i in 1..returns.len() {
        let prev = out[i - 1];
        let r = returns[i - 1];
        let arch = if r < 0.0 { p.alpha + p.gamma } else { p.alpha };
        let h = p.omega + arch * r * r + p.beta * prev;
        if !(h.is_finite() && h > 0.0) {
            return false;
        }
        out.push(h);
    }
    true
}

/// Fit a GJR-GARCH(1,1) with the requested innovation tail.
pub fn fit_gjr(returns: &[f64], tail: TailKind) -> Result<VarianceFit> {
    check_window("gjr", returns)?;
    let with_nu = tail == TailKind::StudentT;
    let sample_var = super::zero_mean_variance(returns);

    let share_grid: &[(f64, f64)] = &[(0.03, 0.03), (0.05, 0.10), (0.12, 0.05), (0.02, 0.12)];
    let starts: Vec<Vec<f64>> = if with_nu {
        let mut s = Vec::new();
        for &p in &[0.90, 0.985] {
            for &(a, g) in &share_grid[..2] {
                for &nu in &[6.0, 12.0] {
                    s.push(encode(sample_var * (1.0 - p), p, a, g, Some(nu)));
                }
            }
        }
        s
    } else {
        let mut s = Vec::new();
        for &p in &[0.90, 0.985] {
            for &(a, g) in share_grid {
                s.push(encode(sample_var * (1.0 - p), p, a, g, None));
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

    let (x, fval, converged) = multi_start_minimize(objective, &starts, 180, 800);
    if !fval.is_finite() {
        return Err(Error::fit("gjr", "no start produced a finite likelihood"));
    }
    let params = decode(&x, with_nu);
    let mut h_path = Vec::new();
    variance_path(returns, &params, sample_var, &mut h_path);
    let n = returns.len();
    let r_last = returns[n - 1];
    let arch = if r_last < 0.0 {
        params.alpha + params.gamma
    } else {
        params.alpha
    };
    let h_next = params.omega + arch * r_last * r_last + params.beta * h_path[n - 1];
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
        ("gamma", params.gamma),
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
