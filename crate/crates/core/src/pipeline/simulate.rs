//! GARCH(1,1) oracle simulator with analytically known one-step VaR/ES paths.
//!
//! Used by the acceptance and recovery tests and by the CLI `simulate` verb.
//! The generated true (VaR, ES) for day i condition on information through
//! day i−1, matching the one-step-ahead forecasting convention everywhere
//! else in the crate.

use crate::data::{ReturnSeries, RiskForecastPair};
use crate::dist::{self, TailSpec};
use crate::error::{Error, Result};
use crate::rng;
use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT as StudentTDist};

/// Generator specification: a stationary GARCH(1,1) with Normal or
/// standardized Student-t innovations.
#[derive(Debug, Clone)]
pub struct SimSpec {
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Innovation law; `NormalCf` is a forecasting device, not a generator,
    /// and is rejected.
    pub tail: TailSpec,
    /// Levels at which true (VaR, ES) paths are emitted.
    pub taus: Vec<f64>,
    /// If set, also emit a synthetic realized measure `h·(1+noise)` (variance
    /// scale) with Gaussian noise of this standard deviation, stored in
    /// volatility units under the `rvol5` column.
    pub realized_noise_sd: Option<f64>,
}

/// Simulator output: the series, the conditional-variance path, and the true
/// (VaR, ES) path per requested level.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub series: ReturnSeries,
    pub h: Vec<f64>,
    pub true_paths: Vec<(f64, Vec<RiskForecastPair>)>,
}

fn business_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if d.weekday() != Weekday::Sat && d.weekday() != Weekday::Sun {
            out.push(d);
        }
        d += Duration::days(1);
    }
    out
}

/// Simulate `n` observations with the given seed.
pub fn simulate(spec: &SimSpec, n: usize, seed: u64) -> Result<SimOutput> {
    if !(spec.omega.is_finite() && spec.omega > 0.0) {
        return Err(Error::Config(format!("omega must be positive, got {}", spec.omega)));
    }
    if !(spec.alpha >= 0.0 && spec.beta >= 0.0 && spec.alpha + spec.beta < 1.0) {
        return Err(Error::Config(format!(
            "nonstationary GARCH parameters: alpha={}, beta={}",
            spec.alpha, spec.beta
        )));
    }
    if n < 2 {
        return Err(Error::Config(format!("simulation length must be at least 2, got {n}")));
    }
    if spec.taus.is_empty() || spec.taus.iter().any(|t| !(*t > 0.0 && *t < 0.5)) {
        return Err(Error::Config(format!(
            "tau levels must lie in (0, 0.5), got {:?}",
            spec.taus
        )));
    }
    let t_dist = match spec.tail {
        TailSpec::Normal => None,
        TailSpec::StudentT { nu } => {
            TailSpec::student_t(nu)?;
            Some(StudentTDist::new(nu).map_err(|e| Error::Config(e.to_string()))?)
        }
        TailSpec::NormalCf { .. } => {
            return Err(Error::Config(
                "Cornish-Fisher is a forecasting tail, not a simulation generator".to_string(),
            ))
        }
    };
    if let Some(sd) = spec.realized_noise_sd {
        if !(sd.is_finite() && sd >= 0.0) {
            return Err(Error::Config(format!(
                "realized measurement noise sd must be nonnegative, got {sd}"
            )));
        }
    }

    let mut z_rng = rng::stream(seed, &[rng::label("sim-innovations")]);
    let mut u_rng = rng::stream(seed, &[rng::label("sim-measurement")]);

    let h0 = spec.omega / (1.0 - spec.alpha - spec.beta);
    let mut h = Vec::with_capacity(n);
    let mut returns = Vec::with_capacity(n);
    for i in 0..n {
        let hi = if i == 0 {
            h0
        } else {
            spec.omega + spec.alpha * returns[i - 1] * returns[i - 1] + spec.beta * h[i - 1]
        };
        let z: f64 = match &t_dist {
            None => StandardNormal.sample(&mut z_rng),
            Some(t) => {
                let nu = match spec.tail {
                    TailSpec::StudentT { nu } => nu,
                    _ => unreachable!(),
                };
                // Rescale to unit variance so h stays the conditional variance.
                t.sample(&mut z_rng) * ((nu - 2.0) / nu).sqrt()
            }
        };
        h.push(hi);
        returns.push(hi.sqrt() * z);
    }

    let mut exog = Vec::new();
    if let Some(sd) = spec.realized_noise_sd {
        let mut rv = Vec::with_capacity(n);
        for &hi in &h {
            let eps: f64 = u_rng.sample::<f64, _>(StandardNormal) * sd;
            // Keep the measure strictly positive; the clamp binds with
            // probability ~Φ(−0.99/sd), negligible for the noise levels used.
            let x_var = (hi * (1.0 + eps)).max(hi * 0.01);
            rv.push(x_var.sqrt());
        }
        exog.push(("rvol5".to_string(), rv));
    }

    let mut true_paths = Vec::with_capacity(spec.taus.len());
    for &tau in &spec.taus {
        let path: Result<Vec<RiskForecastPair>> = h
            .iter()
            .map(|&hi| dist::var_es_from_variance(hi, &spec.tail, tau))
            .collect();
        true_paths.push((tau, path?));
    }

    let dates = business_days(NaiveDate::from_ymd_opt(2000, 1, 3).unwrap(), n);
    let series = ReturnSeries::new(dates, returns, exog)?;
    Ok(SimOutput { series, h, true_paths })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn base_spec() -> SimSpec {
        SimSpec {
            omega: 0.05,
            alpha: 0.05,
            beta: 0.90,
            tail: TailSpec::Normal,
            taus: vec![0.025],
            realized_noise_sd: None,
        }
    }

    #[test]
    fn degenerate_garch_has_constant_true_var() {
        let spec = SimSpec {
            omega: 1.0,
            alpha: 0.0,
            beta: 0.0,
            ..base_spec()
        };
        let out = simulate(&spec, 50, 9).unwrap();
        let q = crate::dist::quantile(&TailSpec::Normal, 0.025).unwrap();
        for pair in &out.true_paths[0].1 {
            assert_abs_diff_eq!(pair.var, q, epsilon = 1e-12);
        }
    }

    #[test]
    fn tail_ordering_holds_on_every_day() {
        let out = simulate(&base_spec(), 400, 3).unwrap();
        for (_, path) in &out.true_paths {
            for p in path {
                assert!(p.es < p.var && p.var < 0.0, "violated ordering: {p:?}");
            }
        }
    }

    #[test]
    fn true_var_violation_rate_matches_tau() {
        let n = 100_000;
        let out = simulate(&base_spec(), n, 2024).unwrap();
        let (_, path) = &out.true_paths[0];
        let hits = out
            .series
            .returns
            .iter()
            .zip(path)
            .filter(|(r, p)| **r < p.var)
            .count();
        let rate = hits as f64 / n as f64;
        let tau = 0.025;
        let se = (tau * (1.0 - tau) / n as f64).sqrt();
        assert!(
            (rate - tau).abs() < 3.0 * se,
            "violation rate {rate} too far from {tau} (se {se})"
        );
    }

    #[test]
    fn same_seed_reproduces_bitwise() {
        let a = simulate(&base_spec(), 300, 7).unwrap();
        let b = simulate(&base_spec(), 300, 7).unwrap();
        assert_eq!(a.series.returns, b.series.returns);
        assert_eq!(a.h, b.h);
    }

    #[test]
    fn realized_measure_is_positive_and_tracks_h() {
        let spec = SimSpec {
            realized_noise_sd: Some(0.2),
            ..base_spec()
        };
        let out = simulate(&spec, 2000, 5).unwrap();
        let rv = out.series.exog_column("rvol5").unwrap();
        assert!(rv.iter().all(|v| *v > 0.0));
        // Mean squared measure should be close to mean conditional variance.
        let mean_x = rv.iter().map(|v| v * v).sum::<f64>() / rv.len() as f64;
        let mean_h = out.h.iter().sum::<f64>() / out.h.len() as f64;
        assert!((mean_x / mean_h - 1.0).abs() < 0.05, "{mean_x} vs {mean_h}");
    }

    #[test]
    fn invalid_parameters_are_config_errors() {
        assert!(simulate(&SimSpec { omega: -1.0, ..base_spec() }, 100, 1).is_err());
        assert!(simulate(
            &SimSpec { alpha: 0.5, beta: 0.6, ..base_spec() },
            100,
            1
        )
        .is_err());
        assert!(simulate(
            &SimSpec {
                tail: TailSpec::NormalCf { skew: 0.0, exkurt: 0.0 },
                ..base_spec()
            },
            100,
            1
        )
        .is_err());
        assert!(simulate(&SimSpec { taus: vec![0.6], ..base_spec() }, 100, 1).is_err());
    }

    #[test]
    fn student_t_innovations_have_unit_variance_scaling() {
        let spec = SimSpec {
            tail: TailSpec::StudentT { nu: 5.0 },
            ..base_spec()
        };
        let out = simulate(&spec, 200_000, 11).unwrap();
        // Standardized residual variance ≈ 1.
        let v = out
            .series
            .returns
            .iter()
            .zip(&out.h)
            .map(|(r, h)| r * r / h)
            .sum::<f64>()
            / out.h.len() as f64;
        assert!((v - 1.0).abs() < 0.03, "residual variance {v}");
    }
}
