//! Backtests for (VaR, ES) forecast paths: unconditional coverage (UC),
//! conditional coverage (CC), the dynamic-quantile regression (DQ), and
//! three ES regressions (BD-1/2/3), plus a report runner that applies all
//! six to every column of a forecast panel.

mod esreg;

pub use esreg::{bd_test, BOOTSTRAP_B, MIN_BD_SAMPLE};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::data::ForecastPanel;
use crate::error::{Error, Result};
use crate::scoring::{self, FzPreset};

/// Reporting significance level: a column "passes" when every one of the
/// six tests has a p-value at or above this threshold.
pub const PASS_LEVEL: f64 = 0.05;
/// Default lag order for the dynamic-quantile regression.
pub const DEFAULT_DQ_LAGS: usize = 4;
/// Minimum sample for the coverage tests.
pub const MIN_COVERAGE_SAMPLE: usize = 30;

/// Outcome of a single backtest on one forecast column.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BacktestResult {
    /// Test label: "UC", "CC", "DQ", "BD-1", "BD-2", or "BD-3".
    pub test: String,
    pub statistic: f64,
    pub pvalue: f64,
    pub n: usize,
    /// Count of days with `r ≤ VaR`.
    pub violations: usize,
    /// Present when a degenerate or fallback branch was taken.
    pub flag: Option<String>,
}

/// All backtests and summary scores for one forecast column.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ColumnBacktests {
    pub column: String,
    /// Average FZ0 loss over the evaluation window (penalty convention for
    /// malformed cells, matching the loss-matrix layer).
    pub avg_fz0: f64,
    pub tests: Vec<BacktestResult>,
    /// Per-test failures, recorded without aborting the report.
    pub errors: Vec<String>,
    /// All six tests ran and every p-value is ≥ [`PASS_LEVEL`].
    pub pass: bool,
    /// Days with a malformed pair (non-finite, ES ≥ 0, or ES above VaR).
    pub invalid_days: usize,
    /// Whether the column entered the evaluation MCS survivor set; filled by
    /// the pipeline after the evaluation MCS runs.
    pub in_eval_ssm: Option<bool>,
}

/// Backtests for every column of a forecast panel at one tail level.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BacktestReport {
    pub tau: f64,
    pub n: usize,
    pub columns: Vec<ColumnBacktests>,
}

fn chi2_sf(x: f64, df: f64) -> f64 {
    let dist = ChiSquared::new(df).expect("chi-square df must be positive");
    (1.0 - dist.cdf(x.max(0.0))).clamp(0.0, 1.0)
}

/// `x·ln(y)` with the `0·ln(0) := 0` continuity convention.
fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

fn count_violations(returns: &[f64], var_series: &[f64]) -> usize {
    returns
        .iter()
        .zip(var_series)
        .filter(|(r, v)| *r <= *v)
        .count()
}

fn check_coverage_inputs(
    test: &str,
    returns: &[f64],
    var_series: &[f64],
    tau: f64,
    min_n: usize,
) -> Result<()> {
    if returns.len() != var_series.len() {
        return Err(Error::Backtest(format!(
            "{test}: series lengths differ (returns {}, VaR {})",
            returns.len(),
            var_series.len()
        )));
    }
    if returns.len() < min_n {
        return Err(Error::Backtest(format!(
            "{test}: needs at least {min_n} observations, got {}",
            returns.len()
        )));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Config(format!("tau must be in (0,1), got {tau}")));
    }
    for i in 0..returns.len() {
        if !returns[i].is_finite() || !var_series[i].is_finite() {
            return Err(Error::Backtest(format!(
                "{test}: non-finite input at day {i}"
            )));
        }
    }
    Ok(())
}

fn kupiec_lr(n: usize, x: usize, tau: f64) -> f64 {
    let nf = n as f64;
    let xf = x as f64;
    let ll_null = xlogy(xf, tau) + xlogy(nf - xf, 1.0 - tau);
    let ll_alt = xlogy(xf, xf / nf) + xlogy(nf - xf, 1.0 - xf / nf);
    (-2.0 * (ll_null - ll_alt)).max(0.0)
}

/// Unconditional-coverage (Kupiec) test: likelihood ratio for the violation
/// frequency against the nominal rate, chi-square with 1 df.
pub fn uc_test(returns: &[f64], var_series: &[f64], tau: f64) -> Result<BacktestResult> {
    check_coverage_inputs("UC", returns, var_series, tau, MIN_COVERAGE_SAMPLE)?;
    let n = returns.len();
    let x = count_violations(returns, var_series);
    let lr = kupiec_lr(n, x, tau);
    Ok(BacktestResult {
        test: "UC".into(),
        statistic: lr,
        pvalue: chi2_sf(lr, 1.0),
        n,
        violations: x,
        flag: None,
    })
}

/// Conditional-coverage (Christoffersen) test: Kupiec LR plus a first-order
/// Markov independence LR, chi-square with 2 df. A hit sequence with no
/// violations or no non-violations leaves the independence component
/// undefined; the UC statistic is then reported with 1 df and a flag.
pub fn cc_test(returns: &[f64], var_series: &[f64], tau: f64) -> Result<BacktestResult> {
    check_coverage_inputs("CC", returns, var_series, tau, MIN_COVERAGE_SAMPLE)?;
    let n = returns.len();
    let hits: Vec<bool> = returns
        .iter()
        .zip(var_series)
        .map(|(r, v)| r <= v)
        .collect();
    let x = hits.iter().filter(|h| **h).count();
    let lr_uc = kupiec_lr(n, x, tau);
    if x == 0 || x == n {
        log::warn!("CC: degenerate hit sequence (x={x} of {n}); independence component skipped");
        return Ok(BacktestResult {
            test: "CC".into(),
            statistic: lr_uc,
            pvalue: chi2_sf(lr_uc, 1.0),
            n,
            violations: x,
            flag: Some("degenerate hit sequence: independence component skipped, df=1".into()),
        });
    }
    let (mut n00, mut n01, mut n10, mut n11) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for w in hits.windows(2) {
        match (w[0], w[1]) {
            (false, false) => n00 += 1.0,
            (false, true) => n01 += 1.0,
            (true, false) => n10 += 1.0,
            (true, true) => n11 += 1.0,
        }
    }
    let pi01 = if n00 + n01 > 0.0 { n01 / (n00 + n01) } else { 0.0 };
    let pi11 = if n10 + n11 > 0.0 { n11 / (n10 + n11) } else { 0.0 };
    let pi = (n01 + n11) / (n as f64 - 1.0);
    let ll_null = xlogy(n01 + n11, pi) + xlogy(n00 + n10, 1.0 - pi);
    let ll_markov = xlogy(n01, pi01) + xlogy(n00, 1.0 - pi01) + xlogy(n11, pi11) + xlogy(n10, 1.0 - pi11);
    let lr_ind = (-2.0 * (ll_null - ll_markov)).max(0.0);
    let stat = lr_uc + lr_ind;
    Ok(BacktestResult {
        test: "CC".into(),
        statistic: stat,
        pvalue: chi2_sf(stat, 2.0),
        n,
        violations: x,
        flag: None,
    })
}

/// Dynamic-quantile (Engle–Manganelli) test: demeaned hits regressed on a
/// constant, their own lags, and the contemporaneous VaR; the Wald form
/// `δ̂'(X'X)δ̂ / (τ(1−τ))` is chi-square with `lags + 2` df. A singular
/// regressor matrix falls back to a pseudo-inverse with reduced rank.
pub fn dq_test(
    returns: &[f64],
    var_series: &[f64],
    tau: f64,
    lags: usize,
) -> Result<BacktestResult> {
    check_coverage_inputs("DQ", returns, var_series, tau, MIN_COVERAGE_SAMPLE + lags)?;
    if lags == 0 {
        return Err(Error::Config("DQ lag order must be at least 1".into()));
    }
    let n = returns.len();
    let hd: Vec<f64> = returns
        .iter()
        .zip(var_series)
        .map(|(r, v)| if r <= v { 1.0 - tau } else { -tau })
        .collect();
    let x = returns
        .iter()
        .zip(var_series)
        .filter(|(r, v)| *r <= *v)
        .count();
    let nrows = n - lags;
    let k = lags + 2;
    let mut xdata = Vec::with_capacity(nrows * k);
    for i in lags..n {
        xdata.push(1.0);
        for l in 1..=lags {
            xdata.push(hd[i - l]);
        }
        xdata.push(var_series[i]);
    }
    let xm = nalgebra::DMatrix::from_row_slice(nrows, k, &xdata);
    let yv = nalgebra::DVector::from_iterator(nrows, (lags..n).map(|i| hd[i]));
    let xtx = xm.transpose() * &xm;
    let xty = xm.transpose() * &yv;
    let (delta, df, mut flag) = match xtx.clone().cholesky() {
        Some(ch) => (ch.solve(&xty), k, None),
        None => {
            let svd = xtx.svd(true, true);
            let eps = svd.singular_values.max() * 1e-10;
            let rank = svd.rank(eps);
            let pinv = svd
                .pseudo_inverse(eps)
                .map_err(|e| Error::Numerical(format!("DQ pseudo-inverse failed: {e}")))?;
            log::warn!("DQ: singular regressor matrix, rank {rank} of {k}");
            (
                &pinv * &xty,
                rank,
                Some(format!("singular regressor matrix: rank {rank} of {k}, pseudo-inverse used")),
            )
        }
    };
    if df == 0 {
        return Err(Error::Numerical("DQ: regressor matrix has rank zero".into()));
    }
    let stat = (xty.dot(&delta) / (tau * (1.0 - tau))).max(0.0);
    if x == 0 {
        let note = "no violations in evaluation window";
        flag = Some(match flag {
            Some(f) => format!("{f}; {note}"),
            None => note.into(),
        });
    }
    Ok(BacktestResult {
        test: "DQ".into(),
        statistic: stat,
        pvalue: chi2_sf(stat, df as f64),
        n,
        violations: x,
        flag,
    })
}

/// Runs all six backtests on every column of the panel and attaches the
/// average FZ0 loss. Per-column test failures are recorded in the report
/// instead of aborting it.
pub fn run_all_backtests(
    returns: &[f64],
    panel: &ForecastPanel,
    tau: f64,
) -> Result<BacktestReport> {
    if returns.len() != panel.n_days() {
        return Err(Error::Backtest(format!(
            "returns ({}) and panel ({}) lengths differ",
            returns.len(),
            panel.n_days()
        )));
    }
    let lm = scoring::build_loss_matrix(panel, returns, tau, FzPreset::Fz0, None)?;
    let mut columns = Vec::with_capacity(panel.n_columns());
    for (ci, name) in panel.columns.iter().enumerate() {
        let pairs = panel.column(ci);
        let var_series: Vec<f64> = pairs.iter().map(|p| p.var).collect();
        let es_series: Vec<f64> = pairs.iter().map(|p| p.es).collect();
        let invalid_days = pairs
            .iter()
            .filter(|p| !(p.var.is_finite() && p.es.is_finite() && p.es < 0.0 && p.es <= p.var))
            .count();
        let mut tests = Vec::with_capacity(6);
        let mut errors = Vec::new();
        let mut push = |label: &str, res: Result<BacktestResult>| match res {
            Ok(r) => tests.push(r),
            Err(e) => errors.push(format!("{label}: {e}")),
        };
        push("UC", uc_test(returns, &var_series, tau));
        push("CC", cc_test(returns, &var_series, tau));
        push("DQ", dq_test(returns, &var_series, tau, DEFAULT_DQ_LAGS));
        for variant in 1..=3u8 {
            push(
                &format!("BD-{variant}"),
                bd_test(returns, &var_series, &es_series, tau, variant),
            );
        }
        let pass = errors.is_empty()
            && tests.len() == 6
            && tests.iter().all(|t| t.pvalue >= PASS_LEVEL);
        columns.push(ColumnBacktests {
            column: name.clone(),
            avg_fz0: lm.column_mean(ci),
            tests,
            errors,
            pass,
            invalid_days,
            in_eval_ssm: None,
        });
    }
    Ok(BacktestReport {
        tau,
        n: returns.len(),
        columns,
    })
}
