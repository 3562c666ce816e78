//! Core data model: dated return series, rolling-window bookkeeping, and
//! (VaR, ES) forecast containers shared by every other module.

use crate::error::{Error, Result};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::io::Write as _;
use std::path::Path;

/// A forecast pair (VaR, ES) for one date, model, and tail level.
///
/// Both quantities are on the return scale and negative in the cases of
/// interest (left tail of a profit-and-loss distribution). The tail level τ
/// is carried by the surrounding context, not the pair itself.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskForecastPair {
    pub var: f64,
    pub es: f64,
}

impl RiskForecastPair {
    pub fn new(var: f64, es: f64) -> Self {
        RiskForecastPair { var, es }
    }

    /// A forecast is usable by the scoring layer when ES is finite and
    /// strictly negative; VaR ≥ 0 or ES > VaR are data-quality issues that
    /// are flagged downstream rather than rejected here.
    pub fn es_is_valid(&self) -> bool {
        self.es.is_finite() && self.es < 0.0 && self.var.is_finite()
    }
}

/// Daily return series with optional exogenous columns (realized volatility
/// measures on the same scale as |returns|).
///
/// Invariants enforced on construction: strictly increasing dates, all
/// columns the same length, every value finite.
#[derive(Clone, Debug, PartialEq)]
pub struct ReturnSeries {
    pub dates: Vec<NaiveDate>,
    pub returns: Vec<f64>,
    /// (name, values) in load order; order is preserved through save/load.
    pub exog: Vec<(String, Vec<f64>)>,
}

impl ReturnSeries {
    pub fn new(
        dates: Vec<NaiveDate>,
        returns: Vec<f64>,
        exog: Vec<(String, Vec<f64>)>,
    ) -> Result<Self> {
        if dates.len() != returns.len() {
            return Err(Error::Data(format!(
                "date/return length mismatch: {} vs {}",
                dates.len(),
                returns.len()
            )));
        }
        for w in dates.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Data(format!(
                    "dates not strictly increasing at {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        for (i, r) in returns.iter().enumerate() {
            if !r.is_finite() {
                return Err(Error::Data(format!(
                    "non-finite return at row {} ({})",
                    i + 1,
                    dates[i]
                )));
            }
        }
        for (name, col) in &exog {
            if col.len() != dates.len() {
                return Err(Error::Data(format!(
                    "column {name} has length {} but series has {}",
                    col.len(),
                    dates.len()
                )));
            }
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::Data(format!(
                    "non-finite value in column {name} at row {} ({})",
                    i + 1,
                    dates[i]
                )));
            }
        }
        Ok(ReturnSeries {
            dates,
            returns,
            exog,
        })
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    pub fn exog_column(&self, name: &str) -> Option<&[f64]> {
        self.exog
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }
}

/// Column mapping used when loading a CSV file.
///
/// Either a return column or a price column must resolve; when both are
/// present the supplied returns win and the price column is ignored. The
/// exogenous list names columns that are loaded if (and only if) present in
/// the header.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeriesSchema {
    pub date: String,
    pub ret: String,
    pub price: String,
    pub exog: Vec<String>,
}

impl Default for SeriesSchema {
    fn default() -> Self {
        SeriesSchema {
            date: "date".to_string(),
            ret: "ret".to_string(),
            price: "price".to_string(),
            exog: vec!["rvol5".to_string(), "rbss".to_string(), "rk".to_string()],
        }
    }
}

/// Log returns from a positive price series: `ln(p_i / p_{i-1})`.
pub fn compute_log_returns(prices: &[f64]) -> Result<Vec<f64>> {
    if prices.len() < 2 {
        return Err(Error::Data(
            "need at least two prices to form returns".to_string(),
        ));
    }
    if let Some(i) = prices.iter().position(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(Error::Data(format!(
            "non-positive or non-finite price at row {}",
            i + 1
        )));
    }
    Ok(prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
}

/// Load a return series from CSV.
///
/// Rows are sorted by date after parsing; duplicate dates are an error. When
/// returns are derived from prices the first row is dropped (no return for
/// the first price) and exogenous columns are aligned to the return dates.
pub fn load_series(path: &Path, schema: &SeriesSchema) -> Result<ReturnSeries> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Data(format!(
        "cannot open {}: {e}",
        path.display()
    )))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Data(format!("bad header in {}: {e}", path.display())))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);

    let date_idx = col(&schema.date).ok_or_else(|| {
        Error::Data(format!(
            "missing date column '{}' in {}",
            schema.date,
            path.display()
        ))
    })?;
    let ret_idx = col(&schema.ret);
    let price_idx = col(&schema.price);
    if ret_idx.is_none() && price_idx.is_none() {
        return Err(Error::Data(format!(
            "neither return column '{}' nor price column '{}' found in {}",
            schema.ret,
            schema.price,
            path.display()
        )));
    }
    let exog_cols: Vec<(String, usize)> = schema
        .exog
        .iter()
        .filter_map(|name| col(name).map(|i| (name.clone(), i)))
        .collect();

    let mut rows: Vec<(NaiveDate, f64, Vec<f64>)> = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| Error::Data(format!("row {}: {e}", row_no + 2)))?;
        let parse_cell = |idx: usize, name: &str| -> Result<f64> {
            let raw = record.get(idx).unwrap_or("");
            let v: f64 = raw.trim().parse().map_err(|_| {
                Error::Data(format!(
                    "row {}: cannot parse column '{name}' value '{raw}'",
                    row_no + 2
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Data(format!(
                    "row {}: non-finite value in column '{name}'",
                    row_no + 2
                )));
            }
            Ok(v)
        };
        let date_raw = record.get(date_idx).unwrap_or("").trim();
        let date = NaiveDate::parse_from_str(date_raw, "%Y-%m-%d").map_err(|_| {
            Error::Data(format!(
                "row {}: cannot parse date '{date_raw}' (expected YYYY-MM-DD)",
                row_no + 2
            ))
        })?;
        // Primary value: return if the column exists, else price.
        let value = match ret_idx {
            Some(i) => parse_cell(i, &schema.ret)?,
            None => parse_cell(price_idx.unwrap(), &schema.price)?,
        };
        let mut extras = Vec::with_capacity(exog_cols.len());
        for (name, idx) in &exog_cols {
            extras.push(parse_cell(*idx, name)?);
        }
        rows.push((date, value, extras));
    }
    if rows.is_empty() {
        return Err(Error::Data(format!("{} contains no rows", path.display())));
    }

    rows.sort_by_key(|(d, _, _)| *d);
    let mut seen = BTreeSet::new();
    for (d, _, _) in &rows {
        if !seen.insert(*d) {
            return Err(Error::Data(format!("duplicate date {d}")));
        }
    }

    let dates: Vec<NaiveDate> = rows.iter().map(|(d, _, _)| *d).collect();
    let values: Vec<f64> = rows.iter().map(|(_, v, _)| *v).collect();
    let mut exog: Vec<(String, Vec<f64>)> = exog_cols
        .iter()
        .enumerate()
        .map(|(k, (name, _))| (name.clone(), rows.iter().map(|(_, _, e)| e[k]).collect()))
        .collect();

    if ret_idx.is_some() {
        ReturnSeries::new(dates, values, exog)
    } else {
        // Derive log returns from prices; drop the first row everywhere.
        let returns = compute_log_returns(&values)?;
        let dates = dates[1..].to_vec();
        for (_, colv) in exog.iter_mut() {
            colv.remove(0);
        }
        ReturnSeries::new(dates, returns, exog)
    }
}

/// Save a return series as CSV. Uses the shortest round-tripping decimal
/// representation for floats, so save -> load is bit-identical.
pub fn save_series(path: &Path, series: &ReturnSeries) -> Result<()> {
    let mut out = std::fs::File::create(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let io_err = |e: std::io::Error| Error::Io {
        path: path.display().to_string(),
        source: e,
    };
    let mut header = String::from("date,ret");
    for (name, _) in &series.exog {
        header.push(',');
        header.push_str(name);
    }
    writeln!(out, "{header}").map_err(io_err)?;
    for i in 0..series.len() {
        let mut line = format!("{},{}", series.dates[i], series.returns[i]);
        for (_, colv) in &series.exog {
            line.push(',');
            line.push_str(&colv[i].to_string());
        }
        writeln!(out, "{line}").map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
    }
    Ok(())
}

/// Rolling estimation layout: windows of fixed length `t_in` sliding one day
/// at a time, each forecasting the day immediately after the window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct WindowPlan {
    pub n: usize,
    pub t_in: usize,
}

impl WindowPlan {
    /// Number of rolling steps (= out-of-sample forecasts).
    pub fn nstep(&self) -> usize {
        self.n - self.t_in
    }

    /// Half-open index range of the estimation window at step `j`.
    pub fn window(&self, j: usize) -> std::ops::Range<usize> {
        debug_assert!(j < self.nstep());
        j..j + self.t_in
    }

    /// Index of the forecast target at step `j` (the day after the window).
    pub fn target(&self, j: usize) -> usize {
        self.t_in + j
    }
}

/// Validated construction of a [`WindowPlan`].
pub fn make_window_plan(n: usize, t_in: usize) -> Result<WindowPlan> {
    if t_in < 2 {
        return Err(Error::Config(format!(
            "in-sample window t_in must be at least 2, got {t_in}"
        )));
    }
    if n <= t_in {
        return Err(Error::Config(format!(
            "series length {n} leaves no out-of-sample days for t_in {t_in}"
        )));
    }
    Ok(WindowPlan { n, t_in })
}

/// Rectangular panel of forecast pairs: one row per day, one column per
/// model or predictor, stored row-major.
#[derive(Clone, Debug)]
pub struct ForecastPanel {
    pub dates: Vec<NaiveDate>,
    pub columns: Vec<String>,
    values: Vec<RiskForecastPair>,
}

impl ForecastPanel {
    pub fn new(
        dates: Vec<NaiveDate>,
        columns: Vec<String>,
        values: Vec<RiskForecastPair>,
    ) -> Result<Self> {
        if values.len() != dates.len() * columns.len() {
            return Err(Error::Data(format!(
                "panel size {} does not match {} days x {} columns",
                values.len(),
                dates.len(),
                columns.len()
            )));
        }
        Ok(ForecastPanel {
            dates,
            columns,
            values,
        })
    }

    pub fn n_days(&self) -> usize {
        self.dates.len()
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    #[inline]
    pub fn get(&self, day: usize, col: usize) -> RiskForecastPair {
        self.values[day * self.columns.len() + col]
    }

    /// Full row for one day, in column order.
    pub fn row(&self, day: usize) -> &[RiskForecastPair] {
        let m = self.columns.len();
        &self.values[day * m..(day + 1) * m]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// One column as a contiguous vector (copy).
    pub fn column(&self, col: usize) -> Vec<RiskForecastPair> {
        (0..self.n_days()).map(|d| self.get(d, col)).collect()
    }
}
