//! Strictly consistent joint (VaR, ES) scoring.
//!
//! Two members of the Fissler–Ziegel loss family are shipped:
//!
//! - `Fz0`: the zero-degree homogeneous loss
//!   `(1/(τ·ES))·1{r≤VaR}·(r−VaR) + VaR/ES + log(−ES) − 1`,
//!   the default for loss matrices and model comparison;
//! - `Al`: the negative Asymmetric-Laplace log-likelihood
//!   `−log((τ−1)/ES) − (r−VaR)(τ−1{r≤VaR})/(τ·ES)`,
//!   used as the estimation and combination-weight objective.
//!
//! Both require ES < 0; for daily return tails that always holds for sane
//! forecasts. The two differ by `1 − log(1−τ) − r/ES` (not a function of r
//! alone), so they are distinct named members rather than re-parameterized
//! copies of one formula; minimizing either ranks correctly specified
//! forecasts first in expectation.
//!
//! A loss matrix stacks per-day losses over a model universe and can apply
//! an exponentially weighted smoother across time, which concentrates the
//! comparison on recent performance.

use crate::data::ForecastPanel;
use crate::data::RiskForecastPair;
use crate::error::{Error, Result};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::io::Write as _;
use std::path::Path;

/// Named member of the loss family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FzPreset {
    /// Zero-homogeneous loss; scale-free loss differences.
    Fz0,
    /// Asymmetric-Laplace likelihood score.
    Al,
}

/// Zero-homogeneous joint (VaR, ES) loss. Returns NaN when ES ≥ 0 or any
/// input is non-finite; the matrix layer maps such cells to a penalty.
#[inline]
pub fn fz0_loss(r: f64, f: RiskForecastPair, tau: f64) -> f64 {
    if !(f.es < 0.0) || !r.is_finite() || !f.var.is_finite() {
        return f64::NAN;
    }
    let hit = if r <= f.var { 1.0 } else { 0.0 };
    hit * (r - f.var) / (tau * f.es) + f.var / f.es + (-f.es).ln() - 1.0
}

/// Asymmetric-Laplace score for a joint (VaR, ES) forecast. Same validity
/// convention as [`fz0_loss`].
#[inline]
pub fn al_loss(r: f64, f: RiskForecastPair, tau: f64) -> f64 {
    if !(f.es < 0.0) || !r.is_finite() || !f.var.is_finite() {
        return f64::NAN;
    }
    let hit = if r <= f.var { 1.0 } else { 0.0 };
    -((tau - 1.0) / f.es).ln() - (r - f.var) * (tau - hit) / (tau * f.es)
}

/// Family evaluator dispatching on the preset.
#[inline]
pub fn general_fz_loss(r: f64, f: RiskForecastPair, tau: f64, preset: FzPreset) -> f64 {
    match preset {
        FzPreset::Fz0 => fz0_loss(r, f, tau),
        FzPreset::Al => al_loss(r, f, tau),
    }
}

/// Exponentially weighted loss smoother:
/// `w_1 = s_1`, `w_i = λ·s_i + (1−λ)·w_{i−1}`.
///
/// Initializing at the first observed loss makes the smoother an exact
/// convex combination of observed losses (weights summing to one), so the
/// output stays inside [min, max] of the inputs.
pub fn weighted_loss_series(losses: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::Config(format!(
            "smoothing lambda must lie in (0, 1], got {lambda}"
        )));
    }
    let mut out = Vec::with_capacity(losses.len());
    let mut prev = f64::NAN;
    for (i, s) in losses.iter().enumerate() {
        let w = if i == 0 { *s } else { lambda * s + (1.0 - lambda) * prev };
        out.push(w);
        prev = w;
    }
    Ok(out)
}

/// Penalty added on top of the day's worst valid loss for cells whose
/// forecast cannot be scored (ES ≥ 0 or non-finite values).
pub const INVALID_LOSS_PENALTY: f64 = 10.0;

/// Rectangular day × model matrix of losses, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct LossMatrix {
    pub dates: Vec<NaiveDate>,
    pub models: Vec<String>,
    values: Vec<f64>,
}

impl LossMatrix {
    pub fn new(dates: Vec<NaiveDate>, models: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if values.len() != dates.len() * models.len() {
            return Err(Error::Data(format!(
                "loss matrix size {} does not match {} days x {} models",
                values.len(),
                dates.len(),
                models.len()
            )));
        }
        Ok(LossMatrix {
            dates,
            models,
            values,
        })
    }

    pub fn n_days(&self) -> usize {
        self.dates.len()
    }

    pub fn n_models(&self) -> usize {
        self.models.len()
    }

    #[inline]
    pub fn get(&self, day: usize, model: usize) -> f64 {
        self.values[day * self.models.len() + model]
    }

    /// Row of per-model losses for one day.
    #[inline]
    pub fn row(&self, day: usize) -> &[f64] {
        let m = self.models.len();
        &self.values[day * m..(day + 1) * m]
    }

    /// Mean loss of one model over all days.
    pub fn column_mean(&self, model: usize) -> f64 {
        let mut s = 0.0;
        for day in 0..self.n_days() {
            s += self.get(day, model);
        }
        s / self.n_days() as f64
    }

    /// Restrict to a subset of model columns (clone).
    pub fn select_columns(&self, keep: &[usize]) -> LossMatrix {
        let models = keep.iter().map(|&i| self.models[i].clone()).collect();
        let mut values = Vec::with_capacity(self.n_days() * keep.len());
        for day in 0..self.n_days() {
            let row = self.row(day);
            for &i in keep {
                values.push(row[i]);
            }
        }
        LossMatrix {
            dates: self.dates.clone(),
            models,
            values,
        }
    }
}

/// Score a forecast panel against realized returns.
///
/// Cells with unusable forecasts receive the worst valid loss of their day
/// plus [`INVALID_LOSS_PENALTY`] (keeping the matrix finite while making the
/// offender lose every comparison); each such event is logged. With
/// `smooth_lambda` set, every column is passed through
/// [`weighted_loss_series`] after penalties are applied.
pub fn build_loss_matrix(
    panel: &ForecastPanel,
    returns: &[f64],
    tau: f64,
    preset: FzPreset,
    smooth_lambda: Option<f64>,
) -> Result<LossMatrix> {
    if returns.len() != panel.n_days() {
        return Err(Error::Data(format!(
            "panel has {} days but {} returns supplied",
            panel.n_days(),
            returns.len()
        )));
    }
    let n = panel.n_days();
    let m = panel.n_columns();
    let mut values = vec![0.0; n * m];
    for day in 0..n {
        let row = panel.row(day);
        let out = &mut values[day * m..(day + 1) * m];
        let mut day_max = f64::NEG_INFINITY;
        let mut any_invalid = false;
        for (j, f) in row.iter().enumerate() {
            let loss = general_fz_loss(returns[day], *f, tau, preset);
            out[j] = loss;
            if loss.is_finite() {
                day_max = day_max.max(loss);
            } else {
                any_invalid = true;
            }
        }
        if any_invalid {
            let base = if day_max.is_finite() { day_max } else { 0.0 };
            for (j, v) in out.iter_mut().enumerate() {
                if !v.is_finite() {
                    log::warn!(
                        "unusable forecast for model {} on {}: loss set to day max {base:.4} + {INVALID_LOSS_PENALTY}",
                        panel.columns[j],
                        panel.dates[day],
                    );
                    *v = base + INVALID_LOSS_PENALTY;
                }
            }
        }
    }
    let mut matrix = LossMatrix::new(panel.dates.clone(), panel.columns.clone(), values)?;
    if let Some(lambda) = smooth_lambda {
        let mut col = vec![0.0; n];
        for j in 0..m {
            for day in 0..n {
                col[day] = matrix.get(day, j);
            }
            let smoothed = weighted_loss_series(&col, lambda)?;
            for day in 0..n {
                matrix.values[day * m + j] = smoothed[day];
            }
        }
    }
    Ok(matrix)
}

/// Write a loss matrix as CSV (`date` column followed by one column per
/// model).
pub fn save_loss_matrix(path: &Path, matrix: &LossMatrix) -> Result<()> {
    let mut out = std::fs::File::create(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let io_err = |e: std::io::Error| Error::Io {
        path: path.display().to_string(),
        source: e,
    };
    let mut header = String::from("date");
    for mname in &matrix.models {
        header.push(',');
        header.push_str(mname);
    }
    writeln!(out, "{header}").map_err(io_err)?;
    for day in 0..matrix.n_days() {
        let mut line = matrix.dates[day].to_string();
        for v in matrix.row(day) {
            line.push(',');
            line.push_str(&v.to_string());
        }
        writeln!(out, "{line}").map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
    }
    Ok(())
}

/// Read a loss matrix written by [`save_loss_matrix`].
pub fn load_loss_matrix(path: &Path) -> Result<LossMatrix> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Data(format!("bad header in {}: {e}", path.display())))?
        .clone();
    if headers.is_empty() || headers.get(0) != Some("date") {
        return Err(Error::Data(format!(
            "{}: first column must be 'date'",
            path.display()
        )));
    }
    let models: Vec<String> = headers.iter().skip(1).map(|s| s.to_string()).collect();
    if models.is_empty() {
        return Err(Error::Data(format!("{}: no model columns", path.display())));
    }
    let mut dates = Vec::new();
    let mut values = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Data(format!("row {}: {e}", row_no + 2)))?;
        let date_raw = record.get(0).unwrap_or("").trim();
        let date = NaiveDate::parse_from_str(date_raw, "%Y-%m-%d").map_err(|_| {
            Error::Data(format!("row {}: cannot parse date '{date_raw}'", row_no + 2))
        })?;
        dates.push(date);
        for (k, mname) in models.iter().enumerate() {
            let raw = record.get(k + 1).unwrap_or("").trim();
            let v: f64 = raw.parse().map_err(|_| {
                Error::Data(format!(
                    "row {}: cannot parse loss '{raw}' in column {mname}",
                    row_no + 2
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Data(format!(
                    "row {}: non-finite loss in column {mname}",
                    row_no + 2
                )));
            }
            values.push(v);
        }
    }
    LossMatrix::new(dates, models, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const TAU: f64 = 0.025;
    const PAIR: RiskForecastPair = RiskForecastPair { var: -0.02, es: -0.03 };

    // Hand-evaluated worked triples, frozen from an independent oracle.
    const FZ0_VIOLATION: f64 = 36.160108769346685; // r = -0.05
    const FZ0_QUIET: f64 = -3.839891230653315; // r = 0.01
    const AL_QUIET: f64 = -2.481240089335692; // r = 0.01
    const AL_VIOLATION: f64 = 35.51875991066431; // r = -0.05

    #[test]
    fn fz0_matches_worked_triples() {
        assert_abs_diff_eq!(fz0_loss(-0.05, PAIR, TAU), FZ0_VIOLATION, epsilon = 1e-9);
        assert_abs_diff_eq!(fz0_loss(0.01, PAIR, TAU), FZ0_QUIET, epsilon = 1e-9);
    }

    #[test]
    fn al_matches_worked_triples() {
        assert_abs_diff_eq!(al_loss(0.01, PAIR, TAU), AL_QUIET, epsilon = 1e-9);
        assert_abs_diff_eq!(al_loss(-0.05, PAIR, TAU), AL_VIOLATION, epsilon = 1e-9);
    }

    #[test]
    fn al_is_zero_at_the_distributional_fixed_point() {
        // r on the VaR boundary with ES = tau - 1 zeroes both terms.
        let f = RiskForecastPair::new(-0.5, TAU - 1.0);
        assert_abs_diff_eq!(al_loss(-0.5, f, TAU), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn presets_are_definitional_identities() {
        for r in [-0.08, -0.02, 0.0, 0.013] {
            assert_abs_diff_eq!(
                general_fz_loss(r, PAIR, TAU, FzPreset::Fz0),
                fz0_loss(r, PAIR, TAU),
                epsilon = 1e-12
            );
            assert_abs_diff_eq!(
                general_fz_loss(r, PAIR, TAU, FzPreset::Al),
                al_loss(r, PAIR, TAU),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn invalid_es_yields_nan_not_panic() {
        assert!(fz0_loss(0.0, RiskForecastPair::new(-0.02, 0.0), TAU).is_nan());
        assert!(fz0_loss(0.0, RiskForecastPair::new(-0.02, 0.01), TAU).is_nan());
        assert!(al_loss(0.0, RiskForecastPair::new(-0.02, f64::NAN), TAU).is_nan());
    }

    #[test]
    fn smoother_handles_constant_and_rejects_bad_lambda() {
        let w = weighted_loss_series(&[2.5; 10], 0.06).unwrap();
        for v in w {
            assert_abs_diff_eq!(v, 2.5, epsilon = 1e-14);
        }
        assert!(weighted_loss_series(&[1.0], 0.0).is_err());
        assert!(weighted_loss_series(&[1.0], 1.5).is_err());
        assert!(weighted_loss_series(&[1.0], -0.2).is_err());
    }

    #[test]
    fn smoother_equals_explicit_geometric_expansion() {
        let losses: Vec<f64> = (0..200)
            .map(|i| ((i * 37 % 17) as f64 - 8.0) / 3.0)
            .collect();
        let lambda = 0.06;
        let rec = weighted_loss_series(&losses, lambda).unwrap();
        // Explicit expansion: w_i = λ Σ_{k=0}^{i-1} (1-λ)^k s_{i-k} + (1-λ)^i s_0,
        // the initialization absorbing the remainder of the geometric mass.
        for i in 0..losses.len() {
            let mut expected = (1.0 - lambda).powi(i as i32) * losses[0];
            for k in 0..i {
                expected += lambda * (1.0 - lambda).powi(k as i32) * losses[i - k];
            }
            assert_abs_diff_eq!(rec[i], expected, epsilon = 1e-10);
        }
    }

    #[test]
    fn lambda_mass_over_100_lags_matches_geometric_value() {
        // 1 - 0.94^100; the directly quoted 99.70% figure is off by ~0.1pp,
        // the geometric series value is authoritative.
        let mass = 1.0 - 0.94f64.powi(100);
        assert_abs_diff_eq!(mass, 0.9979451252294764, epsilon = 1e-12);
        assert!((mass - 0.9970).abs() < 0.003);
    }

    fn toy_panel() -> (ForecastPanel, Vec<f64>) {
        let dates: Vec<NaiveDate> = (0..3)
            .map(|i| NaiveDate::from_ymd_opt(2020, 1, 1 + i).unwrap())
            .collect();
        let cols = vec!["good".to_string(), "bad".to_string()];
        let good = RiskForecastPair::new(-0.02, -0.03);
        let invalid = RiskForecastPair::new(-0.02, 0.01);
        let values = vec![good, good, good, invalid, good, good];
        (
            ForecastPanel::new(dates, cols, values).unwrap(),
            vec![0.01, -0.05, 0.0],
        )
    }

    #[test]
    fn invalid_cell_gets_day_max_plus_penalty() {
        let (panel, returns) = toy_panel();
        let m = build_loss_matrix(&panel, &returns, TAU, FzPreset::Fz0, None).unwrap();
        // Day 1: the only valid loss is the 'good' column.
        let good_day1 = fz0_loss(returns[1], RiskForecastPair::new(-0.02, -0.03), TAU);
        assert_abs_diff_eq!(m.get(1, 0), good_day1, epsilon = 1e-12);
        assert_abs_diff_eq!(m.get(1, 1), good_day1 + INVALID_LOSS_PENALTY, epsilon = 1e-12);
    }

    #[test]
    fn smoothing_is_applied_per_column() {
        let (panel, returns) = toy_panel();
        let raw = build_loss_matrix(&panel, &returns, TAU, FzPreset::Fz0, None).unwrap();
        let smooth = build_loss_matrix(&panel, &returns, TAU, FzPreset::Fz0, Some(0.06)).unwrap();
        for j in 0..2 {
            let col: Vec<f64> = (0..3).map(|d| raw.get(d, j)).collect();
            let expected = weighted_loss_series(&col, 0.06).unwrap();
            for d in 0..3 {
                assert_abs_diff_eq!(smooth.get(d, j), expected[d], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn loss_matrix_round_trips_through_csv() {
        let (panel, returns) = toy_panel();
        let m = build_loss_matrix(&panel, &returns, TAU, FzPreset::Fz0, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("losses.csv");
        save_loss_matrix(&path, &m).unwrap();
        let back = load_loss_matrix(&path).unwrap();
        assert_eq!(m, back);
    }

    proptest! {
        // FZ0 is homogeneous of degree zero up to an additive log term, so
        // loss *differences* between two forecasts are invariant to a common
        // positive rescaling of (r, VaR, ES).
        #[test]
        fn fz0_loss_differences_scale_free(
            r in -0.1f64..0.1,
            v1 in -0.2f64..-0.001,
            e1_gap in 0.001f64..0.1,
            v2 in -0.2f64..-0.001,
            e2_gap in 0.001f64..0.1,
            c in 0.1f64..10.0,
        ) {
            let f1 = RiskForecastPair::new(v1, v1 - e1_gap);
            let f2 = RiskForecastPair::new(v2, v2 - e2_gap);
            let scale = |f: RiskForecastPair| RiskForecastPair::new(c * f.var, c * f.es);
            let d = fz0_loss(r, f1, TAU) - fz0_loss(r, f2, TAU);
            let d_scaled = fz0_loss(c * r, scale(f1), TAU) - fz0_loss(c * r, scale(f2), TAU);
            prop_assert!((d - d_scaled).abs() < 1e-9);
        }

        // The smoother is a convex combination of its inputs.
        #[test]
        fn smoother_stays_within_input_range(
            losses in proptest::collection::vec(-5.0f64..40.0, 1..60),
            lambda in 0.01f64..1.0,
        ) {
            let w = weighted_loss_series(&losses, lambda).unwrap();
            let lo = losses.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = losses.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for v in w {
                prop_assert!(v >= lo - 1e-10 && v <= hi + 1e-10);
            }
        }

        // Recursion output equals the explicit geometric expansion.
        #[test]
        fn smoother_matches_expansion(
            losses in proptest::collection::vec(-3.0f64..3.0, 1..50),
            lambda in 0.01f64..0.99,
        ) {
            let rec = weighted_loss_series(&losses, lambda).unwrap();
            for i in 0..losses.len() {
                let mut expected = (1.0 - lambda).powi(i as i32) * losses[0];
                for k in 0..i {
                    expected += lambda * (1.0 - lambda).powi(k as i32) * losses[i - k];
                }
                prop_assert!((rec[i] - expected).abs() <= 1e-10);
            }
        }
    }
}
