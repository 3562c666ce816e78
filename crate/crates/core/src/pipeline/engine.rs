//! Rolling out-of-sample engine: per-step model estimation and forecasting,
//! training-loss window maintenance, training MCS pruning, predictor
//! construction, and post-burn-in evaluation.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backtest::{run_all_backtests, BacktestReport};
use crate::combine::{
    apply_weights, build_mcs_predictors, ew_combine, fit_ms_weights, fit_rs_weights,
    median_combine, CombinationWeights, MemberHistory,
};
use crate::data::{self, ForecastPanel, ReturnSeries, RiskForecastPair};
use crate::error::{Error, Result};
use crate::mcs::{run_mcs, McsConfig, SuperiorSet};
use crate::quantile::{
    fit_caviar, forecast_caviar, hs_forecast, hs_insample_path, CaviarForm, CaviarSpec, HsSpec,
};
use crate::rng;
use crate::scoring::{self, FzPreset};

use super::universe::{full_universe, CandidateModel, RealizedMeasure, PREDICTOR_IDS};

/// Mapping from realized-measure slots to column names in the input series.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ExogColumns {
    pub rvol5: String,
    pub rbss: String,
    pub rk: String,
}

impl Default for ExogColumns {
    fn default() -> Self {
        ExogColumns {
            rvol5: RealizedMeasure::Rvol5.column().to_string(),
            rbss: RealizedMeasure::RbSs.column().to_string(),
            rk: RealizedMeasure::Rk.column().to_string(),
        }
    }
}

impl ExogColumns {
    pub fn column_for(&self, measure: RealizedMeasure) -> &str {
        match measure {
            RealizedMeasure::Rvol5 => &self.rvol5,
            RealizedMeasure::RbSs => &self.rbss,
            RealizedMeasure::Rk => &self.rk,
        }
    }
}

/// Full configuration of a rolling run.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Tail levels to forecast.
    pub taus: Vec<f64>,
    /// In-sample (rolling estimation) window length.
    pub t_in: usize,
    /// Smoothing parameter of the exponentially weighted loss.
    pub lambda: f64,
    /// Confidence level of the per-step training MCS.
    pub training_alpha: f64,
    /// Confidence level of the final evaluation MCS.
    pub eval_alpha: f64,
    /// Bootstrap replicates of each training MCS.
    pub training_b: usize,
    /// Bootstrap replicates of the evaluation MCS.
    pub eval_b: usize,
    /// Mean block length of the stationary bootstrap.
    pub mean_block: f64,
    /// Enabled candidate-model ids, in column order.
    pub models: Vec<String>,
    /// Realized-measure column mapping.
    pub exog: ExogColumns,
    /// Master seed; every random stream in the run derives from it.
    pub seed: u64,
    /// Out-of-sample days discarded before evaluation; defaults to t_in/2.
    pub burn_in: Option<usize>,
    /// Output directory for report files (used by the CLI layer).
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            taus: vec![0.025, 0.01],
            t_in: 1000,
            lambda: 0.06,
            training_alpha: 0.25,
            eval_alpha: 0.25,
            training_b: 1000,
            eval_b: 5000,
            mean_block: 10.0,
            models: full_universe().iter().map(|m| m.id()).collect(),
            exog: ExogColumns::default(),
            seed: 0,
            burn_in: None,
            out_dir: None,
        }
    }
}

impl RunConfig {
    pub fn resolved_burn_in(&self) -> usize {
        self.burn_in.unwrap_or(self.t_in / 2)
    }

    /// Resolves the enabled-model ids into candidate models, preserving
    /// configuration order.
    pub fn universe(&self) -> Result<Vec<CandidateModel>> {
        if self.models.is_empty() {
            return Err(Error::Config("no models enabled".to_string()));
        }
        let mut seen = std::collections::BTreeSet::new();
        self.models
            .iter()
            .map(|id| {
                if !seen.insert(id.clone()) {
                    return Err(Error::Config(format!("duplicate model id {id}")));
                }
                CandidateModel::from_id(id)
                    .ok_or_else(|| Error::Config(format!("unknown model id {id}")))
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.taus.is_empty() {
            return Err(Error::Config("at least one tau level required".to_string()));
        }
        for &tau in &self.taus {
            if !(tau > 0.0 && tau < 0.5) {
                return Err(Error::Config(format!(
                    "tau must lie in (0, 0.5), got {tau}"
                )));
            }
        }
        let mut sorted = self.taus.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        if sorted.len() != self.taus.len() {
            return Err(Error::Config("duplicate tau levels".to_string()));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::Config(format!(
                "lambda must lie in (0,1), got {}",
                self.lambda
            )));
        }
        for (name, alpha) in [
            ("training alpha", self.training_alpha),
            ("evaluation alpha", self.eval_alpha),
        ] {
            if !(0.0..=1.0).contains(&alpha) {
                return Err(Error::Config(format!(
                    "{name} must lie in [0,1], got {alpha}"
                )));
            }
        }
        if self.training_b == 0 || self.eval_b == 0 {
            return Err(Error::Config(
                "bootstrap replicate counts must be positive".to_string(),
            ));
        }
        if self.mean_block < 1.0 {
            return Err(Error::Config(format!(
                "mean block length must be at least 1, got {}",
                self.mean_block
            )));
        }
        let universe = self.universe()?;
        for model in &universe {
            if let CandidateModel::Hs(w) = model {
                if *w > self.t_in {
                    return Err(Error::Config(format!(
                        "HS lookback {w} exceeds in-sample window t_in = {}",
                        self.t_in
                    )));
                }
            }
        }
        if let Some(b) = self.burn_in {
            let _ = b; // length checks happen against the series at run time
        }
        Ok(())
    }
}

/// Training-SSM membership of every enabled model at one step.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepMembership {
    pub step: usize,
    pub tau: f64,
    /// "unweighted" (plain FZ0) or "weighted" (λ-smoothed FZ0).
    pub loss_kind: String,
    pub members: Vec<(String, bool)>,
}

/// Fitted combination weights recorded for one predictor at one step.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepWeightRecord {
    pub step: usize,
    pub tau: f64,
    pub predictor: String,
    pub members: Vec<String>,
    pub w: Vec<f64>,
    pub w_q: Vec<f64>,
    pub w_s: Vec<f64>,
    pub psi: Option<f64>,
}

/// One model-failure carry-forward event.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CarryForwardEvent {
    pub step: usize,
    pub model: String,
    pub reason: String,
}

/// Everything produced by a rolling run: per-tau forecast panels over the
/// out-of-sample dates (models then predictors), per-step training-SSM
/// membership, fitted weights, carry-forward events, and timing.
#[derive(Clone, Debug)]
pub struct ForecastStore {
    pub taus: Vec<f64>,
    pub t_in: usize,
    /// Out-of-sample target dates; index = step.
    pub dates: Vec<NaiveDate>,
    pub model_ids: Vec<String>,
    pub predictor_ids: Vec<String>,
    /// One panel per tau with columns `model_ids ++ predictor_ids`.
    pub panels: Vec<ForecastPanel>,
    pub memberships: Vec<StepMembership>,
    pub weight_records: Vec<StepWeightRecord>,
    pub carry_forward: Vec<CarryForwardEvent>,
    /// Wall-clock seconds per step (memory only; never written to outputs).
    pub step_seconds: Vec<f64>,
}

impl ForecastStore {
    pub fn nstep(&self) -> usize {
        self.dates.len()
    }

    pub fn columns(&self) -> Vec<String> {
        let mut cols = self.model_ids.clone();
        cols.extend(self.predictor_ids.iter().cloned());
        cols
    }

    pub fn panel_for_tau(&self, tau: f64) -> Option<&ForecastPanel> {
        self.taus
            .iter()
            .position(|t| *t == tau)
            .map(|i| &self.panels[i])
    }
}

/// Fits one model on a window and produces its one-step (VaR, ES) forecast
/// at each tau. Quantile models refit per tau; variance models fit once.
fn fit_and_forecast(
    model: &CandidateModel,
    window: &[f64],
    exog_window: Option<&[f64]>,
    exog_name: Option<&str>,
    taus: &[f64],
) -> Result<Vec<RiskForecastPair>> {
    match model {
        CandidateModel::RiskMetrics(tk) => {
            let fit = crate::models::fit_riskmetrics(window, *tk)?;
            taus.iter().map(|&t| fit.forecast_var_es(t)).collect()
        }
        CandidateModel::Garch(tk) => {
            let fit = crate::models::fit_garch(window, *tk)?;
            taus.iter().map(|&t| fit.forecast_var_es(t)).collect()
        }
        CandidateModel::Gjr(tk) => {
            let fit = crate::models::fit_gjr(window, *tk)?;
            taus.iter().map(|&t| fit.forecast_var_es(t)).collect()
        }
        CandidateModel::Rgarch(_, tk) => {
            let rv = exog_window.ok_or_else(|| {
                Error::fit(model.id(), "realized measure column missing".to_string())
            })?;
            let fit = crate::models::fit_rgarch(window, rv, *tk)?;
            taus.iter().map(|&t| fit.forecast_var_es(t)).collect()
        }
        CandidateModel::Hs(w) => taus
            .iter()
            .map(|&t| hs_forecast(window, &HsSpec { w: *w, tau: t }))
            .collect(),
        CandidateModel::CaviarSav | CandidateModel::CaviarAs | CandidateModel::CaviarIg => {
            let form = match model {
                CandidateModel::CaviarSav => CaviarForm::Sav,
                CandidateModel::CaviarAs => CaviarForm::As,
                _ => CaviarForm::Ig,
            };
            taus.iter()
                .map(|&t| {
                    let spec = CaviarSpec {
                        form,
                        exog_column: None,
                        tau: t,
                    };
                    let fit = fit_caviar(window, None, &spec)?;
                    forecast_caviar(&fit, &spec, *window.last().unwrap(), None)
                })
                .collect()
        }
        CandidateModel::CaviarX(_) => {
            let rv = exog_window.ok_or_else(|| {
                Error::fit(model.id(), "realized measure column missing".to_string())
            })?;
            taus.iter()
                .map(|&t| {
                    let spec = CaviarSpec {
                        form: CaviarForm::X,
                        exog_column: exog_name.map(str::to_string),
                        tau: t,
                    };
                    let fit = fit_caviar(window, Some(rv), &spec)?;
                    forecast_caviar(&fit, &spec, *window.last().unwrap(), rv.last().copied())
                })
                .collect()
        }
    }
}

/// In-sample fitted (VaR, ES) paths of one model on a window, per tauial
/// level. These seed the training-loss composite at step 0.
fn insample_paths(
    model: &CandidateModel,
    window: &[f64],
    exog_window: Option<&[f64]>,
    exog_name: Option<&str>,
    taus: &[f64],
) -> Result<Vec<Vec<RiskForecastPair>>> {
    match model {
        CandidateModel::RiskMetrics(tk) => {
            let fit = crate::models::fit_riskmetrics(window, *tk)?;
            taus.iter().map(|&t| fit.insample_var_es(t)).collect()
        }
        CandidateModel::Garch(tk) => {
            let fit = crate::models::fit_garch(window, *tk)?;
            taus.iter().map(|&t| fit.insample_var_es(t)).collect()
        }
        CandidateModel::Gjr(tk) => {
            let fit = crate::models::fit_gjr(window, *tk)?;
            taus.iter().map(|&t| fit.insample_var_es(t)).collect()
        }
        CandidateModel::Rgarch(_, tk) => {
            let rv = exog_window.ok_or_else(|| {
                Error::fit(model.id(), "realized measure column missing".to_string())
            })?;
            let fit = crate::models::fit_rgarch(window, rv, *tk)?;
            taus.iter().map(|&t| fit.insample_var_es(t)).collect()
        }
        CandidateModel::Hs(w) => Ok(taus
            .iter()
            .map(|&t| hs_insample_path(window, *w, t))
            .collect()),
        CandidateModel::CaviarSav
        | CandidateModel::CaviarAs
        | CandidateModel::CaviarIg
        | CandidateModel::CaviarX(_) => {
            let (form, exog) = match model {
                CandidateModel::CaviarSav => (CaviarForm::Sav, None),
                CandidateModel::CaviarAs => (CaviarForm::As, None),
                CandidateModel::CaviarIg => (CaviarForm::Ig, None),
                _ => (CaviarForm::X, exog_window),
            };
            if matches!(model, CandidateModel::CaviarX(_)) && exog.is_none() {
                return Err(Error::fit(
                    model.id(),
                    "realized measure column missing".to_string(),
                ));
            }
            taus.iter()
                .map(|&t| {
                    let spec = CaviarSpec {
                        form,
                        exog_column: if form == CaviarForm::X {
                            exog_name.map(str::to_string)
                        } else {
                            None
                        },
                        tau: t,
                    };
                    let fit = fit_caviar(window, exog, &spec)?;
                    Ok(fit
                        .var_path
                        .iter()
                        .zip(&fit.es_path)
                        .map(|(&var, &es)| RiskForecastPair { var, es })
                        .collect())
                })
                .collect()
        }
    }
}

/// Assembles the training panel for step `j` at tau index `ti`: series days
/// `j .. j+t_in`, where days before `t_in` come from the window-0 in-sample
/// fitted paths and later days from stored out-of-sample forecasts (made at
/// earlier steps, so no look-ahead).
pub(crate) fn build_training_panel(
    j: usize,
    t_in: usize,
    dates: &[NaiveDate],
    model_ids: &[String],
    insample: &[Vec<RiskForecastPair>],
    oos: &[Vec<RiskForecastPair>],
) -> Result<ForecastPanel> {
    let m = model_ids.len();
    let mut values = Vec::with_capacity(t_in * m);
    for g in j..j + t_in {
        for mi in 0..m {
            values.push(if g < t_in {
                insample[mi][g]
            } else {
                oos[mi][g - t_in]
            });
        }
    }
    ForecastPanel::new(dates[j..j + t_in].to_vec(), model_ids.to_vec(), values)
}

/// Runs the rolling algorithm: for each step, fit all enabled models on the
/// sliding window, forecast one step ahead, assemble the training losses,
/// run both training MCS variants, and build all ten predictors.
///
/// Model fits are cross-step independent and run concurrently; the
/// combination pass is sequential in the step index. A model failing after
/// its first window has its forecast carried forward with a logged gap; a
/// failure at step 0 or any predictor failure aborts the run.
pub fn run_rolling(config: &RunConfig, series: &ReturnSeries) -> Result<ForecastStore> {
    config.validate()?;
    let universe = config.universe()?;
    let m = universe.len();
    let plan = data::make_window_plan(series.returns.len(), config.t_in)?;
    let nstep = plan.nstep();
    let t_in = config.t_in;
    let ntau = config.taus.len();
    let model_ids: Vec<String> = universe.iter().map(|u| u.id()).collect();
    let predictor_ids: Vec<String> = PREDICTOR_IDS.iter().map(|s| s.to_string()).collect();

    // Resolve realized-measure columns up front.
    let mut exog_cols: Vec<Option<(&str, &[f64])>> = Vec::with_capacity(m);
    for model in &universe {
        match model {
            CandidateModel::Rgarch(measure, _) | CandidateModel::CaviarX(measure) => {
                let name = config.exog.column_for(*measure);
                let col = series.exog_column(name).ok_or_else(|| {
                    Error::Config(format!(
                        "model {} needs exogenous column '{name}', not present in series",
                        model.id()
                    ))
                })?;
                if col.len() != series.returns.len() {
                    return Err(Error::Config(format!(
                        "exogenous column '{name}' has {} rows, series has {}",
                        col.len(),
                        series.returns.len()
                    )));
                }
                exog_cols.push(Some((name, col)));
            }
            _ => exog_cols.push(None),
        }
    }

    log::info!(
        "rolling run: {nstep} steps, {m} models, {ntau} tau level(s), t_in = {t_in}"
    );

    // Phase 1: all (step, model) fits, concurrently. Within-fit randomness
    // derives from constant internal labels, so results are identical at any
    // worker count.
    let t0 = Instant::now();
    let jobs: Vec<(usize, usize)> = (0..nstep)
        .flat_map(|j| (0..m).map(move |mi| (j, mi)))
        .collect();
    let raw: Vec<Result<Vec<RiskForecastPair>>> = jobs
        .par_iter()
        .map(|&(j, mi)| {
            let w = plan.window(j);
            let window = &series.returns[w.clone()];
            let exog_window = exog_cols[mi].map(|(_, col)| &col[w.clone()]);
            fit_and_forecast(
                &universe[mi],
                window,
                exog_window,
                exog_cols[mi].map(|(n, _)| n),
                &config.taus,
            )
        })
        .collect();
    log::info!("model fits done in {:.1}s", t0.elapsed().as_secs_f64());

    // Carry-forward pass: oos[mi][ti][j] fully populated or the run aborts.
    let mut oos: Vec<Vec<Vec<RiskForecastPair>>> =
        vec![vec![Vec::with_capacity(nstep); ntau]; m];
    let mut carry_forward = Vec::new();
    for j in 0..nstep {
        for mi in 0..m {
            match &raw[j * m + mi] {
                Ok(pairs) => {
                    for ti in 0..ntau {
                        oos[mi][ti].push(pairs[ti]);
                    }
                }
                Err(e) => {
                    if j == 0 {
                        return Err(Error::Pipeline(format!(
                            "model {} failed on the first window: {e}",
                            model_ids[mi]
                        )));
                    }
                    log::warn!(
                        "step {j}: model {} failed ({e}); carrying forward previous forecast",
                        model_ids[mi]
                    );
                    carry_forward.push(CarryForwardEvent {
                        step: j,
                        model: model_ids[mi].clone(),
                        reason: e.to_string(),
                    });
                    for ti in 0..ntau {
                        let prev = oos[mi][ti][j - 1];
                        oos[mi][ti].push(prev);
                    }
                }
            }
        }
    }

    // Window-0 in-sample paths seed the training composite.
    let insample_raw: Vec<Result<Vec<Vec<RiskForecastPair>>>> = (0..m)
        .into_par_iter()
        .map(|mi| {
            let w = plan.window(0);
            insample_paths(
                &universe[mi],
                &series.returns[w.clone()],
                exog_cols[mi].map(|(_, col)| &col[w.clone()]),
                exog_cols[mi].map(|(n, _)| n),
                &config.taus,
            )
        })
        .collect();
    let mut insample: Vec<Vec<Vec<RiskForecastPair>>> = Vec::with_capacity(m);
    for (mi, r) in insample_raw.into_iter().enumerate() {
        insample.push(r.map_err(|e| {
            Error::Pipeline(format!(
                "model {} failed to produce in-sample paths: {e}",
                model_ids[mi]
            ))
        })?);
    }

    // Phase 2: sequential predictor construction.
    let ncol = m + predictor_ids.len();
    let mut values: Vec<Vec<RiskForecastPair>> =
        vec![Vec::with_capacity(nstep * ncol); ntau];
    let mut memberships = Vec::new();
    let mut weight_records = Vec::new();
    let mut step_seconds = Vec::with_capacity(nstep);
    let oos_dates: Vec<NaiveDate> = (0..nstep).map(|j| series.dates[plan.target(j)]).collect();

    for j in 0..nstep {
        let step_t0 = Instant::now();
        for (ti, &tau) in config.taus.iter().enumerate() {
            let per_model_insample: Vec<Vec<RiskForecastPair>> =
                (0..m).map(|mi| insample[mi][ti].clone()).collect();
            let per_model_oos: Vec<Vec<RiskForecastPair>> =
                (0..m).map(|mi| oos[mi][ti].clone()).collect();
            let hist_panel = build_training_panel(
                j,
                t_in,
                &series.dates,
                &model_ids,
                &per_model_insample,
                &per_model_oos,
            )?;
            let hist_returns = &series.returns[j..j + t_in];
            let hist = MemberHistory {
                panel: &hist_panel,
                members: (0..m).collect(),
                returns: hist_returns,
                tau,
            };
            let today: Vec<RiskForecastPair> = (0..m).map(|mi| oos[mi][ti][j]).collect();

            let ew = ew_combine(&today)?;
            let median = median_combine(&today)?;
            let rs_w = fit_rs_weights(&hist)?;
            let rs = apply_weights(&rs_w, &model_ids, &today)?;
            let ms_w = fit_ms_weights(
                &hist,
                rng::derive(config.seed, &[rng::label("ms-global"), tau.to_bits(), j as u64]),
            )?;
            let ms = apply_weights(&ms_w, &model_ids, &today)?;

            let mcs_cfg = McsConfig {
                alpha: config.training_alpha,
                b: config.training_b,
                mean_block: config.mean_block,
                seed: rng::derive(
                    config.seed,
                    &[rng::label("train-step"), tau.to_bits(), j as u64],
                ),
            };
            let set = build_mcs_predictors(
                &hist,
                config.lambda,
                &mcs_cfg,
                &model_ids,
                &today,
                rng::derive(config.seed, &[rng::label("ms-mcs"), tau.to_bits(), j as u64]),
            )?;

            values[ti].extend(today.iter().copied());
            values[ti].push(ew);
            values[ti].push(median);
            values[ti].push(rs);
            values[ti].push(ms);
            for (_, pair) in &set.predictors {
                values[ti].push(*pair);
            }

            for (kind, ssm) in [("unweighted", &set.unweighted_ssm), ("weighted", &set.weighted_ssm)]
            {
                memberships.push(StepMembership {
                    step: j,
                    tau,
                    loss_kind: kind.to_string(),
                    members: model_ids
                        .iter()
                        .map(|id| (id.clone(), ssm.is_survivor(id)))
                        .collect(),
                });
            }
            let mut record = |predictor: &str, w: &CombinationWeights| {
                weight_records.push(StepWeightRecord {
                    step: j,
                    tau,
                    predictor: predictor.to_string(),
                    members: w.member_set.clone(),
                    w: w.w.clone(),
                    w_q: w.w_q.clone(),
                    w_s: w.w_s.clone(),
                    psi: w.psi,
                });
            };
            record("RS-Comb", &rs_w);
            record("MS-Comb", &ms_w);
            for (id, w) in &set.fitted_weights {
                record(id, w);
            }
        }
        step_seconds.push(step_t0.elapsed().as_secs_f64());
        if (j + 1) % 50 == 0 || j + 1 == nstep {
            log::info!(
                "step {}/{} done ({:.0} ms/step recent)",
                j + 1,
                nstep,
                step_seconds.iter().rev().take(50).sum::<f64>() / 50.0_f64.min(nstep as f64)
                    * 1000.0
            );
        }
    }

    let mut columns = model_ids.clone();
    columns.extend(predictor_ids.iter().cloned());
    let panels: Vec<ForecastPanel> = values
        .into_iter()
        .map(|v| ForecastPanel::new(oos_dates.clone(), columns.clone(), v))
        .collect::<Result<_>>()?;

    Ok(ForecastStore {
        taus: config.taus.clone(),
        t_in,
        dates: oos_dates,
        model_ids,
        predictor_ids,
        panels,
        memberships,
        weight_records,
        carry_forward,
        step_seconds,
    })
}

/// The evaluation-MCS outcome for one tau level.
#[derive(Clone, Debug)]
pub struct EvalSsm {
    pub tau: f64,
    pub ssm: SuperiorSet,
}

/// Post-burn-in evaluation: per-tau backtest reports with the evaluation
/// MCS membership filled in.
#[derive(Clone, Debug)]
pub struct EvaluationReport {
    pub burn_in: usize,
    /// First evaluated out-of-sample date.
    pub eval_start: NaiveDate,
    pub reports: Vec<BacktestReport>,
    pub eval_ssms: Vec<EvalSsm>,
}

fn slice_panel(panel: &ForecastPanel, from: usize) -> Result<ForecastPanel> {
    let ncol = panel.n_columns();
    let mut values = Vec::with_capacity((panel.n_days() - from) * ncol);
    for d in from..panel.n_days() {
        values.extend_from_slice(panel.row(d));
    }
    ForecastPanel::new(
        panel.dates[from..].to_vec(),
        panel.columns.clone(),
        values,
    )
}

/// Discards the burn-in, backtests every column, and runs the evaluation
/// MCS on the post-burn-in FZ0 losses.
pub fn evaluate(
    store: &ForecastStore,
    series: &ReturnSeries,
    config: &RunConfig,
) -> Result<EvaluationReport> {
    let burn = config.resolved_burn_in();
    let nstep = store.nstep();
    if burn >= nstep {
        return Err(Error::Pipeline(format!(
            "empty evaluation window: burn-in {burn} consumes all {nstep} out-of-sample days"
        )));
    }
    if series.returns.len() < store.t_in + nstep {
        return Err(Error::Pipeline(format!(
            "series has {} days; store expects at least {}",
            series.returns.len(),
            store.t_in + nstep
        )));
    }
    let eval_returns = &series.returns[store.t_in + burn..store.t_in + nstep];
    let mut reports = Vec::with_capacity(store.taus.len());
    let mut eval_ssms = Vec::with_capacity(store.taus.len());
    for (ti, &tau) in store.taus.iter().enumerate() {
        let panel = slice_panel(&store.panels[ti], burn)?;
        let mut report = run_all_backtests(eval_returns, &panel, tau)?;
        let lm = scoring::build_loss_matrix(&panel, eval_returns, tau, FzPreset::Fz0, None)?;
        let ssm = run_mcs(
            &lm,
            &McsConfig {
                alpha: config.eval_alpha,
                b: config.eval_b,
                mean_block: config.mean_block,
                seed: rng::derive(config.seed, &[rng::label("eval-mcs"), tau.to_bits()]),
            },
        )?;
        for col in report.columns.iter_mut() {
            col.in_eval_ssm = Some(ssm.is_survivor(&col.column));
        }
        reports.push(report);
        eval_ssms.push(EvalSsm { tau, ssm });
    }
    Ok(EvaluationReport {
        burn_in: burn,
        eval_start: store.dates[burn],
        reports,
        eval_ssms,
    })
}

/// Table-6-style pass/membership counts for one column across several
/// evaluated series: how often it passed all six backtests, entered the
/// evaluation SSM, and both.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SummaryCounts {
    pub column: String,
    pub tau: f64,
    pub n_series: usize,
    pub n_backtest_pass: usize,
    pub n_mcs_member: usize,
    pub n_both: usize,
}

/// Aggregates evaluation reports from several series into per-column
/// counts, keyed by (tau, column).
pub fn summarize_across_series(evals: &[EvaluationReport]) -> Vec<SummaryCounts> {
    let mut acc: BTreeMap<(u64, String), SummaryCounts> = BTreeMap::new();
    for eval in evals {
        for report in &eval.reports {
            for col in &report.columns {
                let key = (report.tau.to_bits(), col.column.clone());
                let entry = acc.entry(key).or_insert_with(|| SummaryCounts {
                    column: col.column.clone(),
                    tau: report.tau,
                    n_series: 0,
                    n_backtest_pass: 0,
                    n_mcs_member: 0,
                    n_both: 0,
                });
                entry.n_series += 1;
                let member = col.in_eval_ssm.unwrap_or(false);
                if col.pass {
                    entry.n_backtest_pass += 1;
                }
                if member {
                    entry.n_mcs_member += 1;
                }
                if col.pass && member {
                    entry.n_both += 1;
                }
            }
        }
    }
    acc.into_values().collect()
}
