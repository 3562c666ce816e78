//! Forecast combination: equally weighted and median benchmarks, relative
//! score (RS) and minimum score (MS) weighting, and the six predictors built
//! from the training Model Confidence Set.
//!
//! RS and MS weights are fitted by minimizing the joint Asymmetric-Laplace
//! loss of the combined forecasts over a training history. Days on which any
//! member's pair is unscoreable (non-finite, or ES ≥ 0) are excluded from
//! weight fitting; the MCS stage upstream already punishes such models via
//! loss penalties.

use crate::data::{ForecastPanel, RiskForecastPair};
use crate::error::{Error, Result};
use crate::mcs::{run_mcs, McsConfig, SuperiorSet};
use crate::optim::golden_section;
use crate::rng;
use crate::scoring::{self, FzPreset};
use rand::Rng;

/// Combination scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Ew,
    Median,
    Rs,
    Ms,
}

/// Fitted combination weights over a member set.
#[derive(Debug, Clone)]
pub struct CombinationWeights {
    pub scheme: Scheme,
    /// Model ids the weights apply to, in weight order.
    pub member_set: Vec<String>,
    /// Per-member weights (ew/rs; empty for median/ms).
    pub w: Vec<f64>,
    /// VaR-part weights (ms only).
    pub w_q: Vec<f64>,
    /// ES-spread weights (ms only).
    pub w_s: Vec<f64>,
    /// RS tuning parameter.
    pub psi: Option<f64>,
}

/// A member-forecast training history: a panel restricted to a member set,
/// with aligned realized returns, at one tau level.
pub struct MemberHistory<'a> {
    pub panel: &'a ForecastPanel,
    /// Column indices of the members within the panel.
    pub members: Vec<usize>,
    pub returns: &'a [f64],
    pub tau: f64,
}

impl<'a> MemberHistory<'a> {
    pub fn member_ids(&self) -> Vec<String> {
        self.members
            .iter()
            .map(|&j| self.panel.columns[j].clone())
            .collect()
    }

    /// Days on which every member is scoreable (finite pair, ES < 0).
    fn clean_days(&self) -> Vec<usize> {
        (0..self.panel.n_days())
            .filter(|&d| {
                self.members.iter().all(|&j| {
                    let p = self.panel.get(d, j);
                    p.var.is_finite() && p.es.is_finite() && p.es < 0.0
                })
            })
            .collect()
    }

    fn validate(&self) -> Result<Vec<usize>> {
        if self.members.is_empty() {
            return Err(Error::Combination("empty member set".to_string()));
        }
        if self.returns.len() != self.panel.n_days() {
            return Err(Error::Combination(format!(
                "history has {} days but {} returns",
                self.panel.n_days(),
                self.returns.len()
            )));
        }
        let clean = self.clean_days();
        if clean.len() < 50 {
            return Err(Error::Combination(format!(
                "only {} scoreable history days (need ≥ 50)",
                clean.len()
            )));
        }
        Ok(clean)
    }
}

/// Equally weighted combination of a member set's forecasts.
pub fn ew_combine(pairs: &[RiskForecastPair]) -> Result<RiskForecastPair> {
    if pairs.is_empty() {
        return Err(Error::Combination("empty member set".to_string()));
    }
    let n = pairs.len() as f64;
    Ok(RiskForecastPair {
        var: pairs.iter().map(|p| p.var).sum::<f64>() / n,
        es: pairs.iter().map(|p| p.es).sum::<f64>() / n,
    })
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Componentwise median combination.
pub fn median_combine(pairs: &[RiskForecastPair]) -> Result<RiskForecastPair> {
    if pairs.is_empty() {
        return Err(Error::Combination("empty member set".to_string()));
    }
    let mut vars: Vec<f64> = pairs.iter().map(|p| p.var).collect();
    let mut ess: Vec<f64> = pairs.iter().map(|p| p.es).collect();
    Ok(RiskForecastPair {
        var: median(&mut vars),
        es: median(&mut ess),
    })
}

/// RS softmax weights for a given ψ: w ∝ exp(−ψ·L_m), computed with
/// max-subtraction so normalization stays exact for any loss scale.
/// ψ = 0 yields exactly equal weights.
pub fn rs_softmax(loss_sums: &[f64], psi: f64) -> Vec<f64> {
    let min = loss_sums.iter().fold(f64::INFINITY, |a, &v| a.min(v));
    let mut w: Vec<f64> = loss_sums.iter().map(|l| (-psi * (l - min)).exp()).collect();
    let total: f64 = w.iter().sum();
    for v in w.iter_mut() {
        *v /= total;
    }
    w
}

/// Joint AL loss of the RS-combined path for fixed member weights.
fn combined_al_loss(
    hist: &MemberHistory,
    clean: &[usize],
    weight_of: impl Fn(usize) -> (f64, f64),
) -> f64 {
    let mut total = 0.0;
    for &d in clean {
        let mut var_c = 0.0;
        let mut es_c = 0.0;
        for (k, &j) in hist.members.iter().enumerate() {
            let p = hist.panel.get(d, j);
            let (wq, ws) = weight_of(k);
            var_c += wq * p.var;
            es_c += ws * (p.es - p.var);
        }
        es_c += var_c;
        let s = scoring::al_loss(
            hist.returns[d],
            RiskForecastPair { var: var_c, es: es_c },
            hist.tau,
        );
        if !s.is_finite() {
            return f64::INFINITY;
        }
        total += s;
    }
    total
}

/// Fit relative-score weights: w_m ∝ exp(−ψ·ΣAL_m), with ψ chosen to
/// minimize the AL loss of the combined path via a 17-point grid on
/// log₁₀ψ ∈ [−6, 2] refined by golden-section search.
pub fn fit_rs_weights(hist: &MemberHistory) -> Result<CombinationWeights> {
    let clean = hist.validate()?;
    let loss_sums: Vec<f64> = hist
        .members
        .iter()
        .map(|&j| {
            clean
                .iter()
                .map(|&d| scoring::al_loss(hist.returns[d], hist.panel.get(d, j), hist.tau))
                .sum()
        })
        .collect();

    let objective = |u: f64| {
        let w = rs_softmax(&loss_sums, 10f64.powf(u));
        combined_al_loss(hist, &clean, |k| (w[k], w[k]))
    };

    let mut best_u = -6.0;
    let mut best_f = f64::INFINITY;
    for k in 0..17 {
        let u = -6.0 + 0.5 * k as f64;
        let f = objective(u);
        if f < best_f {
            best_f = f;
            best_u = u;
        }
    }
    let lo = (best_u - 0.5).max(-6.0);
    let hi = (best_u + 0.5).min(2.0);
    let (u_ref, f_ref) = golden_section(objective, lo, hi, 1e-3, 200);
    let u_star = if f_ref < best_f { u_ref } else { best_u };
    let psi = 10f64.powf(u_star);

    Ok(CombinationWeights {
        scheme: Scheme::Rs,
        member_set: hist.member_ids(),
        w: rs_softmax(&loss_sums, psi),
        w_q: Vec::new(),
        w_s: Vec::new(),
        psi: Some(psi),
    })
}

fn softmax(theta: &[f64]) -> Vec<f64> {
    let max = theta.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
    let mut w: Vec<f64> = theta.iter().map(|t| (t - max).exp()).collect();
    let total: f64 = w.iter().sum();
    for v in w.iter_mut() {
        *v /= total;
    }
    w
}

/// Fit minimum-score weights: two convex weight sets (VaR part, ES-spread
/// part) minimizing the combined AL loss, softmax-reparameterized and
/// optimized from 20 random simplex starts plus the equal-weight point.
pub fn fit_ms_weights(hist: &MemberHistory, seed: u64) -> Result<CombinationWeights> {
    let clean = hist.validate()?;
    let m = hist.members.len();
    let ids = hist.member_ids();
    if m == 1 {
        return Ok(CombinationWeights {
            scheme: Scheme::Ms,
            member_set: ids,
            w: Vec::new(),
            w_q: vec![1.0],
            w_s: vec![1.0],
            psi: None,
        });
    }

    let objective = |theta: &[f64]| {
        let wq = softmax(&theta[..m]);
        let ws = softmax(&theta[m..]);
        combined_al_loss(hist, &clean, |k| (wq[k], ws[k]))
    };

    let mut starts = vec![vec![0.0; 2 * m]];
    let mut start_rng = rng::stream(seed, &[rng::label("ms-starts")]);
    for _ in 0..20 {
        let mut theta = Vec::with_capacity(2 * m);
        for _ in 0..2 * m {
            // ln of a uniform-simplex (Dirichlet(1)) draw.
            let u: f64 = 1.0 - start_rng.gen::<f64>();
            theta.push((-u.ln()).max(1e-12).ln());
        }
        starts.push(theta);
    }

    let (theta, fval, _converged) =
        crate::models::multi_start_minimize(objective, &starts, 40, 300);
    if !fval.is_finite() {
        return Err(Error::Combination(
            "no MS start produced a finite combined loss".to_string(),
        ));
    }

    Ok(CombinationWeights {
        scheme: Scheme::Ms,
        member_set: ids,
        w: Vec::new(),
        w_q: softmax(&theta[..m]),
        w_s: softmax(&theta[m..]),
        psi: None,
    })
}

/// Apply fitted weights to today's forecasts (given as parallel id/pair
/// slices covering at least the member set).
pub fn apply_weights(
    weights: &CombinationWeights,
    today_ids: &[String],
    today: &[RiskForecastPair],
) -> Result<RiskForecastPair> {
    if weights.member_set.is_empty() {
        return Err(Error::Combination("empty member set".to_string()));
    }
    let member_pairs: Result<Vec<RiskForecastPair>> = weights
        .member_set
        .iter()
        .map(|id| {
            today_ids
                .iter()
                .position(|t| t == id)
                .map(|k| today[k])
                .ok_or_else(|| {
                    Error::Combination(format!("missing forecast for member model {id}"))
                })
        })
        .collect();
    let member_pairs = member_pairs?;

    match weights.scheme {
        Scheme::Ew => ew_combine(&member_pairs),
        Scheme::Median => median_combine(&member_pairs),
        Scheme::Rs => {
            let mut var = 0.0;
            let mut es = 0.0;
            for (w, p) in weights.w.iter().zip(&member_pairs) {
                var += w * p.var;
                es += w * p.es;
            }
            Ok(RiskForecastPair { var, es })
        }
        Scheme::Ms => {
            let mut var = 0.0;
            let mut spread = 0.0;
            for (k, p) in member_pairs.iter().enumerate() {
                var += weights.w_q[k] * p.var;
                spread += weights.w_s[k] * (p.es - p.var);
            }
            Ok(RiskForecastPair { var, es: var + spread })
        }
    }
}

/// Output of one training-MCS predictor construction.
pub struct McsPredictorSet {
    /// The six predictors, in reporting order:
    /// MCS-Comb, WL-MCS-Comb, MCS-RS-Comb, WL-MCS-RS-Comb, MCS-MS-Comb,
    /// WL-MCS-MS-Comb.
    pub predictors: Vec<(String, RiskForecastPair)>,
    /// Training SSM from the unweighted FZ0 loss matrix.
    pub unweighted_ssm: SuperiorSet,
    /// Training SSM from the λ-smoothed FZ0 loss matrix.
    pub weighted_ssm: SuperiorSet,
    /// The refitted RS/MS weights behind the four weighted predictors,
    /// keyed by predictor id.
    pub fitted_weights: Vec<(String, CombinationWeights)>,
}

/// Build the six MCS-based predictors for one day.
///
/// `hist` must span the full enabled universe; two FZ0 loss matrices
/// (unweighted and λ-smoothed) drive two training MCS runs, and the EW/RS/MS
/// schemes are applied over each survivor set, with RS/MS weights refitted
/// on the history restricted to the survivors.
pub fn build_mcs_predictors(
    hist: &MemberHistory,
    lambda: f64,
    mcs_cfg: &McsConfig,
    today_ids: &[String],
    today: &[RiskForecastPair],
    ms_seed: u64,
) -> Result<McsPredictorSet> {
    let member_ids = hist.member_ids();
    let sub_panel = if hist.members.len() == hist.panel.n_columns() {
        None
    } else {
        let mut values = Vec::with_capacity(hist.panel.n_days() * hist.members.len());
        for d in 0..hist.panel.n_days() {
            for &j in &hist.members {
                values.push(hist.panel.get(d, j));
            }
        }
        Some(ForecastPanel::new(
            hist.panel.dates.clone(),
            member_ids.clone(),
            values,
        )?)
    };
    let panel: &ForecastPanel = sub_panel.as_ref().unwrap_or(hist.panel);

    let lm_raw = scoring::build_loss_matrix(panel, hist.returns, hist.tau, FzPreset::Fz0, None)?;
    let lm_smooth =
        scoring::build_loss_matrix(panel, hist.returns, hist.tau, FzPreset::Fz0, Some(lambda))?;

    let ssm_u = run_mcs(
        &lm_raw,
        &McsConfig {
            seed: rng::derive(mcs_cfg.seed, &[rng::label("train-mcs-unweighted")]),
            ..mcs_cfg.clone()
        },
    )?;
    let ssm_w = run_mcs(
        &lm_smooth,
        &McsConfig {
            seed: rng::derive(mcs_cfg.seed, &[rng::label("train-mcs-weighted")]),
            ..mcs_cfg.clone()
        },
    )?;

    let mut predictors = Vec::with_capacity(6);
    let mut fitted_weights = Vec::with_capacity(4);
    let names = [
        ("MCS-Comb", "WL-MCS-Comb"),
        ("MCS-RS-Comb", "WL-MCS-RS-Comb"),
        ("MCS-MS-Comb", "WL-MCS-MS-Comb"),
    ];
    let mut by_scheme: Vec<Vec<(String, RiskForecastPair)>> = vec![Vec::new(); 3];
    for (which, ssm) in [(0usize, &ssm_u), (1usize, &ssm_w)] {
        let survivors: Vec<usize> = ssm
            .survivors
            .iter()
            .map(|id| {
                hist.panel
                    .column_index(id)
                    .ok_or_else(|| Error::Combination(format!("survivor {id} not in panel")))
            })
            .collect::<Result<_>>()?;
        let sub = MemberHistory {
            panel: hist.panel,
            members: survivors,
            returns: hist.returns,
            tau: hist.tau,
        };
        let survivor_pairs: Vec<RiskForecastPair> = sub
            .member_ids()
            .iter()
            .map(|id| {
                today_ids
                    .iter()
                    .position(|t| t == id)
                    .map(|k| today[k])
                    .ok_or_else(|| {
                        Error::Combination(format!("missing today forecast for survivor {id}"))
                    })
            })
            .collect::<Result<_>>()?;

        let name = |k: usize| if which == 0 { names[k].0 } else { names[k].1 };
        by_scheme[0].push((name(0).to_string(), ew_combine(&survivor_pairs)?));

        let rs = fit_rs_weights(&sub)?;
        by_scheme[1].push((name(1).to_string(), apply_weights(&rs, today_ids, today)?));
        fitted_weights.push((name(1).to_string(), rs));

        let ms = fit_ms_weights(
            &sub,
            rng::derive(ms_seed, &[rng::label("ms-fit"), which as u64]),
        )?;
        by_scheme[2].push((name(2).to_string(), apply_weights(&ms, today_ids, today)?));
        fitted_weights.push((name(2).to_string(), ms));
    }
    for scheme_pair in by_scheme {
        for item in scheme_pair {
            predictors.push(item);
        }
    }
    // Reorder from scheme-major to the reporting order.
    predictors.sort_by_key(|(id, _)| {
        crate::pipeline::MCS_PREDICTOR_IDS
            .iter()
            .position(|p| p == id)
            .unwrap_or(usize::MAX)
    });

    Ok(McsPredictorSet {
        predictors,
        unweighted_ssm: ssm_u,
        weighted_ssm: ssm_w,
        fitted_weights,
    })
}
