//! CAViaR recursions (SAV, AS, IG, X) with joint (VaR, ES) estimation by
//! minimizing the Asymmetric-Laplace joint loss, ES linked multiplicatively
//! as ES = (1+exp(γ₀))·VaR.

use crate::error::{Error, Result};
use crate::optim::{nelder_mead, NmOptions};
use crate::rng;
use crate::scoring;
use crate::RiskForecastPair;
use rand::Rng;

/// CAViaR recursion form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaviarForm {
    /// Symmetric absolute value: β₀ + β₁VaR + β₂|r|.
    Sav,
    /// Asymmetric slope: β₀ + β₁VaR + (β₂1\_{r>0} + β₃1\_{r<0})|r|.
    As,
    /// Indirect GARCH: −√(β₀ + β₁VaR² + β₂r²).
    Ig,
    /// Exogenous realized measure: β₀ + β₁VaR + β₂x.
    X,
}

impl CaviarForm {
    pub fn n_betas(self) -> usize {
        match self {
            CaviarForm::As => 4,
            _ => 3,
        }
    }

    fn name(self) -> &'static str {
        match self {
            CaviarForm::Sav => "caviar-sav",
            CaviarForm::As => "caviar-as",
            CaviarForm::Ig => "caviar-ig",
            CaviarForm::X => "caviar-x",
        }
    }

    fn index(self) -> u64 {
        match self {
            CaviarForm::Sav => 0,
            CaviarForm::As => 1,
            CaviarForm::Ig => 2,
            CaviarForm::X => 3,
        }
    }
}

/// CAViaR model specification.
#[derive(Debug, Clone)]
pub struct CaviarSpec {
    pub form: CaviarForm,
    /// Realized-measure column; present iff `form == X`.
    pub exog_column: Option<String>,
    pub tau: f64,
}

impl CaviarSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 0.5) {
            return Err(Error::Config(format!("tau must lie in (0, 0.5), got {}", self.tau)));
        }
        match (self.form, self.exog_column.is_some()) {
            (CaviarForm::X, false) => Err(Error::Config(
                "CAViaR-X requires an exogenous realized-measure column".to_string(),
            )),
            (f, true) if f != CaviarForm::X => Err(Error::Config(format!(
                "{} does not take an exogenous column",
                f.name()
            ))),
            _ => Ok(()),
        }
    }
}

/// Fitted CAViaR model.
#[derive(Debug, Clone)]
pub struct CaviarFit {
    pub betas: Vec<f64>,
    pub gamma0: f64,
    pub var_path: Vec<f64>,
    pub es_path: Vec<f64>,
    /// Minimized Asymmetric-Laplace loss sum.
    pub negloss: f64,
    pub converged: bool,
    /// In-sample violation rate (diagnostic; should sit near tau).
    pub hit_rate: f64,
}

/// One recursion step; NaN signals an invalid candidate (IG radicand < 0).
fn step(form: CaviarForm, betas: &[f64], prev_var: f64, prev_r: f64, prev_x: f64) -> f64 {
    match form {
        CaviarForm::Sav => betas[0] + betas[1] * prev_var + betas[2] * prev_r.abs(),
        CaviarForm::As => {
            let slope = if prev_r > 0.0 {
                betas[2]
            } else if prev_r < 0.0 {
                betas[3]
            } else {
                0.0
            };
            betas[0] + betas[1] * prev_var + slope * prev_r.abs()
        }
        CaviarForm::Ig => {
            let radicand = betas[0] + betas[1] * prev_var * prev_var + betas[2] * prev_r * prev_r;
            if radicand < 0.0 {
                f64::NAN
            } else {
                -radicand.sqrt()
            }
        }
        CaviarForm::X => betas[0] + betas[1] * prev_var + betas[2] * prev_x,
    }
}

/// Recursion start: empirical τ-quantile (lower order statistic) of the
/// first min(100, n) observations.
fn init_var(returns: &[f64], tau: f64) -> f64 {
    let head = &returns[..returns.len().min(100)];
    let mut sorted = head.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = ((tau * sorted.len() as f64 - 1e-9).ceil() as usize)
        .max(1)
        .min(sorted.len());
    sorted[k - 1]
}

/// Joint AL loss of a parameter vector, fusing the recursion with the loss
/// sum. Day 0 carries the fixed start value and is excluded from the sum so
/// that windows whose early quantile is nonnegative remain fittable.
fn eval_loss(
    form: CaviarForm,
    params: &[f64],
    returns: &[f64],
    exog: Option<&[f64]>,
    var0: f64,
    tau: f64,
) -> f64 {
    let nb = form.n_betas();
    let betas = &params[..nb];
    let gamma0 = params[nb];
    let link = 1.0 + gamma0.exp();
    if !link.is_finite() {
        return f64::INFINITY;
    }
    let mut var = var0;
    let mut total = 0.0;
    for i in 1..returns.len() {
        let x_prev = exog.map_or(0.0, |x| x[i - 1]);
        var = step(form, betas, var, returns[i - 1], x_prev);
        if !var.is_finite() {
            return f64::INFINITY;
        }
        let s = scoring::al_loss(
            returns[i],
            RiskForecastPair {
                var,
                es: link * var,
            },
            tau,
        );
        if !s.is_finite() {
            return f64::INFINITY;
        }
        total += s;
    }
    total
}

const N_RANDOM_STARTS: usize = 10_000;
const N_REFINED: usize = 10;

/// Fit a CAViaR model on an estimation window by multi-start minimization of
/// the joint AL loss: 10⁴ uniform random draws from form-specific boxes, the
/// best 10 refined by Nelder–Mead simplex, best refined result wins.
pub fn fit_caviar(returns: &[f64], exog: Option<&[f64]>, spec: &CaviarSpec) -> Result<CaviarFit> {
    spec.validate()?;
    if returns.len() < 250 {
        return Err(Error::fit(
            spec.form.name(),
            format!("window length {} below minimum 250", returns.len()),
        ));
    }
    match (spec.form, exog) {
        (CaviarForm::X, None) => {
            return Err(Error::Config(
                "CAViaR-X fit requires aligned exogenous data".to_string(),
            ))
        }
        (CaviarForm::X, Some(x)) if x.len() != returns.len() => {
            return Err(Error::fit(
                spec.form.name(),
                format!("exog length {} does not match window {}", x.len(), returns.len()),
            ))
        }
        _ => {}
    }

    let n = returns.len();
    let tau = spec.tau;
    let var0 = init_var(returns, tau);
    let sd = {
        let m = returns.iter().sum::<f64>() / n as f64;
        (returns.iter().map(|r| (r - m) * (r - m)).sum::<f64>() / n as f64).sqrt()
    }
    .max(1e-8);

    // Start boxes are scale-aware; the optimizer itself is unconstrained
    // (invalid regions are handled by the loss barrier).
    let dim = spec.form.n_betas() + 1;
    let mut rng = rng::stream(
        rng::label("caviar-multistart"),
        &[spec.form.index(), tau.to_bits()],
    );
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
        let mut p = Vec::with_capacity(dim);
        match spec.form {
            CaviarForm::Ig => {
                p.push(rng.gen_range(0.0..sd * sd));
                p.push(rng.gen_range(0.0..1.0));
                p.push(rng.gen_range(0.0..1.0));
            }
            CaviarForm::Sav | CaviarForm::X => {
                p.push(rng.gen_range(-sd..sd));
                p.push(rng.gen_range(0.0..1.0));
                p.push(rng.gen_range(-1.0..0.0));
            }
            CaviarForm::As => {
                p.push(rng.gen_range(-sd..sd));
                p.push(rng.gen_range(0.0..1.0));
                p.push(rng.gen_range(-1.0..0.0));
                p.push(rng.gen_range(-1.0..0.0));
            }
        }
        p.push(rng.gen_range(-4.0..1.0));
        p
    };

    let objective = |params: &[f64]| eval_loss(spec.form, params, returns, exog, var0, tau);

    let mut scored: Vec<(f64, Vec<f64>)> = Vec::with_capacity(N_RANDOM_STARTS);
    for _ in 0..N_RANDOM_STARTS {
        let p = draw(&mut rng);
        let f = objective(&p);
        if f.is_finite() {
            scored.push((f, p));
        }
    }
    if scored.is_empty() {
        return Err(Error::fit(
            spec.form.name(),
            "no random start produced a finite joint AL loss",
        ));
    }
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    scored.truncate(N_REFINED);

    let mut best: Option<(f64, Vec<f64>, bool)> = None;
    for (_, start) in &scored {
        let res = nelder_mead(
            &objective,
            start,
            &NmOptions {
                max_evals: 400,
                ftol: 1e-9,
                initial_step: 0.05,
            },
        );
        let better = match &best {
            None => true,
            Some((f, _, _)) => res.fval < *f,
        };
        if better {
            best = Some((res.fval, res.x, res.converged));
        }
    }
    let (negloss, params, converged) = best.unwrap();

    let nb = spec.form.n_betas();
    let betas = params[..nb].to_vec();
    let gamma0 = params[nb];
    let link = 1.0 + gamma0.exp();
    let mut var_path = Vec::with_capacity(n);
    var_path.push(var0);
    for i in 1..n {
        let x_prev = exog.map_or(0.0, |x| x[i - 1]);
        let v = step(spec.form, &betas, var_path[i - 1], returns[i - 1], x_prev);
        var_path.push(v);
    }
    let es_path: Vec<f64> = var_path.iter().map(|v| link * v).collect();
    let hits = returns
        .iter()
        .zip(&var_path)
        .filter(|(r, v)| *r <= *v)
        .count();

    Ok(CaviarFit {
        betas,
        gamma0,
        var_path,
        es_path,
        negloss,
        converged,
        hit_rate: hits as f64 / n as f64,
    })
}

/// One-step-ahead forecast from a fitted CAViaR model.
pub fn forecast_caviar(
    fit: &CaviarFit,
    spec: &CaviarSpec,
    last_return: f64,
    last_exog: Option<f64>,
) -> Result<RiskForecastPair> {
    let last_var = *fit
        .var_path
        .last()
        .ok_or_else(|| Error::fit(spec.form.name(), "empty fitted VaR path"))?;
    if spec.form == CaviarForm::X && last_exog.is_none() {
        return Err(Error::Config(
            "CAViaR-X forecast requires the latest realized measure".to_string(),
        ));
    }
    let var = step(
        spec.form,
        &fit.betas,
        last_var,
        last_return,
        last_exog.unwrap_or(0.0),
    );
    if !var.is_finite() {
        return Err(Error::Numerical(format!(
            "{} one-step forecast is not finite",
            spec.form.name()
        )));
    }
    let es = (1.0 + fit.gamma0.exp()) * var;
    Ok(RiskForecastPair { var, es })
}
