//! Derivative-free optimization utilities.
//!
//! The estimation problems in this crate (quasi-likelihoods with recursions,
//! piecewise-linear quantile losses) are low-dimensional but non-smooth or
//! expensive to differentiate, so everything runs on a Nelder–Mead simplex
//! with the adaptive coefficients of Gao & Han (2012), plus a golden-section
//! line search for one-dimensional profiles. Objectives are free to return
//! `f64::INFINITY` (or any large value) to encode constraint barriers.

/// Options for [`nelder_mead`].
#[derive(Clone, Copy, Debug)]
pub struct NmOptions {
    /// Hard cap on objective evaluations.
    pub max_evals: usize,
    /// Relative spread tolerance on simplex function values.
    pub ftol: f64,
    /// Absolute edge length used to build the initial simplex.
    pub initial_step: f64,
}

impl Default for NmOptions {
    fn default() -> Self {
        NmOptions {
            max_evals: 2000,
            ftol: 1e-9,
            initial_step: 0.25,
        }
    }
}

/// Result of a Nelder–Mead run.
#[derive(Clone, Debug)]
pub struct NmResult {
    pub x: Vec<f64>,
    pub fval: f64,
    pub evals: usize,
    /// True when the simplex collapsed below `ftol` before `max_evals`.
    pub converged: bool,
}

/// Minimize `f` starting from `x0` with a Nelder–Mead simplex.
///
/// Uses adaptive expansion/contraction/shrink coefficients scaled by the
/// problem dimension, which noticeably helps on the 10+-dimensional weight
/// optimizations. Non-finite objective values are treated as +inf barriers.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: &NmOptions) -> NmResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    assert!(n > 0, "empty parameter vector");
    let nf = n as f64;
    // Gao & Han (2012) adaptive coefficients.
    let alpha = 1.0;
    let beta = 1.0 + 2.0 / nf;
    let gamma = 0.75 - 1.0 / (2.0 * nf);
    let delta = 1.0 - 1.0 / nf;

    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    // Initial simplex: x0 plus one vertex per coordinate step.
    let mut simplex: Vec<(f64, Vec<f64>)> = Vec::with_capacity(n + 1);
    simplex.push((eval(x0, &mut evals), x0.to_vec()));
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += opts.initial_step;
        simplex.push((eval(&v, &mut evals), v));
    }

    loop {
        simplex.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        let best = simplex[0].0;
        let worst = simplex[n].0;
        let spread = worst - best;
        if spread.is_finite() && spread <= opts.ftol * (best.abs() + opts.ftol) {
            return NmResult {
                x: simplex[0].1.clone(),
                fval: best,
                evals,
                converged: true,
            };
        }
        if evals >= opts.max_evals {
            return NmResult {
                x: simplex[0].1.clone(),
                fval: best,
                evals,
                converged: false,
            };
        }

        // Centroid of all vertices except the worst.
        let mut centroid = vec![0.0; n];
        for (_, v) in simplex.iter().take(n) {
            for (c, vi) in centroid.iter_mut().zip(v) {
                *c += vi;
            }
        }
        for c in centroid.iter_mut() {
            *c /= nf;
        }

        let second_worst = simplex[n - 1].0;
        let point = |coef: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].1)
                .map(|(c, w)| c + coef * (c - w))
                .collect()
        };

        // Reflect.
        let xr = point(alpha);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].0 {
            // Expand.
            let xe = point(alpha * beta);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (fe, xe) } else { (fr, xr) };
            continue;
        }
        if fr < second_worst {
            simplex[n] = (fr, xr);
            continue;
        }
        // Contract (outside if the reflection helped at all, else inside).
        let (xc, fc) = if fr < simplex[n].0 {
            let xc = point(alpha * gamma);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        } else {
            let xc = point(-gamma);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        };
        if fc < simplex[n].0.min(fr) {
            simplex[n] = (fc, xc);
            continue;
        }
        // Shrink towards the best vertex.
        let best_v = simplex[0].1.clone();
        for (fv, v) in simplex.iter_mut().skip(1) {
            for (vi, bi) in v.iter_mut().zip(&best_v) {
                *vi = bi + delta * (*vi - bi);
            }
            *fv = eval(v, &mut evals);
        }
    }
}

/// Golden-section minimization of a univariate function on [lo, hi].
///
/// Returns the midpoint of the final bracket and its objective value. The
/// function is assumed unimodal on the interval; with a multimodal profile
/// callers should seed the interval from a coarse grid first.
pub fn golden_section<F>(mut f: F, lo: f64, hi: f64, tol: f64, max_iter: usize) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    debug_assert!(hi >= lo);
    let inv_phi = 0.618_033_988_749_894_9_f64;
    let mut a = lo;
    let mut b = hi;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..max_iter {
        if (b - a).abs() <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    if fc < fx && fc < fd {
        (c, fc)
    } else if fd < fx {
        (d, fd)
    } else {
        (x, fx)
    }
}

/// Logistic map from the real line onto (lo, hi); used to enforce box
/// constraints inside unconstrained simplex searches.
#[inline]
pub fn to_bounded(x: f64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) / (1.0 + (-x).exp())
}

/// Inverse of [`to_bounded`]; clamps slightly inside the box so boundary
/// starting values stay finite.
#[inline]
pub fn from_bounded(y: f64, lo: f64, hi: f64) -> f64 {
    let eps = 1e-12 * (hi - lo).abs().max(1.0);
    let y = y.clamp(lo + eps, hi - eps);
    let p = (y - lo) / (hi - lo);
    (p / (1.0 - p)).ln()
}
