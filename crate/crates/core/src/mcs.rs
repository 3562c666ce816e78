//! Model Confidence Set procedure over a loss matrix.
//!
//! Implements the max-t elimination variant with a stationary (geometric
//! block, circular) bootstrap. One set of day resamples is drawn up front
//! and reused across elimination rounds: per-model resampled column means
//! are linear statistics, so the loss differential of any survivor set can
//! be reconstituted from them exactly.

use crate::error::{Error, Result};
use crate::rng;
use crate::scoring::LossMatrix;
use rand::Rng;
use rayon::prelude::*;

/// MCS configuration.
#[derive(Debug, Clone)]
pub struct McsConfig {
    /// Elimination level; survivors have MCS p-value ≥ alpha.
    pub alpha: f64,
    /// Bootstrap replicates.
    pub b: usize,
    /// Expected block length of the stationary bootstrap, in days.
    pub mean_block: f64,
    pub seed: u64,
}

impl Default for McsConfig {
    fn default() -> Self {
        McsConfig {
            alpha: 0.25,
            b: 5000,
            mean_block: 10.0,
            seed: 0,
        }
    }
}

/// Result of an MCS run: the Set of Superior Models plus audit trail.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SuperiorSet {
    /// Surviving model ids, in input column order.
    pub survivors: Vec<String>,
    /// Eliminated models in elimination order with their (monotonized)
    /// round p-values.
    pub eliminated: Vec<(String, f64)>,
    /// Monotonized MCS p-value per model, in input column order.
    pub mcs_pvalues: Vec<(String, f64)>,
    pub alpha: f64,
    pub b: usize,
    pub mean_block: f64,
}

impl SuperiorSet {
    pub fn is_survivor(&self, id: &str) -> bool {
        self.survivors.iter().any(|s| s == id)
    }

    pub fn pvalue(&self, id: &str) -> Option<f64> {
        self.mcs_pvalues
            .iter()
            .find(|(m, _)| m == id)
            .map(|(_, p)| *p)
    }
}

/// Draw one stationary-bootstrap index resample: geometric-length blocks
/// (mean `mean_block`) read circularly from 0..n.
pub fn stationary_bootstrap(n: usize, mean_block: f64, seed: u64) -> Vec<usize> {
    let mut rng = rng::stream(seed, &[rng::label("stationary-bootstrap")]);
    stationary_bootstrap_with(n, mean_block, &mut rng)
}

fn stationary_bootstrap_with(
    n: usize,
    mean_block: f64,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Vec<usize> {
    debug_assert!(n >= 2 && mean_block >= 1.0);
    let restart_p = 1.0 / mean_block;
    let mut out = Vec::with_capacity(n);
    let mut current = rng.gen_range(0..n);
    out.push(current);
    for _ in 1..n {
        if rng.gen::<f64>() < restart_p {
            current = rng.gen_range(0..n);
        } else {
            current = (current + 1) % n;
        }
        out.push(current);
    }
    out
}

/// Run the MCS procedure.
pub fn run_mcs(losses: &LossMatrix, cfg: &McsConfig) -> Result<SuperiorSet> {
    let n = losses.dates.len();
    let m = losses.models.len();
    if m < 2 {
        return Err(Error::Data(format!("MCS needs at least 2 models, got {m}")));
    }
    if n < 30 {
        return Err(Error::Data(format!("MCS needs at least 30 loss rows, got {n}")));
    }
    if (0..n).any(|d| losses.row(d).iter().any(|v| !v.is_finite())) {
        return Err(Error::Data("MCS input contains non-finite losses".to_string()));
    }
    if !(cfg.alpha >= 0.0 && cfg.alpha <= 1.0) {
        return Err(Error::Config(format!("MCS alpha must lie in [0, 1], got {}", cfg.alpha)));
    }
    if cfg.b == 0 {
        return Err(Error::Config("MCS needs at least one bootstrap replicate".to_string()));
    }
    if !(cfg.mean_block >= 1.0) {
        return Err(Error::Config(format!(
            "mean block length must be ≥ 1, got {}",
            cfg.mean_block
        )));
    }

    // Observed column means.
    let inv_n = 1.0 / n as f64;
    let colmeans: Vec<f64> = (0..m).map(|j| losses.column_mean(j)).collect();

    // Per-replicate resampled column means (b × m, row-major). Replicates
    // use sub-seeds derived from (seed, r), so any execution order yields
    // the same matrix.
    let res_means: Vec<Vec<f64>> = (0..cfg.b)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(cfg.seed, &[rng::label("mcs-replicate"), r as u64]);
            let idx = stationary_bootstrap_with(n, cfg.mean_block, &mut rng);
            let mut acc = vec![0.0f64; m];
            for &d in &idx {
                let row = losses.row(d);
                for (a, v) in acc.iter_mut().zip(row) {
                    *a += *v;
                }
            }
            for a in acc.iter_mut() {
                *a *= inv_n;
            }
            acc
        })
        .collect();

    let mut active: Vec<usize> = (0..m).collect();
    let mut eliminated: Vec<(String, f64)> = Vec::new();
    let mut pvalue_of = vec![f64::NAN; m];
    let mut running_p = 0.0f64;

    loop {
        if active.len() == 1 {
            running_p = 1.0;
            break;
        }
        let m_act = active.len() as f64;

        // Observed loss differentials vs. the active-set average.
        let act_mean = active.iter().map(|&j| colmeans[j]).sum::<f64>() / m_act;
        let dbar: Vec<f64> = active.iter().map(|&j| colmeans[j] - act_mean).collect();

        let scale = 1.0 + colmeans.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if dbar.iter().all(|d| d.abs() <= 1e-14 * scale) {
            // All active models have (numerically) identical average loss:
            // nothing to rank, everything stays.
            running_p = 1.0;
            break;
        }

        // Bootstrap variance of each differential (sequential reduction).
        let mut var = vec![0.0f64; active.len()];
        for rep in &res_means {
            let rep_mean = active.iter().map(|&j| rep[j]).sum::<f64>() / m_act;
            for (k, &j) in active.iter().enumerate() {
                let dev = (rep[j] - rep_mean) - dbar[k];
                var[k] += dev * dev;
            }
        }
        let inv_b = 1.0 / cfg.b as f64;
        for v in var.iter_mut() {
            *v = (*v * inv_b).max(1e-300);
        }

        let t: Vec<f64> = dbar
            .iter()
            .zip(&var)
            .map(|(d, v)| d / v.sqrt())
            .collect();
        let t_obs = t.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));

        let mut exceed = 0usize;
        for rep in &res_means {
            let rep_mean = active.iter().map(|&j| rep[j]).sum::<f64>() / m_act;
            let mut t_star = f64::NEG_INFINITY;
            for (k, &j) in active.iter().enumerate() {
                let stat = ((rep[j] - rep_mean) - dbar[k]) / var[k].sqrt();
                t_star = t_star.max(stat);
            }
            if t_star > t_obs {
                exceed += 1;
            }
        }
        let p = exceed as f64 * inv_b;
        running_p = running_p.max(p);

        if p >= cfg.alpha {
            break;
        }

        // Eliminate the worst model; exact t ties broken by lexicographic id.
        let mut worst_k = 0usize;
        for k in 1..active.len() {
            if t[k] > t[worst_k]
                || (t[k] == t[worst_k]
                    && losses.models[active[k]] < losses.models[active[worst_k]])
            {
                worst_k = k;
            }
        }
        let j = active.remove(worst_k);
        pvalue_of[j] = running_p;
        eliminated.push((losses.models[j].clone(), running_p));
    }

    for &j in &active {
        pvalue_of[j] = running_p;
    }
    let survivors: Vec<String> = active.iter().map(|&j| losses.models[j].clone()).collect();
    let mcs_pvalues: Vec<(String, f64)> = losses
        .models
        .iter()
        .cloned()
        .zip(pvalue_of)
        .collect();

    Ok(SuperiorSet {
        survivors,
        eliminated,
        mcs_pvalues,
        alpha: cfg.alpha,
        b: cfg.b,
        mean_block: cfg.mean_block,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use rand_distr::{Distribution, StandardNormal};

    fn dates(n: usize) -> Vec<NaiveDate> {
        let start = NaiveDate::from_ymd_opt(2015, 1, 1).unwrap();
        (0..n)
            .map(|i| start + chrono::Duration::days(i as i64))
            .collect()
    }

    fn matrix(names: &[&str], cols: &[Vec<f64>]) -> LossMatrix {
        let n = cols[0].len();
        let mut values = Vec::with_capacity(n * cols.len());
        for i in 0..n {
            for c in cols {
                values.push(c[i]);
            }
        }
        LossMatrix::new(
            dates(n),
            names.iter().map(|s| s.to_string()).collect(),
            values,
        )
        .unwrap()
    }

    fn noise_col(n: usize, seed: u64, shift: f64) -> Vec<f64> {
        let mut rng = crate::rng::stream(seed, &[crate::rng::label("mcs-test")]);
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z + shift
            })
            .collect()
    }

    #[test]
    fn bootstrap_indices_are_in_range_and_deterministic() {
        let a = stationary_bootstrap(100, 10.0, 7);
        let b = stationary_bootstrap(100, 10.0, 7);
        assert_eq!(a, b);
        assert_eq!(a.len(), 100);
        assert!(a.iter().all(|&i| i < 100));
        let c = stationary_bootstrap(100, 10.0, 8);
        assert_ne!(a, c);
    }

    #[test]
    fn huge_mean_block_yields_a_circular_shift() {
        let idx = stationary_bootstrap(8, 1e12, 3);
        for w in idx.windows(2) {
            assert_eq!(w[1], (w[0] + 1) % 8);
        }
    }

    #[test]
    fn mean_block_one_draws_fresh_indices() {
        // With p=1 every index is a fresh uniform; consecutive increments
        // would appear only by chance (~1/n of pairs).
        let idx = stationary_bootstrap(1000, 1.0, 5);
        let increments = idx
            .windows(2)
            .filter(|w| w[1] == (w[0] + 1) % 1000)
            .count();
        assert!(increments < 10, "too many sequential pairs: {increments}");
    }

    #[test]
    fn empirical_mean_block_length_matches() {
        let n = 1000;
        let mut total_positions = 0usize;
        let mut total_blocks = 0usize;
        for seed in 0..1000u64 {
            let idx = stationary_bootstrap(n, 10.0, seed);
            let mut blocks = 1usize;
            for w in idx.windows(2) {
                if w[1] != (w[0] + 1) % n {
                    blocks += 1;
                }
            }
            total_positions += n;
            total_blocks += blocks;
        }
        // A nonsequential step is a restart, except the 1/n of restarts that
        // happen to continue the sequence; the bias is within the band.
        let mean_len = total_positions as f64 / total_blocks as f64;
        assert!(
            (mean_len - 10.0).abs() < 0.2,
            "mean block length {mean_len} not within 2% of 10"
        );
    }

    #[test]
    fn identical_columns_all_survive_with_p_one() {
        let col = noise_col(100, 1, 0.0);
        let lm = matrix(&["A", "B"], &[col.clone(), col]);
        let out = run_mcs(&lm, &McsConfig { b: 200, seed: 1, ..Default::default() }).unwrap();
        assert_eq!(out.survivors, vec!["A".to_string(), "B".to_string()]);
        assert!(out.eliminated.is_empty());
        assert!(out.mcs_pvalues.iter().all(|(_, p)| *p == 1.0));
    }

    #[test]
    fn dominated_model_is_eliminated() {
        let n = 500;
        let a = noise_col(n, 1311, 0.0);
        let b = noise_col(n, 1312, 0.0);
        let c: Vec<f64> = a.iter().map(|v| v + 1.0).collect();
        let lm = matrix(&["A", "B", "C"], &[a, b, c]);
        // alpha = 0.05 here: at the default 0.25 the null elimination rate is
        // up to 25%, so "both clean columns survive" would be seed-sensitive.
        let out = run_mcs(
            &lm,
            &McsConfig { alpha: 0.05, b: 2000, mean_block: 10.0, seed: 4 },
        )
        .unwrap();
        assert!(out.is_survivor("A"));
        assert!(out.is_survivor("B"));
        assert!(!out.is_survivor("C"));
        assert!(out.pvalue("C").unwrap() < 0.05);
        assert!(out.pvalue("A").unwrap() > 0.3);
    }

    #[test]
    fn constant_loss_shift_leaves_result_unchanged() {
        let n = 200;
        let cols: Vec<Vec<f64>> = (0..4).map(|k| noise_col(n, 20 + k, 0.02 * k as f64)).collect();
        let lm = matrix(&["A", "B", "C", "D"], &cols);
        let shifted_cols: Vec<Vec<f64>> =
            cols.iter().map(|c| c.iter().map(|v| v - 7.3).collect()).collect();
        let lm2 = matrix(&["A", "B", "C", "D"], &shifted_cols);
        let cfg = McsConfig { b: 500, seed: 9, ..Default::default() };
        let out1 = run_mcs(&lm, &cfg).unwrap();
        let out2 = run_mcs(&lm2, &cfg).unwrap();
        assert_eq!(out1.survivors, out2.survivors);
        let p1: Vec<f64> = out1.mcs_pvalues.iter().map(|(_, p)| *p).collect();
        let p2: Vec<f64> = out2.mcs_pvalues.iter().map(|(_, p)| *p).collect();
        assert_eq!(p1, p2);
    }

    #[test]
    fn label_permutation_is_equivariant() {
        let n = 150;
        let a = noise_col(n, 31, 0.0);
        let b = noise_col(n, 32, 0.3);
        let c = noise_col(n, 33, 0.6);
        let cfg = McsConfig { b: 400, seed: 2, ..Default::default() };
        let out1 = run_mcs(&matrix(&["A", "B", "C"], &[a.clone(), b.clone(), c.clone()]), &cfg)
            .unwrap();
        let out2 = run_mcs(&matrix(&["C", "A", "B"], &[c, a, b]), &cfg).unwrap();
        let mut s1 = out1.survivors.clone();
        let mut s2 = out2.survivors.clone();
        s1.sort();
        s2.sort();
        assert_eq!(s1, s2);
        for (id, p) in &out1.mcs_pvalues {
            assert_eq!(out2.pvalue(id), Some(*p), "p-value mismatch for {id}");
        }
    }

    #[test]
    fn alpha_zero_retains_everything() {
        let n = 120;
        let cols: Vec<Vec<f64>> = (0..3).map(|k| noise_col(n, 40 + k, k as f64)).collect();
        let lm = matrix(&["A", "B", "C"], &cols);
        let out = run_mcs(
            &lm,
            &McsConfig { alpha: 0.0, b: 300, seed: 0, ..Default::default() },
        )
        .unwrap();
        assert_eq!(out.survivors.len(), 3);
    }

    #[test]
    fn alpha_near_one_eliminates_to_single_survivor() {
        let n = 200;
        let a = noise_col(n, 51, 0.0);
        let b = noise_col(n, 52, 0.5);
        let c = noise_col(n, 53, 1.0);
        let lm = matrix(&["A", "B", "C"], &[a, b, c]);
        let out = run_mcs(
            &lm,
            &McsConfig { alpha: 0.999, b: 500, seed: 3, ..Default::default() },
        )
        .unwrap();
        assert_eq!(out.survivors.len(), 1);
        assert_eq!(out.survivors[0], "A");
        assert_eq!(out.pvalue("A"), Some(1.0));
    }

    #[test]
    fn pvalues_monotone_along_elimination_order() {
        let n = 300;
        let cols: Vec<Vec<f64>> =
            (0..6).map(|k| noise_col(n, 60 + k, 0.15 * k as f64)).collect();
        let lm = matrix(&["A", "B", "C", "D", "E", "F"], &cols);
        let out = run_mcs(
            &lm,
            &McsConfig { alpha: 0.9, b: 800, seed: 17, ..Default::default() },
        )
        .unwrap();
        let ps: Vec<f64> = out.eliminated.iter().map(|(_, p)| *p).collect();
        for w in ps.windows(2) {
            assert!(w[0] <= w[1], "elimination p-values not monotone: {ps:?}");
        }
        for s in &out.survivors {
            assert!(out.pvalue(s).unwrap() >= ps.last().copied().unwrap_or(0.0));
        }
    }

    #[test]
    fn input_validation() {
        let col = noise_col(50, 70, 0.0);
        let single = matrix(&["A"], &[col.clone()]);
        assert!(run_mcs(&single, &McsConfig::default()).is_err());
        let short = matrix(&["A", "B"], &[col[..10].to_vec(), col[..10].to_vec()]);
        assert!(run_mcs(&short, &McsConfig::default()).is_err());
        let mut poisoned = col.clone();
        poisoned[3] = f64::NAN;
        let bad = matrix(&["A", "B"], &[poisoned, col]);
        assert!(run_mcs(&bad, &McsConfig::default()).is_err());
    }
}
