//! Lyapunov exponents by log-slope estimation and the exponent curve in the
//! potential shift `lambda`.
//!
//! The annealed exponent divides the log of the *averaged* crossing weight
//! by the distance; the quenched exponent averages the logs. Jensen's
//! inequality makes the annealed estimate smaller realization by
//! realization, so the sample-level comparison is exact, not statistical.

use crate::annealed::McEstimate;
use crate::numeric::CompensatedSum;
use crate::potential::PotentialDistribution;
use crate::quenched::{adaptive_window_solve, WindowOpts};
use crate::{map_chunked, Error, Result};

/// Annealed exponent estimate `-log(mean z) / y` with a jackknife standard
/// error of the log, plus the raw per-environment log-weights.
pub struct SlopeEstimate {
    pub est: McEstimate,
    pub window_max: i64,
    pub window_achieved: f64,
    pub log_weights: Vec<f64>,
}

fn collect_log_weights(
    dist: &PotentialDistribution,
    y: i64,
    n_envs: u64,
    master_seed: u64,
    opts: &WindowOpts,
    workers: usize,
) -> Result<(Vec<f64>, i64, f64)> {
    if y < 1 {
        return Err(Error::BadGeometry(format!("target {y} < 1")));
    }
    if n_envs < 2 {
        return Err(Error::TooFewEnvironments {
            need: 2,
            got: n_envs,
        });
    }
    let parts = map_chunked(n_envs, workers, |range| {
        let mut log_z = Vec::with_capacity((range.end - range.start) as usize);
        let mut w_max = 0i64;
        let mut achieved = 0.0f64;
        for i in range {
            let (s, a, w) = adaptive_window_solve(dist, None, y, master_seed, i, opts)
                .expect("valid window geometry");
            log_z.push(s.log_z);
            w_max = w_max.max(w);
            achieved = achieved.max(a.min(1.0));
        }
        (log_z, w_max, achieved)
    });
    let mut log_z = Vec::with_capacity(n_envs as usize);
    let mut w_max = 0;
    let mut achieved = 0.0f64;
    for (pl, pw, pa) in parts {
        log_z.extend(pl);
        w_max = w_max.max(pw);
        achieved = achieved.max(pa);
    }
    Ok((log_z, w_max, achieved))
}

/// Mean of exponentially scaled samples, stable when every weight underflows
/// `f64`: shifts by the running maximum before summing.
struct LogMeanAccum {
    shift: f64,
    scaled: Vec<f64>,
    total: f64,
}

impl LogMeanAccum {
    fn new(log_z: &[f64]) -> Result<Self> {
        let shift = log_z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if shift == f64::NEG_INFINITY {
            return Err(Error::AllWeightsZero);
        }
        let scaled: Vec<f64> = log_z.iter().map(|&lz| (lz - shift).exp()).collect();
        let total = crate::numeric::compensated_total(scaled.iter().copied());
        Ok(LogMeanAccum {
            shift,
            scaled,
            total,
        })
    }

    /// `log(mean z)`, optionally leaving one sample out.
    fn log_mean(&self, skip: Option<usize>) -> f64 {
        let n = self.scaled.len() as f64;
        match skip {
            None => self.shift + (self.total / n).ln(),
            Some(i) => {
                let rest = (self.total - self.scaled[i]).max(f64::MIN_POSITIVE);
                self.shift + (rest / (n - 1.0)).ln()
            }
        }
    }
}

fn jackknife_log_mean(log_z: &[f64], y: f64, master_seed: u64) -> Result<McEstimate> {
    let acc = LogMeanAccum::new(log_z)?;
    let n = log_z.len() as f64;
    let est = -acc.log_mean(None) / y;
    let mut thetas = Vec::with_capacity(log_z.len());
    let mut mean_loo = 0.0;
    for i in 0..log_z.len() {
        let theta = -acc.log_mean(Some(i)) / y;
        thetas.push(theta);
        mean_loo += theta;
    }
    mean_loo /= n;
    let var: f64 = thetas.iter().map(|t| (t - mean_loo) * (t - mean_loo)).sum::<f64>() * (n - 1.0)
        / n;
    Ok(McEstimate {
        mean: est,
        stderr: var.sqrt(),
        n_samples: log_z.len() as u64,
        master_seed,
    })
}

/// Annealed Lyapunov exponent at distance `y`: `-log(mean_w z) / y`.
/// The finite-size bias decreases in `y`.
pub fn beta_slope(
    dist: &PotentialDistribution,
    y: i64,
    n_envs: u64,
    master_seed: u64,
    opts: &WindowOpts,
    workers: usize,
) -> Result<SlopeEstimate> {
    let (log_z, w_max, achieved) =
        collect_log_weights(dist, y, n_envs, master_seed, opts, workers)?;
    let est = jackknife_log_mean(&log_z, y as f64, master_seed)?;
    Ok(SlopeEstimate {
        est,
        window_max: w_max,
        window_achieved: achieved,
        log_weights: log_z,
    })
}

/// Quenched exponent estimate: mean over environments of `-log z / y`.
/// Environments with zero weight cannot contribute a log and are excluded
/// and counted.
pub struct QuenchedEstimate {
    pub est: McEstimate,
    pub excluded: u64,
}

pub fn alpha_quenched(
    dist: &PotentialDistribution,
    y: i64,
    n_envs: u64,
    master_seed: u64,
    opts: &WindowOpts,
    workers: usize,
) -> Result<QuenchedEstimate> {
    let (log_z, _, _) = collect_log_weights(dist, y, n_envs, master_seed, opts, workers)?;
    let mut sum = CompensatedSum::new();
    let mut sumsq = CompensatedSum::new();
    let mut used = 0u64;
    for &lz in &log_z {
        if lz > f64::NEG_INFINITY {
            let a = -lz / y as f64;
            sum.add(a);
            sumsq.add(a * a);
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::AllWeightsZero);
    }
    let n = used as f64;
    let mean = sum.value() / n;
    let var = ((sumsq.value() - n * mean * mean) / (n - 1.0).max(1.0)).max(0.0);
    Ok(QuenchedEstimate {
        est: McEstimate {
            mean,
            stderr: (var / n).sqrt(),
            n_samples: used,
            master_seed,
        },
        excluded: n_envs - used,
    })
}

/// The exponent curve over a `lambda` grid with its one-sided derivative at
/// zero, computed with common random numbers: the same environments feed
/// every `lambda`, so differences of the noisy exponents are tame.
pub struct ExponentCurve {
    pub lambdas: Vec<f64>,
    pub betas: Vec<McEstimate>,
    pub y_used: i64,
    pub right_derivative: McEstimate,
}

pub fn derivative_at_zero(
    dist: &PotentialDistribution,
    lambda_grid: &[f64],
    y: i64,
    n_envs: u64,
    master_seed: u64,
    opts: &WindowOpts,
    workers: usize,
) -> Result<ExponentCurve> {
    if lambda_grid.first() != Some(&0.0) {
        return Err(Error::InvalidArgument(
            "lambda grid must start at 0".into(),
        ));
    }
    if lambda_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "lambda grid must be strictly increasing".into(),
        ));
    }
    let positives = &lambda_grid[1..];
    if positives.len() < 3 {
        return Err(Error::InvalidArgument(
            "need at least 3 positive lambda points".into(),
        ));
    }
    if positives[0] > 0.01 + 1e-15 {
        return Err(Error::InvalidArgument(format!(
            "smallest positive step must be <= 0.01, got {}",
            positives[0]
        )));
    }
    // same (master_seed, env_index, site) bits for every lambda: the shifted
    // law has identical atom probabilities, so draws stay coupled
    let mut per_lambda: Vec<Vec<f64>> = Vec::with_capacity(lambda_grid.len());
    for &lam in lambda_grid {
        let shifted = dist.shifted(lam)?;
        let (lz, _, _) = collect_log_weights(&shifted, y, n_envs, master_seed, opts, workers)?;
        per_lambda.push(lz);
    }
    let yf = y as f64;
    let betas: Vec<McEstimate> = per_lambda
        .iter()
        .map(|lz| jackknife_log_mean(lz, yf, master_seed))
        .collect::<Result<_>>()?;
    let h0 = positives[0];
    let h1 = positives[1];
    let n = n_envs as f64;
    let accums: Vec<LogMeanAccum> = per_lambda
        .iter()
        .take(3)
        .map(|lz| LogMeanAccum::new(lz))
        .collect::<Result<_>>()?;
    let deriv_of = |skip: Option<usize>| -> f64 {
        let b0 = -accums[0].log_mean(skip) / yf;
        let bh0 = -accums[1].log_mean(skip) / yf;
        let bh1 = -accums[2].log_mean(skip) / yf;
        let d0 = (bh0 - b0) / h0;
        let d1 = (bh1 - b0) / h1;
        // one-sided Richardson: exact when h1 = 2 h0
        (h1 * d0 - h0 * d1) / (h1 - h0)
    };
    let deriv = deriv_of(None);
    let mut loo_mean = 0.0;
    let mut loo = Vec::with_capacity(n_envs as usize);
    for i in 0..n_envs as usize {
        let d = deriv_of(Some(i));
        loo.push(d);
        loo_mean += d;
    }
    loo_mean /= n;
    let var = loo.iter().map(|d| (d - loo_mean) * (d - loo_mean)).sum::<f64>() * (n - 1.0) / n;
    Ok(ExponentCurve {
        lambdas: lambda_grid.to_vec(),
        betas,
        y_used: y,
        right_derivative: McEstimate {
            mean: deriv,
            stderr: var.sqrt(),
            n_samples: n_envs,
            master_seed,
        },
    })
}
