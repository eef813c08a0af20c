//! Annealed (environment-averaged) quantities: block tables by exact
//! enumeration or Monte Carlo, crossing-time ratio estimators, and the
//! local-time representation of per-path annealed weights.

use crate::numeric::CompensatedSum;
use crate::potential::{sample_environment, Environment, PotentialDistribution};
use crate::quenched::{
    adaptive_window_solve, solve_block, PathSample, WindowOpts,
};
use crate::{map_chunked, Error, Result};

/// Hard cap on exact-mode enumeration work (environments for the largest block).
pub const ENUMERATION_CAP: f64 = 1e7;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableMode {
    Exact,
    Mc { n_envs: u64, master_seed: u64 },
}

/// Annealed block arrays indexed by block length `r = 0..=r_max`:
/// `z0[r]` is the no-return crossing weight of `(0, r)` and `a[r]` its
/// time-weighted companion, so `a[r] / z0[r]` is the conditioned mean
/// crossing time. Index 0 holds the convolution identities `z0[0] = 1`,
/// `a[0] = 0`.
#[derive(Clone, Debug)]
pub struct BlockTable {
    pub r_max: usize,
    pub z0: Vec<f64>,
    pub a: Vec<f64>,
    pub z0_stderr: Vec<f64>,
    pub a_stderr: Vec<f64>,
    pub mode: TableMode,
}

impl BlockTable {
    /// Truncation to a shorter range, keeping exactness of the prefix.
    pub fn truncated(&self, r_max: usize) -> BlockTable {
        assert!(r_max <= self.r_max);
        BlockTable {
            r_max,
            z0: self.z0[..=r_max].to_vec(),
            a: self.a[..=r_max].to_vec(),
            z0_stderr: self.z0_stderr[..=r_max].to_vec(),
            a_stderr: self.a_stderr[..=r_max].to_vec(),
            mode: self.mode,
        }
    }
}

/// Exact annealed table: a weighted sum of block solves over every
/// environment of the atomic law on `0..r-1`, for each `r <= r_max`.
/// This is the ground-truth oracle for the Monte Carlo route.
pub fn block_table_exact(dist: &PotentialDistribution, r_max: usize) -> Result<BlockTable> {
    if r_max < 1 {
        return Err(Error::BadGeometry("table needs r_max >= 1".into()));
    }
    let k = dist.atoms().len();
    let need = (k as f64).powi(r_max as i32);
    if need > ENUMERATION_CAP {
        return Err(Error::EnumerationBudget {
            need,
            cap: ENUMERATION_CAP,
        });
    }
    let values: Vec<f64> = dist.atoms().iter().map(|a| a.value).collect();
    let probs: Vec<f64> = dist.atoms().iter().map(|a| a.prob).collect();
    let mut z0 = vec![0.0; r_max + 1];
    let mut a = vec![0.0; r_max + 1];
    z0[0] = 1.0;
    let mut site_vals = vec![0.0; r_max];
    for r in 1..=r_max {
        let mut acc_z = CompensatedSum::new();
        let mut acc_a = CompensatedSum::new();
        let total = (k as u64).pow(r as u32);
        for mut code in 0..total {
            let mut weight = 1.0;
            for slot in site_vals.iter_mut().take(r) {
                let digit = (code % k as u64) as usize;
                code /= k as u64;
                *slot = values[digit];
                weight *= probs[digit];
            }
            let env = Environment::from_values(0, site_vals[..r].to_vec(), 0);
            let s = solve_block(&env, r as i64)?;
            acc_z.add(weight * s.z);
            acc_a.add(weight * s.t0);
        }
        z0[r] = acc_z.value();
        a[r] = acc_a.value();
    }
    Ok(BlockTable {
        r_max,
        z0,
        a,
        z0_stderr: vec![0.0; r_max + 1],
        a_stderr: vec![0.0; r_max + 1],
        mode: TableMode::Exact,
    })
}

/// Monte Carlo table: environment `i` is drawn once on `0..r_max-1` and its
/// prefixes feed every block length (common random numbers across `r`, which
/// keeps the columns positively correlated for the downstream deconvolution).
pub fn block_table_mc(
    dist: &PotentialDistribution,
    r_max: usize,
    n_envs: u64,
    master_seed: u64,
    workers: usize,
) -> Result<BlockTable> {
    if r_max < 1 {
        return Err(Error::BadGeometry("table needs r_max >= 1".into()));
    }
    if n_envs < 2 {
        return Err(Error::TooFewEnvironments {
            need: 2,
            got: n_envs,
        });
    }
    struct Partial {
        z: Vec<CompensatedSum>,
        zz: Vec<CompensatedSum>,
        a: Vec<CompensatedSum>,
        aa: Vec<CompensatedSum>,
    }
    let parts = map_chunked(n_envs, workers, |range| {
        let mut p = Partial {
            z: vec![CompensatedSum::new(); r_max + 1],
            zz: vec![CompensatedSum::new(); r_max + 1],
            a: vec![CompensatedSum::new(); r_max + 1],
            aa: vec![CompensatedSum::new(); r_max + 1],
        };
        for i in range {
            let env = sample_environment(dist, 0, r_max as i64 - 1, master_seed, i);
            for r in 1..=r_max {
                let s = solve_block(&env, r as i64).expect("env covers the block");
                p.z[r].add(s.z);
                p.zz[r].add(s.z * s.z);
                p.a[r].add(s.t0);
                p.aa[r].add(s.t0 * s.t0);
            }
        }
        p
    });
    let mut z0 = vec![0.0; r_max + 1];
    let mut a = vec![0.0; r_max + 1];
    let mut z0_stderr = vec![0.0; r_max + 1];
    let mut a_stderr = vec![0.0; r_max + 1];
    z0[0] = 1.0;
    let n = n_envs as f64;
    for r in 1..=r_max {
        let mut sz = CompensatedSum::new();
        let mut szz = CompensatedSum::new();
        let mut sa = CompensatedSum::new();
        let mut saa = CompensatedSum::new();
        for p in &parts {
            sz.add(p.z[r].value());
            szz.add(p.zz[r].value());
            sa.add(p.a[r].value());
            saa.add(p.aa[r].value());
        }
        z0[r] = sz.value() / n;
        a[r] = sa.value() / n;
        z0_stderr[r] = sample_stderr(sz.value(), szz.value(), n);
        a_stderr[r] = sample_stderr(sa.value(), saa.value(), n);
    }
    Ok(BlockTable {
        r_max,
        z0,
        a,
        z0_stderr,
        a_stderr,
        mode: TableMode::Mc {
            n_envs,
            master_seed,
        },
    })
}

fn sample_stderr(sum: f64, sumsq: f64, n: f64) -> f64 {
    let mean = sum / n;
    let var = ((sumsq - n * mean * mean) / (n - 1.0)).max(0.0);
    (var / n).sqrt()
}

#[derive(Clone, Copy, Debug)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub master_seed: u64,
}

/// Output of the crossing-time ratio estimators. The conditioned mean is the
/// ratio of expectations `E[t0] / E[z]` (the annealed measure normalizes by
/// the averaged weight, not the average of quenched ratios); its standard
/// error comes from the first-order delta method.
#[derive(Clone, Debug)]
pub struct CrossingEstimate {
    pub z: McEstimate,
    pub mean_time: McEstimate,
    /// Environments with zero crossing weight (they still enter the ratio
    /// denominators with weight zero).
    pub zero_weight: u64,
    /// Widest window used by the adaptive policy (0 in block mode).
    pub window_max: i64,
    /// Worst achieved relative-change tolerance across environments.
    pub window_achieved: f64,
}

#[derive(Default)]
struct RatioAccum {
    z: CompensatedSum,
    zz: CompensatedSum,
    t: CompensatedSum,
    tt: CompensatedSum,
    zt: CompensatedSum,
    zero: u64,
    w_max: i64,
    achieved: f64,
}

impl RatioAccum {
    fn push(&mut self, z: f64, t0: f64) {
        if z == 0.0 {
            self.zero += 1;
        }
        self.z.add(z);
        self.zz.add(z * z);
        self.t.add(t0);
        self.tt.add(t0 * t0);
        self.zt.add(z * t0);
    }
}

fn ratio_estimate(
    parts: Vec<RatioAccum>,
    n_envs: u64,
    master_seed: u64,
) -> Result<CrossingEstimate> {
    let n = n_envs as f64;
    let mut sz = CompensatedSum::new();
    let mut szz = CompensatedSum::new();
    let mut st = CompensatedSum::new();
    let mut stt = CompensatedSum::new();
    let mut szt = CompensatedSum::new();
    let mut zero = 0;
    let mut w_max = 0;
    let mut achieved: f64 = 0.0;
    for p in parts {
        sz.add(p.z.value());
        szz.add(p.zz.value());
        st.add(p.t.value());
        stt.add(p.tt.value());
        szt.add(p.zt.value());
        zero += p.zero;
        w_max = w_max.max(p.w_max);
        achieved = achieved.max(p.achieved);
    }
    let mean_z = sz.value() / n;
    if mean_z <= 0.0 {
        return Err(Error::AllWeightsZero);
    }
    let mean_t = st.value() / n;
    let ratio = mean_t / mean_z;
    let var_z = ((szz.value() - n * mean_z * mean_z) / (n - 1.0)).max(0.0);
    let var_t = ((stt.value() - n * mean_t * mean_t) / (n - 1.0)).max(0.0);
    let cov = (szt.value() - n * mean_z * mean_t) / (n - 1.0);
    let var_ratio =
        ((var_t - 2.0 * ratio * cov + ratio * ratio * var_z) / (n * mean_z * mean_z)).max(0.0);
    Ok(CrossingEstimate {
        z: McEstimate {
            mean: mean_z,
            stderr: (var_z / n).sqrt(),
            n_samples: n_envs,
            master_seed,
        },
        mean_time: McEstimate {
            mean: ratio,
            stderr: var_ratio.sqrt(),
            n_samples: n_envs,
            master_seed,
        },
        zero_weight: zero,
        window_max: w_max,
        window_achieved: achieved,
    })
}

/// Crossing weight `Z_y` and conditioned mean crossing time to `y` under the
/// unrestricted annealed measure, by adaptive-window Monte Carlo. With
/// `conditioned_open`, sites `0..y-1` are drawn conditioned on being finite;
/// crossing weights vanish off that event, so the ratio is unchanged while
/// laws with heavy absorption keep a usable sample.
pub fn crossing_time_mc(
    dist: &PotentialDistribution,
    y: i64,
    n_envs: u64,
    master_seed: u64,
    opts: &WindowOpts,
    conditioned_open: bool,
    workers: usize,
) -> Result<CrossingEstimate> {
    if y < 1 {
        return Err(Error::BadGeometry(format!("target {y} < 1")));
    }
    if n_envs < 2 {
        return Err(Error::TooFewEnvironments {
            need: 2,
            got: n_envs,
        });
    }
    let cond = if conditioned_open {
        Some(dist.conditional_finite()?)
    } else {
        None
    };
    let parts = map_chunked(n_envs, workers, |range| {
        let mut acc = RatioAccum::default();
        for i in range {
            let (s, achieved, w) =
                adaptive_window_solve(dist, cond.as_ref(), y, master_seed, i, opts)
                    .expect("valid window geometry");
            acc.push(s.z, s.t0);
            acc.w_max = acc.w_max.max(w);
            acc.achieved = acc.achieved.max(achieved.min(1.0));
        }
        acc
    });
    ratio_estimate(parts, n_envs, master_seed)
}

/// Same ratio estimator under the no-return block measure: `E[t0] / E[z]`
/// over block solves of `(0, y)`. No window truncation is involved.
pub fn crossing_time_block_mc(
    dist: &PotentialDistribution,
    y: i64,
    n_envs: u64,
    master_seed: u64,
    workers: usize,
) -> Result<CrossingEstimate> {
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
        let mut acc = RatioAccum::default();
        for i in range {
            let env = sample_environment(dist, 0, y - 1, master_seed, i);
            let s = solve_block(&env, y).expect("env covers block");
            acc.push(s.z, s.t0);
        }
        acc
    });
    ratio_estimate(parts, n_envs, master_seed)
}

/// Annealed weight of a fixed path: `exp(-sum_x Lambda(l(x)))` over its
/// local times. By site independence this equals the environment average of
/// `exp(-sum_n V(S_n))` for that path; an empty path has weight 1.
pub fn localtime_weight(path: &PathSample, dist: &PotentialDistribution) -> f64 {
    let mut exponent = CompensatedSum::new();
    for (_, count) in path.local_times() {
        exponent.add(dist.log_mgf(count as f64));
    }
    (-exponent.value()).exp()
}
