//! Exact per-environment computations in d = 1.
//!
//! Both solve flavors share one tridiagonal structure. With survival weights
//! `w(x) = exp(-V(x))`, the crossing weight `h(x)` (reach the target at `hi`
//! before absorption, and before the forbidden boundary at `lo`) satisfies
//!
//! ```text
//! h(x) = w(x) (h(x-1) + h(x+1)) / 2,   h(lo) = 0,  h(hi) = 1,
//! ```
//!
//! and the time-weighted vector `t` solves the same operator with source `h`:
//! `t(x) = w(x) (t(x-1) + t(x+1)) / 2 + h(x)`, `t(lo) = t(hi) = 0`.
//!
//! Forward elimination writes `h(x) = c(x) h(x+1)` with
//! `c(x) = (w(x)/2) / (1 - (w(x)/2) c(x-1))`, all `c in [0, 1)`. There is no
//! subtraction of like terms anywhere, so the solve is stable, and the
//! h-transform step probabilities come out of `c` exactly:
//! `P(x -> x-1) = (w(x)/2) c(x-1)` and `P(x -> x+1) = 1 - P(x -> x-1)`.

use crate::numeric::log_add_exp;
use crate::potential::{sample_environment, sample_environment_conditioned, Environment, PotentialDistribution};
use crate::rng::Stream;
use crate::{Error, Result};

/// Above this potential value the solve runs in log space; `exp(-V)` is
/// still representable but long products start to underflow.
const LOG_SPACE_THRESHOLD: f64 = 500.0;

const MAX_PATH_STEPS: u64 = 1 << 33;

/// How the left edge of the solve range is interpreted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    /// `lo` is the start of a no-return block: the walk starts at `lo`,
    /// must not revisit it, and the crossing weight is
    /// `z = (w(lo)/2) h(lo+1)`.
    Block,
    /// `lo` is an absorbing truncation of the lattice (`V = inf` beyond);
    /// the walk starts at site 0 inside the window and `z = h(0)`.
    Window,
}

/// Survival-weight and time-weighted solves for one environment.
#[derive(Clone, Debug)]
pub struct QuenchedSolve {
    pub boundary: Boundary,
    pub lo: i64,
    pub hi: i64,
    /// Target site; always `hi` in d = 1.
    pub target: i64,
    v: Vec<f64>,
    c: Vec<f64>,
    /// Crossing weights per site; `h[target] = 1`, `h[lo] = 0`. Entries may
    /// underflow to zero in extreme environments; `log_z` never does.
    pub h: Vec<f64>,
    /// Time-weighted solution with the same operator.
    pub t: Vec<f64>,
    pub z: f64,
    pub log_z: f64,
    pub t0: f64,
    pub log_t0: f64,
}

impl QuenchedSolve {
    #[inline]
    fn idx(&self, site: i64) -> usize {
        (site - self.lo) as usize
    }

    pub fn potential(&self, site: i64) -> f64 {
        self.v[self.idx(site)]
    }

    pub fn h_at(&self, site: i64) -> f64 {
        self.h[self.idx(site)]
    }

    pub fn t_at(&self, site: i64) -> f64 {
        self.t[self.idx(site)]
    }

    /// Conditioned mean crossing time `t0 / z`; absent when the crossing
    /// weight vanishes.
    pub fn mean_crossing_time(&self) -> Option<f64> {
        if self.log_z == f64::NEG_INFINITY {
            None
        } else {
            Some((self.log_t0 - self.log_z).exp())
        }
    }

    /// Downward step probability of the conditioned chain at an interior site.
    #[inline]
    fn p_down(&self, site: i64) -> f64 {
        let i = self.idx(site);
        let w = (-self.v[i]).exp();
        0.5 * w * self.c[i - 1]
    }
}

fn solve_1d(env: &Environment, boundary: Boundary, lo: i64, hi: i64) -> QuenchedSolve {
    // site hi is the target; its potential is never charged before arrival
    let n = (hi - lo) as usize + 1;
    let v: Vec<f64> = (lo..=hi)
        .map(|s| if s < hi { env.value(s) } else { 0.0 })
        .collect();
    let max_v = v.iter().copied().filter(|x| x.is_finite()).fold(0.0, f64::max);

    let mut solve = if max_v > LOG_SPACE_THRESHOLD {
        solve_log_space(&v, boundary, lo, hi)
    } else {
        solve_linear(&v, boundary, lo, hi)
    };
    // A linear-mode z that underflowed to zero without an absorbing site in
    // the way is a numerical zero, not a structural one: redo in log space.
    if solve.z == 0.0 && solve.log_z == f64::NEG_INFINITY {
        let z_range = match boundary {
            Boundary::Block => lo..hi,
            Boundary::Window => 0..hi,
        };
        let truly_blocked = z_range.clone().any(|s| v[(s - lo) as usize].is_infinite());
        if !truly_blocked {
            solve = solve_log_space(&v, boundary, lo, hi);
        }
    }
    let _ = n;
    solve
}

fn solve_linear(v: &[f64], boundary: Boundary, lo: i64, hi: i64) -> QuenchedSolve {
    let n = v.len();
    let mut c = vec![0.0; n];
    for i in 1..n - 1 {
        let half_w = 0.5 * (-v[i]).exp();
        c[i] = half_w / (1.0 - half_w * c[i - 1]);
    }
    let mut h = vec![0.0; n];
    h[n - 1] = 1.0;
    for i in (1..n - 1).rev() {
        h[i] = c[i] * h[i + 1];
    }
    // forward sweep for t with source h
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let half_w = 0.5 * (-v[i]).exp();
        d[i] = (half_w * d[i - 1] + h[i]) / (1.0 - half_w * c[i - 1]);
    }
    let mut t = vec![0.0; n];
    for i in (1..n - 1).rev() {
        t[i] = c[i] * t[i + 1] + d[i];
    }
    let (z, t0) = match boundary {
        Boundary::Block => {
            let half_w0 = 0.5 * (-v[0]).exp();
            if n == 1 {
                (half_w0, half_w0)
            } else {
                (half_w0 * h[1], half_w0 * (t[1] + h[1]))
            }
        }
        Boundary::Window => {
            let i0 = (-lo) as usize;
            (h[i0], t[i0])
        }
    };
    let _ = hi;
    QuenchedSolve {
        boundary,
        lo,
        hi,
        target: hi,
        v: v.to_vec(),
        log_z: if z > 0.0 { z.ln() } else { f64::NEG_INFINITY },
        log_t0: if t0 > 0.0 { t0.ln() } else { f64::NEG_INFINITY },
        c,
        h,
        t,
        z,
        t0,
    }
}

fn solve_log_space(v: &[f64], boundary: Boundary, lo: i64, hi: i64) -> QuenchedSolve {
    const NEG_INF: f64 = f64::NEG_INFINITY;
    let ln2 = std::f64::consts::LN_2;
    let n = v.len();
    let lw2: Vec<f64> = v.iter().map(|&x| if x.is_finite() { -x - ln2 } else { NEG_INF }).collect();
    let mut lc = vec![NEG_INF; n];
    let mut lpivot = vec![0.0; n]; // log(1 - (w/2) c(prev))
    for i in 1..n - 1 {
        if lw2[i] == NEG_INF {
            lc[i] = NEG_INF;
            lpivot[i] = 0.0;
            continue;
        }
        let q = lw2[i] + lc[i - 1]; // log((w/2) c(prev)) <= 0
        let piv = (-q.exp()).ln_1p();
        lpivot[i] = piv;
        lc[i] = lw2[i] - piv;
    }
    let mut lh = vec![NEG_INF; n];
    lh[n - 1] = 0.0;
    for i in (1..n - 1).rev() {
        lh[i] = lc[i] + lh[i + 1];
    }
    let mut ld = vec![NEG_INF; n];
    for i in 1..n - 1 {
        if lw2[i] == NEG_INF {
            continue;
        }
        ld[i] = log_add_exp(lw2[i] + ld[i - 1], lh[i]) - lpivot[i];
    }
    let mut lt = vec![NEG_INF; n];
    for i in (1..n - 1).rev() {
        lt[i] = log_add_exp(lc[i] + lt[i + 1], ld[i]);
    }
    let (log_z, log_t0) = match boundary {
        Boundary::Block => {
            if n == 1 {
                (lw2[0], lw2[0])
            } else {
                (lw2[0] + lh[1], lw2[0] + log_add_exp(lt[1], lh[1]))
            }
        }
        Boundary::Window => {
            let i0 = (-lo) as usize;
            (lh[i0], lt[i0])
        }
    };
    QuenchedSolve {
        boundary,
        lo,
        hi,
        target: hi,
        v: v.to_vec(),
        c: lc.iter().map(|&x| x.exp()).collect(),
        h: lh.iter().map(|&x| x.exp()).collect(),
        t: lt.iter().map(|&x| x.exp()).collect(),
        z: log_z.exp(),
        t0: log_t0.exp(),
        log_z,
        log_t0,
    }
}

/// No-return crossing of the block `(0, r)`: weight of reaching `r` before
/// any return to 0 and before absorption. Needs the environment on
/// `0..=r-1`; the potential at `r` is never charged.
pub fn solve_block(env: &Environment, r: i64) -> Result<QuenchedSolve> {
    if r < 1 {
        return Err(Error::BadGeometry(format!("block length {r} < 1")));
    }
    env.require_cover(0, r - 1)?;
    Ok(solve_1d(env, Boundary::Block, 0, r))
}

/// Absorbing-window approximation of the crossing weight to `y` on the full
/// lattice: sites at or beyond the window edge `lo` are treated as `V = inf`.
/// `z = h(0)` increases to the untruncated weight as the window widens.
pub fn solve_window(env: &Environment, y: i64) -> Result<QuenchedSolve> {
    if y < 1 {
        return Err(Error::BadGeometry(format!("target {y} < 1")));
    }
    if env.lo() > -1 {
        return Err(Error::BadGeometry(format!(
            "window must extend at least one site left of the origin, lo = {}",
            env.lo()
        )));
    }
    env.require_cover(env.lo(), y - 1)?;
    Ok(solve_1d(env, Boundary::Window, env.lo(), y))
}

/// Window-width policy: double from `w_init` until the relative change of
/// the crossing weight drops below `tol`, with a hard cap.
#[derive(Clone, Copy, Debug)]
pub struct WindowOpts {
    pub tol: f64,
    pub w_init: i64,
    pub w_cap: i64,
}

impl Default for WindowOpts {
    fn default() -> Self {
        WindowOpts {
            tol: 1e-10,
            w_init: 16,
            w_cap: 1 << 20,
        }
    }
}

/// Adaptive solve for environment `env_index`: widens the window until `z`
/// stabilizes. Sites are pure functions of `(master_seed, env_index, site)`,
/// so widening only appends frozen values. When `conditioned` is given,
/// sites `0..y-1` are drawn from that (finite-conditioned) law instead.
/// Returns the solve, the achieved relative change, and the window used.
pub fn adaptive_window_solve(
    dist: &PotentialDistribution,
    conditioned: Option<&PotentialDistribution>,
    y: i64,
    master_seed: u64,
    env_index: u64,
    opts: &WindowOpts,
) -> Result<(QuenchedSolve, f64, i64)> {
    if y < 1 {
        return Err(Error::BadGeometry(format!("target {y} < 1")));
    }
    let sample = |w: i64| -> Environment {
        match conditioned {
            Some(cond) => sample_environment_conditioned(
                dist, cond, -w, y - 1, 0, y - 1, master_seed, env_index,
            ),
            None => sample_environment(dist, -w, y - 1, master_seed, env_index),
        }
    };
    let mut w = opts.w_init.max(1);
    let mut solve = solve_window(&sample(w), y)?;
    let mut achieved = f64::INFINITY;
    while w < opts.w_cap {
        let w2 = (w * 2).min(opts.w_cap);
        let next = solve_window(&sample(w2), y)?;
        achieved = if next.log_z == f64::NEG_INFINITY {
            0.0 // blocked on [0, y): stays blocked at every width
        } else {
            -(solve.log_z - next.log_z).exp_m1()
        };
        solve = next;
        w = w2;
        if achieved <= opts.tol {
            break;
        }
    }
    Ok((solve, achieved, w))
}

/// A sampled conditioned path together with its occupation statistics.
#[derive(Clone, Debug)]
pub struct PathSample {
    pub sites: Vec<i64>,
    /// Number of steps; equals `sites.len() - 1` and the total local time.
    pub tau: u64,
    stats: PathStats,
}

impl PathSample {
    /// Wraps an externally produced walk, computing its statistics.
    pub fn from_sites(sites: Vec<i64>, target: i64) -> Self {
        let stats = path_statistics(&sites, target);
        PathSample {
            tau: sites.len() as u64 - 1,
            sites,
            stats,
        }
    }

    pub fn local_time(&self, site: i64) -> u64 {
        self.stats.local_time(site)
    }

    pub fn local_times(&self) -> impl Iterator<Item = (i64, u64)> + '_ {
        self.stats.iter()
    }

    pub fn renewal_sites(&self) -> &[i64] {
        &self.stats.renewal_sites
    }

    /// Smallest nonnegative renewal site.
    pub fn x_y(&self) -> i64 {
        self.stats.x_y
    }

    /// Steps until the first visit of `site`, if visited.
    pub fn first_hit(&self, site: i64) -> Option<u64> {
        self.sites.iter().position(|&s| s == site).map(|i| i as u64)
    }

    /// Visits to `z` strictly before the first visit of `x`.
    pub fn visits_before_first_hit(&self, z: i64, x: i64) -> u64 {
        let mut count = 0;
        for &s in &self.sites {
            if s == x {
                break;
            }
            if s == z {
                count += 1;
            }
        }
        count
    }

    /// The walk as a `step,site` CSV table.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,site\n");
        for (n, s) in self.sites.iter().enumerate() {
            out.push_str(&format!("{n},{s}\n"));
        }
        out
    }
}

/// Occupation statistics of a walk `S_0..S_tau` stopped at its target:
/// local times count visits strictly before `tau`; the renewal sites are
/// those in `[0, target]` visited at most once; `x_y` is their minimum.
#[derive(Clone, Debug)]
pub struct PathStats {
    lo: i64,
    counts: Vec<u64>,
    pub renewal_sites: Vec<i64>,
    pub x_y: i64,
}

impl PathStats {
    pub fn local_time(&self, site: i64) -> u64 {
        if site < self.lo {
            return 0;
        }
        self.counts.get((site - self.lo) as usize).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(move |(i, &c)| (self.lo + i as i64, c))
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Computes local times and renewal structure of a stopped walk.
pub fn path_statistics(sites: &[i64], target: i64) -> PathStats {
    assert!(!sites.is_empty(), "empty path");
    assert_eq!(*sites.last().unwrap(), target, "path must end at its target");
    let lo = *sites.iter().min().unwrap();
    let hi = *sites.iter().max().unwrap();
    let mut counts = vec![0u64; (hi - lo) as usize + 1];
    for &s in &sites[..sites.len() - 1] {
        counts[(s - lo) as usize] += 1;
    }
    let stats_lo = lo;
    let mut renewal_sites = Vec::new();
    for x in 0..=target {
        let c = if x < lo { 0 } else { counts[(x - stats_lo) as usize] };
        if c <= 1 {
            renewal_sites.push(x);
        }
    }
    let x_y = renewal_sites[0];
    PathStats {
        lo,
        counts,
        renewal_sites,
        x_y,
    }
}

/// Exact draw from the conditioned path law via the h-transform: from an
/// interior site the chain steps down with probability `(w(x)/2) c(x-1)` and
/// up with the complement; at the start of a no-return block the first step
/// is forced upward. The sampled walk can never be absorbed and never leaves
/// the solved range.
pub fn sample_conditioned_path(
    solve: &QuenchedSolve,
    start: i64,
    stream: &mut Stream,
) -> Result<PathSample> {
    let startable = match solve.boundary {
        Boundary::Block => start == solve.lo && solve.log_z > f64::NEG_INFINITY,
        Boundary::Window => {
            start > solve.lo && start < solve.hi && solve.h[solve.idx(start)] > 0.0
        }
    };
    let block_interior_ok = solve.boundary == Boundary::Block
        && start > solve.lo
        && start < solve.hi
        && solve.h[solve.idx(start)] > 0.0;
    if !startable && !block_interior_ok {
        return Err(Error::ZeroWeightStart);
    }
    let mut sites = Vec::with_capacity(2 * (solve.hi - start).unsigned_abs() as usize + 4);
    sites.push(start);
    let mut x = start;
    let mut steps: u64 = 0;
    while x != solve.target {
        let up = if solve.boundary == Boundary::Block && x == solve.lo {
            true
        } else {
            let pd = solve.p_down(x);
            stream.next_unit() >= pd
        };
        x += if up { 1 } else { -1 };
        sites.push(x);
        steps += 1;
        if steps > MAX_PATH_STEPS {
            return Err(Error::PathTooLong(MAX_PATH_STEPS));
        }
    }
    let stats = path_statistics(&sites, solve.target);
    Ok(PathSample {
        tau: sites.len() as u64 - 1,
        sites,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PotentialDistribution;

    fn env_of(lo: i64, values: &[f64]) -> Environment {
        Environment::from_values(lo, values.to_vec(), 0)
    }

    #[test]
    fn block_srw_weight_is_one_over_2r() {
        for r in 1..=14 {
            let env = env_of(0, &vec![0.0; r as usize]);
            let s = solve_block(&env, r).unwrap();
            assert!(
                (s.z - 1.0 / (2.0 * r as f64)).abs() < 1e-14,
                "r = {r}, z = {}",
                s.z
            );
        }
    }

    #[test]
    fn block_with_absorbing_interior_site_has_zero_weight() {
        let env = env_of(0, &[0.0, f64::INFINITY]);
        let s = solve_block(&env, 2).unwrap();
        assert_eq!(s.z, 0.0);
        assert_eq!(s.log_z, f64::NEG_INFINITY);
        assert!(s.mean_crossing_time().is_none());
    }

    #[test]
    fn block_srw_r2_conditioned_time_is_two() {
        let env = env_of(0, &[0.0, 0.0]);
        let s = solve_block(&env, 2).unwrap();
        assert!((s.mean_crossing_time().unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn block_degenerate_r1() {
        let env = env_of(0, &[0.3]);
        let s = solve_block(&env, 1).unwrap();
        let w0 = (-0.3f64).exp();
        assert!((s.z - w0 / 2.0).abs() < 1e-15);
        assert!((s.t0 - w0 / 2.0).abs() < 1e-15);
        assert!((s.mean_crossing_time().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn block_constant_potential_matches_closed_form() {
        use crate::numeric::constant_potential;
        for lambda in [0.25, 1.0, 4.0] {
            for r in [1i64, 2, 3, 8, 20] {
                let env = env_of(0, &vec![lambda; r as usize]);
                let s = solve_block(&env, r).unwrap();
                let expect = constant_potential::log_z_block(lambda, r as u32);
                assert!(
                    (s.log_z - expect).abs() < 1e-11,
                    "lambda={lambda} r={r}: {} vs {expect}",
                    s.log_z
                );
            }
        }
    }

    #[test]
    fn log_space_block_matches_closed_form_at_huge_potential() {
        let lambda = 600.0;
        let r = 5i64;
        let env = env_of(0, &vec![lambda; r as usize]);
        let s = solve_block(&env, r).unwrap();
        let expect = crate::numeric::constant_potential::log_z_block(lambda, r as u32);
        assert!((s.log_z / expect - 1.0).abs() < 1e-12, "{} vs {expect}", s.log_z);
        // tau = r is forced when the potential is this repulsive
        assert!((s.mean_crossing_time().unwrap() - r as f64).abs() < 1e-9);
    }

    #[test]
    fn linear_underflow_falls_back_to_log_space() {
        // moderate per-site potential but a long stretch: product underflows
        let y = 2000i64;
        let values = vec![0.45; (y + 16) as usize];
        let env = env_of(-16, &values);
        let s = solve_window(&env, y).unwrap();
        assert!(s.log_z.is_finite(), "log_z = {}", s.log_z);
        assert!(s.log_z < -744.0); // below exp() underflow, linear z == 0
    }

    #[test]
    fn window_gamblers_ruin() {
        // V == 0, y = 1: h(0) = W/(W+1)
        for w in [1i64, 4, 32] {
            let env = env_of(-w, &vec![0.0; (w + 1) as usize]);
            let s = solve_window(&env, 1).unwrap();
            assert!((s.z - w as f64 / (w as f64 + 1.0)).abs() < 1e-13);
        }
    }

    #[test]
    fn window_exact_when_left_side_is_absorbing() {
        // V(x) = inf for x < 0 makes any window exact
        let y = 5i64;
        let mut vals = vec![f64::INFINITY; 3];
        vals.extend(vec![0.2; y as usize]);
        let env = env_of(-3, &vals);
        let a = solve_window(&env, y).unwrap();
        let mut vals_wide = vec![f64::INFINITY; 9];
        vals_wide.extend(vec![0.2; y as usize]);
        let wide = env_of(-9, &vals_wide);
        let b = solve_window(&wide, y).unwrap();
        assert!((a.z - b.z).abs() <= 1e-15 * a.z);
    }

    #[test]
    fn residuals_satisfy_recursions() {
        let d = PotentialDistribution::new(&[(0.0, 0.4), (0.9, 0.6)], 0.0).unwrap();
        let env = sample_environment(&d, -40, 30, 5, 3);
        let s = solve_window(&env, 30).unwrap();
        for x in (s.lo + 1)..s.hi {
            let w = (-s.potential(x)).exp();
            let h_pred = w * (s.h_at(x - 1) + s.h_at(x + 1)) / 2.0;
            let t_pred = w * ((s.t_at(x - 1) + s.t_at(x + 1)) / 2.0
                + (s.h_at(x - 1) + s.h_at(x + 1)) / 2.0);
            let hs = s.h_at(x).max(1e-300);
            let ts = s.t_at(x).max(1e-300);
            assert!((s.h_at(x) - h_pred).abs() / hs < 1e-10, "h residual at {x}");
            assert!((s.t_at(x) - t_pred).abs() / ts < 1e-10, "t residual at {x}");
            assert!((0.0..=1.0).contains(&s.h_at(x)));
        }
    }

    #[test]
    fn window_weight_monotone_in_width() {
        let d = PotentialDistribution::zero_one_half();
        let y = 12;
        let mut prev = 0.0;
        for w in [2i64, 4, 8, 16, 32, 64] {
            let env = sample_environment(&d, -w, y - 1, 99, 7);
            let s = solve_window(&env, y).unwrap();
            assert!(s.z >= prev, "z decreased when widening to {w}");
            prev = s.z;
        }
    }

    #[test]
    fn adaptive_window_terminates_and_reports() {
        let d = PotentialDistribution::zero_one_half();
        let (s, achieved, w) =
            adaptive_window_solve(&d, None, 24, 11, 2, &WindowOpts::default()).unwrap();
        assert!(achieved <= 1e-10);
        assert!(w >= 32);
        assert!(s.z > 0.0);
    }

    #[test]
    fn sampler_block_srw_r2_is_deterministic_0_1_2() {
        let env = env_of(0, &[0.0, 0.0]);
        let s = solve_block(&env, 2).unwrap();
        let mut stream = Stream::new(1, 1);
        for _ in 0..50 {
            let p = sample_conditioned_path(&s, 0, &mut stream).unwrap();
            assert_eq!(p.sites, vec![0, 1, 2]);
            assert_eq!(p.tau, 2);
        }
    }

    #[test]
    fn sampler_transition_probabilities_sum_to_one() {
        let d = PotentialDistribution::new(&[(0.1, 0.5), (1.3, 0.5)], 0.0).unwrap();
        let env = sample_environment(&d, -20, 15, 3, 0);
        let s = solve_window(&env, 15).unwrap();
        for x in (s.lo + 1)..s.hi {
            if s.h_at(x) == 0.0 {
                continue;
            }
            let w = (-s.potential(x)).exp();
            let p_down = 0.5 * w * s.c[s.idx(x - 1)];
            let p_up_direct = 0.5 * w * s.h_at(x + 1) / s.h_at(x);
            assert!(
                (p_down + p_up_direct - 1.0).abs() < 1e-12,
                "site {x}: {}",
                p_down + p_up_direct
            );
        }
    }

    #[test]
    fn sampler_mean_tau_matches_exact_solve() {
        let d = PotentialDistribution::zero_one_half();
        let env = sample_environment(&d, -16, 9, 21, 4);
        let s = solve_window(&env, 10).unwrap();
        let expect = s.mean_crossing_time().unwrap();
        let n = 20_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        let mut stream = Stream::new(55, 0);
        for _ in 0..n {
            let p = sample_conditioned_path(&s, 0, &mut stream).unwrap();
            sum += p.tau as f64;
            sumsq += (p.tau as f64) * (p.tau as f64);
        }
        let mean = sum / n as f64;
        let se = ((sumsq / n as f64 - mean * mean) / n as f64).sqrt();
        assert!(
            (mean - expect).abs() < 4.0 * se,
            "mean {mean} vs {expect} (se {se})"
        );
    }

    #[test]
    fn sampler_confined_to_block() {
        let d = PotentialDistribution::zero_one_half();
        let env = sample_environment(&d, 0, 7, 31, 9);
        let s = solve_block(&env, 8).unwrap();
        if s.z == 0.0 {
            return;
        }
        let mut stream = Stream::new(4, 4);
        for _ in 0..200 {
            let p = sample_conditioned_path(&s, 0, &mut stream).unwrap();
            assert!(p.sites.iter().all(|&x| (0..=8).contains(&x)));
            assert_eq!(p.local_time(0), 1, "no return to the block start");
        }
    }

    #[test]
    fn sampler_rejects_zero_weight_start() {
        let env = env_of(0, &[0.0, f64::INFINITY, 0.0]);
        let s = solve_block(&env, 3).unwrap();
        let mut stream = Stream::new(0, 0);
        assert!(matches!(
            sample_conditioned_path(&s, 0, &mut stream),
            Err(Error::ZeroWeightStart)
        ));
    }

    #[test]
    fn path_csv_export() {
        let p = PathSample::from_sites(vec![0, 1, 0, 1, 2], 2);
        assert_eq!(p.to_csv(), "step,site\n0,0\n1,1\n2,0\n3,1\n4,2\n");
    }

    #[test]
    fn path_statistics_reference_cases() {
        let st = path_statistics(&[0, 1, 2], 2);
        assert_eq!(st.local_time(0), 1);
        assert_eq!(st.local_time(1), 1);
        assert_eq!(st.local_time(2), 0);
        assert_eq!(st.x_y, 0);
        assert_eq!(st.renewal_sites, vec![0, 1, 2]);

        let st = path_statistics(&[0, 1, 0, 1, 2], 2);
        assert_eq!(st.local_time(0), 2);
        assert_eq!(st.local_time(1), 2);
        assert_eq!(st.x_y, 2, "only the target qualifies");

        // the target always qualifies: its local time is counted strictly
        // before arrival
        let st = path_statistics(&[0, 1, 2, 1, 2, 3], 3);
        assert!(st.renewal_sites.contains(&3));
        assert_eq!(st.total(), 5);
    }

    #[test]
    fn sampler_path_probabilities_match_weights_on_enumerable_block() {
        // env on [0,4): enumerate all no-return paths of length <= 12 and
        // compare empirical frequencies with exp(-sum V) 2^-len / z.
        let vals = [0.3, 0.7, 0.2, 0.5];
        let env = env_of(0, &vals);
        let r = 4i64;
        let s = solve_block(&env, r).unwrap();

        fn enumerate(
            x: i64,
            r: i64,
            len: usize,
            max_len: usize,
            weight: f64,
            vals: &[f64],
            path: &mut Vec<i64>,
            out: &mut std::collections::HashMap<Vec<i64>, f64>,
        ) {
            if x == r {
                out.insert(path.clone(), weight);
                return;
            }
            if len == max_len {
                return;
            }
            for step in [-1i64, 1] {
                let nx = x + step;
                if nx <= 0 && !(x == 0 && false) {
                    // stepping to 0 or below ends the crossing attempt
                    if nx < 1 {
                        continue;
                    }
                }
                let w = weight * 0.5 * (-vals[x as usize]).exp();
                path.push(nx);
                enumerate(nx, r, len + 1, max_len, w, vals, path, out);
                path.pop();
            }
        }

        let mut table = std::collections::HashMap::new();
        let mut path = vec![0i64];
        enumerate(0, r, 0, 12, 1.0, &vals, &mut path, &mut table);
        let n = 200_000u64;
        let mut counts: std::collections::HashMap<Vec<i64>, u64> = Default::default();
        let mut stream = Stream::new(2024, 0);
        for _ in 0..n {
            let p = sample_conditioned_path(&s, 0, &mut stream).unwrap();
            if p.sites.len() - 1 <= 12 {
                *counts.entry(p.sites.clone()).or_default() += 1;
            }
        }
        for (path, weight) in &table {
            let p_theory = weight / s.z;
            let observed = *counts.get(path).unwrap_or(&0) as f64 / n as f64;
            let se = (p_theory * (1.0 - p_theory) / n as f64).sqrt().max(1e-9);
            assert!(
                (observed - p_theory).abs() < 4.0 * se + 1e-9,
                "path {path:?}: observed {observed}, theory {p_theory}"
            );
        }
    }
}
