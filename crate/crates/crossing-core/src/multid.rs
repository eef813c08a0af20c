//! Killed-walk solves on truncated boxes in d = 2, 3, crossing-time scans,
//! and the occupied/empty cube decomposition of environments.
//!
//! The harmonic system is the d-dimensional analogue of the window solve:
//! `h(x) = exp(-V(x)) (2d)^-1 sum_nb h(nb)` with `h = 0` outside the box and
//! `h = 1` at the target. Crossing weights decay exponentially in the
//! distance, so at scan scale `h` spans far more than the 16 decades an
//! additive iterative solver can resolve against the unit boundary value.
//! The solve therefore marches slice by slice along axis 0, exactly like
//! the scalar forward elimination in one dimension: with per-slice survival
//! diagonals `B_i = W_i / 2d` and transverse adjacency `T_i`,
//!
//! ```text
//! h_i = C_i h_{i+1} + d_i,   C_i = M_i^{-1} B_i,
//! M_i = I - B_i (T_i + C_{i-1}),
//! ```
//!
//! where every matrix has nonnegative entries and `M_i` is a strictly
//! diagonally dominant M-matrix, so the elimination needs no pivoting and
//! never cancels: exponentially small components of `h` emerge as products
//! of contractions, not differences. The time-weighted system reuses the
//! same march with source `h`.

use crate::numeric::CompensatedSum;
use crate::potential::PotentialDistribution;
use crate::rng;
use crate::{map_chunked, Error, Result};
use std::collections::BTreeMap;

/// A realized potential on an axis-aligned box of `Z^d`.
#[derive(Clone, Debug)]
pub struct EnvBox {
    lo: Vec<i64>,
    hi: Vec<i64>,
    strides: Vec<usize>,
    values: Vec<f64>,
    pub seed_id: u64,
}

impl EnvBox {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[i64] {
        &self.lo
    }

    pub fn hi(&self) -> &[i64] {
        &self.hi
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn contains(&self, site: &[i64]) -> bool {
        site.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&s, (&l, &h))| s >= l && s <= h)
    }

    #[inline]
    pub fn index(&self, site: &[i64]) -> usize {
        site.iter()
            .zip(self.lo.iter().zip(&self.strides))
            .map(|(&s, (&l, &st))| (s - l) as usize * st)
            .sum()
    }

    pub fn value(&self, site: &[i64]) -> f64 {
        self.values[self.index(site)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn site_of(&self, mut idx: usize) -> Vec<i64> {
        let mut site = vec![0i64; self.dim()];
        for k in 0..self.dim() {
            site[k] = self.lo[k] + (idx / self.strides[k]) as i64;
            idx %= self.strides[k];
        }
        site
    }
}

/// Draws the boxed environment with index `env_index`; value at a site is a
/// pure function of `(master_seed, env_index, coordinates)`, independent of
/// the box bounds, so scans over growing boxes see one consistent field.
pub fn sample_box(
    dist: &PotentialDistribution,
    lo: &[i64],
    hi: &[i64],
    master_seed: u64,
    env_index: u64,
) -> EnvBox {
    assert_eq!(lo.len(), hi.len());
    assert!(lo.iter().zip(hi).all(|(l, h)| l <= h), "empty box");
    let dim = lo.len();
    let shape: Vec<usize> = lo
        .iter()
        .zip(hi)
        .map(|(&l, &h)| (h - l + 1) as usize)
        .collect();
    let mut strides = vec![1usize; dim];
    for k in (0..dim.saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * shape[k + 1];
    }
    let total: usize = shape.iter().product();
    let mut values = Vec::with_capacity(total);
    let mut site = lo.to_vec();
    for _ in 0..total {
        values.push(dist.draw(rng::site_bits(master_seed, env_index, &site)));
        for k in (0..dim).rev() {
            site[k] += 1;
            if site[k] <= hi[k] {
                break;
            }
            site[k] = lo[k];
        }
    }
    EnvBox {
        lo: lo.to_vec(),
        hi: hi.to_vec(),
        strides,
        values,
        seed_id: rng::keyed(master_seed, env_index, 0),
    }
}

/// Result of a box solve: crossing weight `z = h(0)` and time-weighted
/// `t0 = t(0)` toward `target`, with a verified residual.
#[derive(Clone, Debug)]
pub struct BoxSolve {
    pub target: Vec<i64>,
    pub z: f64,
    pub t0: f64,
    /// Largest relative defect of the harmonic identity over sites where `h`
    /// is large enough to measure one.
    pub residual: f64,
    h: Vec<f64>,
    t: Vec<f64>,
}

impl BoxSolve {
    pub fn mean_crossing_time(&self) -> Option<f64> {
        (self.z > 0.0).then(|| self.t0 / self.z)
    }

    pub fn h_values(&self) -> &[f64] {
        &self.h
    }

    pub fn t_values(&self) -> &[f64] {
        &self.t
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOpts {
    /// Acceptable relative residual of the returned solution.
    pub tol: f64,
}

impl Default for SolveOpts {
    fn default() -> Self {
        SolveOpts { tol: 1e-10 }
    }
}

/// Dense LU without pivoting; valid for the strictly diagonally dominant
/// M-matrices of the slice elimination.
struct Lu {
    n: usize,
    a: Vec<f64>,
}

impl Lu {
    fn factor(mut a: Vec<f64>, n: usize) -> Result<Self> {
        for k in 0..n {
            let piv = a[k * n + k];
            if !(piv > 0.0) {
                return Err(Error::SolverStalled {
                    residual: piv,
                    iters: k as u64,
                });
            }
            let inv = 1.0 / piv;
            for i in k + 1..n {
                let f = a[i * n + k] * inv;
                a[i * n + k] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        a[i * n + j] -= f * a[k * n + j];
                    }
                }
            }
        }
        Ok(Lu { n, a })
    }

    fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        for i in 1..n {
            let mut acc = x[i];
            for k in 0..i {
                acc -= self.a[i * n + k] * x[k];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for k in i + 1..n {
                acc -= self.a[i * n + k] * x[k];
            }
            x[i] = acc / self.a[i * n + i];
        }
    }
}

/// Geometry of the slice marching: sites grouped by their axis-0 coordinate.
struct SliceMarch {
    n_slices: usize,
    m: usize,
    half_w: Vec<f64>, // w/2d per site, slice-major
    dirichlet: Vec<bool>,
    transverse: Vec<Vec<(u32, u32)>>, // transverse neighbor pairs per slice
}

impl SliceMarch {
    fn build(env: &EnvBox, target_idx: usize) -> Self {
        let dim = env.dim();
        let n_slices = (env.hi[0] - env.lo[0] + 1) as usize;
        let m = env.strides[0];
        let two_d = 2.0 * dim as f64;
        let half_w: Vec<f64> = env
            .values
            .iter()
            .map(|&v| if v.is_finite() { (-v).exp() / two_d } else { 0.0 })
            .collect();
        let mut dirichlet = vec![false; env.len()];
        dirichlet[target_idx] = true;
        // transverse neighbor pairs (j, j') within a slice, local indices
        let mut transverse = vec![Vec::new(); n_slices];
        for idx in 0..env.len() {
            let site = env.site_of(idx);
            for k in 1..dim {
                if site[k] < env.hi[k] {
                    let s = ((site[0] - env.lo[0]) as usize, idx % m);
                    transverse[s.0].push((s.1 as u32, (s.1 + env.strides[k]) as u32));
                }
            }
        }
        SliceMarch {
            n_slices,
            m,
            half_w,
            dirichlet,
            transverse,
        }
    }

    /// Solves `(I - B(T + shift)) h = rhs` by forward elimination and back
    /// substitution. `rhs` holds the Dirichlet values at fixed sites and the
    /// source elsewhere.
    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let m = self.m;
        let mut cs: Vec<Vec<f64>> = Vec::with_capacity(self.n_slices);
        let mut ds: Vec<Vec<f64>> = Vec::with_capacity(self.n_slices);
        for i in 0..self.n_slices {
            let base = i * m;
            // M = I - B (T + C_prev), rows of fixed sites replaced by identity
            let mut mat = vec![0.0; m * m];
            for j in 0..m {
                mat[j * m + j] = 1.0;
            }
            if i > 0 {
                let cp = &cs[i - 1];
                for j in 0..m {
                    if self.dirichlet[base + j] {
                        continue;
                    }
                    let b = self.half_w[base + j];
                    if b == 0.0 {
                        continue;
                    }
                    for k in 0..m {
                        mat[j * m + k] -= b * cp[j * m + k];
                    }
                }
            }
            for &(a, bidx) in &self.transverse[i] {
                let (a, bidx) = (a as usize, bidx as usize);
                if !self.dirichlet[base + a] {
                    mat[a * m + bidx] -= self.half_w[base + a];
                }
                if !self.dirichlet[base + bidx] {
                    mat[bidx * m + a] -= self.half_w[base + bidx];
                }
            }
            let lu = Lu::factor(mat, m)?;
            // C_i = M^{-1} B, column by column (B diagonal, zero on fixed rows)
            let mut c = vec![0.0; m * m];
            let mut col = vec![0.0; m];
            if i + 1 < self.n_slices {
                for k in 0..m {
                    let b = if self.dirichlet[base + k] {
                        0.0
                    } else {
                        self.half_w[base + k]
                    };
                    if b == 0.0 {
                        continue;
                    }
                    col.iter_mut().for_each(|x| *x = 0.0);
                    col[k] = b;
                    lu.solve_in_place(&mut col);
                    for j in 0..m {
                        c[j * m + k] = col[j];
                    }
                }
            }
            // d_i = M^{-1} (B d_{i-1} + rhs_i)
            let mut d = vec![0.0; m];
            for j in 0..m {
                let mut acc = rhs[base + j];
                if !self.dirichlet[base + j] {
                    if let Some(dp) = ds.last() {
                        acc += self.half_w[base + j] * dp[j];
                    }
                }
                d[j] = acc;
            }
            lu.solve_in_place(&mut d);
            cs.push(c);
            ds.push(d);
        }
        // back substitution
        let mut out = vec![0.0; self.n_slices * m];
        let mut next = vec![0.0; m];
        for i in (0..self.n_slices).rev() {
            let mut cur = ds[i].clone();
            if i + 1 < self.n_slices {
                let c = &cs[i];
                for j in 0..m {
                    let mut acc = cur[j];
                    for k in 0..m {
                        acc += c[j * m + k] * next[k];
                    }
                    cur[j] = acc;
                }
            }
            out[i * m..(i + 1) * m].copy_from_slice(&cur);
            std::mem::swap(&mut next, &mut cur);
        }
        Ok(out)
    }
}

/// Direct solve of the killed-walk crossing problem on the box: `h` with
/// absorbing boundary and unit value at `target`, then the time-weighted
/// companion with source `h`. The walk starts at the origin. The returned
/// residual is measured, not assumed.
pub fn box_solve(env: &EnvBox, target: &[i64], opts: &SolveOpts) -> Result<BoxSolve> {
    let dim = env.dim();
    if !(2..=3).contains(&dim) {
        return Err(Error::BadGeometry(format!(
            "box solve wants d in {{2,3}}, got {dim}"
        )));
    }
    let origin = vec![0i64; dim];
    if !env.contains(&origin) || !env.contains(target) {
        return Err(Error::BadGeometry(
            "origin and target must lie inside the box".into(),
        ));
    }
    if target == origin.as_slice() {
        return Err(Error::BadGeometry("target must differ from the origin".into()));
    }
    let target_idx = env.index(target);
    let origin_idx = env.index(&origin);
    let march = SliceMarch::build(env, target_idx);
    let mut rhs = vec![0.0; env.len()];
    rhs[target_idx] = 1.0;
    let h = march.solve(&rhs)?;
    // time-weighted pass: source h at free sites, zero at the target
    let mut rhs_t: Vec<f64> = h
        .iter()
        .enumerate()
        .map(|(i, &hi)| if march.dirichlet[i] { 0.0 } else { hi })
        .collect();
    rhs_t[target_idx] = 0.0;
    let t = march.solve(&rhs_t)?;
    // verify the harmonic identity where h is measurable
    let two_d = 2.0 * dim as f64;
    let mut residual = 0.0f64;
    for idx in 0..env.len() {
        if march.dirichlet[idx] || h[idx] <= 0.0 {
            continue;
        }
        let site = env.site_of(idx);
        let v = env.values[idx];
        if !v.is_finite() {
            continue;
        }
        let mut acc = 0.0;
        for k in 0..dim {
            for delta in [-1i64, 1] {
                let c = site[k] + delta;
                if c < env.lo[k] || c > env.hi[k] {
                    continue;
                }
                acc += h[(idx as i64 + delta * env.strides[k] as i64) as usize];
            }
        }
        let pred = (-v).exp() / two_d * acc;
        residual = residual.max((h[idx] - pred).abs() / h[idx].max(1e-300));
    }
    if residual > opts.tol.max(1e-12) * 1e2 {
        return Err(Error::SolverStalled {
            residual,
            iters: march.n_slices as u64,
        });
    }
    Ok(BoxSolve {
        target: target.to_vec(),
        z: h[origin_idx].max(0.0),
        t0: t[origin_idx].max(0.0),
        residual,
        h,
        t,
    })
}

/// One row of a ballisticity scan.
#[derive(Clone, Debug)]
pub struct ScanRow {
    pub y: i64,
    pub target: Vec<i64>,
    pub norm: f64,
    pub z_mean: f64,
    pub time_over_norm: f64,
    pub stderr_over_norm: f64,
}

#[derive(Clone, Debug)]
pub struct ScanTable {
    pub rows: Vec<ScanRow>,
    /// Relative increase of `E tau / |y|` from the bottom to the top of the
    /// last octave of targets.
    pub top_octave_increase: f64,
    /// No doubling across the top octave.
    pub bounded: bool,
}

/// Conditioned mean crossing time per distance along a ray of targets in
/// d = 2, with the box margin proportional to the distance. Environments are
/// a single consistent field per index, so rows are positively correlated.
#[allow(clippy::too_many_arguments)]
pub fn ballisticity_scan(
    dist: &PotentialDistribution,
    direction: &[i64],
    ys: &[i64],
    margin_mult: f64,
    n_envs: u64,
    master_seed: u64,
    opts: &SolveOpts,
    workers: usize,
) -> Result<ScanTable> {
    if direction.len() != 2 {
        return Err(Error::BadGeometry("scan is defined for d = 2".into()));
    }
    if direction.iter().all(|&c| c == 0) {
        return Err(Error::BadGeometry("direction must be nonzero".into()));
    }
    if ys.len() < 2 || ys.windows(2).any(|w| w[1] <= w[0]) || ys[0] < 1 {
        return Err(Error::InvalidArgument(
            "targets must be increasing and positive".into(),
        ));
    }
    let mut rows = Vec::with_capacity(ys.len());
    for &y in ys {
        let target: Vec<i64> = direction.iter().map(|&c| c * y).collect();
        let norm = (target.iter().map(|&c| (c * c) as f64).sum::<f64>()).sqrt();
        let margin = (margin_mult * norm).ceil() as i64;
        let lo: Vec<i64> = target.iter().map(|&c| c.min(0) - margin).collect();
        let hi: Vec<i64> = target.iter().map(|&c| c.max(0) + margin).collect();
        let parts = map_chunked(n_envs, workers, |range| -> Result<_> {
            let mut sz = CompensatedSum::new();
            let mut szz = CompensatedSum::new();
            let mut st = CompensatedSum::new();
            let mut stt = CompensatedSum::new();
            let mut szt = CompensatedSum::new();
            for i in range {
                let env = sample_box(dist, &lo, &hi, master_seed, i);
                let s = box_solve(&env, &target, opts)?;
                sz.add(s.z);
                szz.add(s.z * s.z);
                st.add(s.t0);
                stt.add(s.t0 * s.t0);
                szt.add(s.z * s.t0);
            }
            Ok((sz.value(), szz.value(), st.value(), stt.value(), szt.value()))
        });
        let n = n_envs as f64;
        let (mut sz, mut szz, mut st, mut stt, mut szt) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for part in parts {
            let (a, b, c, d, e) = part?;
            sz += a;
            szz += b;
            st += c;
            stt += d;
            szt += e;
        }
        if sz <= 0.0 {
            return Err(Error::AllWeightsZero);
        }
        let mz = sz / n;
        let mt = st / n;
        let ratio = mt / mz;
        let var_z = ((szz - n * mz * mz) / (n - 1.0)).max(0.0);
        let var_t = ((stt - n * mt * mt) / (n - 1.0)).max(0.0);
        let cov = (szt - n * mz * mt) / (n - 1.0);
        let stderr = ((var_t - 2.0 * ratio * cov + ratio * ratio * var_z) / (n * mz * mz))
            .max(0.0)
            .sqrt();
        rows.push(ScanRow {
            y,
            target,
            norm,
            z_mean: mz,
            time_over_norm: ratio / norm,
            stderr_over_norm: stderr / norm,
        });
    }
    let y_max = *ys.last().unwrap();
    let half_row = rows
        .iter()
        .find(|r| 2 * r.y >= y_max)
        .expect("ys nonempty");
    let top = rows.last().unwrap();
    let top_octave_increase = top.time_over_norm / half_row.time_over_norm - 1.0;
    Ok(ScanTable {
        bounded: top_octave_increase < 1.0,
        top_octave_increase,
        rows,
    })
}

/// Doubled-box sensitivity of the crossing-time ratio at one target:
/// `(ratio at margin, ratio at doubled margin, relative difference)`.
#[allow(clippy::too_many_arguments)]
pub fn margin_sensitivity(
    dist: &PotentialDistribution,
    direction: &[i64],
    y: i64,
    margin_mult: f64,
    n_envs: u64,
    master_seed: u64,
    opts: &SolveOpts,
    workers: usize,
) -> Result<(f64, f64, f64)> {
    let mut out = [0.0f64; 2];
    for (slot, mult) in out.iter_mut().zip([margin_mult, 2.0 * margin_mult]) {
        let table = ballisticity_scan(
            dist,
            direction,
            &[y / 2, y],
            mult,
            n_envs,
            master_seed,
            opts,
            workers,
        )?;
        *slot = table.rows.last().unwrap().time_over_norm;
    }
    let rel = (out[1] - out[0]).abs() / out[1].abs().max(1e-300);
    Ok((out[0], out[1], rel))
}

/// Occupied/empty cube labeling of an environment and the connected
/// components of empty cubes.
#[derive(Clone, Debug)]
pub struct CubeDecomposition {
    pub l: i64,
    pub kappa: f64,
    pub q_lo: Vec<i64>,
    pub q_hi: Vec<i64>,
    pub occupied: Vec<bool>,
    pub components: Vec<CubeComponent>,
}

#[derive(Clone, Copy, Debug)]
pub struct CubeComponent {
    pub size: usize,
    /// Component touches the edge of the sampled region, so its size is
    /// censored from below.
    pub touches_boundary: bool,
}

impl CubeDecomposition {
    pub fn n_cubes(&self) -> usize {
        self.occupied.len()
    }

    /// Component-size histogram: `size -> (interior count, censored count)`.
    pub fn histogram(&self) -> BTreeMap<usize, (u64, u64)> {
        let mut out: BTreeMap<usize, (u64, u64)> = BTreeMap::new();
        for c in &self.components {
            let e = out.entry(c.size).or_default();
            if c.touches_boundary {
                e.1 += 1;
            } else {
                e.0 += 1;
            }
        }
        out
    }
}

/// Partitions the sampled region into cubes `B(q) = L q + [-L/2, L/2)^d`,
/// labels a cube occupied when its maximal potential (target site excluded)
/// reaches `kappa`, and gathers face-adjacent components of empty cubes.
pub fn cube_decompose(
    env: &EnvBox,
    l: i64,
    kappa: f64,
    target: Option<&[i64]>,
) -> Result<CubeDecomposition> {
    if l <= 0 || l % 2 != 0 {
        return Err(Error::BadCubeSide { l });
    }
    let dim = env.dim();
    let half = l / 2;
    let mut q_lo = vec![0i64; dim];
    let mut q_hi = vec![0i64; dim];
    for k in 0..dim {
        if (env.lo[k] + half).rem_euclid(l) != 0 || (env.hi[k] + 1 + half).rem_euclid(l) != 0 {
            return Err(Error::CubeAlignment(format!(
                "axis {k}: {}..={} vs side {l}",
                env.lo[k], env.hi[k]
            )));
        }
        q_lo[k] = (env.lo[k] + half) / l;
        q_hi[k] = (env.hi[k] + 1 + half) / l - 1;
    }
    let q_shape: Vec<usize> = q_lo
        .iter()
        .zip(&q_hi)
        .map(|(&a, &b)| (b - a + 1) as usize)
        .collect();
    let n_cubes: usize = q_shape.iter().product();
    let mut q_strides = vec![1usize; dim];
    for k in (0..dim.saturating_sub(1)).rev() {
        q_strides[k] = q_strides[k + 1] * q_shape[k + 1];
    }
    let mut occupied = vec![false; n_cubes];
    let mut qcur = q_lo.clone();
    let mut site = vec![0i64; dim];
    for qi in occupied.iter_mut() {
        // max over the cube's sites, excluding the target
        let mut max_v = f64::NEG_INFINITY;
        for k in 0..dim {
            site[k] = l * qcur[k] - half;
        }
        'sites: loop {
            let excluded = target.map(|t| t == site.as_slice()).unwrap_or(false);
            if !excluded {
                let v = env.value(&site);
                if v > max_v {
                    max_v = v;
                }
            }
            for k in (0..dim).rev() {
                site[k] += 1;
                if site[k] < l * qcur[k] + half {
                    continue 'sites;
                }
                site[k] = l * qcur[k] - half;
            }
            break;
        }
        *qi = max_v >= kappa;
        for k in (0..dim).rev() {
            qcur[k] += 1;
            if qcur[k] <= q_hi[k] {
                break;
            }
            qcur[k] = q_lo[k];
        }
    }
    // BFS components of empty cubes under face adjacency
    let mut seen = vec![false; n_cubes];
    let mut components = Vec::new();
    let mut queue = Vec::new();
    for start in 0..n_cubes {
        if occupied[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.clear();
        queue.push(start);
        let mut size = 0usize;
        let mut touches = false;
        while let Some(idx) = queue.pop() {
            size += 1;
            let mut rem = idx;
            for k in 0..dim {
                let coord = rem / q_strides[k];
                rem %= q_strides[k];
                if coord == 0 || coord + 1 == q_shape[k] {
                    touches = true;
                }
                if coord > 0 {
                    let nb = idx - q_strides[k];
                    if !occupied[nb] && !seen[nb] {
                        seen[nb] = true;
                        queue.push(nb);
                    }
                }
                if coord + 1 < q_shape[k] {
                    let nb = idx + q_strides[k];
                    if !occupied[nb] && !seen[nb] {
                        seen[nb] = true;
                        queue.push(nb);
                    }
                }
            }
        }
        components.push(CubeComponent {
            size,
            touches_boundary: touches,
        });
    }
    Ok(CubeDecomposition {
        l,
        kappa,
        q_lo,
        q_hi,
        occupied,
        components,
    })
}

/// Aggregated empty-component histogram over sampled environments:
/// rows `(size, interior count, censored count)`.
#[allow(clippy::too_many_arguments)]
pub fn cube_histogram_mc(
    dist: &PotentialDistribution,
    l: i64,
    kappa: f64,
    cubes_per_axis: &[i64],
    n_envs: u64,
    master_seed: u64,
    workers: usize,
) -> Result<Vec<(usize, u64, u64)>> {
    if cubes_per_axis.iter().any(|&c| c < 1) {
        return Err(Error::InvalidArgument("need at least one cube per axis".into()));
    }
    let half = l / 2;
    let lo: Vec<i64> = cubes_per_axis.iter().map(|_| -half).collect();
    let hi: Vec<i64> = cubes_per_axis.iter().map(|&c| l * (c - 1) + half - 1).collect();
    let parts = map_chunked(n_envs, workers, |range| {
        let mut hist: BTreeMap<usize, (u64, u64)> = BTreeMap::new();
        for i in range {
            let env = sample_box(dist, &lo, &hi, master_seed, i);
            let dec = cube_decompose(&env, l, kappa, None).expect("aligned by construction");
            for c in dec.components {
                let e = hist.entry(c.size).or_default();
                if c.touches_boundary {
                    e.1 += 1;
                } else {
                    e.0 += 1;
                }
            }
        }
        hist
    });
    let mut total: BTreeMap<usize, (u64, u64)> = BTreeMap::new();
    for part in parts {
        for (size, (a, b)) in part {
            let e = total.entry(size).or_default();
            e.0 += a;
            e.1 += b;
        }
    }
    Ok(total.into_iter().map(|(s, (a, b))| (s, a, b)).collect())
}
