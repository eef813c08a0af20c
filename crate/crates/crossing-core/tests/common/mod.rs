//! Shared test oracles, independent of the library's computational route.
//!
//! The library computes annealed block quantities by averaging tridiagonal
//! environment solves. The oracle here never touches an environment: it sums
//! over walk paths directly, grouped by the upcrossing counts `k_x >= 1` of
//! the edges `(x, x+1)`. A no-return path from 0 to first hitting `y` with
//! upcrossings `(k_x)` has local times `l(x) = k_{x-1} + k_x - 1`, total
//! length `sum_x (2 k_x - 1)`, and there are
//! `prod_x C(k_{x-1} + k_x - 2, k_x - 1)` such paths, with `k_0 = 1` forced
//! by the no-return constraint and `k_{y-1} = 1` by stopping at the first
//! hit. Site independence of the potential turns the annealed path weight
//! into `prod_x E exp(-l(x) V)`, so the whole sum is a product of transfer
//! matrices over consecutive upcrossing counts.

#![allow(dead_code)]

use crossing_core::PotentialDistribution;

/// `E exp(-l V)` per site for the given law.
fn phi(dist: &PotentialDistribution, l: u64) -> f64 {
    (-dist.log_mgf(l as f64)).exp()
}

/// Binomial table `C(n, k)` in f64 up to `n_max`.
fn binomials(n_max: usize) -> Vec<Vec<f64>> {
    let mut c = vec![vec![0.0; n_max + 1]; n_max + 1];
    for n in 0..=n_max {
        c[n][0] = 1.0;
        for k in 1..=n {
            c[n][k] = c[n - 1][k - 1] + if k < n { c[n - 1][k] } else { 0.0 };
        }
    }
    c
}

/// Exact annealed `(log Z_{0,y}, E tau under the no-return conditioned law)`
/// by transfer over upcrossing counts, truncated at `k_max` crossings per
/// edge. The derivative in a uniform potential shift is carried through the
/// product analytically: each step contributes weight `e^{-lambda}/2`, so
/// the time-weighted numerator is `-dZ/dlambda` at `lambda = 0`.
pub fn transfer_block_oracle(
    dist: &PotentialDistribution,
    y: usize,
    k_max: usize,
) -> (f64, f64) {
    assert!(y >= 1);
    let s = 0.5f64;
    if y == 1 {
        // single forced step
        return ((phi(dist, 1) * s).ln(), 1.0);
    }
    let c = binomials(2 * k_max);
    // t[k-1][k'-1], with the step-count derivative factor per column
    let mut t = vec![vec![0.0; k_max]; k_max];
    for k in 1..=k_max {
        for kp in 1..=k_max {
            t[k - 1][kp - 1] =
                c[k + kp - 2][kp - 1] * phi(dist, (k + kp - 1) as u64) * s.powi(2 * kp as i32 - 1);
        }
    }
    let mut v = vec![0.0; k_max];
    let mut dv = vec![0.0; k_max]; // d/dlambda of v, same rescaling as v
    v[0] = 1.0;
    let mut log_scale = 0.0;
    for _ in 0..y - 1 {
        let mut nv = vec![0.0; k_max];
        let mut ndv = vec![0.0; k_max];
        for kp in 0..k_max {
            let mut acc = 0.0;
            let mut dacc = 0.0;
            for k in 0..k_max {
                acc += t[k][kp] * v[k];
                dacc += t[k][kp] * dv[k];
            }
            // d/dlambda of s^{2k'-1} brings down -(2k'-1)
            nv[kp] = acc;
            ndv[kp] = dacc - (2.0 * (kp as f64 + 1.0) - 1.0) * acc;
        }
        let m = nv.iter().cloned().fold(0.0f64, f64::max);
        assert!(m > 0.0, "transfer vector vanished");
        for kp in 0..k_max {
            nv[kp] /= m;
            ndv[kp] /= m;
        }
        log_scale += m.ln();
        v = nv;
        dv = ndv;
    }
    let log_z = (phi(dist, 1) * s).ln() + log_scale + v[0].ln();
    // Z = phi(1) s(lambda) V(lambda); A = -dZ/dlambda; E tau = A / Z
    let e_tau = 1.0 - dv[0] / v[0];
    (log_z, e_tau)
}

/// Exact crossing statistics for the `{0 w.p. p0, inf w.p. 1 - p0}` law
/// under the unrestricted conditioned measure: conditioned on an open strip
/// `[0, y)`, the only disorder left is the distance `k >= 1` to the first
/// absorbing site below the origin, geometric with success `1 - p0`. Ruin
/// formulas give the weight `k/(y+k)` and conditioned duration
/// `((y+k)^2 - k^2)/3`.
pub fn zero_inf_crossing_oracle(p0: f64, y: i64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut pk = 1.0 - p0;
    for k in 1..5000 {
        let kf = k as f64;
        let yf = y as f64;
        let z = kf / (yf + kf);
        let e_tau = ((yf + kf) * (yf + kf) - kf * kf) / 3.0;
        num += pk * z * e_tau;
        den += pk * z;
        pk *= p0;
    }
    num / den
}

pub fn assert_close(got: f64, want: f64, tol: f64, what: &str) {
    assert!(
        (got - want).abs() <= tol,
        "{what}: got {got}, want {want} (tol {tol})"
    );
}

pub fn assert_rel_close(got: f64, want: f64, rel: f64, what: &str) {
    assert!(
        (got - want).abs() <= rel * want.abs(),
        "{what}: got {got}, want {want} (rel tol {rel}, actual {})",
        ((got - want) / want).abs()
    );
}
