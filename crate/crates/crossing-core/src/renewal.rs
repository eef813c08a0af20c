//! Renewal analysis of the crossing problem.
//!
//! The no-return crossing weight factorizes over renewal points (sites
//! visited exactly once), which on the annealed side is a convolution
//! identity over block lengths:
//!
//! ```text
//! z0(r) = sum_{s=1..r} zbar(s) z0(r-s),            z0(0) = 1,
//! a(r)  = sum_{s=1..r} [nbar(s) z0(r-s) + zbar(s) a(r-s)],   a(0) = 0,
//! ```
//!
//! where `zbar(r)` is the weight of crossing `(0, r)` with no interior
//! renewal point and `nbar(r)` its time-weighted companion. Inverting the
//! triangular system recovers `zbar`, `nbar` from a block table. The
//! exponent `beta` then normalizes `q(r) = e^{beta r} zbar(r)` into a
//! probability kernel, and the renewal theorem turns mean block crossing
//! times `g(r) = nbar(r) / zbar(r)` into the reciprocal speed
//! `1/v = sum g(r) q(r) / sum r q(r)`.

use crate::annealed::{BlockTable, TableMode};
use crate::numeric::{linear_fit, CompensatedSum};
use crate::{Error, Result};

/// Which array a clamp was applied to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClampKind {
    Zbar,
    Nbar,
}

/// A negative deconvolution result inside the noise floor, clamped to zero.
#[derive(Clone, Copy, Debug)]
pub struct ClampEvent {
    pub kind: ClampKind,
    pub r: usize,
    pub raw: f64,
    pub floor: f64,
}

/// Constrained block weights recovered from a [`BlockTable`], with
/// propagated error bounds (floating-point bounds in exact mode, standard
/// errors in Monte Carlo mode).
#[derive(Clone, Debug)]
pub struct Deconvolution {
    pub r_max: usize,
    pub zbar: Vec<f64>,
    pub nbar: Vec<f64>,
    pub zbar_err: Vec<f64>,
    pub nbar_err: Vec<f64>,
    pub clamped: Vec<ClampEvent>,
}

/// Noise floor of the table inputs. Exact tables carry only rounding error;
/// Monte Carlo tables carry their standard errors.
fn input_errors(table: &BlockTable) -> (Vec<f64>, Vec<f64>) {
    match table.mode {
        TableMode::Exact => {
            let e = |xs: &[f64]| {
                xs.iter()
                    .enumerate()
                    .map(|(r, &x)| 1e-15 * (r as f64 + 2.0) * x.abs() + 1e-300)
                    .collect::<Vec<f64>>()
            };
            (e(&table.z0), e(&table.a))
        }
        TableMode::Mc { .. } => {
            let bump = |xs: &[f64], errs: &[f64]| {
                xs.iter()
                    .zip(errs)
                    .enumerate()
                    .map(|(r, (&x, &e))| e + 1e-15 * (r as f64 + 2.0) * x.abs() + 1e-300)
                    .collect::<Vec<f64>>()
            };
            (
                bump(&table.z0, &table.z0_stderr),
                bump(&table.a, &table.a_stderr),
            )
        }
    }
}

/// First-renewal inversion of a block table. Negative entries within ten
/// times the propagated noise floor are clamped to zero and reported;
/// anything more negative fails loudly.
pub fn deconvolve_blocks(table: &BlockTable) -> Result<Deconvolution> {
    let r_max = table.r_max;
    let (z_err_in, a_err_in) = input_errors(table);
    let mut zbar = vec![0.0; r_max + 1];
    let mut nbar = vec![0.0; r_max + 1];
    let mut zbar_err = vec![0.0; r_max + 1];
    let mut nbar_err = vec![0.0; r_max + 1];
    let mut clamped = Vec::new();
    for r in 1..=r_max {
        let mut acc = CompensatedSum::new();
        let mut acc_n = CompensatedSum::new();
        let mut err = z_err_in[r];
        let mut err_n = a_err_in[r];
        acc.add(table.z0[r]);
        acc_n.add(table.a[r]);
        for s in 1..r {
            acc.add(-zbar[s] * table.z0[r - s]);
            acc_n.add(-nbar[s] * table.z0[r - s]);
            acc_n.add(-zbar[s] * table.a[r - s]);
            err += zbar_err[s] * table.z0[r - s] + zbar[s].abs() * z_err_in[r - s];
            err_n += nbar_err[s] * table.z0[r - s]
                + nbar[s].abs() * z_err_in[r - s]
                + zbar_err[s] * table.a[r - s]
                + zbar[s].abs() * a_err_in[r - s];
        }
        let mut zb = acc.value();
        let mut nb = acc_n.value();
        if zb < 0.0 {
            if zb >= -10.0 * err {
                clamped.push(ClampEvent {
                    kind: ClampKind::Zbar,
                    r,
                    raw: zb,
                    floor: err,
                });
                zb = 0.0;
            } else {
                return Err(Error::DeconvolutionNegative {
                    r,
                    value: zb,
                    floor: err,
                });
            }
        }
        if nb < 0.0 {
            if nb >= -10.0 * err_n {
                clamped.push(ClampEvent {
                    kind: ClampKind::Nbar,
                    r,
                    raw: nb,
                    floor: err_n,
                });
                nb = 0.0;
            } else {
                return Err(Error::DeconvolutionNegative {
                    r,
                    value: nb,
                    floor: err_n,
                });
            }
        }
        zbar[r] = zb;
        nbar[r] = nb;
        zbar_err[r] = err;
        nbar_err[r] = err_n;
    }
    Ok(Deconvolution {
        r_max,
        zbar,
        nbar,
        zbar_err,
        nbar_err,
        clamped,
    })
}

/// Rebuilds `(z0, a)` from block weights; the algebraic inverse of
/// [`deconvolve_blocks`], used for round-trip verification.
pub fn convolve_blocks(dec: &Deconvolution) -> (Vec<f64>, Vec<f64>) {
    let r_max = dec.r_max;
    let mut z0 = vec![0.0; r_max + 1];
    let mut a = vec![0.0; r_max + 1];
    z0[0] = 1.0;
    for r in 1..=r_max {
        let mut acc = CompensatedSum::new();
        let mut acc_n = CompensatedSum::new();
        for s in 1..=r {
            acc.add(dec.zbar[s] * z0[r - s]);
            acc_n.add(dec.nbar[s] * z0[r - s]);
            acc_n.add(dec.zbar[s] * a[r - s]);
        }
        z0[r] = acc.value();
        a[r] = acc_n.value();
    }
    (z0, a)
}

/// Truncated kernel mass at inverse temperature `beta`:
/// `F(beta) = sum_{r<=r_cut} e^{beta r} zbar(r)`. Strictly increasing in
/// `beta` whenever some `zbar(r) > 0`.
pub fn kernel_mass(zbar: &[f64], r_cut: usize, beta: f64) -> f64 {
    let mut acc = CompensatedSum::new();
    for (r, &zb) in zbar.iter().enumerate().take(r_cut + 1).skip(1) {
        if zb > 0.0 {
            acc.add((beta * r as f64).exp() * zb);
        }
    }
    acc.value()
}

/// Mass not captured below `r_cut` when the kernel is normalized with `beta`.
pub fn mass_defect_at(dec: &Deconvolution, beta: f64, r_cut: usize) -> f64 {
    1.0 - kernel_mass(&dec.zbar, r_cut.min(dec.r_max), beta)
}

#[derive(Clone, Copy, Debug)]
pub struct BetaSolve {
    pub beta: f64,
    /// `|F(beta) - 1|` at the returned root.
    pub residual: f64,
    pub f_at_zero: f64,
    /// Estimated shift of the root from the truncated tail, when a tail rate
    /// could be fitted.
    pub truncation_bias: Option<f64>,
}

const BETA_MAX: f64 = 64.0;

/// Root of `F(beta) = 1` by bracketing and bisection on the strictly
/// increasing truncated mass.
pub fn solve_beta(dec: &Deconvolution) -> Result<BetaSolve> {
    let r_max = dec.r_max;
    if dec.zbar[1] <= 0.0 {
        return Err(Error::EmptyKernelHead);
    }
    let f = |b: f64| kernel_mass(&dec.zbar, r_max, b);
    let f0 = f(0.0);
    if f0 >= 1.0 {
        // only possible through noise: total block mass cannot exceed one
        if f0 - 1.0 <= 1e-9 {
            return Ok(BetaSolve {
                beta: 0.0,
                residual: f0 - 1.0,
                f_at_zero: f0,
                truncation_bias: None,
            });
        }
        return Err(Error::BetaNoRoot { f0 });
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while f(hi) < 1.0 {
        hi *= 2.0;
        if hi > BETA_MAX {
            return Err(Error::BetaBracket {
                f_max: f(BETA_MAX),
                beta_max: BETA_MAX,
            });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if f(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let beta = 0.5 * (lo + hi);
    let residual = (f(beta) - 1.0).abs();
    // tail extrapolation: with q(r) ~ e^{-eps r} beyond the truncation, the
    // missing mass shifts the root by about (missing mass) / F'(beta)
    let truncation_bias = fit_tail(&dec.zbar, beta, r_max).map(|fit| {
        let q_last = (beta * r_max as f64).exp() * dec.zbar[r_max];
        let eps = fit.epsilon_hat;
        let missing = q_last * (-eps).exp() / (1.0 - (-eps).exp()).max(1e-12);
        let f_prime: f64 = (1..=r_max)
            .map(|r| r as f64 * (beta * r as f64).exp() * dec.zbar[r])
            .sum();
        missing / f_prime.max(1e-300)
    });
    Ok(BetaSolve {
        beta,
        residual,
        f_at_zero: f0,
        truncation_bias,
    })
}

/// Least-squares fit of `log q(r)` over the last half of the range.
#[derive(Clone, Copy, Debug)]
pub struct TailFit {
    pub slope: f64,
    pub epsilon_hat: f64,
    pub rms_residual: f64,
    pub n_points: usize,
    pub pass: bool,
}

fn fit_tail(zbar: &[f64], beta: f64, r_max: usize) -> Option<TailFit> {
    let start = r_max / 2;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for r in start.max(1)..=r_max {
        if zbar[r] > 0.0 {
            xs.push(r as f64);
            ys.push(beta * r as f64 + zbar[r].ln());
        }
    }
    if xs.len() < 3 {
        return None;
    }
    let (slope, _, rms) = linear_fit(&xs, &ys);
    Some(TailFit {
        slope,
        epsilon_hat: -slope,
        rms_residual: rms,
        n_points: xs.len(),
        pass: slope < -0.01 && rms < 0.5,
    })
}

/// The normalized renewal kernel with everything derived from it.
#[derive(Clone, Debug)]
pub struct RenewalKernel {
    pub r_max: usize,
    pub beta: f64,
    /// `q[r] = e^{beta r} zbar(r)`; a probability kernel up to truncation.
    pub q: Vec<f64>,
    /// Mean block crossing times `nbar(r) / zbar(r)`, absent where the block
    /// weight vanishes within its propagated noise floor (structurally:
    /// `r = 2`, where the exact weight is an order-epsilon residue).
    pub g: Vec<Option<f64>>,
    /// `1 - sum q(r)`; numerically zero when `beta` was root-found at this
    /// truncation.
    pub mass_defect: f64,
    pub sum_rq: f64,
    pub sum_gq: f64,
    /// Crossing speed `sum r q / sum g q`.
    pub v: Option<f64>,
    /// Extrapolated contribution of block lengths beyond the truncation to
    /// `sum g q`, from the fitted tail rate (with `g` frozen at its last
    /// value, so a lower bound).
    pub gq_tail_estimate: Option<f64>,
    /// False when the speed sums are visibly truncation-dominated: the top
    /// quarter of the range carries over half of `sum g q`, the
    /// extrapolated tail exceeds a quarter of it, or kernel mass is badly
    /// missing.
    pub v_reliable: bool,
    pub tail: Option<TailFit>,
}

pub fn build_kernel(dec: &Deconvolution, beta: f64) -> RenewalKernel {
    let r_max = dec.r_max;
    let mut q = vec![0.0; r_max + 1];
    let mut g = vec![None; r_max + 1];
    for r in 1..=r_max {
        q[r] = if dec.zbar[r] > 0.0 {
            (beta * r as f64).exp() * dec.zbar[r]
        } else {
            0.0
        };
        // a ratio of two numbers inside their noise floors is not a mean
        if dec.zbar[r] > 10.0 * dec.zbar_err[r] {
            g[r] = Some(dec.nbar[r] / dec.zbar[r]);
        }
    }
    let total: f64 = crate::numeric::compensated_total(q.iter().copied());
    let mut sum_rq = CompensatedSum::new();
    let mut sum_gq = CompensatedSum::new();
    let mut top_quarter_gq = CompensatedSum::new();
    for r in 1..=r_max {
        sum_rq.add(r as f64 * q[r]);
        if let Some(gr) = g[r] {
            let term = gr * q[r];
            sum_gq.add(term);
            if 4 * r > 3 * r_max {
                top_quarter_gq.add(term);
            }
        }
    }
    let sum_rq = sum_rq.value();
    let sum_gq = sum_gq.value();
    let mass_defect = 1.0 - total;
    let v = if sum_gq > 0.0 {
        Some(sum_rq / sum_gq)
    } else {
        None
    };
    let tail = fit_tail(&dec.zbar, beta, r_max);
    let gq_tail_estimate = tail.and_then(|t| {
        if t.epsilon_hat <= 0.0 {
            return None;
        }
        let last = (1..=r_max).rev().find(|&r| q[r] > 0.0)?;
        let decay = (-t.epsilon_hat).exp();
        Some(g[last].unwrap_or(last as f64) * q[last] * decay / (1.0 - decay))
    });
    let tail_dominated = sum_gq > 0.0
        && (top_quarter_gq.value() > 0.5 * sum_gq
            || gq_tail_estimate.map(|e| e > 0.25 * sum_gq).unwrap_or(true));
    let v_reliable = v.is_some() && !tail_dominated && mass_defect.abs() < 0.5;
    RenewalKernel {
        r_max,
        beta,
        q,
        g,
        mass_defect,
        sum_rq,
        sum_gq,
        v,
        gq_tail_estimate,
        v_reliable,
        tail,
    }
}

/// Exponential-tail check of the kernel over the last half of its range.
pub fn kernel_tail_check(kernel: &RenewalKernel) -> Result<TailFit> {
    let start = kernel.r_max / 2;
    let positive = (start.max(1)..=kernel.r_max)
        .filter(|&r| kernel.q[r] > 0.0)
        .count();
    if positive < 3 {
        return Err(Error::TailFitUnderdetermined {
            need: 3,
            got: positive,
        });
    }
    // refit from q directly (identical to fit_tail's construction)
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for r in start.max(1)..=kernel.r_max {
        if kernel.q[r] > 0.0 {
            xs.push(r as f64);
            ys.push(kernel.q[r].ln());
        }
    }
    let (slope, _, rms) = linear_fit(&xs, &ys);
    Ok(TailFit {
        slope,
        epsilon_hat: -slope,
        rms_residual: rms,
        n_points: xs.len(),
        pass: slope < -0.01 && rms < 0.5,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annealed::block_table_exact;
    use crate::numeric::constant_potential;
    use crate::potential::PotentialDistribution;

    fn pipeline(d: &PotentialDistribution, r_max: usize) -> (Deconvolution, BetaSolve, RenewalKernel) {
        let table = block_table_exact(d, r_max).unwrap();
        let dec = deconvolve_blocks(&table).unwrap();
        let beta = solve_beta(&dec).unwrap();
        let kernel = build_kernel(&dec, beta.beta);
        (dec, beta, kernel)
    }

    #[test]
    fn zbar_head_equals_table_head() {
        let d = PotentialDistribution::zero_one_half();
        let table = block_table_exact(&d, 6).unwrap();
        let dec = deconvolve_blocks(&table).unwrap();
        assert_eq!(dec.zbar[1], table.z0[1]);
        assert_eq!(dec.nbar[1], table.a[1]);
    }

    #[test]
    fn zbar_two_vanishes_for_product_laws() {
        for d in [
            PotentialDistribution::zero_one_half(),
            PotentialDistribution::constant(0.9),
            PotentialDistribution::new(&[(0.0, 0.3), (0.5, 0.4), (f64::INFINITY, 0.3)], 0.0)
                .unwrap(),
        ] {
            let table = block_table_exact(&d, 5).unwrap();
            let dec = deconvolve_blocks(&table).unwrap();
            assert!(
                dec.zbar[2].abs() <= 1e-12,
                "structural zero violated: {}",
                dec.zbar[2]
            );
            // either exactly zero or clamped from a tiny negative
            assert!(dec.zbar[2] == 0.0 || dec.zbar[2] < 1e-12);
        }
    }

    #[test]
    fn roundtrip_reconstructs_table() {
        let d = PotentialDistribution::new(&[(0.0, 0.5), (1.0, 0.5)], 0.0).unwrap();
        let table = block_table_exact(&d, 14).unwrap();
        let dec = deconvolve_blocks(&table).unwrap();
        let (z0, a) = convolve_blocks(&dec);
        for r in 0..=14 {
            assert!((z0[r] - table.z0[r]).abs() <= 1e-12, "z0 at {r}");
            assert!((a[r] - table.a[r]).abs() <= 1e-12, "a at {r}");
        }
    }

    #[test]
    fn kernel_mass_strictly_increasing_in_beta() {
        let d = PotentialDistribution::zero_one_half();
        let table = block_table_exact(&d, 10).unwrap();
        let dec = deconvolve_blocks(&table).unwrap();
        let mut prev = kernel_mass(&dec.zbar, 10, 0.0);
        for i in 1..=20 {
            let b = i as f64 * 0.1;
            let cur = kernel_mass(&dec.zbar, 10, b);
            assert!(cur > prev, "not increasing at beta = {b}");
            prev = cur;
        }
    }

    #[test]
    fn beta_root_normalizes_kernel_to_machine_precision() {
        let (_, beta, kernel) = pipeline(&PotentialDistribution::zero_one_half(), 14);
        assert!(beta.residual < 1e-12);
        let total: f64 = kernel.q.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(kernel.mass_defect.abs() < 1e-12);
    }

    #[test]
    fn constant_potential_beta_matches_arccosh() {
        for lambda in [0.25, 0.5, 1.0] {
            let d = PotentialDistribution::constant(lambda);
            let (_, beta, _) = pipeline(&d, 40);
            let expect = constant_potential::beta(lambda);
            assert!(
                (beta.beta - expect).abs() < 1e-9,
                "lambda {lambda}: {} vs {expect}",
                beta.beta
            );
        }
    }

    #[test]
    fn srw_kernel_is_heavy_tailed_and_speed_decays() {
        // V == 0 violates the positivity assumption; beta(R) -> 0 from above
        // and the partial speed decreases toward zero
        let d = PotentialDistribution::constant(0.0);
        let mut prev_beta = f64::INFINITY;
        let mut prev_v = f64::INFINITY;
        for r_max in [8usize, 11, 14] {
            let (_, beta, kernel) = pipeline(&d, r_max);
            assert!(beta.beta > 0.0 && beta.beta < prev_beta);
            let v = kernel.v.unwrap();
            assert!(v < prev_v, "partial speed should decrease");
            prev_beta = beta.beta;
            prev_v = v;
        }
        let (_, _, kernel) = pipeline(&d, 14);
        let tail = kernel_tail_check(&kernel).unwrap();
        assert!(!tail.pass || tail.slope > -0.2, "SRW tail is not exponential");
    }

    #[test]
    fn mass_defect_shrinks_with_truncation_at_fixed_beta() {
        let d = PotentialDistribution::zero_one_half();
        let table = block_table_exact(&d, 14).unwrap();
        let dec = deconvolve_blocks(&table).unwrap();
        let beta = solve_beta(&dec).unwrap().beta;
        let mut prev = f64::INFINITY;
        for cut in [8usize, 10, 12, 14] {
            let md = mass_defect_at(&dec, beta, cut);
            assert!(md < prev, "defect should shrink as the cut grows");
            prev = md;
        }
        assert!(prev.abs() < 1e-12);
    }

    #[test]
    fn kernel_positive_beyond_two_and_g_dominates_r() {
        let (_, beta, kernel) = pipeline(&PotentialDistribution::zero_one_half(), 14);
        assert!(beta.beta > 0.0);
        assert!(kernel.q[2].abs() <= 1e-12, "structural zero, q(2) = {}", kernel.q[2]);
        for r in 3..=14 {
            assert!(kernel.q[r] > 0.0, "q({r}) should be positive");
        }
        assert!((kernel.g[1].unwrap() - 1.0).abs() < 1e-12);
        for r in (1..=14).filter(|&r| r != 2) {
            assert!(
                kernel.g[r].unwrap() >= r as f64 - 1e-10,
                "crossing needs at least r steps"
            );
        }
    }

    #[test]
    fn g_growth_exponent_is_at_most_cubic() {
        let (_, _, kernel) = pipeline(&PotentialDistribution::zero_one_half(), 14);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for r in 4..=14 {
            if let Some(g) = kernel.g[r] {
                xs.push((r as f64).ln());
                ys.push(g.ln());
            }
        }
        let (slope, _, _) = linear_fit(&xs, &ys);
        assert!(slope <= 3.0, "log g / log r exponent {slope} > 3");
    }

    #[test]
    fn mild_disorder_tail_is_fast_and_v_reliable() {
        let d = PotentialDistribution::new(&[(0.7, 0.5), (1.3, 0.5)], 0.0).unwrap();
        let (_, _, kernel) = pipeline(&d, 16);
        let tail = kernel_tail_check(&kernel).unwrap();
        assert!(tail.pass && tail.slope < -0.2, "slope {}", tail.slope);
        assert!(kernel.v_reliable);
        let v = kernel.v.unwrap();
        assert!(v > 0.0 && v < 1.0);
    }

    #[test]
    fn deconvolution_fails_loudly_beyond_noise() {
        // a table violating the convolution structure by far more than its
        // noise floor must not be silently clamped
        let table = crate::annealed::BlockTable {
            r_max: 2,
            z0: vec![1.0, 0.4, 0.01], // z0[2] << z0[1]^2
            a: vec![0.0, 0.4, 0.05],
            z0_stderr: vec![0.0; 3],
            a_stderr: vec![0.0; 3],
            mode: crate::annealed::TableMode::Exact,
        };
        assert!(matches!(
            deconvolve_blocks(&table),
            Err(Error::DeconvolutionNegative { r: 2, .. })
        ));
    }

    #[test]
    fn empty_head_is_an_error() {
        let dec = Deconvolution {
            r_max: 3,
            zbar: vec![0.0, 0.0, 0.0, 0.1],
            nbar: vec![0.0; 4],
            zbar_err: vec![0.0; 4],
            nbar_err: vec![0.0; 4],
            clamped: vec![],
        };
        assert!(matches!(solve_beta(&dec), Err(Error::EmptyKernelHead)));
    }
}
