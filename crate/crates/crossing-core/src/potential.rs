//! The i.i.d. potential law and realized environments.
//!
//! Laws are atomic: a finite list of `(value, prob)` with values in
//! `[0, +inf]`. `+inf` is an ordinary atom; a walk stepping on such a site is
//! absorbed with probability one (`exp(-inf) == 0` exactly). A nonnegative
//! `lambda` shift adds `lambda` to every finite value (`inf + lambda = inf`).

use crate::rng;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atom {
    pub value: f64,
    pub prob: f64,
}

/// An atomic law for the one-site potential, with validation flags.
#[derive(Clone, Debug)]
pub struct PotentialDistribution {
    atoms: Vec<Atom>,
    cumulative: Vec<f64>,
    lambda_shift: f64,
    /// P(V = 0) < 1 and P(V = inf) < 1.
    pub satisfies_v: bool,
    /// P(V in (0, inf)) > 0.
    pub satisfies_d1: bool,
    /// Informational only: the unshifted law has essential infimum 0.
    pub essinf_zero: bool,
}

impl PotentialDistribution {
    /// Builds a normalized law from raw `(value, prob)` pairs plus a shift.
    /// Duplicate values are merged; probabilities are normalized to sum to 1.
    pub fn new(atoms: &[(f64, f64)], lambda_shift: f64) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyAtoms);
        }
        if !(lambda_shift >= 0.0 && lambda_shift.is_finite()) {
            return Err(Error::BadLambda(lambda_shift));
        }
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        let mut total = 0.0;
        for &(value, prob) in atoms {
            if !(prob >= 0.0) || !prob.is_finite() {
                return Err(Error::BadProb(prob));
            }
            if value.is_nan() || value < 0.0 {
                return Err(Error::BadValue(value));
            }
            total += prob;
            if prob == 0.0 {
                continue;
            }
            match merged.iter_mut().find(|a| a.value == value) {
                Some(a) => a.prob += prob,
                None => merged.push(Atom { value, prob }),
            }
        }
        if total <= 0.0 || merged.is_empty() {
            return Err(Error::ZeroMass);
        }
        for a in &mut merged {
            a.prob /= total;
        }
        merged.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap());
        let essinf_zero = merged[0].value == 0.0;
        for a in &mut merged {
            if a.value.is_finite() {
                a.value += lambda_shift;
            }
        }
        let mut cumulative = Vec::with_capacity(merged.len());
        let mut acc = 0.0;
        for a in &merged {
            acc += a.prob;
            cumulative.push(acc);
        }
        *cumulative.last_mut().unwrap() = 1.0;
        let p_zero: f64 = merged.iter().filter(|a| a.value == 0.0).map(|a| a.prob).sum();
        let p_inf: f64 = merged
            .iter()
            .filter(|a| a.value.is_infinite())
            .map(|a| a.prob)
            .sum();
        let p_mid: f64 = merged
            .iter()
            .filter(|a| a.value > 0.0 && a.value.is_finite())
            .map(|a| a.prob)
            .sum();
        Ok(PotentialDistribution {
            satisfies_v: p_zero < 1.0 && p_inf < 1.0,
            satisfies_d1: p_mid > 0.0,
            essinf_zero,
            atoms: merged,
            cumulative,
            lambda_shift,
        })
    }

    /// Point mass at `value`.
    pub fn constant(value: f64) -> Self {
        Self::new(&[(value, 1.0)], 0.0).expect("constant law is valid")
    }

    /// The canonical two-atom law `{0 w.p. 1/2, 1 w.p. 1/2}`.
    pub fn zero_one_half() -> Self {
        Self::new(&[(0.0, 0.5), (1.0, 0.5)], 0.0).expect("valid")
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn lambda_shift(&self) -> f64 {
        self.lambda_shift
    }

    pub fn p_inf(&self) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.value.is_infinite())
            .map(|a| a.prob)
            .sum()
    }

    /// Smallest strictly positive finite atom value, if any ("kappa").
    pub fn kappa(&self) -> Option<f64> {
        self.atoms
            .iter()
            .filter(|a| a.value > 0.0 && a.value.is_finite())
            .map(|a| a.value)
            .next()
    }

    /// Largest finite atom value, if any ("K").
    pub fn k_max(&self) -> Option<f64> {
        self.atoms
            .iter()
            .rev()
            .find(|a| a.value.is_finite())
            .map(|a| a.value)
    }

    /// Largest atom value overall (may be +inf); used for environment events.
    pub fn max_value(&self) -> f64 {
        self.atoms.last().map(|a| a.value).unwrap()
    }

    /// Probability of drawing exactly `value`.
    pub fn prob_of(&self, value: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.value == value)
            .map(|a| a.prob)
            .sum()
    }

    /// One-site annealed log moment generating function
    /// `Lambda(t) = -log E exp(-t V)`, for `t >= 0`. Atoms at +inf carry zero
    /// weight for `t > 0`, so `Lambda` jumps from 0 at `t = 0` when
    /// `P(V = inf) > 0` and saturates at `-log P(V = 0)` as `t -> inf`.
    pub fn log_mgf(&self, t: f64) -> f64 {
        assert!(t >= 0.0, "log_mgf needs t >= 0, got {t}");
        if t == 0.0 {
            return 0.0;
        }
        let mut m = 0.0;
        for a in &self.atoms {
            if a.value.is_finite() {
                m += a.prob * (-t * a.value).exp();
            }
        }
        if m <= 0.0 {
            f64::INFINITY
        } else {
            -m.ln()
        }
    }

    /// `E exp(-V) = exp(-Lambda(1))`, the mean one-visit survival weight.
    pub fn mean_survival(&self) -> f64 {
        (-self.log_mgf(1.0)).exp()
    }

    /// Same atoms with every finite value raised by `extra`. Used for
    /// common-random-number sweeps in `lambda`.
    pub fn shifted(&self, extra: f64) -> Result<Self> {
        let raw: Vec<(f64, f64)> = self
            .atoms
            .iter()
            .map(|a| {
                let base = if a.value.is_finite() {
                    a.value - self.lambda_shift
                } else {
                    a.value
                };
                (base, a.prob)
            })
            .collect();
        Self::new(&raw, self.lambda_shift + extra)
    }

    /// The law conditioned on `{V < inf}`.
    pub fn conditional_finite(&self) -> Result<Self> {
        let raw: Vec<(f64, f64)> = self
            .atoms
            .iter()
            .filter(|a| a.value.is_finite())
            .map(|a| (a.value, a.prob))
            .collect();
        if raw.is_empty() {
            return Err(Error::NoFiniteMass);
        }
        // values are already shifted; rebuild with zero extra shift
        Self::new(&raw, 0.0)
    }

    /// Inverse-CDF draw from 64 random bits. The same bits map to the same
    /// atom index across laws with identical probability vectors, which keeps
    /// lambda-shifted copies perfectly coupled.
    #[inline]
    pub fn draw(&self, bits: u64) -> f64 {
        let u = rng::unit_f64(bits);
        for (i, &c) in self.cumulative.iter().enumerate() {
            if u < c {
                return self.atoms[i].value;
            }
        }
        self.atoms.last().unwrap().value
    }
}

/// A realized potential on the contiguous site range `lo..=hi`.
#[derive(Clone, Debug)]
pub struct Environment {
    lo: i64,
    values: Vec<f64>,
    pub seed_id: u64,
}

impl Environment {
    pub fn from_values(lo: i64, values: Vec<f64>, seed_id: u64) -> Self {
        Environment { lo, values, seed_id }
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.values.len() as i64 - 1
    }

    #[inline]
    pub fn value(&self, site: i64) -> f64 {
        self.values[(site - self.lo) as usize]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn covers(&self, lo: i64, hi: i64) -> bool {
        self.lo <= lo && self.hi() >= hi
    }

    pub fn require_cover(&self, lo: i64, hi: i64) -> Result<()> {
        if self.covers(lo, hi) {
            Ok(())
        } else {
            Err(Error::EnvCoverage {
                have_lo: self.lo,
                have_hi: self.hi(),
                need_lo: lo,
                need_hi: hi,
            })
        }
    }

    /// Every finite value raised by `extra` (the deterministic lambda shift
    /// of a frozen environment).
    pub fn shifted(&self, extra: f64) -> Self {
        Environment {
            lo: self.lo,
            values: self
                .values
                .iter()
                .map(|&v| if v.is_finite() { v + extra } else { v })
                .collect(),
            seed_id: self.seed_id,
        }
    }

    pub fn max_finite_value(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(0.0, f64::max)
    }
}

/// Draws the environment with index `env_index` on `lo..=hi`. Pure function
/// of its arguments; widening the range later reproduces the same values on
/// the overlap.
pub fn sample_environment(
    dist: &PotentialDistribution,
    lo: i64,
    hi: i64,
    master_seed: u64,
    env_index: u64,
) -> Environment {
    assert!(lo <= hi, "empty site range {lo}..={hi}");
    let values = (lo..=hi)
        .map(|site| dist.draw(rng::site_bits(master_seed, env_index, &[site])))
        .collect();
    Environment {
        lo,
        values,
        seed_id: rng::keyed(master_seed, env_index, 0),
    }
}

/// Like [`sample_environment`], but sites inside `finite_lo..=finite_hi` are
/// drawn from the law conditioned on `{V < inf}`. Because crossing weights
/// vanish unless every site in `0..target` is finite, ratio estimators over
/// this conditional ensemble are unchanged while every sample contributes.
pub fn sample_environment_conditioned(
    dist: &PotentialDistribution,
    cond: &PotentialDistribution,
    lo: i64,
    hi: i64,
    finite_lo: i64,
    finite_hi: i64,
    master_seed: u64,
    env_index: u64,
) -> Environment {
    assert!(lo <= hi, "empty site range {lo}..={hi}");
    let values = (lo..=hi)
        .map(|site| {
            let bits = rng::site_bits(master_seed, env_index, &[site]);
            if site >= finite_lo && site <= finite_hi {
                cond.draw(bits)
            } else {
                dist.draw(bits)
            }
        })
        .collect();
    Environment {
        lo,
        values,
        seed_id: rng::keyed(master_seed, env_index, 0),
    }
}
