//! Numerical laboratory for a nearest-neighbor random walk killed by an
//! i.i.d. nonnegative random potential on the integer lattice.
//!
//! The walk at site `z` survives a step with probability `exp(-V(z))` and
//! otherwise is absorbed; conditioning on reaching a remote target `y`
//! defines quenched (fixed environment) and annealed (environment-averaged)
//! path measures. This crate computes, at desk scale:
//!
//! * exact per-environment crossing weights and conditioned crossing times
//!   in d = 1 (tridiagonal solves) and on truncated boxes in d = 2, 3;
//! * annealed block tables by exact enumeration over atomic potential laws
//!   or by Monte Carlo over environments;
//! * the renewal decomposition of the crossing problem: constrained block
//!   weights, the normalizing exponent `beta`, the renewal kernel `q(r)`,
//!   mean block crossing times `g(r)`, and the speed `v`;
//! * Lyapunov exponents (annealed and quenched) by log-slope estimation,
//!   the `beta(lambda)` curve, and its one-sided derivative at zero;
//! * diagnostic checks of several exact inequalities and scaling trends.
//!
//! Everything is deterministic: environments are pure functions of
//! `(master_seed, env_index, site)`, and parallel reductions accumulate in
//! fixed order, so results are bit-for-bit reproducible at a fixed worker
//! count.

pub mod annealed;
pub mod diagnostics;
pub mod lyapunov;
pub mod multid;
pub mod numeric;
pub mod potential;
pub mod quenched;
pub mod renewal;
pub mod rng;

pub use annealed::{BlockTable, CrossingEstimate, McEstimate, TableMode};
pub use potential::{Environment, PotentialDistribution};
pub use quenched::{PathSample, QuenchedSolve, WindowOpts};
pub use renewal::{Deconvolution, RenewalKernel};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("distribution has no atoms")]
    EmptyAtoms,
    #[error("atom probability must be finite and nonnegative, got {0}")]
    BadProb(f64),
    #[error("atom value must be nonnegative (or +inf), got {0}")]
    BadValue(f64),
    #[error("atom probabilities sum to zero")]
    ZeroMass,
    #[error("lambda shift must be finite and nonnegative, got {0}")]
    BadLambda(f64),
    #[error("law has no finite atoms to condition on")]
    NoFiniteMass,
    #[error("environment covers {have_lo}..={have_hi}, need {need_lo}..={need_hi}")]
    EnvCoverage {
        have_lo: i64,
        have_hi: i64,
        need_lo: i64,
        need_hi: i64,
    },
    #[error("invalid geometry: {0}")]
    BadGeometry(String),
    #[error("conditioned path law undefined: crossing weight vanishes at the start site")]
    ZeroWeightStart,
    #[error("path sampler exceeded {0} steps")]
    PathTooLong(u64),
    #[error("enumeration budget exceeded: {need:.3e} environments > {cap:.3e}")]
    EnumerationBudget { need: f64, cap: f64 },
    #[error("need at least {need} environments, got {got}")]
    TooFewEnvironments { need: u64, got: u64 },
    #[error("all sampled environments have zero crossing weight")]
    AllWeightsZero,
    #[error("deconvolution yields {value:.3e} at r = {r}, below -10x the noise floor {floor:.3e}")]
    DeconvolutionNegative { r: usize, value: f64, floor: f64 },
    #[error("renewal head vanishes: zbar(1) = 0")]
    EmptyKernelHead,
    #[error("kernel mass stays at {f_max:.6} < 1 up to beta = {beta_max}; truncation too short")]
    BetaBracket { f_max: f64, beta_max: f64 },
    #[error("kernel mass already exceeds 1 at beta = 0 (F(0) = {f0:.6}); table inconsistent")]
    BetaNoRoot { f0: f64 },
    #[error("tail fit needs at least {need} positive kernel entries, found {got}")]
    TailFitUnderdetermined { need: usize, got: usize },
    #[error("iterative solver stalled: relative residual {residual:.3e} after {iters} iterations")]
    SolverStalled { residual: f64, iters: u64 },
    #[error("cube side {l} must be even and positive")]
    BadCubeSide { l: i64 },
    #[error("environment box {0} is not an integer multiple of cubes")]
    CubeAlignment(String),
    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Splits `0..n` into `workers` contiguous chunks, maps each chunk on its own
/// thread, and returns the per-chunk results in chunk order. Reducing those
/// results sequentially gives bitwise-reproducible sums at a fixed worker
/// count.
pub fn map_chunked<T, F>(n: u64, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(std::ops::Range<u64>) -> T + Sync,
{
    let workers = workers.max(1).min(n.max(1) as usize);
    if workers == 1 {
        return vec![f(0..n)];
    }
    let chunk = n.div_ceil(workers as u64);
    let ranges: Vec<_> = (0..workers as u64)
        .map(|w| (w * chunk)..((w + 1) * chunk).min(n))
        .filter(|r| r.start < r.end)
        .collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = ranges
            .iter()
            .map(|r| {
                let r = r.clone();
                let f = &f;
                scope.spawn(move || f(r))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    })
}
