//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! with the measured quantities before asserting the stated tolerance.
//!
//! Several criteria pin the two-atom {0 w.p. 1/2, 1 w.p. 1/2} fixture at
//! sizes where its annealed observables are provably outside Monte Carlo
//! reach (the quenched/annealed exponent gap is ~0.35 nats per site, so
//! averaged crossing weights at y = 200 are carried by environments of
//! probability far below 1/n for any desk-scale n), and where the exact
//! truncation R = 14 misses a large part of the slowly decaying kernel
//! tail. Those checks are implemented exactly as stated and are expected to
//! fail; the printed numbers document by how much. Independent oracles for
//! the same quantities live in `oracle_agreement.rs`, and the same
//! identities verified on a fast-tail fixture live in
//! `renewal_identities.rs`.

mod common;

use crossing_core::annealed::{block_table_exact, crossing_time_block_mc};
use crossing_core::diagnostics::{
    check_bias_domination, check_localtime_geometric, check_prefactor_bound, check_xy_tail,
    counterexample_scaling,
};
use crossing_core::lyapunov::{alpha_quenched, beta_slope, derivative_at_zero};
use crossing_core::multid::{ballisticity_scan, cube_histogram_mc, SolveOpts};
use crossing_core::numeric::constant_potential;
use crossing_core::quenched::WindowOpts;
use crossing_core::renewal::{
    build_kernel, convolve_blocks, deconvolve_blocks, kernel_tail_check, mass_defect_at,
    solve_beta, Deconvolution, RenewalKernel,
};
use crossing_core::PotentialDistribution;

const WORKERS: usize = 2;

fn verdict(id: &str, pass: bool, detail: &str) -> bool {
    println!(
        "criterion {id}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}

fn zero_one() -> PotentialDistribution {
    PotentialDistribution::zero_one_half()
}

fn zero_one_pipeline(r_max: usize) -> (Deconvolution, f64, RenewalKernel) {
    let table = block_table_exact(&zero_one(), r_max).unwrap();
    let dec = deconvolve_blocks(&table).unwrap();
    let beta = solve_beta(&dec).unwrap().beta;
    let kernel = build_kernel(&dec, beta);
    (dec, beta, kernel)
}

#[test]
fn criterion_01_srw_baseline() {
    let table = block_table_exact(&PotentialDistribution::constant(0.0), 14).unwrap();
    let worst = (1..=14)
        .map(|r| (table.z0[r] - 1.0 / (2.0 * r as f64)).abs())
        .fold(0.0, f64::max);
    let pass = verdict(
        "01 srw-baseline",
        worst <= 1e-12,
        &format!("max |Z_0r - 1/(2r)| = {worst:.2e} over r <= 14 (tol 1e-12)"),
    );
    assert!(pass);
}

#[test]
fn criterion_02_structural_zero() {
    let fixtures: Vec<(&str, PotentialDistribution)> = vec![
        ("srw", PotentialDistribution::constant(0.0)),
        ("const-0.5", PotentialDistribution::constant(0.5)),
        ("zero-one", zero_one()),
        (
            "mild",
            PotentialDistribution::new(&[(0.7, 0.5), (1.3, 0.5)], 0.0).unwrap(),
        ),
        (
            "zero-inf",
            PotentialDistribution::new(&[(0.0, 0.5), (f64::INFINITY, 0.5)], 0.0).unwrap(),
        ),
        (
            "three-atom",
            PotentialDistribution::new(&[(0.0, 0.45), (1.0, 0.45), (f64::INFINITY, 0.1)], 0.0)
                .unwrap(),
        ),
    ];
    let mut worst: f64 = 0.0;
    for (_, dist) in &fixtures {
        let table = block_table_exact(dist, 8).unwrap();
        let dec = deconvolve_blocks(&table).unwrap();
        // clamped entries still count with their raw magnitude
        let raw = dec
            .clamped
            .iter()
            .find(|c| c.r == 2)
            .map(|c| c.raw.abs())
            .unwrap_or(dec.zbar[2].abs());
        worst = worst.max(raw);
    }
    let (_, _, kernel) = zero_one_pipeline(14);
    let all_positive = (3..=14).all(|r| kernel.q[r] > 0.0);
    let pass = verdict(
        "02 structural-zero",
        worst <= 1e-12 && all_positive,
        &format!(
            "max |zbar(2)| = {worst:.2e} over {} fixtures (tol 1e-12); q(r) > 0 for 2 < r <= 14: {all_positive}",
            fixtures.len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_03_kernel_normalization() {
    let (dec, beta, kernel) = zero_one_pipeline(14);
    let norm_ok = kernel.mass_defect.abs() <= 1e-12;
    let defect_12 = mass_defect_at(&dec, beta, 12);
    let tail = kernel_tail_check(&kernel).unwrap();
    println!(
        "criterion 03 detail: beta(R=14) = {beta:.6}, sum q - 1 = {:.2e}, mass_defect(R=12) = {:.4}, tail slope = {:.4}",
        -kernel.mass_defect, defect_12, tail.slope
    );
    let pass = verdict(
        "03 kernel-normalization",
        norm_ok && defect_12 < 0.02 && tail.slope < -0.2,
        &format!(
            "sum q = 1 to 1e-12: {norm_ok}; mass_defect at R=12 with beta(14) = {defect_12:.4} (< 0.02 required); fitted tail slope = {:.4} (< -0.2 required)",
            tail.slope
        ),
    );
    assert!(pass, "kernel tail of the zero-one fixture decays too slowly for the pinned thresholds");
}

#[test]
fn criterion_04_two_estimator_beta() {
    let (_, beta_root, _) = zero_one_pipeline(14);
    let slope = beta_slope(&zero_one(), 200, 10_000, 4001, &WindowOpts::default(), WORKERS)
        .unwrap();
    let rel = (beta_root - slope.est.mean).abs() / slope.est.mean.abs();
    let pass = verdict(
        "04 two-estimator-beta",
        rel < 0.02,
        &format!(
            "beta(root, R=14) = {beta_root:.5}, beta(slope, y=200, n=1e4) = {:.5} +- {:.5}, relative difference = {:.1}% (< 2% required)",
            slope.est.mean,
            slope.est.stderr,
            100.0 * rel
        ),
    );
    assert!(
        pass,
        "the averaged crossing weight at y = 200 is dominated by environments no 1e4-sample contains"
    );
}

#[test]
fn criterion_05_speed_formula() {
    let (_, _, kernel) = zero_one_pipeline(14);
    let inv_v = 1.0 / kernel.v.unwrap();
    let mc = crossing_time_block_mc(&zero_one(), 200, 10_000, 4002, WORKERS).unwrap();
    let direct = mc.mean_time.mean / 200.0;
    let rel = (inv_v - direct).abs() / direct;
    println!(
        "criterion 05 detail: kernel v_reliable = {}, sum g q = {:.3} with extrapolated tail {:.3}",
        kernel.v_reliable,
        kernel.sum_gq,
        kernel.gq_tail_estimate.unwrap_or(f64::NAN),
    );
    let pass = verdict(
        "05 speed-formula",
        rel < 0.03,
        &format!(
            "1/v(kernel, R=14) = {inv_v:.4}, E tau / y (block MC, y=200, n=1e4) = {direct:.4} +- {:.4}, relative difference = {:.0}% (< 3% required)",
            mc.mean_time.stderr / 200.0,
            100.0 * rel
        ),
    );
    assert!(
        pass,
        "speed sums at R = 14 miss most of the slowly decaying g(r) q(r) tail, and the direct MC ratio is weight-degenerate at y = 200"
    );
}

#[test]
fn criterion_06_derivative_identity() {
    let (_, _, kernel) = zero_one_pipeline(14);
    let inv_v = 1.0 / kernel.v.unwrap();
    let curve = derivative_at_zero(
        &zero_one(),
        &[0.0, 0.005, 0.01, 0.02],
        200,
        10_000,
        4003,
        &WindowOpts::default(),
        WORKERS,
    )
    .unwrap();
    let d = curve.right_derivative.mean;
    let rel = (d - inv_v).abs() / inv_v;
    let pass = verdict(
        "06 derivative-identity",
        rel < 0.05,
        &format!(
            "d beta / d lambda at 0+ (CRN, h0 = 0.005, y=200) = {d:.4} +- {:.4}, 1/v(kernel, R=14) = {inv_v:.4}, relative difference = {:.0}% (< 5% required)",
            curve.right_derivative.stderr,
            100.0 * rel
        ),
    );
    assert!(pass, "both sides are biased at the pinned sizes; see the identity on the fast-tail fixture in renewal_identities.rs");
}

#[test]
fn criterion_07_constant_potential_closed_form() {
    let mut worst: f64 = 0.0;
    let mut lines = Vec::new();
    for lambda in [0.25, 0.5, 1.0] {
        let truth = constant_potential::beta(lambda);
        let dist = PotentialDistribution::constant(lambda);
        let table = block_table_exact(&dist, 40).unwrap();
        let dec = deconvolve_blocks(&table).unwrap();
        let root = solve_beta(&dec).unwrap().beta;
        let slope = beta_slope(&dist, 512, 2, 1, &WindowOpts::default(), 1)
            .unwrap()
            .est
            .mean;
        worst = worst.max((root - truth).abs()).max((slope - truth).abs());
        lines.push(format!(
            "lambda={lambda}: arccosh(e^l)={truth:.6}, root={root:.6}, slope={slope:.6}"
        ));
    }
    let pass = verdict(
        "07 constant-closed-form",
        worst <= 1e-3,
        &format!("max |beta - arccosh(e^lambda)| = {worst:.2e} (tol 1e-3); {}", lines.join("; ")),
    );
    assert!(pass);
}

#[test]
fn criterion_08_counterexample_scaling() {
    let p0 = 0.9;
    let ys = [8i64, 16, 32, 64, 128];
    let zero_inf =
        PotentialDistribution::new(&[(0.0, p0), (f64::INFINITY, 1.0 - p0)], 0.0).unwrap();
    let diffusive = counterexample_scaling(
        &zero_inf,
        &ys,
        10_000,
        4008,
        &WindowOpts::default(),
        (1.8, 2.2),
        WORKERS,
    )
    .unwrap();
    let ballistic = counterexample_scaling(
        &zero_one(),
        &ys,
        10_000,
        4009,
        &WindowOpts::default(),
        (0.9, 1.1),
        WORKERS,
    )
    .unwrap();
    println!(
        "criterion 08 detail: {{0,inf}} E tau per y: {:?}",
        diffusive
            .rows
            .iter()
            .map(|r| (r.0, r.1))
            .collect::<Vec<_>>()
    );
    let pass = verdict(
        "08 counterexample-scaling",
        diffusive.report.pass && ballistic.report.pass,
        &format!(
            "{{0,inf}} p0=0.9 slope = {:.3} (required in [1.8, 2.2]); ballistic {{0,1}} slope = {:.3} (required in [0.9, 1.1])",
            diffusive.slope, ballistic.slope
        ),
    );
    assert!(
        pass,
        "at p0 = 0.9 the mean wall distance (10) is comparable to the smaller targets, putting the pinned range mid-crossover; the exact ruin mixture gives slope 1.55 over these ys"
    );
}

#[test]
fn criterion_09_inequality_suite() {
    let opts = WindowOpts::default();
    let mut all = true;
    let mut notes = Vec::new();

    // local-time domination: free potential (equality case) and two-atom
    let free = check_bias_domination(
        &PotentialDistribution::constant(0.0),
        12,
        -2,
        6,
        6,
        4000,
        901,
        &WindowOpts {
            tol: 1e-10,
            w_init: 64,
            w_cap: 1 << 12,
        },
        WORKERS,
    )
    .unwrap();
    all &= free.pass;
    notes.push(format!("bias-domination free walk stat {:.2}", free.statistic));
    let biased = check_bias_domination(&zero_one(), 20, 5, 10, 8, 4000, 902, &opts, WORKERS)
        .unwrap();
    all &= biased.pass;
    notes.push(format!("bias-domination zero-one stat {:.2}", biased.statistic));

    // prefactor bound
    let pref = check_prefactor_bound(&zero_one(), 10, 4000, 903, &opts, WORKERS).unwrap();
    all &= pref.pass;
    notes.push(format!(
        "prefactor Q_y(B) = {:.4} <= {:.1}",
        pref.statistic, pref.threshold
    ));

    // exact geometric local-time law
    let geo = check_localtime_geometric(7, -3, 12).unwrap();
    all &= geo.pass;
    notes.push(format!("geometric law deviation {:.2e}", geo.statistic));

    // kernel-side inequalities on the exact zero-one table
    let (_, _, kernel) = zero_one_pipeline(14);
    let g_ok = (1..=14)
        .filter(|&r| r != 2)
        .all(|r| kernel.g[r].unwrap() >= r as f64 - 1e-10);
    all &= g_ok;
    notes.push(format!("g(r) >= r: {g_ok}"));
    let table = block_table_exact(&zero_one(), 14).unwrap();
    let a_ok = (1..=14).all(|r| table.a[r] >= r as f64 * table.z0[r] - 1e-14);
    all &= a_ok;
    notes.push(format!("a(r) >= r z0(r): {a_ok}"));

    // Jensen on shared environments
    for (name, d, y) in [
        ("zero-one", zero_one(), 128i64),
        (
            "mild",
            PotentialDistribution::new(&[(0.7, 0.5), (1.3, 0.5)], 0.0).unwrap(),
            96,
        ),
    ] {
        let b = beta_slope(&d, y, 3000, 904, &opts, WORKERS).unwrap();
        let a = alpha_quenched(&d, y, 3000, 904, &opts, WORKERS).unwrap();
        let ok = b.est.mean <= a.est.mean + 3.0 * (b.est.stderr + a.est.stderr);
        all &= ok;
        notes.push(format!(
            "Jensen {name}: beta {:.4} <= alpha {:.4}",
            b.est.mean, a.est.mean
        ));
    }

    let pass = verdict("09 inequality-suite", all, &notes.join("; "));
    assert!(pass);
}

#[test]
fn criterion_10_xy_tail_and_renewal_prefix() {
    let opts = WindowOpts::default();
    let tail = check_xy_tail(&zero_one(), 128, 2000, 2, 1001, &opts, WORKERS).unwrap();
    // common random numbers across the three distances: the same
    // environments (extended strips) and path streams feed each estimate,
    // so the trend is not drowned by weight concentration
    let mut ratios = Vec::new();
    for y in [64i64, 128, 256] {
        let rep = check_xy_tail(&zero_one(), y, 2000, 8, 1002, &opts, WORKERS).unwrap();
        ratios.push(rep.mean_tau_xy_over_y);
    }
    let decreasing = ratios.windows(2).all(|w| w[1] < w[0]);
    let control = PotentialDistribution::new(&[(0.0, 0.9), (f64::INFINITY, 0.1)], 0.0).unwrap();
    let control_rep = check_xy_tail(&control, 128, 800, 2, 1005, &opts, WORKERS).unwrap();
    let pass = verdict(
        "10 xy-tail",
        tail.report.pass && decreasing && !control_rep.report.pass,
        &format!(
            "zero-one y=128: slope = {:.3}, survival at y/2 = {:.2e}; E tau_X / y over y in {{64,128,256}} = {:?} decreasing: {decreasing}; {{0,inf}} control fails: {}",
            tail.slope,
            tail.survival_at_half,
            ratios.iter().map(|r| (r * 1e4).round() / 1e4).collect::<Vec<_>>(),
            !control_rep.report.pass
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_11_deconvolution_roundtrip() {
    let fixtures = [
        PotentialDistribution::constant(0.0),
        PotentialDistribution::constant(0.5),
        zero_one(),
        PotentialDistribution::new(&[(0.7, 0.5), (1.3, 0.5)], 0.0).unwrap(),
        PotentialDistribution::new(&[(0.0, 0.45), (1.0, 0.45), (f64::INFINITY, 0.1)], 0.0)
            .unwrap(),
    ];
    let mut worst: f64 = 0.0;
    for dist in &fixtures {
        let table = block_table_exact(dist, 14).unwrap();
        let dec = deconvolve_blocks(&table).unwrap();
        let (z0, a) = convolve_blocks(&dec);
        for r in 0..=14 {
            worst = worst.max((z0[r] - table.z0[r]).abs());
            worst = worst.max((a[r] - table.a[r]).abs());
        }
    }
    let pass = verdict(
        "11 deconvolution-roundtrip",
        worst <= 1e-12,
        &format!("max reconstruction error = {worst:.2e} over {} fixtures (tol 1e-12)", fixtures.len()),
    );
    assert!(pass);
}

#[test]
fn criterion_12_d2_trend() {
    let scan = ballisticity_scan(
        &zero_one(),
        &[1, 0],
        &[10, 14, 20, 28, 40],
        2.0,
        64,
        1201,
        &SolveOpts::default(),
        WORKERS,
    )
    .unwrap();
    println!(
        "criterion 12 detail: E tau / |y| by y: {:?}",
        scan.rows
            .iter()
            .map(|r| (r.y, (r.time_over_norm * 1e3).round() / 1e3))
            .collect::<Vec<_>>()
    );
    let hist_dist = PotentialDistribution::new(&[(0.0, 0.85), (1.0, 0.15)], 0.0).unwrap();
    let hist = cube_histogram_mc(&hist_dist, 4, 1.0, &[32, 32], 1500, 1202, WORKERS).unwrap();
    let interior: Vec<(usize, u64)> = hist
        .iter()
        .filter(|(_, a, _)| *a > 0)
        .map(|(s, a, _)| (*s, *a))
        .collect();
    let decreasing = interior.windows(2).all(|w| w[1].1 < w[0].1);
    let pass = verdict(
        "12 d2-trend",
        scan.top_octave_increase < 0.15 && decreasing,
        &format!(
            "top-octave increase of E tau / |y| = {:.1}% (< 15% required); empty-component histogram {:?} strictly decreasing: {decreasing}",
            100.0 * scan.top_octave_increase,
            interior
        ),
    );
    assert!(pass);
}
