//! Experiment configuration: a flat TOML file with a versioned schema.
//!
//! ```toml
//! schema = 1
//! kind = "renewal"
//! master_seed = 42
//! atoms = [[0.0, 0.5], [1.0, 0.5]]   # [value, prob]; `inf` for absorbing atoms
//! lambda = 0.0
//! r_max = 14
//! mode = "exact"
//! ```
//!
//! `master_seed` is never defaulted: a config without one is rejected so
//! that every artifact is reproducible by construction.

use anyhow::{bail, Context};
use crossing_core::PotentialDistribution;
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub schema: u32,
    pub kind: String,
    pub master_seed: Option<u64>,
    pub workers: Option<usize>,
    pub atoms: Vec<[f64; 2]>,
    #[serde(default)]
    pub lambda: f64,

    // sizes; which ones apply depends on `kind`
    pub r_max: Option<usize>,
    pub mode: Option<String>,
    pub y: Option<i64>,
    pub n_envs: Option<u64>,
    pub ys: Option<Vec<i64>>,
    pub lambda_grid: Option<Vec<f64>>,
    pub direction: Option<Vec<i64>>,
    pub margin: Option<f64>,
    pub cube_l: Option<i64>,
    pub kappa: Option<f64>,
    pub cubes: Option<Vec<i64>>,
    pub paths_per_env: Option<u64>,
    pub measure: Option<String>,
    pub slope_range: Option<[f64; 2]>,
    pub bias_z: Option<i64>,
    pub bias_x: Option<i64>,
    pub m_max: Option<u64>,

    // tolerance overrides
    pub window_tol: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableModeCfg {
    Exact,
    Mc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeasureCfg {
    /// No-return block measure.
    Block,
    /// Unrestricted measure via adaptive windows.
    Window,
}

#[derive(Debug)]
pub enum Experiment {
    BlockTable {
        r_max: usize,
        mode: TableModeCfg,
        n_envs: u64,
    },
    Renewal {
        r_max: usize,
        mode: TableModeCfg,
        n_envs: u64,
    },
    Speed {
        y: i64,
        n_envs: u64,
        measure: MeasureCfg,
        r_max: usize,
    },
    Lyapunov {
        y: i64,
        n_envs: u64,
    },
    Derivative {
        y: i64,
        n_envs: u64,
        lambda_grid: Vec<f64>,
        r_max: usize,
    },
    Diagnostics {
        y: i64,
        n_envs: u64,
        bias_z: i64,
        bias_x: i64,
        m_max: u64,
        paths_per_env: u64,
    },
    Counterexample {
        ys: Vec<i64>,
        n_envs: u64,
        slope_range: (f64, f64),
    },
    MultidScan {
        ys: Vec<i64>,
        n_envs: u64,
        direction: Vec<i64>,
        margin: f64,
    },
    CubeStats {
        cube_l: i64,
        kappa: f64,
        cubes: Vec<i64>,
        n_envs: u64,
    },
}

#[derive(Debug)]
pub struct Config {
    pub kind: String,
    pub master_seed: u64,
    pub workers: usize,
    pub dist: PotentialDistribution,
    pub atoms_raw: Vec<[f64; 2]>,
    pub lambda: f64,
    pub window_tol: f64,
    pub experiment: Experiment,
}

pub fn parse(text: &str) -> anyhow::Result<Config> {
    let raw: RawConfig = toml::from_str(text).context("invalid config syntax")?;
    if raw.schema != 1 {
        bail!("unsupported schema version {} (this build reads schema = 1)", raw.schema);
    }
    let master_seed = raw
        .master_seed
        .context("master_seed is required; seeds are never defaulted")?;
    let atoms: Vec<(f64, f64)> = raw.atoms.iter().map(|a| (a[0], a[1])).collect();
    let dist = PotentialDistribution::new(&atoms, raw.lambda)
        .map_err(|e| anyhow::anyhow!("invalid distribution: {e}"))?;
    let workers = raw.workers.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    });
    if workers == 0 {
        bail!("workers must be positive");
    }
    let window_tol = raw.window_tol.unwrap_or(1e-10);
    if !(window_tol > 0.0 && window_tol < 1.0) {
        bail!("window_tol must lie in (0, 1), got {window_tol}");
    }

    let mode = match raw.mode.as_deref() {
        None | Some("exact") => TableModeCfg::Exact,
        Some("mc") => TableModeCfg::Mc,
        Some(other) => bail!("mode must be \"exact\" or \"mc\", got {other:?}"),
    };
    let need = |field: Option<u64>, name: &str| {
        field.with_context(|| format!("{name} is required for kind = {:?}", raw.kind))
    };

    let experiment = match raw.kind.as_str() {
        "block_table" | "renewal" => {
            let r_max = raw
                .r_max
                .unwrap_or(if mode == TableModeCfg::Exact { 14 } else { 64 });
            let n_envs = match mode {
                TableModeCfg::Exact => 0,
                TableModeCfg::Mc => need(raw.n_envs, "n_envs")?,
            };
            if raw.kind == "block_table" {
                Experiment::BlockTable { r_max, mode, n_envs }
            } else {
                Experiment::Renewal { r_max, mode, n_envs }
            }
        }
        "speed" => Experiment::Speed {
            y: raw.y.context("y is required for kind = \"speed\"")?,
            n_envs: need(raw.n_envs, "n_envs")?,
            measure: match raw.measure.as_deref() {
                None | Some("block") => MeasureCfg::Block,
                Some("window") => MeasureCfg::Window,
                Some(other) => bail!("measure must be \"block\" or \"window\", got {other:?}"),
            },
            r_max: raw.r_max.unwrap_or(14),
        },
        "lyapunov" => Experiment::Lyapunov {
            y: raw.y.context("y is required for kind = \"lyapunov\"")?,
            n_envs: need(raw.n_envs, "n_envs")?,
        },
        "derivative" => {
            let grid = raw
                .lambda_grid
                .unwrap_or_else(|| vec![0.0, 0.005, 0.01, 0.02]);
            Experiment::Derivative {
                y: raw.y.context("y is required for kind = \"derivative\"")?,
                n_envs: need(raw.n_envs, "n_envs")?,
                lambda_grid: grid,
                r_max: raw.r_max.unwrap_or(14),
            }
        }
        "diagnostics" => {
            let y = raw.y.unwrap_or(64);
            Experiment::Diagnostics {
                y,
                n_envs: raw.n_envs.unwrap_or(2000),
                bias_z: raw.bias_z.unwrap_or(y / 4),
                bias_x: raw.bias_x.unwrap_or(y / 2),
                m_max: raw.m_max.unwrap_or(8),
                paths_per_env: raw.paths_per_env.unwrap_or(2),
            }
        }
        "counterexample" => Experiment::Counterexample {
            ys: raw
                .ys
                .context("ys is required for kind = \"counterexample\"")?,
            n_envs: need(raw.n_envs, "n_envs")?,
            slope_range: raw
                .slope_range
                .map(|r| (r[0], r[1]))
                .unwrap_or((1.8, 2.2)),
        },
        "multid_scan" => Experiment::MultidScan {
            ys: raw.ys.context("ys is required for kind = \"multid_scan\"")?,
            n_envs: need(raw.n_envs, "n_envs")?,
            direction: raw.direction.unwrap_or_else(|| vec![1, 0]),
            margin: raw.margin.unwrap_or(2.0),
        },
        "cube_stats" => Experiment::CubeStats {
            cube_l: raw.cube_l.unwrap_or(4),
            kappa: raw.kappa.unwrap_or(1.0),
            cubes: raw.cubes.unwrap_or_else(|| vec![32, 32]),
            n_envs: need(raw.n_envs, "n_envs")?,
        },
        other => bail!(
            "unknown kind {other:?}; expected one of block_table, renewal, speed, lyapunov, \
             derivative, diagnostics, counterexample, multid_scan, cube_stats"
        ),
    };

    Ok(Config {
        kind: raw.kind,
        master_seed,
        workers,
        dist,
        atoms_raw: raw.atoms,
        lambda: raw.lambda,
        window_tol,
        experiment,
    })
}
