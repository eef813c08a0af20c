//! Human-readable report over one or more artifact directories: gathers
//! every `summary.json` under the given path (one level deep) and juxtaposes
//! the quantities that must agree across experiments.

use anyhow::{bail, Context};
use serde_json::Value;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

struct Loaded {
    source: PathBuf,
    summary: Value,
}

fn load_summaries(dir: &Path) -> anyhow::Result<Vec<Loaded>> {
    let mut found = Vec::new();
    let mut candidates = vec![dir.join("summary.json")];
    if dir.is_dir() {
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.is_dir() {
                candidates.push(path.join("summary.json"));
            }
        }
    }
    candidates.sort();
    for path in candidates {
        if !path.is_file() {
            continue;
        }
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.display()))?;
        let summary: Value =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if summary["schema"] == 1 {
            found.push(Loaded {
                source: path,
                summary,
            });
        }
    }
    if found.is_empty() {
        bail!("no summary.json artifacts under {}", dir.display());
    }
    Ok(found)
}

fn fmt_num(v: &Value) -> String {
    match v {
        Value::Number(n) => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            if x != 0.0 && (x.abs() < 1e-3 || x.abs() >= 1e6) {
                format!("{x:.4e}")
            } else {
                format!("{x:.6}")
            }
        }
        Value::Null => "-".into(),
        other => other.to_string(),
    }
}

pub fn emit(dir: &Path) -> anyhow::Result<String> {
    let loaded = load_summaries(dir)?;
    let mut md = String::new();
    writeln!(md, "# Crossing-lab report\n").unwrap();
    writeln!(md, "Artifacts under `{}`.\n", dir.display()).unwrap();

    writeln!(md, "## Runs\n").unwrap();
    writeln!(md, "| kind | seed | workers | key results | source |").unwrap();
    writeln!(md, "|---|---|---|---|---|").unwrap();
    for l in &loaded {
        let s = &l.summary;
        let r = &s["results"];
        let key = match s["kind"].as_str().unwrap_or("") {
            "renewal" => format!(
                "beta = {}, 1/v = {}, mass defect = {}, tail eps = {}",
                fmt_num(&r["kernel"]["beta"]),
                fmt_num(&r["kernel"]["inv_v"]),
                fmt_num(&r["kernel"]["mass_defect"]),
                fmt_num(&r["kernel"]["epsilon_hat"]),
            ),
            "lyapunov" => format!(
                "beta(slope) = {}, alpha = {}",
                fmt_num(&r["beta_slope"]["mean"]),
                fmt_num(&r["alpha_quenched"]["mean"]),
            ),
            "derivative" => format!(
                "d beta/d lambda|0+ = {}, renewal 1/v = {}",
                fmt_num(&r["right_derivative_at_zero"]["mean"]),
                fmt_num(&r["renewal_inv_v"]),
            ),
            "speed" => format!(
                "E tau / y = {}, kernel 1/v = {}",
                fmt_num(&r["e_tau_over_y"]),
                fmt_num(&r["kernel_inv_v"]),
            ),
            "counterexample" => format!(
                "log-log slope = {} in {}",
                fmt_num(&r["slope"]),
                r["slope_range"]
            ),
            "multid_scan" => format!(
                "top-octave increase = {}, bounded = {}",
                fmt_num(&r["top_octave_increase"]),
                r["bounded"]
            ),
            "cube_stats" => format!(
                "observed sizes = {}, decreasing = {}",
                fmt_num(&r["observed_sizes"]),
                r["frequency_decreasing"]
            ),
            "diagnostics" => format!("all checks as expected = {}", r["all_as_expected"]),
            _ => String::new(),
        };
        writeln!(
            md,
            "| {} | {} | {} | {} | `{}` |",
            s["kind"].as_str().unwrap_or("?"),
            s["master_seed"],
            s["workers"],
            key,
            l.source.display()
        )
        .unwrap();
    }

    // cross-experiment juxtapositions
    let find = |kind: &str| loaded.iter().find(|l| l.summary["kind"] == kind);
    writeln!(md, "\n## Cross-checks\n").unwrap();
    let mut any = false;
    if let (Some(ly), Some(re)) = (find("lyapunov"), find("renewal")) {
        let b_slope = ly.summary["results"]["beta_slope"]["mean"].as_f64();
        let b_root = re.summary["results"]["kernel"]["beta"].as_f64();
        if let (Some(a), Some(b)) = (b_slope, b_root) {
            writeln!(
                md,
                "- beta by log-slope = {a:.6} vs beta by kernel root = {b:.6} (relative gap {:.2}%)",
                100.0 * (a - b).abs() / b.abs().max(1e-300)
            )
            .unwrap();
            any = true;
        }
    }
    if let Some(de) = find("derivative") {
        let d = de.summary["results"]["right_derivative_at_zero"]["mean"].as_f64();
        let iv = de.summary["results"]["renewal_inv_v"].as_f64();
        if let (Some(d), Some(iv)) = (d, iv) {
            writeln!(
                md,
                "- d beta/d lambda at 0+ = {d:.6} vs 1/v = {iv:.6} (relative gap {:.2}%)",
                100.0 * (d - iv).abs() / iv.abs().max(1e-300)
            )
            .unwrap();
            any = true;
        }
    }
    if let Some(re) = find("renewal") {
        let md_val = re.summary["results"]["kernel"]["mass_defect"].as_f64();
        let eps = re.summary["results"]["kernel"]["epsilon_hat"].as_f64();
        if let Some(m) = md_val {
            writeln!(
                md,
                "- kernel mass: sum q = {:.12} against 1 (defect {m:.3e}); fitted exponential tail rate eps = {}",
                1.0 - m,
                eps.map(|e| format!("{e:.4}")).unwrap_or_else(|| "-".into()),
            )
            .unwrap();
            any = true;
        }
    }
    if !any {
        writeln!(md, "- (no paired experiments found)").unwrap();
    }

    // inequality checks
    let mut check_lines = Vec::new();
    for l in &loaded {
        if let Some(checks) = l.summary["results"]["checks"].as_array() {
            for c in checks {
                let passed = c["pass"].as_bool().unwrap_or(false);
                let as_expected = c["as_expected"].as_bool().unwrap_or(false);
                let status = match (passed, as_expected) {
                    (true, true) => "pass".into(),
                    (false, true) => "fails as expected (negative control)".into(),
                    _ => format!("**UNEXPECTED {}**", if passed { "PASS" } else { "FAIL" }),
                };
                check_lines.push(format!(
                    "| {} | {} | {} | {} |",
                    c["name"].as_str().unwrap_or("?"),
                    fmt_num(&c["statistic"]),
                    fmt_num(&c["threshold"]),
                    status
                ));
            }
        }
    }
    if !check_lines.is_empty() {
        writeln!(md, "\n## Inequality checks\n").unwrap();
        writeln!(md, "| check | statistic | threshold | status |").unwrap();
        writeln!(md, "|---|---|---|---|").unwrap();
        for line in check_lines {
            writeln!(md, "{line}").unwrap();
        }
    }
    Ok(md)
}
