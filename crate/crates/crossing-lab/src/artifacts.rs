//! Artifact files: CSV tables with fixed column schemas and a versioned
//! summary JSON. Floats are written with Rust's shortest round-trip
//! formatting, so artifacts are byte-identical across runs of the same
//! config at the same worker count.

use anyhow::Context;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub struct ArtifactDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl ArtifactDir {
    pub fn create(dir: &Path) -> anyhow::Result<Self> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(ArtifactDir {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write_csv(
        &mut self,
        name: &str,
        header: &str,
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> anyhow::Result<()> {
        let mut out = String::new();
        out.push_str(header);
        out.push('\n');
        for row in rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        self.write_raw(name, &out)
    }

    pub fn write_json(&mut self, name: &str, value: &serde_json::Value) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_raw(name, &text)
    }

    fn write_raw(&mut self, name: &str, contents: &str) -> anyhow::Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents)
            .with_context(|| format!("writing {}", path.display()))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }
}

/// Shortest round-trip float formatting; keeps CSV bytes stable.
pub fn fmt(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        let mut s = String::new();
        write!(s, "{x}").unwrap();
        s
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}
