//! Deterministic output files: CSV sweeps with a provenance comment block
//! and full-precision floats, JSON results, and the config hash that ties
//! every artifact back to its inputs.

use anyhow::Context;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub fn config_sha256(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex_string(&hasher.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        write!(s, "{b:02x}").expect("writing to String cannot fail");
    }
    s
}

/// 17-significant-digit decimal form, lossless for f64 round-trips.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone)]
pub struct Provenance {
    pub scenario: String,
    pub config_sha256: String,
    pub seed: u64,
}

impl Provenance {
    pub fn comment_block(&self) -> String {
        format!(
            "# multiband {}\n# scenario = {}\n# config_sha256 = {}\n# seed = {}\n",
            env!("CARGO_PKG_VERSION"),
            self.scenario,
            self.config_sha256,
            self.seed
        )
    }
}

/// A sweep table: axis column plus one column per computed quantity,
/// written as comma-separated values under a '#'-comment provenance block.
pub struct SweepTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Extra provenance comments (e.g. SRL intersections).
    pub extras: Vec<(String, String)>,
}

impl SweepTable {
    pub fn new(columns: Vec<String>) -> Self {
        Self { columns, rows: Vec::new(), extras: Vec::new() }
    }

    pub fn push_row(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        self.rows.push(row);
    }

    pub fn add_extra(&mut self, key: &str, value: String) {
        self.extras.push((key.to_string(), value));
    }

    pub fn write(&self, dir: &Path, name: &str, prov: &Provenance) -> anyhow::Result<PathBuf> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output dir {}", dir.display()))?;
        let mut text = prov.comment_block();
        for (k, v) in &self.extras {
            text.push_str(&format!("# {k} = {v}\n"));
        }
        text.push_str(&self.columns.join(","));
        text.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format_float(*v)).collect();
            text.push_str(&cells.join(","));
            text.push('\n');
        }
        let path = dir.join(name);
        std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }
}

pub fn write_json(
    dir: &Path,
    name: &str,
    value: &serde_json::Value,
) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output dir {}", dir.display()))?;
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

/// Extract the embedded config hash from a CSV comment block or a JSON
/// provenance object.
pub fn embedded_hash(path: &Path) -> anyhow::Result<String> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    if path.extension().and_then(|e| e.to_str()) == Some("json") {
        let value: serde_json::Value = serde_json::from_str(&text)?;
        return value
            .pointer("/provenance/config_sha256")
            .and_then(|v| v.as_str())
            .map(String::from)
            .with_context(|| format!("{} has no provenance.config_sha256", path.display()));
    }
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# config_sha256 = ") {
            return Ok(rest.trim().to_string());
        }
        if !line.starts_with('#') {
            break;
        }
    }
    anyhow::bail!("{} has no embedded config hash", path.display())
}
