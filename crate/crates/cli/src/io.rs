//! Output emission: atomic writes, CSV/JSON with embedded provenance.

use crate::config::Resolved;
use anyhow::{Context, Result};
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

/// Table of named numeric columns with deterministic row order.
#[derive(Debug, Clone)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ResultTable {
    pub fn new(columns: &[&str]) -> ResultTable {
        ResultTable {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "column count mismatch");
        self.rows.push(row);
    }
}

/// Write bytes atomically: temp file in the target directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

fn provenance_lines(resolved: &Resolved) -> String {
    format!(
        "# version: {}\n# config_hash: {}\n# resolved: {}\n",
        resolved.version,
        resolved.config_hash,
        serde_json::to_string(&resolved.derived).unwrap(),
    )
}

/// CSV: '#'-prefixed provenance preamble, header row, LF endings,
/// '.' decimals via the shortest round-trip float formatting.
pub fn write_csv(path: &Path, resolved: &Resolved, table: &ResultTable) -> Result<()> {
    let mut out = provenance_lines(resolved);
    out.push_str(&table.columns.join(","));
    out.push('\n');
    for row in &table.rows {
        let line: Vec<String> = row
            .iter()
            .map(|v| {
                if v.is_nan() {
                    String::new()
                } else {
                    format!("{v}")
                }
            })
            .collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    meta: Meta<'a>,
    #[serde(flatten)]
    body: &'a T,
}

#[derive(Serialize)]
struct Meta<'a> {
    version: &'a str,
    config_hash: &'a str,
    seed: u64,
    resolved: &'a crate::config::DerivedConstants,
}

/// JSON with the provenance envelope.
pub fn write_json<T: Serialize>(path: &Path, resolved: &Resolved, body: &T) -> Result<()> {
    let env = Envelope {
        meta: Meta {
            version: &resolved.version,
            config_hash: &resolved.config_hash,
            seed: resolved.config.seed,
            resolved: &resolved.derived,
        },
        body,
    };
    let mut bytes = serde_json::to_vec_pretty(&env)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn out_path(resolved: &Resolved, override_dir: Option<&str>, name: &str) -> PathBuf {
    let dir = override_dir.unwrap_or(&resolved.config.output.dir);
    Path::new(dir).join(name)
}
