//! CSV and JSON writers plus the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

/// 17 significant digits, so values round-trip exactly.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Where results go: files under a directory, or stdout when no directory
/// was given.
pub struct Sink {
    dir: Option<PathBuf>,
    written: Vec<PathBuf>,
}

impl Sink {
    pub fn new(dir: Option<PathBuf>) -> Result<Self> {
        if let Some(d) = &dir {
            fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
        }
        Ok(Sink { dir, written: Vec::new() })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn emit(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        match &self.dir {
            Some(d) => {
                let path = d.join(name);
                fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
                self.written.push(path);
            }
            None => std::io::stdout().write_all(bytes)?,
        }
        Ok(())
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("flushing csv: {e}"))?;
        self.emit(name, &bytes)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.emit(name, text.as_bytes())
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

#[derive(Serialize)]
pub struct RunManifest<'a> {
    pub subcommand: &'a str,
    pub parameters: &'a BTreeMap<String, Value>,
    pub seed: Option<u64>,
    pub version: &'static str,
    pub outputs: Vec<String>,
    pub wall_time_s: f64,
}

/// Writes `manifest-<subcommand>.json` next to the outputs.
pub fn write_manifest(dir: &Path, manifest: &RunManifest<'_>) -> Result<PathBuf> {
    let path = dir.join(format!("manifest-{}.json", manifest.subcommand));
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// File-name-safe version of an activation name such as `poly:0,1`.
pub fn slug(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' }).collect()
}
