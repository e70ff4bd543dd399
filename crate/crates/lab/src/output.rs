//! Output directory that records a SHA-256 checksum for every file it writes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use fpp_core::diagnostics::PropertyReport;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::archive::fmt_f64;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub struct OutputDir {
    root: PathBuf,
    checksums: BTreeMap<String, String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("cannot create {}", root.display()))?;
        Ok(OutputDir { root: root.to_path_buf(), checksums: BTreeMap::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn checksums(&self) -> &BTreeMap<String, String> {
        &self.checksums
    }

    /// Writes `bytes` to `rel` and records its checksum.
    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        self.checksums.insert(rel.to_owned(), sha256_hex(bytes));
        Ok(())
    }

    /// Writes a file that is deliberately left out of the checksums.
    pub fn write_untracked(&self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    /// `<stem>.json` with the full report and `<stem>.csv` with one row per
    /// grid point.
    pub fn write_report(&mut self, stem: &str, rep: &PropertyReport) -> Result<()> {
        self.write_json(&format!("{stem}.json"), rep)?;
        self.write(&format!("{stem}.csv"), report_csv(rep).as_bytes())
    }
}

pub fn report_csv(rep: &PropertyReport) -> String {
    let mut s = String::from("param,estimate,se,ci_lo,ci_hi,count,n,inconclusive\n");
    for p in &rep.points {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            fmt_f64(p.param),
            fmt_f64(p.estimate),
            fmt_f64(p.se),
            fmt_f64(p.ci.0),
            fmt_f64(p.ci.1),
            p.count,
            p.n,
            u8::from(p.inconclusive)
        ));
    }
    s
}
