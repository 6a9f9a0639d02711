//! CSV artifacts and the run manifest.

use std::fs::OpenOptions;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};

/// Fixed-width scientific notation, so reruns produce identical bytes.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.12e}")
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, fmt_f64)
}

/// Outcome of one named check.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckRow {
    pub check: String,
    pub samples: usize,
    pub max_residual: Option<f64>,
    pub slope_or_rate: Option<f64>,
    pub passed: bool,
}

impl CheckRow {
    pub fn new(check: &str, samples: usize, max_residual: Option<f64>, slope_or_rate: Option<f64>, passed: bool) -> Self {
        CheckRow { check: check.into(), samples, max_residual, slope_or_rate, passed }
    }

    pub fn verdict(&self) -> &'static str {
        if self.passed {
            "pass"
        } else {
            "fail"
        }
    }
}

/// A table written to `<scenario>_<name>.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn from_checks(name: &str, checks: &[CheckRow]) -> Self {
        let mut t = Table::new(name, &["check", "samples", "max_residual", "slope_or_rate", "verdict"]);
        for c in checks {
            t.push(vec![
                c.check.clone(),
                c.samples.to_string(),
                fmt_opt(c.max_residual),
                fmt_opt(c.slope_or_rate),
                c.verdict().into(),
            ]);
        }
        t
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| LabError::Io(e.to_string()))
    }
}

fn csv_err(e: csv::Error) -> LabError {
    LabError::Io(e.to_string())
}

/// Everything a scenario run produced.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioOutcome {
    pub scenario: String,
    pub checks: Vec<CheckRow>,
    pub tables: Vec<Table>,
}

impl ScenarioOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_checks(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.check.as_str()).collect()
    }

    pub fn verdict(&self) -> &'static str {
        if self.passed() {
            "pass"
        } else {
            "fail"
        }
    }

    /// Writes every table plus `<scenario>_checks.csv`; returns the paths written.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut out = Vec::new();
        let checks = Table::from_checks("checks", &self.checks);
        for t in std::iter::once(&checks).chain(&self.tables) {
            let path = dir.join(format!("{}_{}.csv", self.scenario, t.name));
            std::fs::write(&path, t.to_csv()?)?;
            out.push(path);
        }
        Ok(out)
    }
}

/// Hex SHA-256 of the given text.
pub fn config_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Appends (scenario, seed, config_hash, verdict) to `manifest.csv`, writing a header when new.
pub fn append_manifest(dir: &Path, scenario: &str, seed: u64, hash: &str, verdict: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join("manifest.csv");
    let fresh = !path.exists();
    let file = OpenOptions::new().create(true).append(true).open(&path)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    if fresh {
        w.write_record(["scenario", "seed", "config_hash", "verdict"]).map_err(csv_err)?;
    }
    w.write_record([scenario, &seed.to_string(), hash, verdict]).map_err(csv_err)?;
    w.flush()?;
    Ok(path)
}
