//! Report assembly: JSON payload with config echo + hash, and the optional
//! CSV table of gridwise results.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Overall outcome of a run, mapped onto the exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Outcome {
    Pass,
    Fail,
    Inconclusive,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::Fail | Outcome::Inconclusive => 2,
        }
    }
}

/// A flat table of the per-grid results, for the CSV output format.
#[derive(Debug, Clone, Serialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("csv header");
        for row in &self.rows {
            w.write_record(row).expect("csv row");
        }
        String::from_utf8(w.into_inner().expect("csv buffer")).expect("csv utf8")
    }
}

/// The full JSON report. `result` is byte-reproducible for a fixed config
/// and any worker count; the surrounding metadata (timing) is not.
#[derive(Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub package: &'static str,
    pub version: &'static str,
    pub config_sha256: String,
    pub config: toml::Value,
    pub workers: Option<usize>,
    pub outcome: Outcome,
    pub result: serde_json::Value,
    pub table: Table,
    pub wall_seconds: f64,
}

pub fn config_hash(raw: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(raw.as_bytes());
    format!("{:x}", hasher.finalize())
}

pub fn fmt_f64(v: f64) -> String {
    // full round-trip precision so CSV tables are as reproducible as JSON
    format!("{v:.17e}")
}
