//! Experiment configuration and the report emitted by a run.
//!
//! Every number leaves the process as an exact fraction string, so reports
//! are byte-stable across runs and re-parse to equal values. Wall time is
//! printed to stderr only, keeping the report bytes a pure function of the
//! configuration.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

/// Union of the parameters of all registered experiments. A config file or
/// the command line fills the fields its experiment needs; unknown keys are
/// rejected up front.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    /// Criterion flavour: "shift" or "tent".
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    /// Map literals like "sigma^2", "tent^1", "Z_3", "halve^1", "id".
    #[serde(skip_serializing_if = "Option::is_none")]
    pub maps: Option<Vec<String>>,
    /// A single commuting map literal for the filter construction.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<String>,
    /// Open-set literals like "cyl:02" and "ivl:1/4,1/2", unions with '|'.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u0: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<Vec<String>>,
    /// "cantor", "interval" or "finite" (the latter needs labels + dist).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub space: Option<String>,
    /// Point:coefficient pairs, comma separated, e.g. "02~2:1,2:-1/2".
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terms: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    /// Exact distance matrix as fraction strings, row major.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dist: Option<Vec<Vec<String>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub basepoint: Option<String>,
    /// Sparse gap-basis vector literal, e.g. "e2:1/2,star:-1".
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vector: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upto: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cols: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub powers: Option<Vec<u64>>,
    /// Inclusive sweep "lo..hi".
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_range: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search_horizon: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<u32>,
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    pub big_k: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<String>,
    /// Reserved for randomized batches; echoed so reruns are reproducible.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: Vec<S>) -> Self {
        Table { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push<S: Into<String>>(&mut self, row: Vec<S>) {
        let row: Vec<String> = row.into_iter().map(Into::into).collect();
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// The full result of one experiment run. The table named "main" carries
/// the headline rows and is what the CSV format emits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub experiment: String,
    pub config: ExperimentConfig,
    pub verdict: String,
    pub tables: BTreeMap<String, Table>,
    pub notes: Vec<String>,
}

impl RunReport {
    pub fn new(config: &ExperimentConfig, verdict: impl Into<String>) -> Self {
        RunReport {
            experiment: config.experiment.clone(),
            config: config.clone(),
            verdict: verdict.into(),
            tables: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn with_table(mut self, name: &str, table: Table) -> Self {
        self.tables.insert(name.to_string(), table);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    /// Exit code contract: 0 pass/consistent, 1 fail/violation,
    /// 2 inconclusive.
    pub fn exit_code(&self) -> u8 {
        match self.verdict.as_str() {
            "PASS" | "OK" | "CONSISTENT" => 0,
            "FAIL" | "VIOLATION" => 1,
            _ => 2,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// CSV of the "main" table, RFC 4180 quoting.
    pub fn to_csv(&self) -> String {
        let main = self.tables.get("main").expect("every report has a main table");
        let mut out = String::new();
        let quote = |cell: &str| -> String {
            if cell.contains(',') || cell.contains('"') || cell.contains('\n') {
                format!("\"{}\"", cell.replace('"', "\"\""))
            } else {
                cell.to_string()
            }
        };
        let emit = |out: &mut String, row: &[String]| {
            let line: Vec<String> = row.iter().map(|c| quote(c)).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        };
        emit(&mut out, &main.columns);
        for row in &main.rows {
            emit(&mut out, row);
        }
        out
    }
}

/// Writes through a sibling temp file and renames, so a crashed run never
/// leaves a truncated report behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}
