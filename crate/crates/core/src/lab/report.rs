use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::LabError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// A fit whose residual is too large to judge, or a check that could not run.
    Unreliable,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Unreliable => "UNRELIABLE",
        }
    }
}

/// How a value is judged against its tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Bound {
    /// `|value - target| <= tolerance`.
    Absolute { target: f64 },
    /// `|value - target| <= tolerance·|target|`.
    Relative { target: f64 },
    AtMost,
    AtLeast,
    /// `value` is 1 for true; tolerance is unused.
    Flag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub bound: Bound,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, bound: Bound, tolerance: f64) -> Self {
        let pass = match bound {
            Bound::Absolute { target } => (value - target).abs() <= tolerance,
            Bound::Relative { target } => (value - target).abs() <= tolerance * target.abs(),
            Bound::AtMost => value <= tolerance,
            Bound::AtLeast => value >= tolerance,
            Bound::Flag => value == 1.0,
        };
        Check {
            name: name.into(),
            value,
            tolerance,
            bound,
            pass,
        }
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Check::new(name, if ok { 1.0 } else { 0.0 }, Bound::Flag, 0.0)
    }
}

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u32,
    pub title: String,
    pub verdict: Verdict,
    pub checks: Vec<Check>,
    pub seconds: f64,
    pub note: Option<String>,
}

impl CriterionOutcome {
    pub fn from_checks(id: u32, title: &str, checks: Vec<Check>, seconds: f64) -> Self {
        let verdict = if checks.iter().all(|c| c.pass) { Verdict::Pass } else { Verdict::Fail };
        CriterionOutcome {
            id,
            title: title.to_string(),
            verdict,
            checks,
            seconds,
            note: None,
        }
    }

    pub fn unreliable(id: u32, title: &str, note: String, seconds: f64) -> Self {
        CriterionOutcome {
            id,
            title: title.to_string(),
            verdict: Verdict::Unreliable,
            checks: Vec::new(),
            seconds,
            note: Some(note),
        }
    }

    /// One line `criterion N PASS|FAIL title (..)`.
    pub fn summary_line(&self) -> String {
        let failing: Vec<String> = self
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| format!("{}={:.3e} vs {:.3e}", c.name, c.value, c.tolerance))
            .collect();
        let mut line = format!("criterion {:>2} {} {} ({:.1} s)", self.id, self.verdict.label(), self.title, self.seconds);
        if !failing.is_empty() {
            line.push_str(&format!(" [{}]", failing.join(", ")));
        }
        if let Some(n) = &self.note {
            line.push_str(&format!(" [{n}]"));
        }
        line
    }
}

/// A numeric table with a fixed column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv(&self, out: &mut dyn Write) -> std::io::Result<()> {
        writeln!(out, "{}", self.columns.join(","))?;
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub config_hash: String,
    /// The configuration and tolerances the hash was taken over.
    pub config: serde_json::Value,
    pub tolerances: BTreeMap<String, f64>,
    pub tables: BTreeMap<String, Table>,
    pub verdicts: BTreeMap<String, Verdict>,
    pub criteria: Vec<CriterionOutcome>,
    /// False when the study was interrupted.
    pub complete: bool,
}

impl ConvergenceReport {
    pub fn new(config: serde_json::Value, tolerances: BTreeMap<String, f64>) -> Self {
        ConvergenceReport {
            config_hash: config_hash(&config, &tolerances),
            config,
            tolerances,
            tables: BTreeMap::new(),
            verdicts: BTreeMap::new(),
            criteria: Vec::new(),
            complete: false,
        }
    }

    pub fn add(&mut self, outcome: CriterionOutcome) {
        self.verdicts.insert(format!("criterion_{:02}", outcome.id), outcome.verdict);
        self.criteria.retain(|c| c.id != outcome.id);
        self.criteria.push(outcome);
        self.criteria.sort_by_key(|c| c.id);
    }

    pub fn all_pass(&self) -> bool {
        self.complete && self.verdicts.values().all(|&v| v == Verdict::Pass)
    }

    pub fn failures(&self) -> Vec<String> {
        self.verdicts
            .iter()
            .filter(|(_, &v)| v != Verdict::Pass)
            .map(|(k, _)| k.clone())
            .collect()
    }
}

/// SHA-256 over the canonical JSON of the configuration and tolerances.
pub fn config_hash(config: &serde_json::Value, tolerances: &BTreeMap<String, f64>) -> String {
    let text = serde_json::to_string(&(config, tolerances)).expect("JSON values always serialize");
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Writes `report.json` plus one `<table>.csv` per table into `dir`; returns the written paths.
pub fn report_emit(report: &ConvergenceReport, dir: &Path) -> Result<Vec<PathBuf>, LabError> {
    let io = |p: &Path, e: std::io::Error| LabError::Io(format!("{}: {e}", p.display()));
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut paths = Vec::new();
    let json = dir.join("report.json");
    let text = serde_json::to_string_pretty(report).map_err(|e| LabError::Io(e.to_string()))?;
    fs::write(&json, text).map_err(|e| io(&json, e))?;
    paths.push(json);
    for (name, table) in &report.tables {
        let path = dir.join(format!("{name}.csv"));
        let mut buf = Vec::new();
        writeln!(buf, "# config_hash {}", report.config_hash).map_err(|e| io(&path, e))?;
        table.write_csv(&mut buf).map_err(|e| io(&path, e))?;
        fs::write(&path, buf).map_err(|e| io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}
