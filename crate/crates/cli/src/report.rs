//! Report bundles: a JSON summary, CSV tables and a plain-text digest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io::{write_json, write_text};

pub const SCHEMA_VERSION: u32 = 1;

/// One declared pass/fail check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    /// Acceptance criterion this check belongs to, if any.
    pub criterion: Option<u8>,
    pub name: String,
    pub value: f64,
    pub bound: f64,
    /// How `value` is compared with `bound` (`<`, `<=`, `>=`, `==`).
    pub relation: String,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl Check {
    pub fn below(criterion: Option<u8>, name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            criterion,
            name: name.into(),
            value,
            bound,
            relation: "<".into(),
            pass: value < bound,
            note: String::new(),
        }
    }

    pub fn at_most(criterion: Option<u8>, name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            criterion,
            name: name.into(),
            value,
            bound,
            relation: "<=".into(),
            pass: value <= bound,
            note: String::new(),
        }
    }

    pub fn at_least(criterion: Option<u8>, name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            criterion,
            name: name.into(),
            value,
            bound,
            relation: ">=".into(),
            pass: value >= bound,
            note: String::new(),
        }
    }

    /// Boolean property, reported as `1 == 1`.
    pub fn holds(criterion: Option<u8>, name: impl Into<String>, pass: bool) -> Self {
        Self {
            criterion,
            name: name.into(),
            value: if pass { 1.0 } else { 0.0 },
            bound: 1.0,
            relation: "==".into(),
            pass,
            note: String::new(),
        }
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Text(String),
    Null,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => format_num(*v),
            Cell::Text(s) => s.clone(),
            Cell::Null => String::new(),
        }
    }

    fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Text(s) => s.parse().ok(),
            Cell::Null => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Num(v as f64)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Num(v as f64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

fn format_num(v: f64) -> String {
    // Shortest round-trip representation.
    if v.is_finite() {
        format!("{v:?}")
    } else {
        v.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn to_csv(&self) -> CliResult<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(String::from_utf8_lossy(&bytes).into_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub all_pass: bool,
    pub checks: usize,
    pub failed: Vec<String>,
}

/// Everything an experiment reports. Contains no timings, so repeated runs
/// serialise identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub schema_version: u32,
    pub experiment: String,
    pub seed: u64,
    pub params: serde_json::Value,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    pub summary: Summary,
}

impl ReportBundle {
    pub fn new(experiment: &str, seed: u64, params: serde_json::Value) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment: experiment.into(),
            seed,
            params,
            checks: Vec::new(),
            tables: Vec::new(),
            summary: Summary { all_pass: true, checks: 0, failed: Vec::new() },
        }
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
        self.refresh();
    }

    pub fn table(&mut self, t: Table) {
        self.tables.push(t);
    }

    pub fn all_pass(&self) -> bool {
        self.summary.all_pass
    }

    /// Checks of one acceptance criterion.
    pub fn criterion_checks(&self, criterion: u8) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(move |c| c.criterion == Some(criterion))
    }

    fn refresh(&mut self) {
        let failed: Vec<String> = self.checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
        self.summary = Summary { all_pass: failed.is_empty(), checks: self.checks.len(), failed };
    }

    pub fn checks_table(&self) -> Table {
        let mut t = Table::new("checks", &["row", "criterion", "name", "value", "relation", "bound", "pass", "note"]);
        for (i, c) in self.checks.iter().enumerate() {
            t.push(vec![
                (i + 1).into(),
                c.criterion.map(|k| Cell::Num(k as f64)).unwrap_or(Cell::Null),
                c.name.as_str().into(),
                c.value.into(),
                c.relation.as_str().into(),
                c.bound.into(),
                c.pass.into(),
                c.note.as_str().into(),
            ]);
        }
        t
    }

    /// One line per check; each cites its row in `checks.csv`.
    pub fn digest(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "experiment {} (seed {}, schema {})", self.experiment, self.seed, self.schema_version);
        for (i, c) in self.checks.iter().enumerate() {
            let tag = c.criterion.map(|k| format!("[{k}] ")).unwrap_or_default();
            let _ = writeln!(
                s,
                "{} {tag}{}: {} {} {} (checks.csv row {})",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                format_num(c.value),
                c.relation,
                format_num(c.bound),
                i + 1
            );
        }
        let failed = self.summary.failed.len();
        let _ = writeln!(s, "{} of {} checks passed", self.checks.len() - failed, self.checks.len());
        s
    }

    /// Writes `summary.json`, `checks.csv`, one CSV per table and `digest.txt`.
    pub fn write(&self, dir: &Path) -> CliResult<Vec<PathBuf>> {
        let mut written = Vec::new();
        let summary = dir.join("summary.json");
        write_json(&summary, self)?;
        written.push(summary);
        for t in std::iter::once(self.checks_table()).chain(self.tables.iter().cloned()) {
            let p = dir.join(format!("{}.csv", t.name));
            write_text(&p, &t.to_csv()?)?;
            written.push(p);
        }
        let p = dir.join("digest.txt");
        write_text(&p, &self.digest())?;
        written.push(p);
        Ok(written)
    }
}

/// `x,y` or `table:x,y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Selector {
    pub table: Option<String>,
    pub x: String,
    pub y: String,
}

impl std::str::FromStr for Selector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (table, cols) = match s.split_once(':') {
            Some((t, c)) => (Some(t.to_string()), c),
            None => (None, s),
        };
        match cols.split_once(',') {
            Some((x, y)) if !x.trim().is_empty() && !y.trim().is_empty() => {
                Ok(Self { table, x: x.trim().into(), y: y.trim().into() })
            }
            _ => Err(format!("selector must look like x,y or table:x,y, got {s:?}")),
        }
    }
}

impl Selector {
    pub fn file_stem(&self) -> String {
        let cols = format!("{}_vs_{}", self.y, self.x);
        match &self.table {
            Some(t) => format!("{t}_{cols}"),
            None => cols,
        }
    }
}

/// Two-column `(x, y)` CSV text per selector. A report without tables yields
/// header-only files; a selector naming missing fields is an error listing
/// the available ones.
pub fn emit_plotdata(report: &ReportBundle, selectors: &[Selector]) -> CliResult<Vec<(String, String)>> {
    let mut out = Vec::new();
    for sel in selectors {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([&sel.x, &sel.y])?;
        if !report.tables.is_empty() {
            let table = report
                .tables
                .iter()
                .filter(|t| sel.table.as_ref().is_none_or(|name| &t.name == name))
                .find(|t| t.column(&sel.x).is_some() && t.column(&sel.y).is_some())
                .ok_or_else(|| {
                    let fields: Vec<String> = report
                        .tables
                        .iter()
                        .flat_map(|t| t.columns.iter().map(move |c| format!("{}:{c}", t.name)))
                        .collect();
                    CliError::Usage(format!(
                        "selector {},{} matches no table; available fields: {}",
                        sel.x,
                        sel.y,
                        fields.join(", ")
                    ))
                })?;
            let (ix, iy) = (table.column(&sel.x).unwrap_or(0), table.column(&sel.y).unwrap_or(0));
            for row in &table.rows {
                if let (Some(x), Some(y)) = (row[ix].as_f64(), row[iy].as_f64()) {
                    w.write_record([format_num(x), format_num(y)])?;
                }
            }
        }
        let bytes = w.into_inner().map_err(|e| CliError::Config(e.to_string()))?;
        out.push((format!("{}.csv", sel.file_stem()), String::from_utf8_lossy(&bytes).into_owned()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ReportBundle {
        let mut r = ReportBundle::new("cantor-growth", 3, serde_json::json!({}));
        let mut t = Table::new("growth", &["level", "opnorm", "family"]);
        t.push(vec![4u32.into(), 1.5.into(), "lacunary".into()]);
        t.push(vec![6u32.into(), 2.5.into(), "lacunary".into()]);
        r.table(t);
        r.check(Check::below(Some(5), "a", 1.0, 2.0));
        r.check(Check::at_least(Some(5), "b", 1.0, 2.0));
        r
    }

    #[test]
    fn summary_tracks_failures_and_digest_cites_rows() {
        let r = sample();
        assert!(!r.all_pass());
        assert_eq!(r.summary.failed, vec!["b".to_string()]);
        let d = r.digest();
        assert!(d.contains("PASS [5] a: 1.0 < 2.0 (checks.csv row 1)"));
        assert!(d.contains("FAIL [5] b"));
        assert!(d.contains("(checks.csv row 2)"));
    }

    #[test]
    fn bundle_round_trips_through_json() {
        let r = sample();
        let text = serde_json::to_string(&r).unwrap();
        let back: ReportBundle = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn plotdata_selects_columns_and_lists_fields_on_error() {
        let r = sample();
        let out = emit_plotdata(&r, &["level,opnorm".parse().unwrap()]).unwrap();
        assert_eq!(out[0].1, "level,opnorm\n4.0,1.5\n6.0,2.5\n");
        let err = emit_plotdata(&r, &["j,max_coeff".parse().unwrap()]).unwrap_err().to_string();
        assert!(err.contains("growth:level") && err.contains("growth:opnorm"), "{err}");
        let empty = ReportBundle::new("x", 0, serde_json::Value::Null);
        let out = emit_plotdata(&empty, &["j,max_coeff".parse().unwrap()]).unwrap();
        assert_eq!(out[0].1, "j,max_coeff\n");
        assert!("nocomma".parse::<Selector>().is_err());
    }
}
