//! Check reports, junit summaries and CSV output with a JSON header line.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Result, SrpError};

/// One verified statement: `lhs` against `rhs` with a signed `margin`
/// (non-negative when the statement holds).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub params: Value,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
    /// Set when a hypothesis of the statement fails; the check then neither
    /// passes nor fails.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

impl CheckReport {
    /// `lhs <= rhs` up to an absolute tolerance.
    pub fn at_most(check: &str, params: Value, lhs: f64, rhs: f64, tol: f64) -> Self {
        let margin = rhs - lhs;
        CheckReport {
            check: check.into(),
            params,
            lhs,
            rhs,
            margin,
            pass: margin >= -tol,
            skipped: None,
        }
    }

    /// `|lhs - rhs| <= tol`; the margin is `tol - |lhs - rhs|`.
    pub fn equal(check: &str, params: Value, lhs: f64, rhs: f64, tol: f64) -> Self {
        let margin = tol - (lhs - rhs).abs();
        CheckReport {
            check: check.into(),
            params,
            lhs,
            rhs,
            margin,
            pass: margin >= 0.0,
            skipped: None,
        }
    }

    pub fn skipped(check: &str, params: Value, reason: impl Into<String>) -> Self {
        CheckReport {
            check: check.into(),
            params,
            lhs: f64::NAN,
            rhs: f64::NAN,
            margin: f64::NAN,
            pass: false,
            skipped: Some(reason.into()),
        }
    }

    pub fn is_skipped(&self) -> bool {
        self.skipped.is_some()
    }

    pub fn failed(&self) -> bool {
        !self.pass && !self.is_skipped()
    }
}

/// Aggregate of many reports.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub suite: String,
    pub checks: usize,
    pub failures: usize,
    pub skipped: usize,
    /// Smallest margin among non-skipped checks.
    pub worst_margin: f64,
    /// Up to a handful of failing reports, for diagnosis.
    pub first_failures: Vec<CheckReport>,
}

impl SuiteSummary {
    pub fn new(suite: &str) -> Self {
        SuiteSummary {
            suite: suite.into(),
            worst_margin: f64::INFINITY,
            ..Default::default()
        }
    }

    pub fn add(&mut self, r: CheckReport) {
        self.checks += 1;
        if r.is_skipped() {
            self.skipped += 1;
            return;
        }
        if r.margin.is_finite() {
            self.worst_margin = self.worst_margin.min(r.margin);
        }
        if !r.pass {
            self.failures += 1;
            if self.first_failures.len() < 5 {
                self.first_failures.push(r);
            }
        }
    }

    pub fn extend(&mut self, rs: impl IntoIterator<Item = CheckReport>) {
        for r in rs {
            self.add(r);
        }
    }

    pub fn pass(&self) -> bool {
        self.failures == 0
    }
}

/// Renders summaries as a junit-style XML document.
pub fn junit_xml(summaries: &[SuiteSummary]) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<testsuites>\n");
    for s in summaries {
        let _ = writeln!(
            out,
            "  <testsuite name=\"{}\" tests=\"{}\" failures=\"{}\" skipped=\"{}\">",
            escape(&s.suite),
            s.checks,
            s.failures,
            s.skipped
        );
        let _ = writeln!(out, "    <testcase name=\"{}\">", escape(&s.suite));
        for f in &s.first_failures {
            let _ = writeln!(
                out,
                "      <failure message=\"{}\">{}</failure>",
                escape(&f.check),
                escape(&serde_json::to_string(f).unwrap_or_default())
            );
        }
        let _ = writeln!(out, "    </testcase>\n  </testsuite>");
    }
    out.push_str("</testsuites>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Long-format table written as CSV under a `#`-prefixed JSON metadata line.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub meta: Value,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(meta: Value, columns: &[&str]) -> Self {
        CsvTable {
            meta,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = format!("# {}\n", serde_json::to_string(&self.meta).unwrap_or_default());
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)
            .map_err(|e| SrpError::Argument(format!("cannot create {}: {e}", path.display())))?;
        f.write_all(self.render().as_bytes())
            .map_err(|e| SrpError::Argument(format!("cannot write {}: {e}", path.display())))
    }

    /// Parses the output of `render`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .and_then(|l| l.strip_prefix("# "))
            .ok_or_else(|| SrpError::Argument("missing metadata line".into()))?;
        let meta: Value = serde_json::from_str(header).map_err(|e| SrpError::Argument(e.to_string()))?;
        let columns = lines
            .next()
            .ok_or_else(|| SrpError::Argument("missing column line".into()))?
            .split(',')
            .map(String::from)
            .collect();
        let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
        Ok(CsvTable { meta, columns, rows })
    }
}

/// Formats a float for CSV output with a fixed number of significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else {
        format!("{x:.12e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn margins_and_skips() {
        let ok = CheckReport::at_most("x", json!({}), 1.0, 2.0, 0.0);
        assert!(ok.pass && ok.margin == 1.0);
        let bad = CheckReport::equal("y", json!({}), 1.0, 1.1, 1e-9);
        assert!(bad.failed());
        let mut s = SuiteSummary::new("demo");
        s.extend([ok, bad, CheckReport::skipped("z", json!({}), "hypothesis")]);
        assert_eq!((s.checks, s.failures, s.skipped), (3, 1, 1));
        assert!(junit_xml(&[s]).contains("failures=\"1\""));
    }

    #[test]
    fn csv_round_trip() {
        let mut t = CsvTable::new(json!({"seed": 3}), &["ell", "prob"]);
        t.push(vec!["0".into(), fmt_f64(1.0)]);
        let back = CsvTable::parse(&t.render()).unwrap();
        assert_eq!(back, t);
    }
}
