//! Experiment reports: named constants with their estimator semantics,
//! per-trial records and pass/fail verdicts.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

use crate::error::Result;

/// How a reported number was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Semantics {
    /// Computed exactly on the finite grid (up to solver tolerance).
    Exact,
    /// A supremum estimated from below by evaluating candidates.
    LowerBound,
    /// A constant fitted from data.
    Fitted,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NamedConstant {
    pub name: String,
    pub value: f64,
    pub semantics: Semantics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// `value comparison threshold` evaluated to `passed`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub value: f64,
    pub comparison: &'static str,
    pub threshold: f64,
    pub passed: bool,
}

impl Verdict {
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            comparison: "<=",
            threshold,
            passed: value <= threshold,
        }
    }

    pub fn below(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            comparison: "<",
            threshold,
            passed: value < threshold,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            comparison: ">=",
            threshold,
            passed: value >= threshold,
        }
    }

    pub fn equals(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            comparison: "==",
            threshold,
            passed: value == threshold,
        }
    }
}

/// Plot-ready rows, written as CSV.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub suite: String,
    pub seed: u64,
    pub config: Value,
    pub constants: Vec<NamedConstant>,
    pub trials: Vec<Value>,
    pub table: Table,
    pub verdicts: Vec<Verdict>,
    /// Seconds; the only field that differs between identical runs.
    pub wall_time: f64,
}

impl ExperimentReport {
    pub fn new(suite: &str, seed: u64, config: Value) -> Self {
        Self {
            suite: suite.to_string(),
            seed,
            config,
            constants: Vec::new(),
            trials: Vec::new(),
            table: Table::default(),
            verdicts: Vec::new(),
            wall_time: 0.0,
        }
    }

    pub fn constant(&mut self, name: &str, value: f64, semantics: Semantics) {
        self.constants.push(NamedConstant {
            name: name.to_string(),
            value,
            semantics,
            detail: None,
        });
    }

    pub fn constant_at(&mut self, name: &str, value: f64, semantics: Semantics, detail: impl Into<String>) {
        self.constants.push(NamedConstant {
            name: name.to_string(),
            value,
            semantics,
            detail: Some(detail.into()),
        });
    }

    pub fn trial(&mut self, record: impl Serialize) -> Result<()> {
        self.trials.push(serde_json::to_value(record)?);
        Ok(())
    }

    pub fn verdict(&mut self, v: Verdict) {
        self.verdicts.push(v);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.constants.iter().find(|c| c.name == name).map(|c| c.value)
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// The table if the suite produced one, otherwise the constants.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if self.table.columns.is_empty() {
            out.push_str("name,value,semantics\n");
            for c in &self.constants {
                let sem = serde_json::to_value(c.semantics).expect("enum serializes");
                let _ = writeln!(out, "{},{},{}", c.name, c.value, sem.as_str().unwrap_or_default());
            }
        } else {
            out.push_str(&self.table.columns.join(","));
            out.push('\n');
            for row in &self.table.rows {
                let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                out.push_str(&cells.join(","));
                out.push('\n');
            }
        }
        out
    }

    /// One line per verdict.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for v in &self.verdicts {
            let _ = writeln!(
                out,
                "[{}] {}: {} {} {}",
                if v.passed { "pass" } else { "FAIL" },
                v.name,
                v.value,
                v.comparison,
                v.threshold
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdicts_and_csv() {
        let mut r = ExperimentReport::new("demo", 1, Value::Null);
        r.constant("c", 1.5, Semantics::Fitted);
        r.verdict(Verdict::at_most("ok", 1.0, 1.0));
        assert!(r.passed());
        assert_eq!(r.to_csv(), "name,value,semantics\nc,1.5,fitted\n");
        r.verdict(Verdict::below("strict", 1.0, 1.0));
        assert!(!r.passed());
        r.table = Table::new(&["x", "y"]);
        r.table.push(vec![1.0, 2.5]);
        assert_eq!(r.to_csv(), "x,y\n1,2.5\n");
        assert!(r.summary().contains("[FAIL] strict"));
        assert_eq!(r.get("c"), Some(1.5));
    }
}
