use serde::Serialize;
use serde_json::{Map, Value};

use crate::table::Table;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    /// The run finished but a validity condition failed (for example the
    /// branch packets still overlap).
    Invalid,
    NoData,
}

/// One headline statistic compared against its tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    /// `"<"`, `"<="`, `">"` or `"within"` (for `|value - target| < tolerance`).
    pub relation: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    pub passed: bool,
}

impl Check {
    pub fn below(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            relation: "<".into(),
            target: None,
            passed: value < tolerance,
        }
    }

    pub fn above(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            relation: ">".into(),
            target: None,
            passed: value > tolerance,
        }
    }

    pub fn within(name: impl Into<String>, value: f64, target: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            relation: "within".into(),
            target: Some(target),
            passed: (value - target).abs() < tolerance,
        }
    }

    pub fn flag(name: impl Into<String>, passed: bool) -> Self {
        Self {
            name: name.into(),
            value: if passed { 1.0 } else { 0.0 },
            tolerance: 1.0,
            relation: "flag".into(),
            target: None,
            passed,
        }
    }
}

/// Grayscale image written as a binary portable graymap.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl Heatmap {
    /// Row-major 2-D data with axis 0 as rows.
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Self {
        Self {
            width: cols,
            height: rows,
            values,
        }
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        let max = self.values.iter().cloned().fold(0.0f64, f64::max);
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        for &v in &self.values {
            let g = if max > 0.0 { (255.0 * (v / max)).round().clamp(0.0, 255.0) } else { 0.0 };
            out.push(g as u8);
        }
        out
    }
}

/// Everything a scenario hands back for writing.
#[derive(Debug, Clone)]
pub struct ScenarioReport {
    pub scenario: String,
    pub status: Status,
    pub summary: Map<String, Value>,
    pub checks: Vec<Check>,
    /// File stem and table, written as `<stem>.csv`.
    pub tables: Vec<(String, Table)>,
    pub heatmaps: Vec<(String, Heatmap)>,
    pub notes: Vec<String>,
}

impl ScenarioReport {
    pub fn new(scenario: &str) -> Self {
        Self {
            scenario: scenario.to_string(),
            status: Status::NoData,
            summary: Map::new(),
            checks: Vec::new(),
            tables: Vec::new(),
            heatmaps: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) {
        self.summary.insert(
            key.to_string(),
            serde_json::to_value(value).unwrap_or(Value::Null),
        );
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn table(&mut self, stem: impl Into<String>, t: Table) {
        self.tables.push((stem.into(), t));
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check_named(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// JSON summary object for the run.
    pub fn summary_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("scenario".into(), Value::String(self.scenario.clone()));
        m.insert("status".into(), serde_json::to_value(self.status).unwrap_or(Value::Null));
        m.insert("passed".into(), Value::Bool(self.status == Status::Ok && self.all_passed()));
        m.insert("statistics".into(), Value::Object(self.summary.clone()));
        m.insert("checks".into(), serde_json::to_value(&self.checks).unwrap_or(Value::Null));
        if !self.notes.is_empty() {
            m.insert("notes".into(), serde_json::to_value(&self.notes).unwrap_or(Value::Null));
        }
        Value::Object(m)
    }

    /// Fixed-width table of checks for terminal output.
    pub fn human_table(&self) -> String {
        let mut out = format!("scenario {}  status {:?}\n", self.scenario, self.status);
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(4).max(5);
        out.push_str(&format!("{:<width$}  {:>14}  {:>8}  {:>12}  result\n", "check", "value", "rel", "tolerance"));
        for c in &self.checks {
            out.push_str(&format!(
                "{:<width$}  {:>14.6e}  {:>8}  {:>12.4e}  {}\n",
                c.name,
                c.value,
                c.relation,
                c.tolerance,
                if c.passed { "pass" } else { "FAIL" }
            ));
        }
        out
    }
}

/// Summary for a run that produced nothing.
pub fn empty_summary(scenario: &str) -> Value {
    ScenarioReport::new(scenario).summary_json()
}

/// `k sqrt(p (1 - p) / n)`.
pub fn binomial_halfwidth(p: f64, n: usize, k: f64) -> f64 {
    k * (p * (1.0 - p) / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_results_are_no_data() {
        let v = empty_summary("torus");
        assert_eq!(v["status"], "no_data");
        assert_eq!(v["passed"], false);
    }

    #[test]
    fn pgm_header() {
        let h = Heatmap::new(2, 3, vec![0.0, 1.0, 2.0, 3.0, 4.0, 4.0]);
        let bytes = h.to_pgm();
        assert!(bytes.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(*bytes.last().unwrap(), 255);
    }
}
