use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Serialize;

use super::config::{Experiment, ExperimentConfig};
use crate::estimation::RNG_NAME;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Generator {
    pub name: &'static str,
    pub version: &'static str,
    pub rng: &'static str,
}

impl Generator {
    pub fn current() -> Self {
        Self {
            name: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            rng: RNG_NAME,
        }
    }
}

/// A number with its unit, in the natural units of the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quantity {
    pub value: f64,
    pub unit: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Worst observed value of the checked measure.
    pub value: f64,
    pub limit: f64,
    pub description: String,
}

impl Check {
    /// Passes when `value <= limit`.
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64, description: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: value <= limit,
            value,
            limit,
            description: description.into(),
        }
    }

    /// Passes when `value >= limit`.
    pub fn at_least(name: impl Into<String>, value: f64, limit: f64, description: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: value >= limit,
            value,
            limit,
            description: description.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub generator: Generator,
    pub experiment: Experiment,
    pub config: ExperimentConfig,
    pub results: BTreeMap<String, Quantity>,
    pub flags: BTreeMap<String, bool>,
    pub checks: Vec<Check>,
    pub files: Vec<String>,
    pub passed: bool,
}

impl RunReport {
    pub(crate) fn new(config: &ExperimentConfig) -> Self {
        Self {
            generator: Generator::current(),
            experiment: config.experiment,
            config: config.clone(),
            results: BTreeMap::new(),
            flags: BTreeMap::new(),
            checks: Vec::new(),
            files: Vec::new(),
            passed: true,
        }
    }

    pub(crate) fn result(&mut self, name: impl Into<String>, value: f64, unit: &'static str) {
        self.results.insert(name.into(), Quantity { value, unit });
    }

    pub(crate) fn check(&mut self, check: Check) {
        self.passed &= check.passed;
        self.checks.push(check);
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

/// A CSV file: header row plus rows in a fixed column order.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(file: &str, header: &[&'static str]) -> Self {
        Self {
            file: file.to_string(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: impl IntoIterator<Item = f64>) {
        let row: Vec<Cell> = row.into_iter().map(Cell::Num).collect();
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn push_cells(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Floats are written with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            for (k, cell) in row.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                match cell {
                    Cell::Num(v) => write!(out, "{v:.16e}").unwrap(),
                    Cell::Text(t) => out.push_str(t),
                }
            }
            out.push('\n');
        }
        out
    }
}
