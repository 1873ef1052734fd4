use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Result;
use serde::{Deserialize, Serialize};

use crate::config::Config;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    /// `"<="` or `">="`; the criterion passes when `value comparison threshold`.
    pub comparison: String,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    pub experiment: String,
    pub params_hash: String,
    pub seed: u64,
    pub threads: usize,
    pub deterministic: bool,
    pub passed: bool,
    pub criteria: Vec<Criterion>,
    pub metrics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    pub error: Option<String>,
    pub wall_time_s: f64,
    pub artifacts: Vec<PathBuf>,
    /// Full config, so a report can be replayed.
    pub config: Config,
}

/// Accumulates criteria, metrics and artifacts while an experiment runs.
#[derive(Debug, Default)]
pub struct Findings {
    pub criteria: Vec<Criterion>,
    pub metrics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    pub artifacts: Vec<PathBuf>,
}

impl Findings {
    pub fn at_most(&mut self, name: &str, value: f64, threshold: f64) {
        self.push(name, value, "<=", threshold, value <= threshold);
    }

    pub fn at_least(&mut self, name: &str, value: f64, threshold: f64) {
        self.push(name, value, ">=", threshold, value >= threshold);
    }

    fn push(&mut self, name: &str, value: f64, comparison: &str, threshold: f64, passed: bool) {
        self.metrics.insert(name.to_string(), value);
        self.criteria.push(Criterion {
            name: name.to_string(),
            passed,
            value,
            comparison: comparison.to_string(),
            threshold,
        });
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn artifact(&mut self, path: PathBuf) -> PathBuf {
        self.artifacts.push(path.clone());
        path
    }
}

impl Report {
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("report.json");
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }
}
