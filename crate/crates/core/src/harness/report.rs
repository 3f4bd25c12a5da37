use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub version: String,
    pub seeds: Vec<u64>,
}

/// A named CSV table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub csv: String,
}

impl Table {
    pub fn from_rows<T: Serialize>(name: &str, rows: &[T]) -> Result<Self> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        Ok(Table {
            name: name.into(),
            csv: String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))?,
        })
    }
}

/// Pass or fail of one acceptance check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub criterion: String,
    pub check: String,
    pub measured: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Verdict {
    pub fn new(criterion: &str, check: impl Into<String>, measured: f64, threshold: f64, passed: bool) -> Self {
        Verdict {
            criterion: criterion.into(),
            check: check.into(),
            measured,
            threshold,
            passed,
        }
    }

    /// `measured <= threshold`.
    pub fn at_most(criterion: &str, check: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self::new(criterion, check, measured, threshold, measured <= threshold)
    }

    /// `measured >= threshold`.
    pub fn at_least(criterion: &str, check: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self::new(criterion, check, measured, threshold, measured >= threshold)
    }

    pub fn line(&self) -> String {
        format!(
            "{} [criterion {}] {}: measured {:e}, threshold {:e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.criterion,
            self.check,
            self.measured,
            self.threshold
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub manifest: Manifest,
    pub tables: Vec<Table>,
    pub verdicts: Vec<Verdict>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn verdicts_for(&self, criterion: &str) -> Vec<&Verdict> {
        self.verdicts.iter().filter(|v| v.criterion == criterion).collect()
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `report.json` and one `<name>.csv` per table.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), self.to_json()?)?;
        for t in &self.tables {
            fs::write(dir.join(format!("{}.csv", t.name)), &t.csv)?;
        }
        Ok(())
    }
}
