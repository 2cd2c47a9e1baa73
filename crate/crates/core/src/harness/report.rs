use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;
use crate::solver::GridFunction;
use crate::stats::EstimateWithError;

use super::checks::Check;
use super::config::{ExperimentConfig, ExperimentId, GridFormat};

/// One line of `summary.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub quantity: String,
    pub params: String,
    pub estimate: f64,
    pub std_error: f64,
    pub target: Option<f64>,
    pub tolerance: String,
    pub pass: Option<bool>,
}

/// Everything an experiment produces before it is written out.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub experiment: ExperimentId,
    pub rows: Vec<SummaryRow>,
    /// One JSON object per replicate.
    pub raw: Vec<Value>,
    pub notes: Vec<String>,
    pub grid: Option<GridFunction>,
}

impl Outcome {
    pub fn new(experiment: ExperimentId) -> Self {
        Self { experiment, rows: Vec::new(), raw: Vec::new(), notes: Vec::new(), grid: None }
    }

    /// Adds a row judged by `check`.
    pub fn push(&mut self, quantity: &str, params: String, estimate: f64, std_error: f64, target: Option<f64>, check: &Check) {
        self.rows.push(SummaryRow {
            experiment: self.experiment.to_string(),
            quantity: quantity.into(),
            params,
            estimate,
            std_error,
            target,
            tolerance: check.describe(),
            pass: check.evaluate(estimate, std_error, target),
        });
    }

    pub fn push_estimate(&mut self, quantity: &str, params: String, e: &EstimateWithError, target: Option<f64>, check: &Check) {
        self.push(quantity, params, e.mean, e.std_error, target, check);
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn merge(&mut self, other: Outcome) {
        self.rows.extend(other.rows);
        self.raw.extend(other.raw);
        self.notes.extend(other.notes);
        if other.grid.is_some() {
            self.grid = other.grid;
        }
    }

    /// Rows that were judged and failed.
    pub fn failures(&self) -> Vec<&SummaryRow> {
        self.rows.iter().filter(|r| r.pass == Some(false)).collect()
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }

    pub fn row(&self, quantity: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.quantity == quantity)
    }

    pub fn summary_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["experiment", "quantity", "params", "estimate", "std_error", "target", "tolerance", "pass"])
            .map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.experiment.clone(),
                r.quantity.clone(),
                r.params.clone(),
                format!("{:.10e}", r.estimate),
                format!("{:.10e}", r.std_error),
                r.target.map(|t| format!("{t:.10e}")).unwrap_or_default(),
                r.tolerance.clone(),
                r.pass.map(|p| p.to_string()).unwrap_or_else(|| "n/a".into()),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| crate::Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn report_text(&self, cfg: &ExperimentConfig) -> Result<String> {
        let mut s = String::new();
        let _ = writeln!(s, "experiment: {}", self.experiment);
        let _ = writeln!(s, "seed: {}   dim: {}   replicates: {}", cfg.seed, cfg.dim, cfg.replicates);
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        let judged = self.rows.iter().filter(|r| r.pass.is_some()).count();
        let _ = writeln!(s, "verdict: {verdict} ({} of {judged} judged rows failed)", self.failures().len());
        s.push('\n');
        for r in &self.rows {
            let target = r.target.map(|t| format!("{t:.6}")).unwrap_or_else(|| "-".into());
            let pass = match r.pass {
                Some(true) => "pass",
                Some(false) => "FAIL",
                None => "",
            };
            let _ = writeln!(
                s,
                "{:<22} {:<34} {:>14.6} +- {:<10.3e} target {:>10}  [{}] {}",
                r.quantity, r.params, r.estimate, r.std_error, target, r.tolerance, pass
            );
        }
        if !self.notes.is_empty() {
            s.push_str("\nnotes:\n");
            for n in &self.notes {
                let _ = writeln!(s, "  - {n}");
            }
        }
        s.push_str("\nconfig:\n");
        s.push_str(&cfg.to_json()?);
        s.push('\n');
        Ok(s)
    }

    /// Writes `summary.csv`, `raw.jsonl`, `report.txt` and, when a grid
    /// function was produced, `w.csv` or `w.bin`.
    pub fn write(&self, cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("summary.csv"), self.summary_csv()?)?;
        let mut raw = BufWriter::new(File::create(dir.join("raw.jsonl"))?);
        for v in &self.raw {
            serde_json::to_writer(&mut raw, v)?;
            raw.write_all(b"\n")?;
        }
        raw.flush()?;
        fs::write(dir.join("report.txt"), self.report_text(cfg)?)?;
        if let Some(g) = &self.grid {
            match cfg.solver.format {
                GridFormat::Csv => g.write_csv(BufWriter::new(File::create(dir.join("w.csv"))?))?,
                GridFormat::Binary => g.write_binary(BufWriter::new(File::create(dir.join("w.bin"))?))?,
            }
        }
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> crate::Error {
    crate::Error::Format(e.to_string())
}

/// `key=value` pairs joined by `;`.
pub fn params(pairs: &[(&str, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
}
