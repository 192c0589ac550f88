//! Report emission: CSV tables with a fixed float format and JSON
//! summaries carrying the full config echo.
//!
//! Every float cell goes through `fmt_float`, which prints 17 significant
//! digits, enough to reproduce the double exactly, so a rerun with the
//! same config and seed is byte-identical.

use std::path::Path;

use paraflag::{Error, Result};
use serde::Serialize;
use serde_json::{json, Value};

/// 17 significant digits, scientific, `.` decimal separator.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone)]
pub struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, cells: Vec<String>) {
        assert_eq!(
            cells.len(),
            self.header.len(),
            "row width disagrees with the header"
        );
        self.rows.push(cells);
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| {
            Error::InvalidInput(format!("cannot write CSV {}: {e}", path.display()))
        })
    }
}

/// Assembles the summary document: experiment name, versions, the config
/// as parsed (audit trail), and experiment statistics. Keys serialize
/// sorted, so the byte stream is reproducible.
pub fn summary_document(
    experiment: &str,
    config: &impl Serialize,
    stats: Value,
) -> Result<Value> {
    let echo = serde_json::to_value(config)
        .map_err(|e| Error::InvalidInput(format!("config does not serialize: {e}")))?;
    Ok(json!({
        "experiment": experiment,
        "library_version": paraflag::VERSION,
        "harness_version": env!("CARGO_PKG_VERSION"),
        "config": echo,
        "stats": stats,
    }))
}

pub fn write_summary(
    path: &Path,
    experiment: &str,
    config: &impl Serialize,
    stats: Value,
) -> Result<()> {
    let doc = summary_document(experiment, config, stats)?;
    let text = serde_json::to_string_pretty(&doc)
        .map_err(|e| Error::InvalidInput(format!("summary does not serialize: {e}")))?;
    std::fs::write(path, text + "\n").map_err(|e| {
        Error::InvalidInput(format!("cannot write summary {}: {e}", path.display()))
    })
}

/// Median of a sample; even lengths average the middle pair.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    }
}

pub fn max(values: &[f64]) -> f64 {
    values.iter().fold(0.0f64, |a, &b| a.max(b))
}
