//! Report JSON envelopes and plot-ready CSV tables.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::atomic_write;
use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::estimate::{ExperimentTable, Stat};

/// Every command writes one of these. Two runs of the same command with the
/// same inputs produce identical bytes except for `timestamp`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report<T> {
    pub command: String,
    pub timestamp: String,
    /// The fully resolved configuration the command ran with.
    pub config: ExperimentConfig,
    pub result: T,
}

pub fn report_to_string<T: Serialize>(report: &Report<T>) -> Result<String> {
    let mut text = serde_json::to_string_pretty(report)
        .map_err(|e| Error::InvalidInput(format!("report does not serialize: {e}")))?;
    text.push('\n');
    Ok(text)
}

pub fn save_report<T: Serialize>(report: &Report<T>, path: &Path) -> Result<()> {
    atomic_write(path, report_to_string(report)?.as_bytes())
}

fn csv_text(rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

pub const EXPERIMENT_COLUMNS: [&str; 11] = [
    "size",
    "method",
    "runs",
    "vertex_rmse_mean",
    "vertex_rmse_var",
    "traj_pos_error_mean",
    "traj_pos_error_var",
    "traj_rot_error_mean",
    "traj_rot_error_var",
    "penetration_error_mean",
    "penetration_error_var",
];

/// One row per (size, method) cell: metric means and variances across seeds.
/// Vertex RMSE is blank when no ground truth was known.
pub fn experiment_csv(table: &ExperimentTable) -> String {
    let stat = |s: Option<Stat>| match s {
        Some(s) => [s.mean.to_string(), s.variance.to_string()],
        None => [String::new(), String::new()],
    };
    let mut rows = vec![EXPERIMENT_COLUMNS.iter().map(|s| s.to_string()).collect()];
    for c in &table.cells {
        let mut row = vec![c.size.to_string(), c.method.name().to_string(), c.runs.to_string()];
        for s in [c.vertex_rmse, Some(c.traj_pos_error), Some(c.traj_rot_error), Some(c.penetration_error)] {
            row.extend(stat(s));
        }
        rows.push(row);
    }
    csv_text(rows)
}

/// `rank,id,value` rows, best first.
pub fn ranking_csv(ids: &[String], values: &[f64]) -> String {
    let mut rows = vec![vec!["rank".to_string(), "id".into(), "value".into()]];
    for (i, (id, v)) in ids.iter().zip(values).enumerate() {
        rows.push(vec![(i + 1).to_string(), id.clone(), v.to_string()]);
    }
    csv_text(rows)
}
