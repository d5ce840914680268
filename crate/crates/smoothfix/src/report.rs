//! Report files emitted by every task run: an assertion table as CSV and
//! a JSON record of how the run was produced.
//!
//! The CSV is a pure function of config and seed (timing and worker count
//! stay in the JSON), which is what makes rerun-equality checks byte-level.

use crate::Result;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

/// One assertion line: what was measured, what it should be, how noisy
/// the measurement is, and whether it passed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    pub estimate: f64,
    pub target: f64,
    pub stderr: f64,
    pub z: f64,
    pub pass: bool,
}

impl ReportRow {
    /// An informational row: recorded, never failing.
    pub fn info(name: impl Into<String>, estimate: f64) -> Self {
        ReportRow {
            name: name.into(),
            estimate,
            target: estimate,
            stderr: 0.0,
            z: 0.0,
            pass: true,
        }
    }
}

pub fn write_report_csv(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let mut s = String::from("name,estimate,target,stderr,z,pass\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.name, r.estimate, r.target, r.stderr, r.z, r.pass
        );
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Everything needed to reproduce or audit a run; not covered by the
/// byte-equality contract (it records timing and worker count).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunMeta {
    pub task: String,
    pub artifact_version: String,
    pub workers: usize,
    pub wall_secs: f64,
    pub warnings: Vec<String>,
    /// The config document exactly as loaded.
    pub config: serde_json::Value,
    /// Task parameters after defaulting; no hidden defaults.
    pub resolved_params: serde_json::Value,
}

pub fn write_meta_json(path: &Path, meta: &RunMeta) -> Result<()> {
    std::fs::write(path, serde_json::to_vec_pretty(meta)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout_is_stable() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.csv");
        let rows = vec![
            ReportRow {
                name: "alpha".into(),
                estimate: 1.0,
                target: 1.0,
                stderr: 0.0,
                z: 0.0,
                pass: true,
            },
            ReportRow::info("nodes_total", 32.0),
        ];
        write_report_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "name,estimate,target,stderr,z,pass\nalpha,1,1,0,0,true\nnodes_total,32,32,0,0,true\n"
        );
    }

    #[test]
    fn meta_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("meta.json");
        let meta = RunMeta {
            task: "find-alpha".into(),
            artifact_version: "0.1.0".into(),
            workers: 4,
            wall_secs: 0.25,
            warnings: vec!["depth cap reached".into()],
            config: serde_json::json!({"master_seed": 7}),
            resolved_params: serde_json::json!({"budget": 1000}),
        };
        write_meta_json(&path, &meta).unwrap();
        let back: RunMeta =
            serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
        assert_eq!(back.task, meta.task);
        assert_eq!(back.warnings, meta.warnings);
        assert_eq!(back.resolved_params, meta.resolved_params);
    }
}
