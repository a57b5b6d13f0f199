//! Evaluation reports: JSONL rows, a human-readable summary table, and
//! optional SVG plots. Nothing time-dependent goes in, so reports from
//! identical runs are byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonio;
use crate::util::round_sig12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub arm: String,
    pub task: String,
    pub rollouts: usize,
    /// Fraction of rollouts that completed the task without collisions.
    pub success_rate: f64,
    pub collision_free_rate: f64,
    pub mean_a_ep: f64,
    pub mean_j_ep: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn row(&self, arm: &str, task: &str) -> Option<&EvalRow> {
        self.rows.iter().find(|r| r.arm == arm && r.task == task)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            let value = serde_json::to_value(row).expect("row serializes");
            out.push_str(&jsonio::render_compact(&value));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<EvalReport> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: EvalRow = serde_json::from_str(line).map_err(|e| Error::Parse {
                path: format!("report line {}", i + 1).into(),
                message: e.to_string(),
            })?;
            rows.push(row);
        }
        Ok(EvalReport { rows })
    }

    /// Fixed-width summary table.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<12} {:<15} {:>8} {:>9} {:>11} {:>10} {:>10}",
            "arm", "task", "rollouts", "success", "coll.free", "mean A_ep", "mean J_ep"
        );
        let _ = writeln!(out, "{}", "-".repeat(80));
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<12} {:<15} {:>8} {:>9.3} {:>11.3} {:>10.4} {:>10.4}",
                r.arm, r.task, r.rollouts, r.success_rate, r.collision_free_rate,
                r.mean_a_ep, r.mean_j_ep
            );
        }
        out
    }
}

pub fn save_report(dir: &Path, report: &EvalReport) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let jsonl = dir.join("report.jsonl");
    std::fs::write(&jsonl, report.to_jsonl()).map_err(|e| Error::io(&jsonl, e))?;
    let table = dir.join("report.txt");
    std::fs::write(&table, report.to_table()).map_err(|e| Error::io(&table, e))?;
    Ok(())
}

pub fn load_report(dir: &Path) -> Result<EvalReport> {
    let path = dir.join("report.jsonl");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    EvalReport::from_jsonl(&text)
}

/// Aggregate rollout outcomes into one report row.
pub fn summarize_rollouts(
    arm: &str,
    task: &str,
    outcomes: &[crate::sim::rollout::RolloutOutcome],
) -> EvalRow {
    let n = outcomes.len().max(1) as f64;
    let success = outcomes.iter().filter(|o| o.success && o.collision_free).count() as f64;
    let coll_free = outcomes.iter().filter(|o| o.collision_free).count() as f64;
    EvalRow {
        arm: arm.to_string(),
        task: task.to_string(),
        rollouts: outcomes.len(),
        success_rate: round_sig12(success / n),
        collision_free_rate: round_sig12(coll_free / n),
        mean_a_ep: round_sig12(outcomes.iter().map(|o| o.a_ep).sum::<f64>() / n),
        mean_j_ep: round_sig12(outcomes.iter().map(|o| o.j_ep).sum::<f64>() / n),
    }
}
