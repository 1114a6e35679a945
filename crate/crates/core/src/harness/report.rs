use std::fs;
use std::path::{Path, PathBuf};

use super::compare::Comparison;
use super::run::RunReport;
use crate::error::Result;
use crate::rules::format_rules;

pub const REPORT_FILE: &str = "report.json";
pub const METRICS_FILE: &str = "metrics.txt";
pub const RULES_FILE: &str = "rules.txt";
pub const TIMING_FILE: &str = "timing.txt";
pub const MODEL_FILE: &str = "model.txt";

pub fn report_json(report: &RunReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

pub fn comparison_json(comparison: &Comparison) -> Result<String> {
    let mut s = serde_json::to_string_pretty(comparison)?;
    s.push('\n');
    Ok(s)
}

pub fn metrics_text(report: &RunReport) -> String {
    let rounds = report.rounds.len();
    format!(
        "rounds: {rounds} ({:?})\nfinal validation model accuracy: {:.2}%\n\n{}",
        report.stop_reason,
        report.final_validation_model_accuracy * 100.0,
        report.final_metrics
    )
}

/// Writes the structured report, the metrics table, the global rules in
/// textual form, the global model checkpoint, and the wall-clock time (kept
/// apart so the other files are reproducible). Returns the report path.
pub fn write_report(report: &RunReport, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(REPORT_FILE);
    fs::write(&path, report_json(report)?)?;
    fs::write(dir.join(METRICS_FILE), metrics_text(report))?;
    fs::write(
        dir.join(RULES_FILE),
        format_rules(report.final_rules.iter().flatten(), &report.schema),
    )?;
    fs::write(dir.join(MODEL_FILE), report.final_params.to_checkpoint())?;
    fs::write(
        dir.join(TIMING_FILE),
        format!("wall_clock_seconds = {:.3}\n", report.wall_clock.as_secs_f64()),
    )?;
    Ok(path)
}
