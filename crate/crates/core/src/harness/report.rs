use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::runner::AuditReport;

/// Where the wall-clock sidecar of `report.json` goes: `report.timings.json`.
pub fn timings_path(path: &Path) -> PathBuf {
    path.with_extension("timings.json")
}

/// Writes the deterministic report and, next to it, the per-phase timings.
pub fn write_report(report: &AuditReport, path: &Path) -> Result<()> {
    std::fs::write(path, report.to_json_deterministic()? + "\n")?;
    if let Some(t) = &report.timings {
        std::fs::write(timings_path(path), serde_json::to_string_pretty(t)? + "\n")?;
    }
    Ok(())
}

pub fn read_report(path: &Path) -> Result<AuditReport> {
    let text = std::fs::read_to_string(path)?;
    let mut r: AuditReport = serde_json::from_str(&text)?;
    let tp = timings_path(path);
    if tp.exists() {
        r.timings = Some(serde_json::from_str(&std::fs::read_to_string(tp)?)?);
    }
    Ok(r)
}
