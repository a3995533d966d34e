//! Report file writers: hstf-report/v1 JSON, ROC CSV, timing CSV. Every
//! file carries the config hash for provenance.

use std::io::Write;
use std::path::Path;

use super::experiment::ExperimentReport;
use super::metrics::RocCurve;
use super::timing::TimingRow;
use crate::error::Result;

pub fn write_report_json(path: &Path, reports: &[ExperimentReport]) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    if reports.len() == 1 {
        serde_json::to_writer_pretty(&mut file, &reports[0])?;
    } else {
        serde_json::to_writer_pretty(&mut file, reports)?;
    }
    file.write_all(b"\n")?;
    Ok(())
}

pub fn write_roc_csv(path: &Path, roc: &RocCurve, config_hash: &str) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    writeln!(file, "# config_hash: {config_hash}")?;
    writeln!(file, "fpr,tpr,lambda")?;
    for p in &roc.points {
        writeln!(file, "{},{},{}", p.fpr, p.tpr, p.lambda)?;
    }
    Ok(())
}

pub fn write_timing_csv(path: &Path, rows: &[TimingRow], config_hash: &str) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    writeln!(file, "# config_hash: {config_hash}")?;
    writeln!(file, "n,secs_per_epoch,peak_mem_bytes")?;
    for r in rows {
        writeln!(file, "{},{},{}", r.n, r.secs_per_epoch, r.peak_mem_bytes)?;
    }
    Ok(())
}

/// Console table comparing measured means against published reference
/// rows (informational).
pub fn reference_comparison(reports: &[ExperimentReport]) -> String {
    let mut out = String::new();
    out.push_str("scenario            measured P/R/F1 (%)      reference P/R/F1 (%)\n");
    for r in reports {
        let m = &r.mean;
        let measured = format!(
            "{:6.2} {:6.2} {:6.2}",
            m.precision * 100.0,
            m.recall * 100.0,
            m.f_beta * 100.0
        );
        let reference = match &r.reference {
            Some(rr) => format!("{:6.2} {:6.2} {:6.2}", rr.precision_pct, rr.recall_pct, rr.f1_pct),
            None => "     -      -      -".into(),
        };
        out.push_str(&format!("{:<18}  {measured}    {reference}\n", r.scenario.name));
    }
    out
}
