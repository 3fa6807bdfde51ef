use std::path::{Path, PathBuf};

use clap::Args;
use wmbench::bench::{category_correlation, table_csv, EvalReport};
use wmbench::calibrate::roc;
use wmbench::wmgen::Family;

use super::Globals;
use crate::error::{CliError, Result};
use crate::io::{emit, read_json, write_atomic};

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Evaluation reports, as `path` or `label=path`; the label defaults to the file stem.
    #[arg(required = true)]
    pub reports: Vec<String>,
    /// Write ROC points (method, auc, threshold, fpr, tpr) here.
    #[arg(long)]
    pub roc: Option<PathBuf>,
    /// Write per-category task GM correlations here.
    #[arg(long)]
    pub correlation: Option<PathBuf>,
}

struct Labelled {
    label: String,
    report: EvalReport,
}

fn parse_report_arg(arg: &str) -> (String, PathBuf) {
    match arg.split_once('=') {
        Some((label, path)) if !label.is_empty() => (label.to_string(), PathBuf::from(path)),
        _ => {
            let path = PathBuf::from(arg);
            let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| arg.into());
            (label, path)
        }
    }
}

fn strength_label(t: Option<f64>) -> String {
    t.map_or_else(|| "uncalibrated".to_string(), |t| format!("{t:.2}"))
}

/// One CSV block per target strength; baseline rows repeat in every block.
fn merged_table(reports: &[Labelled]) -> String {
    let (baselines, marked): (Vec<&Labelled>, Vec<&Labelled>) =
        reports.iter().partition(|r| r.report.family == Family::None);
    let mut strengths: Vec<Option<f64>> = Vec::new();
    for r in &marked {
        if !strengths.iter().any(|s| s.map(f64::to_bits) == r.report.target_tpr.map(f64::to_bits)) {
            strengths.push(r.report.target_tpr);
        }
    }
    // Strongest first; uncalibrated runs last.
    strengths.sort_by(|a, b| match (a, b) {
        (Some(x), Some(y)) => y.total_cmp(x),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });

    let base_rows = || baselines.iter().map(|b| (b.label.clone(), &b.report));
    let mut out = String::new();
    if strengths.is_empty() {
        out.push_str("# baseline\n");
        out.push_str(&table_csv(&base_rows().collect::<Vec<_>>()));
        return out;
    }
    for s in strengths {
        let mut rows: Vec<(String, &EvalReport)> = base_rows().collect();
        rows.extend(
            marked
                .iter()
                .filter(|r| r.report.target_tpr.map(f64::to_bits) == s.map(f64::to_bits))
                .map(|r| (r.label.clone(), &r.report)),
        );
        out.push_str(&format!("# strength={}\n", strength_label(s)));
        out.push_str(&table_csv(&rows));
    }
    out
}

/// Fills missing Drop values from a baseline over the same task file.
fn fill_drops(reports: &mut [Labelled]) -> Result<()> {
    let baselines: Vec<EvalReport> =
        reports.iter().filter(|r| r.report.family == Family::None).map(|r| r.report.clone()).collect();
    for r in reports.iter_mut().filter(|r| r.report.family != Family::None && r.report.overall.drop.is_none()) {
        if let Some(b) = baselines.iter().find(|b| b.metadata.tasks_hash == r.report.metadata.tasks_hash) {
            r.report.apply_baseline(b)?;
        }
    }
    Ok(())
}

fn roc_csv(reports: &[Labelled]) -> Result<String> {
    let mut out = String::from("method,auc,threshold,fpr,tpr\n");
    for r in reports.iter().filter(|r| r.report.family != Family::None) {
        let (pos, neg) = (r.report.positive_z(), r.report.negative_z());
        if pos.is_empty() || neg.is_empty() {
            log::warn!("{}: no detection scores, skipped in ROC output", r.label);
            continue;
        }
        let curve = roc(&pos, &neg)?;
        log::info!("{}: AUC {:.4}", r.label, curve.auc);
        for p in &curve.points {
            out.push_str(&format!("{},{},{},{},{}\n", r.label.replace(',', ";"), curve.auc, p.threshold, p.fpr, p.tpr));
        }
    }
    Ok(out)
}

fn correlation_csv(reports: &[Labelled]) -> Result<String> {
    let refs: Vec<&EvalReport> = reports.iter().map(|r| &r.report).collect();
    let mut out = String::from("category,task_a,task_b,r\n");
    for c in category_correlation(&refs)? {
        let r = c.r.map_or_else(|| "--".to_string(), |r| format!("{r:.4}"));
        out.push_str(&format!("{},{},{},{}\n", c.category, c.task_a, c.task_b, r));
    }
    Ok(out)
}

pub fn run(args: &ReportArgs, g: &Globals) -> Result<()> {
    let mut reports = Vec::with_capacity(args.reports.len());
    for arg in &args.reports {
        let (label, path) = parse_report_arg(arg);
        let report: EvalReport = read_json(&path)?;
        if report.manifest.as_ref().is_some_and(|m| m.uncalibrated) {
            log::warn!("{label} was evaluated without calibration provenance");
        }
        reports.push(Labelled { label, report });
    }
    fill_drops(&mut reports)?;
    if let Some(path) = &args.roc {
        write_atomic(path, roc_csv(&reports)?.as_bytes())?;
    }
    if let Some(path) = &args.correlation {
        let csv = correlation_csv(&reports).map_err(|e| CliError::data(Path::new(path), e.to_string()))?;
        write_atomic(path, csv.as_bytes())?;
    }
    emit(g.out.as_deref(), merged_table(&reports).as_bytes())
}
