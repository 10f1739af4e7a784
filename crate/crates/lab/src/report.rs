//! Report bundle: predictions CSV and the derived tables.
//!
//! `preds.csv` is the single source for every table, and all floats are
//! written with the shortest round-trip formatting, so a (config, seed)
//! pair reproduces each file byte for byte. No timings or environment
//! details appear in any artifact.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use radlab_core::selpred::{
    self, CoverageThreshold, RiskCoveragePoint, ScoredPrediction, SnrBinRecall,
};

use crate::checkpoint::{self, Checkpoint};
use crate::config::Variant;
use crate::data;
use crate::eval::{self, PredRow};
use crate::LabError;

/// SNR ceiling (dB) for the low-SNR ROC cut.
pub const LOW_SNR_DB: f64 = -10.0;

pub struct ReportPaths {
    pub preds: PathBuf,
    pub recall_table: PathBuf,
    pub risk_coverage: PathBuf,
    pub snr_table: PathBuf,
    /// Present only when the low-SNR subset exists and carries both
    /// correct and incorrect predictions.
    pub roc_low_snr: Option<PathBuf>,
    pub summary: PathBuf,
}

pub fn write_preds(path: &Path, rows: &[PredRow]) -> Result<(), LabError> {
    let mut out = String::from("index,task,snr_db,true_label,pred_label,uncertainty\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.index, r.task_id, r.snr_db, r.true_label, r.predicted_label, r.uncertainty
        )
        .expect("string write");
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_preds(path: &Path) -> Result<Vec<PredRow>, LabError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| LabError::Data(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(LabError::Data(format!(
                "{}:{}: expected 6 fields",
                path.display(),
                lineno + 1
            )));
        }
        let parse_err =
            |e| LabError::Data(format!("{}:{}: {e}", path.display(), lineno + 1));
        rows.push(PredRow {
            index: fields[0].parse().map_err(|e: std::num::ParseIntError| parse_err(e.to_string()))?,
            task_id: fields[1].parse().map_err(|e: std::num::ParseIntError| parse_err(e.to_string()))?,
            snr_db: fields[2].parse().map_err(|e: std::num::ParseFloatError| parse_err(e.to_string()))?,
            true_label: fields[3].parse().map_err(|e: std::num::ParseIntError| parse_err(e.to_string()))?,
            predicted_label: fields[4].parse().map_err(|e: std::num::ParseIntError| parse_err(e.to_string()))?,
            uncertainty: fields[5].parse().map_err(|e: std::num::ParseFloatError| parse_err(e.to_string()))?,
        });
    }
    if rows.is_empty() {
        return Err(LabError::Data(format!("{}: no prediction rows", path.display())));
    }
    Ok(rows)
}

/// Per-task recall plus the task average, from the rows' task tags.
/// Returns (per-task recall indexed by task id, average).
pub fn task_recalls(rows: &[PredRow], n_tasks: usize) -> Result<(Vec<f64>, f64), LabError> {
    let mut correct = vec![0usize; n_tasks];
    let mut totals = vec![0usize; n_tasks];
    for r in rows {
        if r.task_id >= n_tasks {
            return Err(LabError::Data(format!("prediction row for unknown task {}", r.task_id)));
        }
        totals[r.task_id] += 1;
        correct[r.task_id] += r.is_correct() as usize;
    }
    if totals.iter().any(|&n| n == 0) {
        return Err(LabError::Data("a task has no evaluated samples".into()));
    }
    let recalls: Vec<f64> =
        correct.iter().zip(&totals).map(|(&c, &n)| c as f64 / n as f64).collect();
    let avg = recalls.iter().sum::<f64>() / recalls.len() as f64;
    Ok((recalls, avg))
}

fn write_recall_table(
    path: &Path,
    variant: Variant,
    recalls: &[f64],
    avg: f64,
) -> Result<(), LabError> {
    let mut header = String::from("model");
    for t in 0..recalls.len() {
        write!(header, ",task{t}").expect("string write");
    }
    header.push_str(",task_avg\n");
    let mut row = format!("{variant}");
    for r in recalls {
        write!(row, ",{r}").expect("string write");
    }
    writeln!(row, ",{avg}").expect("string write");
    std::fs::write(path, header + &row)?;
    Ok(())
}

pub fn write_risk_coverage(path: &Path, curve: &[RiskCoveragePoint]) -> Result<(), LabError> {
    let mut out = String::from("tau,coverage,selective_recall\n");
    for p in curve {
        writeln!(out, "{},{},{}", p.tau_select, p.coverage, p.selective_recall)
            .expect("string write");
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn write_snr_table(path: &Path, bins: &[SnrBinRecall]) -> Result<(), LabError> {
    let mut out = String::from("snr_db,n,base_recall,selective_recall,coverage\n");
    for b in bins {
        let sel = b.selective_recall.map(|r| r.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{},{}", b.snr_db, b.n, b.base_recall, sel, b.coverage)
            .expect("string write");
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[derive(Serialize)]
struct RunSummary {
    variant: Variant,
    config_hash: String,
    seed: u64,
    cumulative_alpha: f64,
    n_test: usize,
    task_recall: Vec<f64>,
    task_avg_recall: f64,
    coverage_target: f64,
    tau_star: f64,
    realized_coverage: f64,
    selective_recall_overall: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    low_snr_auc: Option<f64>,
}

/// Writes the full bundle next to `preds.csv`'s directory. `rows` must be
/// the evaluation of the checkpoint on the union of the test splits.
pub fn write_reports(
    run_dir: &Path,
    ckpt: &Checkpoint,
    rows: &[PredRow],
) -> Result<ReportPaths, LabError> {
    let m = &ckpt.manifest;
    let preds_path = run_dir.join("preds.csv");
    write_preds(&preds_path, rows)?;

    let n_tasks = m.label_groups.len();
    let (recalls, avg) = task_recalls(rows, n_tasks)?;
    let recall_path = run_dir.join("recall_table.csv");
    write_recall_table(&recall_path, m.variant, &recalls, avg)?;

    let scored: Vec<ScoredPrediction> = rows.iter().map(|r| r.scored()).collect();
    let curve = selpred::sweep_thresholds(&scored)?;
    let rc_path = run_dir.join("risk_coverage.csv");
    write_risk_coverage(&rc_path, &curve)?;

    let CoverageThreshold { tau, realized_coverage, .. } =
        selpred::threshold_for_coverage(&curve, m.coverage_target)?;
    let bins = selpred::snr_binned_recall(&scored, tau, m.snr_bin_width_db)?;
    let snr_path = run_dir.join("snr_table.csv");
    write_snr_table(&snr_path, &bins)?;

    let low: Vec<ScoredPrediction> =
        scored.iter().filter(|p| p.snr_db <= LOW_SNR_DB).copied().collect();
    let mut low_snr_auc = None;
    let mut roc_path = None;
    if !low.is_empty() {
        let (roc, auc) = selpred::uncertainty_roc(&low)?;
        if let Some(auc) = auc {
            low_snr_auc = Some(auc);
            let path = run_dir.join("roc_low_snr.csv");
            let mut out = String::from("fpr,tpr\n");
            for p in &roc {
                writeln!(out, "{},{}", p.fpr, p.tpr).expect("string write");
            }
            std::fs::write(&path, out)?;
            roc_path = Some(path);
        }
    }

    let (sel_overall, _) = selpred::selective_metrics(&scored, tau)?;
    let summary = RunSummary {
        variant: m.variant,
        config_hash: m.config_hash.clone(),
        seed: m.seed,
        cumulative_alpha: m.cumulative_alpha,
        n_test: rows.len(),
        task_recall: recalls,
        task_avg_recall: avg,
        coverage_target: m.coverage_target,
        tau_star: tau,
        realized_coverage,
        selective_recall_overall: sel_overall.unwrap_or(0.0),
        low_snr_auc,
    };
    let summary_path = run_dir.join("run_summary.toml");
    let text = toml::to_string(&summary).map_err(|e| LabError::Data(e.to_string()))?;
    std::fs::write(&summary_path, text)?;

    Ok(ReportPaths {
        preds: preds_path,
        recall_table: recall_path,
        risk_coverage: rc_path,
        snr_table: snr_path,
        roc_low_snr: roc_path,
        summary: summary_path,
    })
}

/// End-to-end report for a finished run directory: loads `ckpt.rlck`,
/// evaluates the archived test splits, and writes the bundle.
pub fn report_run(run_dir: &Path) -> Result<ReportPaths, LabError> {
    let ckpt = checkpoint::load(&run_dir.join("ckpt.rlck"))?;
    let n_tasks = ckpt.manifest.label_groups.len();
    let data_dir = run_dir.join("data");
    let mut frames = Vec::new();
    for t in 0..n_tasks {
        frames.extend(data::read_frames(&data::frames_path(&data_dir, t, "test"))?);
    }
    let rows = eval::evaluate(&ckpt, &frames)?;
    write_reports(run_dir, &ckpt, &rows)
}
