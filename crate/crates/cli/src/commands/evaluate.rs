//! `eval`: summarize a score file into metrics, a PR curve and a plot.

use clap::Args;
use eyecontact::dataset::{read_scores, scored_frames, write_pr_curve, write_report};
use eyecontact::eval::{sweep_thresholds, SweepReport};
use eyecontact::plot::{LinePlot, Series};
use eyecontact::Result;
use std::path::{Path, PathBuf};

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Score CSV produced by `predict`.
    #[arg(long)]
    pub scores: PathBuf,
    /// Output directory; receives report.csv, pr_curve.csv and pr_curve.svg.
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// The `metric,value` rows of the evaluation report.
pub fn report_rows(
    report: &SweepReport,
    frames: usize,
    positives: usize,
    abstentions: usize,
) -> Vec<(String, f64)> {
    let f1 = report.best_f1_point();
    let mcc = report.best_mcc_point();
    vec![
        ("frames".into(), frames as f64),
        ("positives".into(), positives as f64),
        ("abstentions".into(), abstentions as f64),
        ("auc_pr".into(), report.average_precision),
        ("max_f1".into(), f1.f1),
        ("max_f1_threshold".into(), f1.threshold),
        ("precision_at_max_f1".into(), f1.precision),
        ("recall_at_max_f1".into(), f1.recall),
        ("max_mcc".into(), mcc.mcc),
        ("max_mcc_threshold".into(), mcc.threshold),
    ]
}

/// Writes the three evaluation artifacts for an already-computed sweep.
pub fn write_outputs(
    out_dir: &Path,
    report: &SweepReport,
    frames: usize,
    positives: usize,
    abstentions: usize,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    write_report(&out_dir.join("report.csv"), &report_rows(report, frames, positives, abstentions))?;
    write_pr_curve(&out_dir.join("pr_curve.csv"), report)?;
    let curve: Vec<(f64, f64)> = report.points.iter().map(|p| (p.recall, p.precision)).collect();
    LinePlot::new(
        format!("Precision-recall (AP {:.3})", report.average_precision),
        "recall",
        "precision",
    )
    .with_series(Series::new("", curve))
    .with_ranges((0.0, 1.0), (0.0, 1.0))
    .save(&out_dir.join("pr_curve.svg"))
}

pub fn run(args: &EvalArgs) -> Result<()> {
    let rows = read_scores(&args.scores)?;
    let frames = scored_frames(&rows);
    let report = sweep_thresholds(&frames)?;
    let positives = frames.iter().filter(|f| f.truth).count();
    let abstentions = frames.iter().filter(|f| f.score.is_none()).count();
    write_outputs(&args.out_dir, &report, frames.len(), positives, abstentions)?;
    println!(
        "AUC-PR {:.4}, max F1 {:.4} at threshold {:.4} ({} frames, {abstentions} abstentions)",
        report.average_precision,
        report.best_f1_point().f1,
        report.best_f1_point().threshold,
        frames.len()
    );
    Ok(())
}
