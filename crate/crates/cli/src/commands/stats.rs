//! `stats`: dataset distribution summaries — availability rates, face
//! position and head pose histograms.

use crate::pipeline::LandmarkIndex;
use clap::Args;
use eyecontact::dataset::{load_patch, write_histogram, write_report, Manifest};
use eyecontact::eval::{availability_rates, dataset_stats, FrameStat, Histogram};
use eyecontact::numerics::write_atomic;
use eyecontact::plot::BarPlot;
use eyecontact::Result;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const AVAILABILITY_HEADER: &str =
    "group,sessions,face_mean,face_std,landmark_mean,landmark_std";

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Frame manifest to summarize.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory for the CSV and SVG files.
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn write_histogram_pair(dir: &Path, name: &str, axis: &str, hist: &Histogram) -> Result<()> {
    write_histogram(&dir.join(format!("{name}.csv")), hist)?;
    BarPlot::new(name, axis, hist.rows()).save(&dir.join(format!("{name}.svg")))
}

pub fn run(args: &StatsArgs) -> Result<()> {
    let manifest = Manifest::read(&args.manifest)?;
    let landmarks = LandmarkIndex::load_beside(&args.manifest).ok();

    let mut rows = Vec::with_capacity(manifest.rows.len());
    for row in &manifest.rows {
        // Face center: the eye midpoint in image-normalized coordinates,
        // when the frame has both an image and landmarks.
        let center = match (&landmarks, row.image_path.is_empty()) {
            (Some(index), false) => index.get(&row.session_id, row.frame_index).and_then(|lm| {
                let patch = load_patch(&args.manifest, row).ok()?;
                let cx = (lm.left.0 + lm.right.0) / 2.0 / patch.width() as f64;
                let cy = (lm.left.1 + lm.right.1) / 2.0 / patch.height() as f64;
                Some((cx, cy))
            }),
            _ => None,
        };
        rows.push(FrameStat { label: row.label, center, pose: row.pose });
    }
    let stats = dataset_stats(&rows);

    std::fs::create_dir_all(&args.out_dir)?;
    write_report(
        &args.out_dir.join("summary.csv"),
        &[
            ("frames".into(), stats.frames as f64),
            ("positives".into(), stats.positives as f64),
            ("positive_rate".into(), stats.positives as f64 / stats.frames.max(1) as f64),
            ("with_center".into(), stats.with_center as f64),
            ("with_pose".into(), stats.with_pose as f64),
        ],
    )?;
    write_histogram_pair(&args.out_dir, "position_x", "normalized x", &stats.position_x)?;
    write_histogram_pair(&args.out_dir, "position_y", "normalized y", &stats.position_y)?;
    write_histogram_pair(&args.out_dir, "yaw", "degrees", &stats.yaw)?;
    write_histogram_pair(&args.out_dir, "pitch", "degrees", &stats.pitch)?;
    write_histogram_pair(&args.out_dir, "roll", "degrees", &stats.roll)?;

    let groups = availability_rates(&manifest.availability())?;
    let mut out = String::from(AVAILABILITY_HEADER);
    out.push('\n');
    for g in &groups {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            g.group, g.sessions, g.face_mean, g.face_std, g.landmark_mean, g.landmark_std
        );
    }
    write_atomic(&args.out_dir.join("availability.csv"), out.as_bytes())?;

    println!(
        "{} frames, {:.1}% positive, {:.1}% with landmarks; wrote summaries to {}",
        stats.frames,
        100.0 * stats.positives as f64 / stats.frames.max(1) as f64,
        100.0 * groups[0].landmark_mean,
        args.out_dir.display()
    );
    Ok(())
}
