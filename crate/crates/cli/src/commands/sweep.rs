//! `sweep`: retrain on growing session subsets and chart the effect of
//! training-set size on detection quality.

use crate::config::RunConfig;
use crate::pipeline::{train_model, train_settings, LandmarkIndex, TrainMethod};
use clap::Args;
use eyecontact::dataset::{load_patches, scored_frames, write_sweep_curve, Manifest};
use eyecontact::eval::{nested_session_subsets, sweep_thresholds};
use eyecontact::imaging::FacePatch;
use eyecontact::numerics::Rng;
use eyecontact::plot::{LinePlot, Series};
use eyecontact::{Error, Result};
use std::collections::BTreeSet;
use std::path::PathBuf;

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Training pool manifest.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Held-out test manifest.
    #[arg(long)]
    pub test_manifest: PathBuf,
    /// Method to retrain at every size.
    #[arg(long, value_enum)]
    pub method: TrainMethod,
    /// Ascending session counts, e.g. `5,15,30`.
    #[arg(long, value_delimiter = ',')]
    pub counts: Vec<usize>,
    /// Master random seed.
    #[arg(long)]
    pub seed: u64,
    /// Output directory; receives sweep.csv and sweep.svg.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Run configuration file (same keys as `train`).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Subset-selection substream, distinct from the per-size training seeds.
const SUBSET_STREAM: u64 = 1 << 16;

pub fn run(args: &SweepArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::empty(),
    };
    let settings = train_settings(&mut config, args.method)?;
    config.finish()?;
    if args.counts.is_empty() {
        return Err(Error::Config("at least one session count is required".into()));
    }

    let manifest = Manifest::read(&args.manifest)?;
    let patches = load_patches(&args.manifest, &manifest)?;
    let test_manifest = Manifest::read(&args.test_manifest)?;
    let test_patches = load_patches(&args.test_manifest, &test_manifest)?;
    let needs_landmarks = matches!(args.method, TrainMethod::Peec | TrainMethod::Gazelock);
    let landmarks = needs_landmarks
        .then(|| LandmarkIndex::load_beside(&args.manifest))
        .transpose()?;
    let test_landmarks = needs_landmarks
        .then(|| LandmarkIndex::load_beside(&args.test_manifest))
        .transpose()?;

    let session_ids: Vec<String> =
        manifest.session_metas().into_iter().map(|m| m.session_id).collect();
    let master = Rng::new(args.seed);
    let subsets =
        nested_session_subsets(&session_ids, &args.counts, &master.substream(SUBSET_STREAM))?;

    let mut curve = Vec::with_capacity(subsets.len());
    for (subset, &count) in subsets.iter().zip(&args.counts) {
        let keep: BTreeSet<&str> = subset.iter().map(|s| s.as_str()).collect();
        let mut rows = Vec::new();
        let mut subset_patches: Vec<Option<FacePatch>> = Vec::new();
        for (row, patch) in manifest.rows.iter().zip(&patches) {
            if keep.contains(row.session_id.as_str()) {
                rows.push(row.clone());
                subset_patches.push(patch.clone());
            }
        }
        let subset_manifest = Manifest::new(rows)?;
        log::info!("sweep: training on {count} sessions ({} frames)", subset_manifest.rows.len());
        // Same training seed at every size, so the only variable is the data.
        let (model, _) = train_model(
            &subset_manifest,
            &subset_patches,
            landmarks.as_ref(),
            args.method,
            &settings,
            args.seed,
        )?;
        let scores = model.score_rows(&test_manifest, &test_patches, test_landmarks.as_ref())?;
        let report = sweep_thresholds(&scored_frames(&scores))?;
        let best = report.best_f1_point();
        curve.push((count, best.precision, best.recall));
    }

    std::fs::create_dir_all(&args.out_dir)?;
    write_sweep_curve(&args.out_dir.join("sweep.csv"), &curve)?;
    let as_points = |f: fn(&(usize, f64, f64)) -> f64| -> Vec<(f64, f64)> {
        curve.iter().map(|row| (row.0 as f64, f(row))).collect()
    };
    LinePlot::new("Training-set size", "sessions", "metric at best F1")
        .with_series(Series::new("precision", as_points(|r| r.1)))
        .with_series(Series::new("recall", as_points(|r| r.2)))
        .save(&args.out_dir.join("sweep.svg"))?;

    for (count, precision, recall) in &curve {
        println!("{count} sessions: precision {precision:.4}, recall {recall:.4}");
    }
    Ok(())
}
