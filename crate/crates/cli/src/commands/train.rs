//! `train`: fit a detector on a manifest and save the model file.

use crate::config::RunConfig;
use crate::pipeline::{train_model, train_settings, LandmarkIndex, TrainMethod};
use clap::Args;
use eyecontact::dataset::{load_patches, write_training_log, Manifest};
use eyecontact::Result;
use std::path::PathBuf;

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Detection method to fit.
    #[arg(long, value_enum)]
    pub method: TrainMethod,
    /// Frame manifest of the training data.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Where to write the trained model.
    #[arg(long)]
    pub model_out: PathBuf,
    /// Training-log CSV; defaults to the model path with a .log.csv suffix.
    #[arg(long)]
    pub log_out: Option<PathBuf>,
    /// Master random seed.
    #[arg(long)]
    pub seed: u64,
    /// Run configuration file (train.*, picnn.*, peec.*, gazelock.* keys).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn run(args: &TrainArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::empty(),
    };
    let settings = train_settings(&mut config, args.method)?;
    config.finish()?;

    let manifest = Manifest::read(&args.manifest)?;
    let patches = load_patches(&args.manifest, &manifest)?;
    let landmarks = match args.method {
        TrainMethod::Peec | TrainMethod::Gazelock => {
            Some(LandmarkIndex::load_beside(&args.manifest)?)
        }
        _ => None,
    };

    let (model, log) =
        train_model(&manifest, &patches, landmarks.as_ref(), args.method, &settings, args.seed)?;
    model.save(&args.model_out)?;
    let log_path = args.log_out.clone().unwrap_or_else(|| {
        let mut name = args.model_out.as_os_str().to_os_string();
        name.push(".log.csv");
        PathBuf::from(name)
    });
    write_training_log(&log_path, &log)?;
    println!("saved {} model to {}", model.kind(), args.model_out.display());
    Ok(())
}
