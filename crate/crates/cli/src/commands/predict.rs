//! `predict`: score every manifest frame with a trained model.

use crate::pipeline::{AnyModel, LandmarkIndex};
use clap::Args;
use eyecontact::dataset::{load_patches, write_scores, Manifest};
use eyecontact::Result;
use std::path::PathBuf;

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Trained model file from `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Frame manifest to score.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output score CSV; abstentions keep an empty score field.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &PredictArgs) -> Result<()> {
    let model = AnyModel::load(&args.model)?;
    let manifest = Manifest::read(&args.manifest)?;
    let patches = load_patches(&args.manifest, &manifest)?;
    let landmarks = match model {
        AnyModel::Picnn(_) => None,
        _ => Some(LandmarkIndex::load_beside(&args.manifest)?),
    };
    let scores = model.score_rows(&manifest, &patches, landmarks.as_ref())?;
    let abstained = scores.iter().filter(|s| s.score.is_none()).count();
    write_scores(&args.out, &scores)?;
    println!(
        "scored {} frames with the {} model ({abstained} abstentions)",
        scores.len(),
        model.kind()
    );
    Ok(())
}
