//! `viz`: render network internals as image grids.

use crate::pipeline::AnyModel;
use clap::Args;
use eyecontact::imaging::{decode_netpbm, encode_netpbm};
use eyecontact::numerics::write_atomic;
use eyecontact::picnn::viz::{first_layer_filter_grid, response_grid};
use eyecontact::{Error, Result};
use std::path::PathBuf;

#[derive(Debug, Args)]
pub struct VizArgs {
    /// Trained network model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Optional face image (netpbm); adds a response-map grid for it.
    #[arg(long)]
    pub image: Option<PathBuf>,
    /// Convolution stage for the response grid, counted from zero.
    #[arg(long, default_value_t = 0)]
    pub layer: usize,
    /// Pixel upscaling of the filter tiles.
    #[arg(long, default_value_t = 8)]
    pub upscale: usize,
}

pub fn run(args: &VizArgs) -> Result<()> {
    let AnyModel::Picnn(model) = AnyModel::load(&args.model)? else {
        return Err(Error::Config("viz needs a network model; this file holds another kind".into()));
    };
    std::fs::create_dir_all(&args.out_dir)?;

    let filters = first_layer_filter_grid(&model, args.upscale)?;
    write_atomic(&args.out_dir.join("filters.ppm"), &encode_netpbm(&filters))?;

    if let Some(image) = &args.image {
        let patch = decode_netpbm(&std::fs::read(image)?)?;
        let responses = response_grid(&model, &patch, args.layer)?;
        let name = format!("responses_conv{}.pgm", args.layer + 1);
        write_atomic(&args.out_dir.join(&name), &encode_netpbm(&responses))?;
        println!("wrote filters.ppm and {name} to {}", args.out_dir.display());
    } else {
        println!("wrote filters.ppm to {}", args.out_dir.display());
    }
    Ok(())
}
