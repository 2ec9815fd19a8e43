//! `select`: track the child's face through a detection stream.

use crate::config::RunConfig;
use clap::Args;
use eyecontact::imaging::decode_netpbm;
use eyecontact::numerics::write_atomic;
use eyecontact::selection::{read_detections_jsonl, FaceSelector, SelectorConfig};
use eyecontact::{Error, Result};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const CHILD_BOXES_HEADER: &str = "frame,x,y,w,h,score";

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Detections JSONL: one `{"frame": n, "boxes": [[x,y,w,h,score], ...]}`
    /// object per line.
    #[arg(long)]
    pub detections: PathBuf,
    /// Directory of frame images named `f<frame:05>.pgm` or `.ppm`.
    #[arg(long)]
    pub frames: PathBuf,
    /// Output CSV of the selected child box per frame.
    #[arg(long)]
    pub out: PathBuf,
    /// Run configuration file (select.* keys).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn frame_image(dir: &Path, frame: u64) -> Result<eyecontact::imaging::FacePatch> {
    for ext in ["pgm", "ppm"] {
        let path = dir.join(format!("f{frame:05}.{ext}"));
        if path.is_file() {
            return decode_netpbm(&std::fs::read(path)?);
        }
    }
    Err(Error::Io(std::io::Error::new(
        std::io::ErrorKind::NotFound,
        format!("no image for frame {frame} under {}", dir.display()),
    )))
}

pub fn run(args: &SelectArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::empty(),
    };
    let defaults = SelectorConfig::default();
    let selector_config = SelectorConfig {
        classes: config.take_or("select.classes", defaults.classes)?,
        warmup_updates: config.take_or("select.warmup_updates", defaults.warmup_updates)?,
        learning_rate: config.take_or("select.learning_rate", defaults.learning_rate)?,
        l2_decay: config.take_or("select.l2_decay", defaults.l2_decay)?,
    };
    config.finish()?;

    let frames = read_detections_jsonl(&args.detections)?;
    let mut selector = FaceSelector::with_default_embedding(selector_config)?;
    let mut out = String::from(CHILD_BOXES_HEADER);
    out.push('\n');
    let mut selected = 0usize;
    for frame in &frames {
        let image = frame_image(&args.frames, frame.frame)?;
        let classes = selector.process_frame(&image, &frame.boxes)?;
        if let Some(i) = classes.iter().position(|&c| c == 0) {
            let b = &frame.boxes[i];
            let _ = writeln!(out, "{},{},{},{},{},{}", frame.frame, b.x, b.y, b.w, b.h, b.score);
            selected += 1;
        }
    }
    write_atomic(&args.out, out.as_bytes())?;
    println!("selected the child in {selected} of {} frames", frames.len());
    Ok(())
}
