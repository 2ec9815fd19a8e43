//! `synth`: generate a labeled face-patch dataset on disk.

use crate::config::RunConfig;
use clap::Args;
use eyecontact::dataset::write_dataset;
use eyecontact::synthface::{generate_dataset, summarize, GeneratorConfig};
use eyecontact::{Error, Result};
use std::path::PathBuf;

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory; receives manifest.csv, landmarks.csv and images/.
    #[arg(long)]
    pub out: PathBuf,
    /// Master random seed.
    #[arg(long)]
    pub seed: u64,
    /// Run configuration file (synth.* keys).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Total frame count; spread over the sessions, rounding the
    /// per-session count up.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of play sessions.
    #[arg(long)]
    pub sessions: Option<usize>,
    /// Pose regime: `base` keeps landmarks nearly always available,
    /// `wide_pose` loses them on roughly a quarter of frames.
    #[arg(long)]
    pub preset: Option<String>,
    /// Stationary fraction of eye-contact frames.
    #[arg(long)]
    pub positive_rate: Option<f64>,
}

/// Builds the generator configuration from preset, config keys and flags,
/// in increasing order of precedence.
fn resolve(args: &SynthArgs, config: &mut RunConfig) -> Result<GeneratorConfig> {
    let preset = match args.preset.clone() {
        Some(p) => p,
        None => config.take_or("synth.preset", "base".to_string())?,
    };
    let mut g = match preset.as_str() {
        "base" => GeneratorConfig::base(10, 100),
        "wide_pose" => GeneratorConfig::wide_pose(10, 100),
        other => return Err(Error::Config(format!("synth preset {other:?} is not a preset"))),
    };
    g.sessions = config.take_or("synth.sessions", g.sessions)?;
    g.frames_per_session = config.take_or("synth.frames_per_session", g.frames_per_session)?;
    g.subjects = config.take_or("synth.subjects", g.sessions.div_ceil(2).max(1))?;
    g.size = config.take_or("synth.size", g.size)?;
    g.positive_rate = config.take_or("synth.positive_rate", g.positive_rate)?;
    g.mean_event_length = config.take_or("synth.mean_event_length", g.mean_event_length)?;
    g.contact_threshold_deg =
        config.take_or("synth.contact_threshold_deg", g.contact_threshold_deg)?;
    g.occlusion_rate = config.take_or("synth.occlusion_rate", g.occlusion_rate)?;
    g.pose_step_deg = config.take_or("synth.pose_step_deg", g.pose_step_deg)?;
    g.yaw_range.0 = config.take_or("synth.yaw_min", g.yaw_range.0)?;
    g.yaw_range.1 = config.take_or("synth.yaw_max", g.yaw_range.1)?;
    g.pitch_range.0 = config.take_or("synth.pitch_min", g.pitch_range.0)?;
    g.pitch_range.1 = config.take_or("synth.pitch_max", g.pitch_range.1)?;
    g.roll_range.0 = config.take_or("synth.roll_min", g.roll_range.0)?;
    g.roll_range.1 = config.take_or("synth.roll_max", g.roll_range.1)?;

    if let Some(sessions) = args.sessions {
        g.sessions = sessions;
        g.subjects = g.subjects.min(sessions.max(1));
    }
    if let Some(rate) = args.positive_rate {
        g.positive_rate = rate;
    }
    if let Some(n) = args.n {
        if g.sessions == 0 {
            return Err(Error::Config("cannot spread frames over zero sessions".into()));
        }
        g.frames_per_session = n.div_ceil(g.sessions);
    }
    Ok(g)
}

pub fn run(args: &SynthArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::empty(),
    };
    let generator = resolve(args, &mut config)?;
    config.finish()?;

    if !args.out.is_dir() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("output directory {} does not exist", args.out.display()),
        )));
    }
    let samples = generate_dataset(&generator, args.seed)?;
    let summary = summarize(&samples);
    write_dataset(&args.out, &samples)?;
    println!(
        "wrote {} frames ({} positive, {:.1}% landmark availability) to {}",
        summary.frames,
        summary.positives,
        100.0 * summary.availability(),
        args.out.display()
    );
    Ok(())
}
