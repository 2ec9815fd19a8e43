//! Command line front end: dataset synthesis, training, prediction,
//! evaluation, face selection, statistics and visualization.

mod commands;
mod config;
mod pipeline;

use clap::{Parser, Subcommand};
use eyecontact::Error;

#[derive(Parser)]
#[command(
    name = "eyecontact",
    version,
    about = "Eye-contact detection in egocentric face patches",
    after_help = "Environment: GC_THREADS caps the worker pool (default: all cores).\n\
                  Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled dataset.
    Synth(commands::synth::SynthArgs),
    /// Fit a detector and save the model.
    Train(commands::train::TrainArgs),
    /// Score a manifest with a trained model.
    Predict(commands::predict::PredictArgs),
    /// Summarize scores: metrics report, PR curve and plot.
    Eval(commands::evaluate::EvalArgs),
    /// Track the child's face through a detection stream.
    Select(commands::select::SelectArgs),
    /// Dataset distribution statistics and histograms.
    Stats(commands::stats::StatsArgs),
    /// Render network filters and response maps.
    Viz(commands::viz::VizArgs),
    /// Chart detection quality against training-set size.
    Sweep(commands::sweep::SweepArgs),
}

/// Maps library errors onto the documented exit codes: 2 for usage and
/// configuration problems, 4 for numeric failures, 3 for everything else
/// (bad or missing data).
fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Config(_) => 2,
        Error::Numeric(_) => 4,
        _ => 3,
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    if let Ok(raw) = std::env::var("GC_THREADS") {
        match raw.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = eyecontact::limit_threads(n) {
                    log::warn!("could not apply GC_THREADS={n}: {e}");
                }
            }
            _ => {
                eprintln!("error: GC_THREADS must be a positive integer, not {raw:?}");
                std::process::exit(2);
            }
        }
    }

    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(args) => commands::synth::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Predict(args) => commands::predict::run(args),
        Command::Eval(args) => commands::evaluate::run(args),
        Command::Select(args) => commands::select::run(args),
        Command::Stats(args) => commands::stats::run(args),
        Command::Viz(args) => commands::viz::run(args),
        Command::Sweep(args) => commands::sweep::run(args),
    };
    if let Err(error) = result {
        eprintln!("error: {error}");
        std::process::exit(exit_code(&error));
    }
}
