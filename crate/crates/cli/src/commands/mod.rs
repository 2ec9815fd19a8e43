//! One module per subcommand.

pub mod evaluate;
pub mod predict;
pub mod select;
pub mod stats;
pub mod sweep;
pub mod synth;
pub mod train;
pub mod viz;
