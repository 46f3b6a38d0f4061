//! Subcommand implementations.

pub mod evaluate;
pub mod run;
pub mod sweep;
pub mod synth;
