//! Subcommand implementations.

pub mod cloud;
pub mod eval;
pub mod fit;
pub mod fuse;
pub mod synth;
