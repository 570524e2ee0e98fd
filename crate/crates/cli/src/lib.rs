//! Command-line front end for the fusion pipeline.
//!
//! The binary is `mvsfuse`; the library half exists so integration tests can
//! drive the same command implementations in-process.  Subcommands:
//!
//! - `synth` — generate a synthetic scene directory (cameras, ground truth,
//!   corrupted inputs) from a seeded configuration.
//! - `fuse` — fuse every reference view of a scene directory and write fused
//!   depth/confidence maps plus per-pixel search-window sidecars.
//! - `eval` — compare input and fused maps against ground truth: MAE, inlier
//!   fraction, completeness, sparsification AUC, optional error heat maps and
//!   point-cloud Chamfer distances.
//! - `fit` — fit the pipeline parameters on one or more scene directories by
//!   gradient descent and write the fitted parameters plus a per-epoch trace.
//! - `cloud` — export input/fused/ground-truth point clouds (optionally
//!   consistency-filtered) and their Chamfer distances.
//!
//! Every command is byte-deterministic for a fixed configuration and seed,
//! across both repeat runs and `--jobs` settings; wall-clock timestamps are
//! confined to `run.log`.

pub mod cli;
pub mod commands;
pub mod config;
pub mod jobs;
pub mod runlog;
pub mod scenedir;

pub use cli::{run, Cli};

/// Process exit codes: success, usage error, data/runtime error.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const DATA: i32 = 2;
}
