//! On-disk formats.
//!
//! - [`pfm`] — portable float maps for depth and confidence (lossless);
//! - [`png16`] — 16-bit PNG depth with a JSON scale sidecar (portable,
//!   quantized), plus 8-bit masks;
//! - [`camera`] — pinhole calibration as JSON;
//! - [`json`] — generic serde JSON helpers (parameters, configs, sidecars);
//! - [`csv`] — fit traces, evaluation metrics, sparsification curves;
//! - [`ply`] — ASCII point clouds;
//! - [`volume`] — raw constraint-volume dumps with a JSON shape header;
//! - [`heatmap`] — grayscale PNG renderings of scalar fields.
//!
//! All writers emit bytes that depend only on their inputs, never on
//! timestamps, environment, or thread count.

pub mod camera;
pub mod csv;
pub mod heatmap;
pub mod json;
pub mod pfm;
pub mod ply;
pub mod png16;
pub mod volume;

pub use camera::{read_camera_json, write_camera_json};
pub use csv::{write_fit_trace, write_metrics, write_sparsification, MetricsRow};
pub use heatmap::write_heatmap_png;
pub use json::{read_json, write_json};
pub use pfm::{read_pfm, write_pfm};
pub use ply::write_ply;
pub use png16::{read_depth_png16, read_mask_png, write_depth_png16, write_mask_png};
pub use volume::{read_volume, write_volume, VolumeHeader};
