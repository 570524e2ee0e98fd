//! Synthetic benchmark scenes, depth-map metrics, and point-cloud
//! evaluation.
//!
//! Everything here is deterministic: scenes are generated from a seed with
//! a fixed draw order, and metrics never depend on iteration order of any
//! hash structure.

pub mod cloud;
pub mod metrics;
pub mod scenes;

pub use cloud::{
    chamfer, chamfer_parts, export_cloud, pct_within, ChamferScores, CloudPoint, CloudSource,
    FilterParams, PointCloud, ThresholdScores,
};
pub use metrics::{
    auc, completeness, error_map, inlier_fraction, mae, sparsification, SparsificationCurve,
};
pub use scenes::{generate_scene, SceneConfig, SceneKind, SyntheticScene};
