//! On-disk layout of scene and fusion output directories.
//!
//! A scene directory:
//!
//! ```text
//! scene/
//!   scene.json              generator config + depth bounds
//!   config_used.toml        effective app configuration
//!   run.log                 timestamps (never byte-compared)
//!   views/000/
//!     camera.json           pinhole intrinsics + world-to-camera pose
//!     depth.pfm             corrupted input depth (the map to be fused)
//!     confidence.pfm        input confidence in [0, 1]
//!     gt_depth.pfm          exact ground-truth depth
//!     outlier_mask.png      pixels whose input depth is an injected outlier
//! ```
//!
//! A fusion output directory mirrors the per-view scheme:
//!
//! ```text
//! fused/
//!   stats.json              mode, hypothesis count, per-view volume sizes
//!   views/000/
//!     fused_depth.pfm       fused depth (+inf where no view contributed)
//!     fused_confidence.pfm  fused confidence in [0, 1]
//!     window_min.pfm        per-pixel search-window lower bound
//!     window_max.pfm        per-pixel search-window upper bound
//!     vcv.raw + vcv.json    constraint volume (only with --dump-vcv)
//! ```

use std::path::{Path, PathBuf};

use mvsfusion::error::{Error, Result};
use mvsfusion::evalbench::{SceneConfig, SyntheticScene};
use mvsfusion::geometry::ViewInput;
use mvsfusion::io::{
    read_camera_json, read_json, read_mask_png, read_pfm, write_camera_json, write_json,
    write_mask_png, write_pfm,
};
use mvsfusion::swe::SceneDepthBounds;
use mvsfusion::Grid2;
use serde::{Deserialize, Serialize};

/// Scene-level metadata stored as `scene.json`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneMeta {
    pub config: SceneConfig,
    pub bounds: SceneDepthBounds,
}

/// `views/NNN` subdirectory for a view index.
pub fn view_dir(root: &Path, view: usize) -> PathBuf {
    root.join("views").join(format!("{view:03}"))
}

/// Write a generated scene (metadata plus every view) under `root`.
pub fn write_scene(root: &Path, config: &SceneConfig, scene: &SyntheticScene) -> Result<()> {
    std::fs::create_dir_all(root)?;
    write_json(&root.join("scene.json"), &SceneMeta { config: *config, bounds: scene.bounds })?;
    for (i, view) in scene.views.iter().enumerate() {
        let dir = view_dir(root, i);
        std::fs::create_dir_all(&dir)?;
        write_camera_json(&dir.join("camera.json"), &view.camera)?;
        write_pfm(&dir.join("depth.pfm"), &view.depth)?;
        write_pfm(&dir.join("confidence.pfm"), &view.confidence)?;
        write_pfm(&dir.join("gt_depth.pfm"), &scene.gt_depths[i])?;
        write_mask_png(&dir.join("outlier_mask.png"), &scene.outlier_masks[i])?;
    }
    Ok(())
}

/// A scene directory read back into memory.
#[derive(Debug, Clone)]
pub struct LoadedScene {
    pub meta: SceneMeta,
    pub views: Vec<ViewInput>,
    pub gt_depths: Vec<Grid2<f64>>,
    pub outlier_masks: Vec<Grid2<bool>>,
}

impl LoadedScene {
    pub fn n_views(&self) -> usize {
        self.views.len()
    }
}

/// Load a scene directory written by [`write_scene`].
pub fn load_scene(root: &Path) -> Result<LoadedScene> {
    let meta: SceneMeta = read_json(&root.join("scene.json"))?;
    let n = meta.config.n_views;
    let mut views = Vec::with_capacity(n);
    let mut gt_depths = Vec::with_capacity(n);
    let mut outlier_masks = Vec::with_capacity(n);
    for i in 0..n {
        let dir = view_dir(root, i);
        if !dir.is_dir() {
            return Err(Error::invalid(format!(
                "scene {} lists {n} views but {} is missing",
                root.display(),
                dir.display()
            )));
        }
        let camera = read_camera_json(&dir.join("camera.json"))?;
        let depth = read_pfm(&dir.join("depth.pfm"))?;
        let confidence = read_pfm(&dir.join("confidence.pfm"))?;
        views.push(ViewInput::new(depth, confidence, camera)?);
        gt_depths.push(read_pfm(&dir.join("gt_depth.pfm"))?);
        outlier_masks.push(read_mask_png(&dir.join("outlier_mask.png"))?);
    }
    Ok(LoadedScene { meta, views, gt_depths, outlier_masks })
}

/// Per-view statistics recorded by the fuse command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewStats {
    pub view: usize,
    /// Heap footprint of the constraint volume for this view, in bytes
    /// (0 in conventional mode, which builds none).
    pub volume_bytes: usize,
    /// Pixels with a finite fused depth.
    pub valid_pixels: usize,
}

/// `stats.json` written next to the fused views.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuseStats {
    pub mode: mvsfusion::pipeline::FuseMode,
    /// Hypotheses per pixel actually used by the mode.
    pub hypotheses: usize,
    pub views: Vec<ViewStats>,
}

/// One fused view read back from a fusion output directory.
#[derive(Debug, Clone)]
pub struct FusedView {
    pub depth: Grid2<f64>,
    pub confidence: Grid2<f64>,
}

/// Load the fused views `0..n` from a fusion output directory.
pub fn load_fused(root: &Path, n: usize) -> Result<Vec<FusedView>> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let dir = view_dir(root, i);
        let depth = read_pfm(&dir.join("fused_depth.pfm"))?;
        let confidence = read_pfm(&dir.join("fused_confidence.pfm"))?;
        out.push(FusedView { depth, confidence });
    }
    Ok(out)
}

/// Load whichever of the fused views `0..n` exist (a fuse run restricted
/// with `--ref` writes a subset); errors when none do.
pub fn load_fused_present(root: &Path, n: usize) -> Result<Vec<(usize, FusedView)>> {
    let mut out = Vec::new();
    for i in 0..n {
        let dir = view_dir(root, i);
        if !dir.join("fused_depth.pfm").is_file() {
            continue;
        }
        let depth = read_pfm(&dir.join("fused_depth.pfm"))?;
        let confidence = read_pfm(&dir.join("fused_confidence.pfm"))?;
        out.push((i, FusedView { depth, confidence }));
    }
    if out.is_empty() {
        return Err(Error::invalid(format!("no fused views found under {}", root.display())));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use mvsfusion::evalbench::generate_scene;

    #[test]
    fn scene_round_trips_through_disk() {
        let config = SceneConfig { height: 6, width: 7, n_views: 2, ..SceneConfig::default() };
        let scene = generate_scene(&config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_scene(dir.path(), &config, &scene).unwrap();
        let back = load_scene(dir.path()).unwrap();
        assert_eq!(back.meta.config, config);
        assert_eq!(back.n_views(), 2);
        assert_eq!(back.meta.bounds, scene.bounds);
        // PFM stores f32: round-tripped values agree to single precision.
        for v in 0..2 {
            for ((row, col), d) in scene.gt_depths[v].enumerate() {
                let got = back.gt_depths[v].get(row, col);
                if d.is_finite() {
                    assert!((got - d).abs() <= d.abs() * 1e-6, "gt mismatch at {row},{col}");
                } else {
                    assert!(!got.is_finite());
                }
            }
            assert_eq!(
                back.outlier_masks[v].as_slice(),
                scene.outlier_masks[v].as_slice(),
                "outlier mask mismatch in view {v}"
            );
        }
    }

    #[test]
    fn missing_view_directory_is_reported() {
        let config = SceneConfig { height: 4, width: 4, n_views: 2, ..SceneConfig::default() };
        let scene = generate_scene(&config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_scene(dir.path(), &config, &scene).unwrap();
        std::fs::remove_dir_all(view_dir(dir.path(), 1)).unwrap();
        let err = load_scene(dir.path()).unwrap_err();
        assert!(err.to_string().contains("missing"), "got: {err}");
    }
}
