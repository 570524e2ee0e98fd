//! Deterministic synthetic scenes: analytic surfaces viewed from a camera
//! arc, with Gaussian depth noise, uniform outliers, and an error-driven
//! confidence model.
//!
//! All surfaces live around the point `(0, 0, 10)` and fit inside the fixed
//! scene depth bounds `[5, 15]`; cameras orbit that point at distance 10 on
//! a short arc near the origin.  Ground truth is exact (closed-form
//! ray-surface intersection per pixel).

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraModel, ViewInput, SENTINEL_DEPTH};
use crate::grid::Grid2;
use crate::swe::SceneDepthBounds;

/// Scene depth bounds shared by every synthetic surface.
pub const SCENE_DEPTH_MIN: f64 = 5.0;
pub const SCENE_DEPTH_MAX: f64 = 15.0;

const TARGET: Vector3<f64> = Vector3::new(0.0, 0.0, 10.0);
/// Tilted-plane normal direction (unnormalized): `z = 10 + 0.08 x + 0.05 y`.
const PLANE_TILT_X: f64 = 0.08;
const PLANE_TILT_Y: f64 = 0.05;
const SPHERE_RADIUS: f64 = 3.0;
const SPHERE_BACKPLANE_Z: f64 = 13.5;
const STEP_NEAR_Z: f64 = 9.0;
const STEP_FAR_Z: f64 = 11.0;
const OCCLUDER_Z: f64 = 8.0;
const OCCLUDER_HALF_EXTENT: f64 = 1.2;
const OCCLUDER_BACK_Z: f64 = 12.0;

/// The analytic surface a scene is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SceneKind {
    /// Gently tilted plane through `z = 10`.
    Plane,
    /// Sphere of radius 3 in front of a backplane at `z = 13.5`.
    Sphere,
    /// Depth discontinuity: plane `z = 9` for `x < 0`, `z = 11` for `x >= 0`.
    Step,
    /// Small square patch at `z = 8` occluding a plane at `z = 12`.
    Occluder,
}

impl fmt::Display for SceneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SceneKind::Plane => "plane",
            SceneKind::Sphere => "sphere",
            SceneKind::Step => "step",
            SceneKind::Occluder => "occluder",
        };
        f.write_str(s)
    }
}

impl FromStr for SceneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plane" => Ok(SceneKind::Plane),
            "sphere" => Ok(SceneKind::Sphere),
            "step" => Ok(SceneKind::Step),
            "occluder" => Ok(SceneKind::Occluder),
            other => Err(Error::invalid(format!(
                "unknown scene kind `{other}` (expected plane, sphere, step, or occluder)"
            ))),
        }
    }
}

/// Parameters of one synthetic scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub kind: SceneKind,
    pub height: usize,
    pub width: usize,
    pub n_views: usize,
    pub seed: u64,
    /// Gaussian depth noise (absolute, in depth units).
    pub noise_std: f64,
    /// Fraction of valid pixels replaced by a uniform draw over the scene
    /// depth bounds.
    pub outlier_fraction: f64,
    /// Fraction of outliers that keep a high confidence anyway (drawn
    /// uniformly from `[0.6, 1.0)`), mimicking confidently wrong matches;
    /// the rest get the usual error-driven confidence.
    pub confident_outlier_fraction: f64,
    /// Gaussian jitter added to the confidence before clamping.
    pub confidence_jitter: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            kind: SceneKind::Plane,
            height: 64,
            width: 64,
            n_views: 5,
            seed: 0,
            noise_std: 0.1,
            outlier_fraction: 0.1,
            confident_outlier_fraction: 0.25,
            confidence_jitter: 0.05,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::invalid("scene image size must be positive"));
        }
        if self.n_views == 0 {
            return Err(Error::invalid("a scene needs at least one view"));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::invalid("noise level must be finite and non-negative"));
        }
        if !(0.0..=1.0).contains(&self.outlier_fraction) {
            return Err(Error::invalid("outlier fraction must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.confident_outlier_fraction) {
            return Err(Error::invalid("confident-outlier fraction must lie in [0, 1]"));
        }
        if !(self.confidence_jitter.is_finite() && self.confidence_jitter >= 0.0) {
            return Err(Error::invalid("confidence jitter must be finite and non-negative"));
        }
        Ok(())
    }
}

/// A generated scene: noisy input views, exact ground truth, and the
/// positions of injected outliers.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub views: Vec<ViewInput>,
    /// Exact per-view ground-truth depth.
    pub gt_depths: Vec<Grid2<f64>>,
    /// True where the input depth was replaced by an outlier draw.
    pub outlier_masks: Vec<Grid2<bool>>,
    pub bounds: SceneDepthBounds,
}

/// Camera depth `t` of the first surface hit along `origin + t * dir`,
/// where `dir` is scaled to unit camera depth.
fn surface_depth(kind: SceneKind, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
    let plane_hit = |z0: f64| -> Option<f64> {
        if dir.z.abs() < 1e-12 {
            return None;
        }
        let t = (z0 - origin.z) / dir.z;
        (t > 0.0).then_some(t)
    };
    match kind {
        SceneKind::Plane => {
            let n = Vector3::new(PLANE_TILT_X, PLANE_TILT_Y, -1.0);
            let denom = n.dot(dir);
            if denom.abs() < 1e-12 {
                return None;
            }
            let t = n.dot(&(TARGET - origin)) / denom;
            (t > 0.0).then_some(t)
        }
        SceneKind::Sphere => {
            let oc = origin - TARGET;
            let a = dir.dot(dir);
            let b = 2.0 * oc.dot(dir);
            let c = oc.dot(&oc) - SPHERE_RADIUS * SPHERE_RADIUS;
            let disc = b * b - 4.0 * a * c;
            if disc >= 0.0 {
                let t = (-b - disc.sqrt()) / (2.0 * a);
                if t > 0.0 {
                    return Some(t);
                }
            }
            plane_hit(SPHERE_BACKPLANE_Z)
        }
        SceneKind::Step => {
            let near = plane_hit(STEP_NEAR_Z).filter(|&t| origin.x + t * dir.x < 0.0);
            let far = plane_hit(STEP_FAR_Z).filter(|&t| origin.x + t * dir.x >= 0.0);
            match (near, far) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            }
        }
        SceneKind::Occluder => {
            let front = plane_hit(OCCLUDER_Z).filter(|&t| {
                let p = origin + dir * t;
                p.x.abs() <= OCCLUDER_HALF_EXTENT && p.y.abs() <= OCCLUDER_HALF_EXTENT
            });
            front.or_else(|| plane_hit(OCCLUDER_BACK_Z))
        }
    }
}

/// Cameras on a short arc orbiting the scene center at distance 10, with a
/// small vertical sweep so no two poses coincide.
fn arc_cameras(config: &SceneConfig) -> Result<Vec<CameraModel>> {
    let n = config.n_views;
    let focal = config.width as f64;
    (0..n)
        .map(|i| {
            let psi = if n > 1 { 0.24 * (i as f64 / (n - 1) as f64 - 0.5) } else { 0.0 };
            let pos = TARGET
                + 10.0 * Vector3::new(psi.sin(), 0.0, -psi.cos())
                + Vector3::new(0.0, 1.6 * psi, 0.0);
            CameraModel::look_at(focal, focal, config.width, config.height, pos, TARGET)
        })
        .collect()
}

/// Generate a scene: exact ground truth per view, then noise, outliers, and
/// confidences drawn from a single seeded stream (views in index order,
/// pixels row-major, draws only on pixels with a surface hit).
pub fn generate_scene(config: &SceneConfig) -> Result<SyntheticScene> {
    config.validate()?;
    let bounds = SceneDepthBounds::new(SCENE_DEPTH_MIN, SCENE_DEPTH_MAX)?;
    let cameras = arc_cameras(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut views = Vec::with_capacity(config.n_views);
    let mut gt_depths = Vec::with_capacity(config.n_views);
    let mut outlier_masks = Vec::with_capacity(config.n_views);

    for cam in cameras {
        let (h, w) = (config.height, config.width);
        let mut gt = Grid2::filled(h, w, SENTINEL_DEPTH);
        let mut depth = Grid2::filled(h, w, SENTINEL_DEPTH);
        let mut confidence = Grid2::filled(h, w, 0.0);
        let mut outliers = Grid2::filled(h, w, false);
        let origin = cam.center();

        for row in 0..h {
            for col in 0..w {
                let dir = cam.ray_through_pixel(crate::geometry::pixel_center(row, col));
                let Some(t) = surface_depth(config.kind, &origin, &dir) else {
                    continue;
                };
                gt.set(row, col, t);

                let mut d = t;
                if config.noise_std > 0.0 {
                    let z: f64 = rng.sample(StandardNormal);
                    d += config.noise_std * z;
                }
                let is_outlier =
                    config.outlier_fraction > 0.0 && rng.gen::<f64>() < config.outlier_fraction;
                let mut confident_outlier = false;
                if is_outlier {
                    d = rng.gen_range(bounds.min..bounds.max);
                    confident_outlier = config.confident_outlier_fraction > 0.0
                        && rng.gen::<f64>() < config.confident_outlier_fraction;
                }
                d = d.max(1e-3);

                let err = (d - t).abs();
                let conf = if confident_outlier {
                    rng.gen_range(0.6..1.0)
                } else {
                    let base = if config.noise_std > 0.0 {
                        (1.0 - err / (3.0 * config.noise_std)).clamp(0.0, 1.0)
                    } else if err < 1e-9 {
                        1.0
                    } else {
                        0.0
                    };
                    if config.confidence_jitter > 0.0 {
                        let z: f64 = rng.sample(StandardNormal);
                        (base + config.confidence_jitter * z).clamp(0.0, 1.0)
                    } else {
                        base
                    }
                };

                depth.set(row, col, d);
                confidence.set(row, col, conf);
                outliers.set(row, col, is_outlier);
            }
        }

        views.push(ViewInput::new(depth, confidence, cam)?);
        gt_depths.push(gt);
        outlier_masks.push(outliers);
    }

    Ok(SyntheticScene { views, gt_depths, outlier_masks, bounds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{is_valid_depth, pixel_center};

    fn clean(kind: SceneKind, seed: u64) -> SceneConfig {
        SceneConfig {
            kind,
            height: 24,
            width: 24,
            n_views: 4,
            seed,
            noise_std: 0.0,
            outlier_fraction: 0.0,
            confident_outlier_fraction: 0.0,
            confidence_jitter: 0.0,
        }
    }

    /// Residual of the world point reconstructed from a ground-truth depth
    /// against the analytic surface it should lie on.
    fn surface_residual(kind: SceneKind, p: &Vector3<f64>) -> f64 {
        match kind {
            SceneKind::Plane => (PLANE_TILT_X * p.x + PLANE_TILT_Y * p.y - (p.z - 10.0)).abs(),
            SceneKind::Sphere => {
                let on_sphere = ((p - TARGET).norm() - SPHERE_RADIUS).abs();
                let on_back = (p.z - SPHERE_BACKPLANE_Z).abs();
                on_sphere.min(on_back)
            }
            SceneKind::Step => {
                let z0 = if p.x < 0.0 { STEP_NEAR_Z } else { STEP_FAR_Z };
                (p.z - z0).abs()
            }
            SceneKind::Occluder => {
                let on_front = (p.z - OCCLUDER_Z).abs();
                let on_back = (p.z - OCCLUDER_BACK_Z).abs();
                if p.x.abs() <= OCCLUDER_HALF_EXTENT && p.y.abs() <= OCCLUDER_HALF_EXTENT {
                    on_front.min(on_back)
                } else {
                    on_back
                }
            }
        }
    }

    #[test]
    fn ground_truth_points_lie_on_the_surface() {
        for kind in [SceneKind::Plane, SceneKind::Sphere, SceneKind::Step, SceneKind::Occluder] {
            let scene = generate_scene(&clean(kind, 7)).unwrap();
            for (view, gt) in scene.views.iter().zip(&scene.gt_depths) {
                let origin = view.camera.center();
                let mut checked = 0;
                for ((row, col), t) in gt.enumerate() {
                    if !is_valid_depth(t) {
                        continue;
                    }
                    assert!(t > scene.bounds.min && t < scene.bounds.max, "{kind}: depth {t}");
                    let dir = view.camera.ray_through_pixel(pixel_center(row, col));
                    let p = origin + dir * t;
                    assert!(
                        surface_residual(kind, &p) < 1e-9,
                        "{kind} at ({row}, {col}): residual {}",
                        surface_residual(kind, &p)
                    );
                    checked += 1;
                }
                assert!(checked > 100, "{kind}: only {checked} pixels hit the surface");
            }
        }
    }

    #[test]
    fn noiseless_views_equal_ground_truth_with_full_confidence() {
        let scene = generate_scene(&clean(SceneKind::Sphere, 3)).unwrap();
        for (view, gt) in scene.views.iter().zip(&scene.gt_depths) {
            for ((row, col), t) in gt.enumerate() {
                if is_valid_depth(t) {
                    assert_eq!(view.depth.get(row, col), t);
                    assert_eq!(view.confidence.get(row, col), 1.0);
                }
            }
        }
    }

    #[test]
    fn same_seed_reproduces_the_scene_exactly() {
        let config = SceneConfig { seed: 11, ..SceneConfig::default() };
        let a = generate_scene(&config).unwrap();
        let b = generate_scene(&config).unwrap();
        for (va, vb) in a.views.iter().zip(&b.views) {
            assert_eq!(va.depth, vb.depth);
            assert_eq!(va.confidence, vb.confidence);
        }
        let c = generate_scene(&SceneConfig { seed: 12, ..config }).unwrap();
        assert_ne!(a.views[0].depth, c.views[0].depth);
    }

    #[test]
    fn outlier_masks_flag_replaced_pixels() {
        let config = SceneConfig {
            outlier_fraction: 1.0,
            noise_std: 0.0,
            confidence_jitter: 0.0,
            ..SceneConfig::default()
        };
        let scene = generate_scene(&config).unwrap();
        for (mask, gt) in scene.outlier_masks.iter().zip(&scene.gt_depths) {
            for ((row, col), flagged) in mask.enumerate() {
                assert_eq!(flagged, is_valid_depth(gt.get(row, col)));
            }
        }
        let n_valid: usize = scene.gt_depths[0].iter().filter(|t| is_valid_depth(**t)).count();
        let in_bounds = scene.views[0]
            .depth
            .iter()
            .filter(|&&d| d >= scene.bounds.min && d <= scene.bounds.max)
            .count();
        assert_eq!(in_bounds, n_valid);
    }

    #[test]
    fn confident_outliers_keep_high_confidence() {
        let config = SceneConfig {
            noise_std: 0.0,
            outlier_fraction: 1.0,
            confident_outlier_fraction: 1.0,
            confidence_jitter: 0.0,
            ..SceneConfig::default()
        };
        let scene = generate_scene(&config).unwrap();
        for (view, gt) in scene.views.iter().zip(&scene.gt_depths) {
            for ((row, col), t) in gt.enumerate() {
                if is_valid_depth(t) {
                    let c = view.confidence.get(row, col);
                    assert!((0.6..1.0).contains(&c), "confidence {c} outside [0.6, 1)");
                }
            }
        }

        let honest = SceneConfig { confident_outlier_fraction: 0.0, ..config };
        let scene = generate_scene(&honest).unwrap();
        for (view, gt) in scene.views.iter().zip(&scene.gt_depths) {
            for ((row, col), t) in gt.enumerate() {
                if is_valid_depth(t) {
                    let err = (view.depth.get(row, col) - t).abs();
                    let expected = if err < 1e-9 { 1.0 } else { 0.0 };
                    assert_eq!(view.confidence.get(row, col), expected);
                }
            }
        }
    }

    #[test]
    fn confidence_tracks_the_noise_free_error_model() {
        let config = SceneConfig {
            noise_std: 0.2,
            outlier_fraction: 0.0,
            confidence_jitter: 0.0,
            ..SceneConfig::default()
        };
        let scene = generate_scene(&config).unwrap();
        let view = &scene.views[0];
        let gt = &scene.gt_depths[0];
        for ((row, col), t) in gt.enumerate() {
            if !is_valid_depth(t) {
                continue;
            }
            let err = (view.depth.get(row, col) - t).abs();
            let expected = (1.0 - err / 0.6).clamp(0.0, 1.0);
            assert!((view.confidence.get(row, col) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn cameras_aim_at_the_scene_center() {
        let scene = generate_scene(&clean(SceneKind::Plane, 0)).unwrap();
        for view in &scene.views {
            let cam = &view.camera;
            let to_target = (TARGET - cam.center()).normalize();
            assert!((cam.optical_axis().dot(&to_target) - 1.0).abs() < 1e-12);
            assert!(((cam.center() - TARGET).norm() - 10.0).abs() < 0.3);
        }
        let p0 = scene.views[0].camera.center();
        let p1 = scene.views[1].camera.center();
        assert!((p0 - p1).norm() > 0.1, "camera arc must have a real baseline");
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in [SceneKind::Plane, SceneKind::Sphere, SceneKind::Step, SceneKind::Occluder] {
            assert_eq!(kind.to_string().parse::<SceneKind>().unwrap(), kind);
        }
        assert!("cube".parse::<SceneKind>().is_err());
    }
}
