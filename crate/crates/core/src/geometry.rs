//! Pinhole cameras, depth/confidence maps, and cross-view rendering.
//!
//! Conventions:
//! - World-to-camera transform: `x_cam = R * x_world + t`, camera looks along
//!   `+z`, image `u` axis = columns, `v` axis = rows.
//! - Continuous pixel coordinates put `(u, v) = (col, row)` at the pixel
//!   center; rasterization rounds to the nearest pixel.
//! - Missing depths are the non-finite [`SENTINEL_DEPTH`]; valid depths are
//!   strictly positive and finite.

use nalgebra::{Matrix3, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::grid::Grid2;

/// Reserved encoding for a missing depth or confidence sample.
pub const SENTINEL_DEPTH: f64 = f64::INFINITY;

/// True for depths that carry data (strictly positive, finite).
pub fn is_valid_depth(d: f64) -> bool {
    d.is_finite() && d > 0.0
}

/// Calibrated pinhole camera.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// World-to-camera rotation.
    pub rotation: Matrix3<f64>,
    /// World-to-camera translation.
    pub translation: Vector3<f64>,
    pub width: usize,
    pub height: usize,
}

/// Tolerated deviation of `R^T R` from the identity (and of `det R` from +1).
const ORTHONORMALITY_TOL: f64 = 1e-6;

impl CameraModel {
    /// Validate intrinsics and rotation orthonormality.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        if !(fx.is_finite() && fy.is_finite() && fx > 0.0 && fy > 0.0) {
            return Err(Error::invalid(format!("focal lengths must be positive, got ({fx}, {fy})")));
        }
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(Error::invalid("principal point must be finite"));
        }
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!("image size {width}x{height} must be nonzero")));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("translation must be finite"));
        }
        let gram = rotation.transpose() * rotation;
        let mut max_dev: f64 = 0.0;
        for r in 0..3 {
            for c in 0..3 {
                let target = if r == c { 1.0 } else { 0.0 };
                max_dev = max_dev.max((gram[(r, c)] - target).abs());
            }
        }
        if max_dev > ORTHONORMALITY_TOL || (rotation.determinant() - 1.0).abs() > ORTHONORMALITY_TOL
        {
            return Err(Error::invalid("rotation is not a proper orthonormal matrix"));
        }
        Ok(CameraModel { fx, fy, cx, cy, rotation, translation, width, height })
    }

    /// Camera with identity pose and the principal point at the image center.
    pub fn centered(fx: f64, fy: f64, width: usize, height: usize) -> Result<Self> {
        CameraModel::new(
            fx,
            fy,
            (width as f64 - 1.0) / 2.0,
            (height as f64 - 1.0) / 2.0,
            Matrix3::identity(),
            Vector3::zeros(),
            width,
            height,
        )
    }

    /// Camera at `position` whose optical axis points at `target`
    /// (world `+y` maps to the image `v` axis).
    pub fn look_at(
        fx: f64,
        fy: f64,
        width: usize,
        height: usize,
        position: Vector3<f64>,
        target: Vector3<f64>,
    ) -> Result<Self> {
        let forward = target - position;
        let norm = forward.norm();
        if norm < 1e-12 {
            return Err(Error::invalid("look_at target coincides with the camera position"));
        }
        let f = forward / norm;
        let up = Vector3::new(0.0, 1.0, 0.0);
        let right = up.cross(&f);
        let rn = right.norm();
        if rn < 1e-9 {
            return Err(Error::invalid("look_at axis is parallel to the world y axis"));
        }
        let r = right / rn;
        let d = f.cross(&r);
        let rotation = Matrix3::from_rows(&[r.transpose(), d.transpose(), f.transpose()]);
        let translation = -rotation * position;
        CameraModel::new(
            fx,
            fy,
            (width as f64 - 1.0) / 2.0,
            (height as f64 - 1.0) / 2.0,
            rotation,
            translation,
            width,
            height,
        )
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    /// Optical axis (viewing direction) in world coordinates, unit length.
    pub fn optical_axis(&self) -> Vector3<f64> {
        self.rotation.row(2).transpose()
    }

    /// World-space ray through a pixel, scaled so that the point
    /// `center() + depth * dir` has camera depth exactly `depth`.
    pub fn ray_through_pixel(&self, pixel: Vector2<f64>) -> Vector3<f64> {
        let dir_cam = Vector3::new(
            (pixel.x - self.cx) / self.fx,
            (pixel.y - self.cy) / self.fy,
            1.0,
        );
        self.rotation.transpose() * dir_cam
    }

    /// True when the continuous pixel rounds to a grid cell inside the image.
    pub fn nearest_pixel(&self, pixel: Vector2<f64>) -> Option<(usize, usize)> {
        let c = pixel.x.round();
        let r = pixel.y.round();
        if c >= 0.0 && r >= 0.0 && (c as usize) < self.width && (r as usize) < self.height {
            Some((r as usize, c as usize))
        } else {
            None
        }
    }
}

/// Continuous pixel coordinates of a grid cell `(row, col)`.
pub fn pixel_center(row: usize, col: usize) -> Vector2<f64> {
    Vector2::new(col as f64, row as f64)
}

/// Project a world point; `None` when it lies on or behind the camera plane.
pub fn project(cam: &CameraModel, point: &Vector3<f64>) -> Option<(Vector2<f64>, f64)> {
    let p = cam.rotation * point + cam.translation;
    if p.z <= 0.0 {
        return None;
    }
    let pixel = Vector2::new(cam.fx * p.x / p.z + cam.cx, cam.fy * p.y / p.z + cam.cy);
    Some((pixel, p.z))
}

/// World point seen at `pixel` with camera depth `depth`.
pub fn unproject(cam: &CameraModel, pixel: Vector2<f64>, depth: f64) -> Vector3<f64> {
    let p_cam = Vector3::new(
        (pixel.x - cam.cx) / cam.fx * depth,
        (pixel.y - cam.cy) / cam.fy * depth,
        depth,
    );
    cam.rotation.transpose() * (p_cam - cam.translation)
}

/// Depth map of one view; missing pixels hold [`SENTINEL_DEPTH`].
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub view_id: u32,
    pub values: Grid2<f64>,
}

impl DepthMap {
    /// Canonicalizes non-finite entries to the sentinel; rejects finite
    /// non-positive depths.
    pub fn new(view_id: u32, mut values: Grid2<f64>) -> Result<Self> {
        for v in values.as_mut_slice() {
            if !v.is_finite() {
                *v = SENTINEL_DEPTH;
            } else if *v <= 0.0 {
                return Err(Error::invalid(format!("depth {v} is not strictly positive")));
            }
        }
        Ok(DepthMap { view_id, values })
    }

    /// Map with every pixel missing.
    pub fn empty(view_id: u32, height: usize, width: usize) -> Self {
        DepthMap { view_id, values: Grid2::filled(height, width, SENTINEL_DEPTH) }
    }

    /// Number of non-sentinel pixels.
    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|v| is_valid_depth(**v)).count()
    }
}

/// Per-pixel confidence aligned with a depth map; valid values are in
/// `[0, 1]`, missing pixels hold the sentinel.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceMap {
    pub view_id: u32,
    pub values: Grid2<f64>,
}

impl ConfidenceMap {
    /// Canonicalizes non-finite entries to the sentinel; rejects finite
    /// values outside `[0, 1]`.
    pub fn new(view_id: u32, mut values: Grid2<f64>) -> Result<Self> {
        for v in values.as_mut_slice() {
            if !v.is_finite() {
                *v = SENTINEL_DEPTH;
            } else if *v < 0.0 || *v > 1.0 {
                return Err(Error::invalid(format!("confidence {v} outside [0, 1]")));
            }
        }
        Ok(ConfidenceMap { view_id, values })
    }

    /// Constant confidence for every pixel.
    pub fn constant(view_id: u32, height: usize, width: usize, value: f64) -> Self {
        ConfidenceMap { view_id, values: Grid2::filled(height, width, value) }
    }
}

/// One input view: depth, confidence, and its camera.
#[derive(Debug, Clone)]
pub struct ViewInput {
    pub depth: Grid2<f64>,
    pub confidence: Grid2<f64>,
    pub camera: CameraModel,
}

impl ViewInput {
    pub fn new(depth: Grid2<f64>, confidence: Grid2<f64>, camera: CameraModel) -> Result<Self> {
        if depth.shape() != (camera.height, camera.width) {
            return Err(Error::shape(format!(
                "depth map {:?} does not match camera image size {}x{}",
                depth.shape(),
                camera.height,
                camera.width
            )));
        }
        if !depth.same_shape(&confidence) {
            return Err(Error::shape("depth and confidence maps differ in size"));
        }
        Ok(ViewInput { depth, confidence, camera })
    }
}

/// All source views rendered into one reference view.
///
/// View order matches the input order; `valid_count` holds, per reference
/// pixel, how many views rendered a non-sentinel depth there.
#[derive(Debug, Clone)]
pub struct RenderedViewSet {
    pub depths: Vec<Grid2<f64>>,
    pub confidences: Vec<Grid2<f64>>,
    pub valid_count: Grid2<u32>,
}

impl RenderedViewSet {
    pub fn n_views(&self) -> usize {
        self.depths.len()
    }

    pub fn height(&self) -> usize {
        self.valid_count.height()
    }

    pub fn width(&self) -> usize {
        self.valid_count.width()
    }
}

/// Forward-splat one view's depth and confidence into another camera.
///
/// Every valid source pixel is unprojected and splatted onto the nearest
/// destination pixel.  A z-buffer keeps the smallest destination depth;
/// exact ties keep the earlier (row-major) source pixel.  Confidence travels
/// with the winning depth.  Destination pixels nobody hits stay sentinel.
pub fn render_into_view(
    depth: &Grid2<f64>,
    confidence: &Grid2<f64>,
    src_cam: &CameraModel,
    dst_cam: &CameraModel,
) -> Result<(Grid2<f64>, Grid2<f64>)> {
    if depth.shape() != (src_cam.height, src_cam.width) || !depth.same_shape(confidence) {
        return Err(Error::shape("render_into_view: map shapes disagree with the source camera"));
    }
    // Identical cameras: every pixel splats exactly onto itself.
    if src_cam == dst_cam {
        return Ok((depth.clone(), confidence.clone()));
    }
    let mut out_d = Grid2::filled(dst_cam.height, dst_cam.width, SENTINEL_DEPTH);
    let mut out_c = Grid2::filled(dst_cam.height, dst_cam.width, SENTINEL_DEPTH);
    for row in 0..depth.height() {
        for col in 0..depth.width() {
            let d = depth.get(row, col);
            if !is_valid_depth(d) {
                continue;
            }
            let world = unproject(src_cam, pixel_center(row, col), d);
            let Some((pixel, z)) = project(dst_cam, &world) else {
                continue;
            };
            let Some((dr, dc)) = dst_cam.nearest_pixel(pixel) else {
                continue;
            };
            let current = out_d.get(dr, dc);
            // Strict comparison keeps the earlier source pixel on exact ties.
            if !is_valid_depth(current) || z < current {
                out_d.set(dr, dc, z);
                out_c.set(dr, dc, confidence.get(row, col));
            }
        }
    }
    Ok((out_d, out_c))
}

/// Render every view (the reference itself included) into the reference
/// camera and count valid samples per pixel.
pub fn render_all_into_reference(
    views: &[ViewInput],
    ref_cam: &CameraModel,
) -> Result<RenderedViewSet> {
    let mut depths = Vec::with_capacity(views.len());
    let mut confidences = Vec::with_capacity(views.len());
    for view in views {
        let (d, c) = render_into_view(&view.depth, &view.confidence, &view.camera, ref_cam)?;
        depths.push(d);
        confidences.push(c);
    }
    let mut valid_count = Grid2::filled(ref_cam.height, ref_cam.width, 0u32);
    for d in &depths {
        for row in 0..d.height() {
            for col in 0..d.width() {
                if is_valid_depth(d.get(row, col)) {
                    let k = valid_count.get(row, col);
                    valid_count.set(row, col, k + 1);
                }
            }
        }
    }
    Ok(RenderedViewSet { depths, confidences, valid_count })
}

/// Where a depth hypothesis on a reference pixel lands in a source view.
#[derive(Debug, Clone, PartialEq)]
pub enum Reprojection {
    /// Continuous landing coordinates, the nearest source grid cell, and the
    /// hypothesis depth measured in the source camera frame.
    InView { pixel: Vector2<f64>, nearest: (usize, usize), depth: f64 },
    /// Projects in front of the camera but outside the image.
    OutOfView,
    /// On or behind the source camera plane.
    BehindCamera,
}

/// Reproject the hypothesis `(pixel, depth)` of the reference view into a
/// source view.
pub fn reproject_hypothesis(
    ref_cam: &CameraModel,
    pixel: (usize, usize),
    depth: f64,
    src_cam: &CameraModel,
) -> Reprojection {
    let world = unproject(ref_cam, pixel_center(pixel.0, pixel.1), depth);
    match project(src_cam, &world) {
        None => Reprojection::BehindCamera,
        Some((p, z)) => match src_cam.nearest_pixel(p) {
            Some(nearest) => Reprojection::InView { pixel: p, nearest, depth: z },
            None => Reprojection::OutOfView,
        },
    }
}

/// Symmetric reprojection error in pixels.
///
/// The reference estimate is projected into the source view, the source
/// depth is read at the nearest pixel, projected back, and the distance to
/// the original pixel returned.  Any invalid step (behind camera, outside
/// the image, missing source depth) yields `+inf`.
pub fn reprojection_error(
    ref_cam: &CameraModel,
    src_cam: &CameraModel,
    pixel: (usize, usize),
    ref_depth: f64,
    src_depth: &Grid2<f64>,
) -> f64 {
    if !is_valid_depth(ref_depth) {
        return f64::INFINITY;
    }
    let Reprojection::InView { nearest, .. } =
        reproject_hypothesis(ref_cam, pixel, ref_depth, src_cam)
    else {
        return f64::INFINITY;
    };
    let d_src = src_depth.get(nearest.0, nearest.1);
    if !is_valid_depth(d_src) {
        return f64::INFINITY;
    }
    let world = unproject(src_cam, pixel_center(nearest.0, nearest.1), d_src);
    let Some((back, _)) = project(ref_cam, &world) else {
        return f64::INFINITY;
    };
    (back - pixel_center(pixel.0, pixel.1)).norm()
}

/// Absolute depth disagreement seen from a source view: the reference
/// estimate is reprojected into the source camera and compared against the
/// depth the source observed at the landing pixel.  Any invalid step
/// (behind the camera, outside the image, missing source depth) yields
/// `+inf`.
pub fn depth_consistency_error(
    ref_cam: &CameraModel,
    src_cam: &CameraModel,
    pixel: (usize, usize),
    ref_depth: f64,
    src_depth: &Grid2<f64>,
) -> f64 {
    if !is_valid_depth(ref_depth) {
        return f64::INFINITY;
    }
    let Reprojection::InView { nearest, depth: hyp, .. } =
        reproject_hypothesis(ref_cam, pixel, ref_depth, src_cam)
    else {
        return f64::INFINITY;
    };
    let observed = src_depth.get(nearest.0, nearest.1);
    if !is_valid_depth(observed) {
        return f64::INFINITY;
    }
    (observed - hyp).abs()
}

/// Angle in radians between two cameras' optical axes.
pub fn optical_axis_angle(a: &CameraModel, b: &CameraModel) -> f64 {
    let dot = a.optical_axis().dot(&b.optical_axis()).clamp(-1.0, 1.0);
    dot.acos()
}

/// Indices of the `n_sources` views closest to the reference by optical-axis
/// angle (reference excluded), ordered by increasing angle with index as the
/// tie-breaker.
pub fn select_source_views(
    cameras: &[CameraModel],
    ref_index: usize,
    n_sources: usize,
) -> Vec<usize> {
    let mut ranked: Vec<(f64, usize)> = cameras
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != ref_index)
        .map(|(i, cam)| (optical_axis_angle(&cameras[ref_index], cam), i))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    ranked.into_iter().take(n_sources).map(|(_, i)| i).collect()
}
