//! Visibility constraint volume: per-hypothesis support, occlusion, and
//! free-space-violation responses.
//!
//! For every reference pixel `p` and hypothesis depth `S` the volume stores
//! three channels, each a confidence-weighted average over views:
//!
//! - **support** — Gaussian agreement `exp(-(S - D)^2 / (2 sigma^2))` with each
//!   rendered depth `D`; peaks where views agree.
//! - **occlusion** — `sigmoid(lambda (S - D))`; grows once the hypothesis
//!   passes behind a rendered surface.
//! - **free space** — the hypothesis is reprojected into each *original*
//!   source view; `sigmoid(lambda (D_src - s_src))` grows when the hypothesis
//!   floats in front of the surface that view observed.  Averaged per voxel
//!   over the views whose landing pixel holds data.
//!
//! The bandwidths adapt to the per-pixel window extent `W = bmax - bmin`
//! relative to the scene range `B` sampled with `M` hypotheses:
//! `sigma = gamma_sigma * W / (M B)` and `lambda = gamma_lambda * M B / W`.
//! Both gammas absorb scene scale and are fitted by the `losses` module.

use serde::{Deserialize, Serialize};

use crate::dual::{logistic, Real};
use crate::error::{Error, Result};
use crate::geometry::{is_valid_depth, CameraModel, RenderedViewSet, ViewInput};
use crate::grid::{Grid2, Grid3};
use crate::swe::{HypothesisVolume, SceneDepthBounds, SearchWindowField};

/// Bandwidth gains of the constraint channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstraintParams {
    pub gamma_sigma: f64,
    pub gamma_lambda: f64,
}

impl Default for ConstraintParams {
    fn default() -> Self {
        ConstraintParams { gamma_sigma: 1.0, gamma_lambda: 1.0 }
    }
}

impl ConstraintParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_sigma.is_finite() && self.gamma_sigma > 0.0)
            || !(self.gamma_lambda.is_finite() && self.gamma_lambda > 0.0)
        {
            return Err(Error::invalid("constraint gammas must be positive"));
        }
        Ok(())
    }
}

/// The three constraint channels plus the view counts their averages used.
#[derive(Debug, Clone)]
pub struct ConstraintVolume<T = f64> {
    pub support: Grid3<T>,
    pub occlusion: Grid3<T>,
    pub freespace: Grid3<T>,
    /// Per-pixel count of valid rendered views (the `K` of support/occlusion).
    pub valid_views: Grid2<u32>,
    /// Per-voxel count of source views contributing to the free-space average.
    pub freespace_views: Grid3<u32>,
}

impl<T: Real> ConstraintVolume<T> {
    /// Hypotheses per pixel.
    pub fn m(&self) -> usize {
        self.support.depth()
    }

    /// Heap bytes held by the channel and count grids.
    pub fn memory_bytes(&self) -> usize {
        3 * self.support.len() * std::mem::size_of::<T>()
            + self.freespace_views.len() * std::mem::size_of::<u32>()
            + self.valid_views.len() * std::mem::size_of::<u32>()
    }
}

/// Per-pixel support bandwidth `sigma = gamma * (bmax - bmin) / (M * range)`.
pub fn sigma_field<T: Real>(
    windows: &SearchWindowField<T>,
    gamma_sigma: T,
    m: usize,
    bounds: &SceneDepthBounds,
) -> Grid2<T> {
    let norm = T::lit(m as f64 * bounds.range());
    let (h, w) = windows.center.shape();
    let mut out = Grid2::filled(h, w, T::lit(0.0));
    for row in 0..h {
        for col in 0..w {
            let extent = windows.bound_max.get(row, col) - windows.bound_min.get(row, col);
            out.set(row, col, gamma_sigma * extent / norm);
        }
    }
    out
}

/// Per-pixel transition sharpness `lambda = gamma * M * range / (bmax - bmin)`.
pub fn lambda_field<T: Real>(
    windows: &SearchWindowField<T>,
    gamma_lambda: T,
    m: usize,
    bounds: &SceneDepthBounds,
) -> Grid2<T> {
    let norm = T::lit(m as f64 * bounds.range());
    let (h, w) = windows.center.shape();
    let mut out = Grid2::filled(h, w, T::lit(0.0));
    for row in 0..h {
        for col in 0..w {
            let extent = windows.bound_max.get(row, col) - windows.bound_min.get(row, col);
            out.set(row, col, gamma_lambda * norm / extent);
        }
    }
    out
}

/// Logistic step `sigmoid(lambda * x)` with the shared exponent clamp.
fn steep_step<T: Real>(lambda: T, x: T) -> T {
    logistic(lambda * x)
}

/// Confidence-weighted Gaussian agreement channel.
///
/// Pixels with no valid rendered view are zero everywhere along the ray.
pub fn support_channel<T: Real>(
    rendered: &RenderedViewSet,
    ladder: &HypothesisVolume<T>,
    sigma: &Grid2<T>,
) -> Grid3<T> {
    let (h, w, m) = ladder.depths.shape();
    let mut out = Grid3::filled(h, w, m, T::lit(0.0));
    for row in 0..h {
        for col in 0..w {
            let k = rendered.valid_count.get(row, col);
            if k == 0 {
                continue;
            }
            let s2 = {
                let sg = sigma.get(row, col);
                T::lit(2.0) * sg * sg
            };
            let inv_k = T::lit(1.0 / f64::from(k));
            for j in 0..m {
                let s = ladder.depths.get(row, col, j);
                let mut acc = T::lit(0.0);
                for v in 0..rendered.n_views() {
                    let d = rendered.depths[v].get(row, col);
                    if !is_valid_depth(d) {
                        continue;
                    }
                    let c = rendered.confidences[v].get(row, col);
                    let diff = s - T::lit(d);
                    acc = acc + T::lit(c) * (-(diff * diff) / s2).exp_clamped();
                }
                out.set(row, col, j, acc * inv_k);
            }
        }
    }
    out
}

/// Confidence-weighted occlusion channel: rises as the hypothesis passes
/// behind rendered surfaces, hence non-decreasing along every ray.
pub fn occlusion_channel<T: Real>(
    rendered: &RenderedViewSet,
    ladder: &HypothesisVolume<T>,
    lambda: &Grid2<T>,
) -> Grid3<T> {
    let (h, w, m) = ladder.depths.shape();
    let mut out = Grid3::filled(h, w, m, T::lit(0.0));
    for row in 0..h {
        for col in 0..w {
            let k = rendered.valid_count.get(row, col);
            if k == 0 {
                continue;
            }
            let lam = lambda.get(row, col);
            let inv_k = T::lit(1.0 / f64::from(k));
            for j in 0..m {
                let s = ladder.depths.get(row, col, j);
                let mut acc = T::lit(0.0);
                for v in 0..rendered.n_views() {
                    let d = rendered.depths[v].get(row, col);
                    if !is_valid_depth(d) {
                        continue;
                    }
                    let c = rendered.confidences[v].get(row, col);
                    acc = acc + T::lit(c) * steep_step(lam, s - T::lit(d));
                }
                out.set(row, col, j, acc * inv_k);
            }
        }
    }
    out
}

/// Free-space-violation channel measured in the original (non-rendered)
/// source views, the reference view included.
///
/// Each hypothesis is reprojected into every source view; views where it
/// lands inside the image on a valid depth contribute
/// `C_src * sigmoid(lambda * (D_src - s_src))`, averaged per voxel over the
/// contributing count.  Rays with no valid rendered view stay zero to match
/// the other channels.
pub fn freespace_channel<T: Real>(
    views: &[ViewInput],
    ref_cam: &CameraModel,
    ladder: &HypothesisVolume<T>,
    lambda: &Grid2<T>,
    rendered_valid: &Grid2<u32>,
) -> (Grid3<T>, Grid3<u32>) {
    let (h, w, m) = ladder.depths.shape();
    let mut out = Grid3::filled(h, w, m, T::lit(0.0));
    let mut counts = Grid3::filled(h, w, m, 0u32);
    let origin = ref_cam.center();
    // Per-view constants of the affine map from hypothesis depth to the
    // source camera frame: x_src(S) = a_v * S + b_v.
    let per_view: Vec<(nalgebra::Matrix3<f64>, nalgebra::Vector3<f64>)> = views
        .iter()
        .map(|v| (v.camera.rotation, v.camera.rotation * origin + v.camera.translation))
        .collect();

    let mut dirs = vec![nalgebra::Vector3::zeros(); views.len()];
    for row in 0..h {
        for col in 0..w {
            if rendered_valid.get(row, col) == 0 {
                continue;
            }
            let ray = ref_cam.ray_through_pixel(crate::geometry::pixel_center(row, col));
            for (dir, (rot, _)) in dirs.iter_mut().zip(per_view.iter()) {
                *dir = rot * ray;
            }
            let lam = lambda.get(row, col);
            for j in 0..m {
                let s = ladder.depths.get(row, col, j);
                let s_val = s.value();
                let mut acc = T::lit(0.0);
                let mut k = 0u32;
                for ((view, (_, b)), a) in views.iter().zip(per_view.iter()).zip(dirs.iter()) {
                    // Depth of the hypothesis point in the source frame is
                    // affine in S; the landing pixel is evaluated at the value.
                    let z = b.z + s_val * a.z;
                    if z <= 0.0 {
                        continue;
                    }
                    let u = view.camera.fx * (b.x + s_val * a.x) / z + view.camera.cx;
                    let v_px = view.camera.fy * (b.y + s_val * a.y) / z + view.camera.cy;
                    let Some((lr, lc)) =
                        view.camera.nearest_pixel(nalgebra::Vector2::new(u, v_px))
                    else {
                        continue;
                    };
                    let d_src = view.depth.get(lr, lc);
                    if !is_valid_depth(d_src) {
                        continue;
                    }
                    let c_src = view.confidence.get(lr, lc);
                    let s_src = T::lit(b.z) + s * T::lit(a.z);
                    acc = acc + T::lit(c_src) * steep_step(lam, T::lit(d_src) - s_src);
                    k += 1;
                }
                if k > 0 {
                    out.set(row, col, j, acc / T::lit(f64::from(k)));
                    counts.set(row, col, j, k);
                }
            }
        }
    }
    (out, counts)
}

/// Build all three channels with bandwidths derived from the window field.
#[allow(clippy::too_many_arguments)]
pub fn build_vcv<T: Real>(
    views: &[ViewInput],
    ref_cam: &CameraModel,
    rendered: &RenderedViewSet,
    ladder: &HypothesisVolume<T>,
    windows: &SearchWindowField<T>,
    gamma_sigma: T,
    gamma_lambda: T,
    bounds: &SceneDepthBounds,
) -> Result<ConstraintVolume<T>> {
    let (h, w, m) = ladder.depths.shape();
    if (h, w) != rendered.valid_count.shape() || (h, w) != windows.center.shape() {
        return Err(Error::shape("ladder, rendered set, and window field shapes disagree"));
    }
    if (ref_cam.height, ref_cam.width) != (h, w) {
        return Err(Error::shape("reference camera image size disagrees with the ladder"));
    }
    if !(gamma_sigma.value() > 0.0 && gamma_lambda.value() > 0.0) {
        return Err(Error::invalid("constraint gammas must be positive"));
    }
    let sigma = sigma_field(windows, gamma_sigma, m, bounds);
    let lambda = lambda_field(windows, gamma_lambda, m, bounds);
    let support = support_channel(rendered, ladder, &sigma);
    let occlusion = occlusion_channel(rendered, ladder, &lambda);
    let (freespace, freespace_views) =
        freespace_channel(views, ref_cam, ladder, &lambda, &rendered.valid_count);
    Ok(ConstraintVolume {
        support,
        occlusion,
        freespace,
        valid_views: rendered.valid_count.clone(),
        freespace_views,
    })
}
