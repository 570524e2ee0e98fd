//! Search-window estimation: per-pixel depth windows and hypothesis ladders.
//!
//! Instead of sweeping the full scene depth range with a dense set of
//! hypothesis planes, each reference pixel gets a small window centered on
//! the most trustworthy rendered depth, with a radius predicted from
//! statistics of the rendered views.  Hypotheses are then sampled uniformly
//! inside the window, so a handful of samples per pixel replaces hundreds.
//!
//! Window prediction is generic over [`Real`] so the fitter can push
//! gradients through the predictor parameters.

use serde::{Deserialize, Serialize};

use crate::dual::{logistic, Real};
use crate::error::{Error, Result};
use crate::geometry::{is_valid_depth, RenderedViewSet, SENTINEL_DEPTH};
use crate::grid::{Grid2, Grid3};

/// Global scene depth range `[min, max]`; all windows are expressed
/// relative to its extent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneDepthBounds {
    pub min: f64,
    pub max: f64,
}

impl SceneDepthBounds {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min > 0.0 && min < max) {
            return Err(Error::invalid(format!("depth bounds [{min}, {max}] must satisfy 0 < min < max")));
        }
        Ok(SceneDepthBounds { min, max })
    }

    pub fn range(&self) -> f64 {
        self.max - self.min
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.min + self.max)
    }
}

/// How the window center is chosen among the rendered depths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CenterStrategy {
    /// Depth of the rendered view with the highest confidence
    /// (ties broken by the lowest view index).
    #[default]
    MostConfident,
    /// Confidence-weighted mean of the rendered depths.
    ConfidenceWeightedMean,
}

/// Parameters of the window predictor.
///
/// The window scale is `O = logistic(theta · f)` over the feature vector
/// `f = (1, depth_std / range, 1 - conf_mean, conf_std, 1 - K/N)`, and the
/// radius is `R = r_min + r_max * O` with `r_min = psi_min * range` and
/// `r_max = psi_max * range`, so the radius spans `[r_min, r_min + r_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowPredictorParams {
    pub theta: [f64; 5],
    pub psi_min: f64,
    pub psi_max: f64,
    #[serde(default)]
    pub center: CenterStrategy,
}

impl Default for WindowPredictorParams {
    fn default() -> Self {
        WindowPredictorParams {
            // Bias toward tight windows on clean pixels; widen with rendered
            // depth scatter, low/uneven confidence, and missing views.
            theta: [-2.0, 8.0, 1.0, 1.0, 1.0],
            psi_min: 0.005,
            psi_max: 0.5,
            center: CenterStrategy::MostConfident,
        }
    }
}

impl WindowPredictorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.psi_min.is_finite() && self.psi_max.is_finite())
            || self.psi_min <= 0.0
            || self.psi_max <= 0.0
        {
            return Err(Error::invalid("psi_min and psi_max must be positive"));
        }
        if self.theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("predictor theta must be finite"));
        }
        Ok(())
    }
}

/// Per-pixel statistics of the rendered views feeding the window predictor.
///
/// Pixels with no valid rendered depth (`valid_count == 0`) hold the
/// sentinel in every statistic.
#[derive(Debug, Clone)]
pub struct WindowFeatures {
    pub depth_mean: Grid2<f64>,
    /// Population standard deviation (divides by K).
    pub depth_std: Grid2<f64>,
    pub conf_mean: Grid2<f64>,
    pub conf_std: Grid2<f64>,
    /// Depth of the most confident view.
    pub center_most_confident: Grid2<f64>,
    /// Confidence-weighted mean depth (plain mean when all weights vanish).
    pub center_weighted: Grid2<f64>,
    pub valid_count: Grid2<u32>,
    /// Number of views in the rendered set (the `N` in the `1 - K/N` feature).
    pub n_views: usize,
}

/// Per-pixel depth search windows.
#[derive(Debug, Clone)]
pub struct SearchWindowField<T = f64> {
    /// Predictor output `O` in `(0, 1]`.
    pub scale: Grid2<T>,
    /// Window half-extent `R = r_min + r_max * O`.
    pub radius: Grid2<T>,
    /// Window center (sentinel-free: midpoint of the scene bounds when `K = 0`).
    pub center: Grid2<f64>,
    /// Lower window bound `center - R`.
    pub bound_min: Grid2<T>,
    /// Upper window bound `center + R`.
    pub bound_max: Grid2<T>,
    pub valid_count: Grid2<u32>,
    /// Smallest admissible radius, `psi_min * range`.
    pub r_min: f64,
    /// Radius growth span, `psi_max * range`; the largest radius is `r_min + r_max`.
    pub r_max: f64,
}

impl<T: Real> SearchWindowField<T> {
    pub fn height(&self) -> usize {
        self.center.height()
    }

    pub fn width(&self) -> usize {
        self.center.width()
    }
}

/// One depth hypothesis ladder per pixel, strictly increasing along the ray.
#[derive(Debug, Clone)]
pub struct HypothesisVolume<T = f64> {
    pub depths: Grid3<T>,
}

impl<T: Real> HypothesisVolume<T> {
    pub fn m(&self) -> usize {
        self.depths.depth()
    }
}

/// Compute per-pixel window features from the rendered view set.
pub fn compute_features(rendered: &RenderedViewSet) -> WindowFeatures {
    let (h, w) = rendered.valid_count.shape();
    let n_views = rendered.n_views();
    let mut depth_mean = Grid2::filled(h, w, SENTINEL_DEPTH);
    let mut depth_std = Grid2::filled(h, w, SENTINEL_DEPTH);
    let mut conf_mean = Grid2::filled(h, w, SENTINEL_DEPTH);
    let mut conf_std = Grid2::filled(h, w, SENTINEL_DEPTH);
    let mut center_mc = Grid2::filled(h, w, SENTINEL_DEPTH);
    let mut center_wt = Grid2::filled(h, w, SENTINEL_DEPTH);

    for row in 0..h {
        for col in 0..w {
            let mut k = 0usize;
            let (mut sd, mut sd2, mut sc, mut sc2) = (0.0, 0.0, 0.0, 0.0);
            let mut swd = 0.0;
            let mut best_conf = f64::NEG_INFINITY;
            let mut best_depth = SENTINEL_DEPTH;
            for v in 0..n_views {
                let d = rendered.depths[v].get(row, col);
                if !is_valid_depth(d) {
                    continue;
                }
                let c = rendered.confidences[v].get(row, col);
                k += 1;
                sd += d;
                sd2 += d * d;
                sc += c;
                sc2 += c * c;
                swd += c * d;
                // Strict comparison: ties keep the lowest view index.
                if c > best_conf {
                    best_conf = c;
                    best_depth = d;
                }
            }
            if k == 0 {
                continue;
            }
            let kf = k as f64;
            let dm = sd / kf;
            let cm = sc / kf;
            depth_mean.set(row, col, dm);
            depth_std.set(row, col, (sd2 / kf - dm * dm).max(0.0).sqrt());
            conf_mean.set(row, col, cm);
            conf_std.set(row, col, (sc2 / kf - cm * cm).max(0.0).sqrt());
            center_mc.set(row, col, best_depth);
            center_wt.set(row, col, if sc > 0.0 { swd / sc } else { dm });
        }
    }

    WindowFeatures {
        depth_mean,
        depth_std,
        conf_mean,
        conf_std,
        center_most_confident: center_mc,
        center_weighted: center_wt,
        valid_count: rendered.valid_count.clone(),
        n_views,
    }
}

/// Predict per-pixel search windows with explicitly supplied predictor
/// weights (the differentiable path; `params.theta` is ignored in favor of
/// `theta`).
pub fn predict_window_with<T: Real>(
    features: &WindowFeatures,
    theta: &[T; 5],
    params: &WindowPredictorParams,
    bounds: &SceneDepthBounds,
) -> Result<SearchWindowField<T>> {
    params.validate()?;
    let range = bounds.range();
    let r_min = params.psi_min * range;
    let r_max = params.psi_max * range;
    let (h, w) = features.valid_count.shape();
    let n = features.n_views.max(1) as f64;

    let mut scale = Grid2::filled(h, w, T::lit(1.0));
    let mut radius = Grid2::filled(h, w, T::lit(0.0));
    let mut center = Grid2::filled(h, w, bounds.midpoint());
    let mut bound_min = Grid2::filled(h, w, T::lit(0.0));
    let mut bound_max = Grid2::filled(h, w, T::lit(0.0));

    for row in 0..h {
        for col in 0..w {
            let k = features.valid_count.get(row, col);
            let o = if k == 0 {
                // No evidence: maximal window over the midpoint.
                T::lit(1.0)
            } else {
                let f1 = features.depth_std.get(row, col) / range;
                let f2 = 1.0 - features.conf_mean.get(row, col);
                let f3 = features.conf_std.get(row, col);
                let f4 = 1.0 - f64::from(k) / n;
                let z = theta[0]
                    + theta[1] * T::lit(f1)
                    + theta[2] * T::lit(f2)
                    + theta[3] * T::lit(f3)
                    + theta[4] * T::lit(f4);
                logistic(z)
            };
            let c = if k == 0 {
                bounds.midpoint()
            } else {
                match params.center {
                    CenterStrategy::MostConfident => features.center_most_confident.get(row, col),
                    CenterStrategy::ConfidenceWeightedMean => features.center_weighted.get(row, col),
                }
            };
            let r = T::lit(r_min) + T::lit(r_max) * o;
            scale.set(row, col, o);
            radius.set(row, col, r);
            center.set(row, col, c);
            bound_min.set(row, col, T::lit(c) - r);
            bound_max.set(row, col, T::lit(c) + r);
        }
    }

    Ok(SearchWindowField { scale, radius, center, bound_min, bound_max, valid_count: features.valid_count.clone(), r_min, r_max })
}

/// Predict per-pixel search windows from the configured parameters.
pub fn predict_window(
    features: &WindowFeatures,
    params: &WindowPredictorParams,
    bounds: &SceneDepthBounds,
) -> Result<SearchWindowField<f64>> {
    predict_window_with(features, &params.theta, params, bounds)
}

/// Degenerate window field spanning the full scene range at every pixel
/// (used by the brute-force dense-sweep mode).
pub fn full_range_windows(
    bounds: &SceneDepthBounds,
    valid_count: &Grid2<u32>,
    params: &WindowPredictorParams,
) -> SearchWindowField<f64> {
    let (h, w) = valid_count.shape();
    let range = bounds.range();
    let r_min = params.psi_min * range;
    let r_max = params.psi_max * range;
    let r = 0.5 * range;
    let o = ((r - r_min) / r_max).clamp(0.0, 1.0);
    SearchWindowField {
        scale: Grid2::filled(h, w, o),
        radius: Grid2::filled(h, w, r),
        center: Grid2::filled(h, w, bounds.midpoint()),
        bound_min: Grid2::filled(h, w, bounds.min),
        bound_max: Grid2::filled(h, w, bounds.max),
        valid_count: valid_count.clone(),
        r_min,
        r_max,
    }
}

/// Sample `m` hypotheses uniformly inside each pixel's window.
///
/// Endpoints hit the window bounds exactly and the ladder is strictly
/// increasing.
pub fn windowed_hypotheses<T: Real>(
    windows: &SearchWindowField<T>,
    m: usize,
) -> Result<HypothesisVolume<T>> {
    if m < 2 {
        return Err(Error::invalid(format!("hypothesis count {m} must be at least 2")));
    }
    let (h, w) = windows.center.shape();
    let mut depths = Grid3::filled(h, w, m, T::lit(0.0));
    for row in 0..h {
        for col in 0..w {
            let lo = windows.bound_min.get(row, col);
            let hi = windows.bound_max.get(row, col);
            let ray = depths.ray_mut(row, col);
            for (j, slot) in ray.iter_mut().enumerate() {
                let t = j as f64 / (m - 1) as f64;
                // Convex blend: j = 0 and j = m-1 land exactly on the bounds.
                *slot = lo * T::lit(1.0 - t) + hi * T::lit(t);
            }
        }
    }
    Ok(HypothesisVolume { depths })
}

/// One uniform ladder over the full scene range, replicated at every pixel.
pub fn uniform_hypotheses(
    bounds: &SceneDepthBounds,
    m: usize,
    height: usize,
    width: usize,
) -> Result<HypothesisVolume<f64>> {
    if m < 2 {
        return Err(Error::invalid(format!("hypothesis count {m} must be at least 2")));
    }
    let mut depths = Grid3::filled(height, width, m, 0.0);
    let ladder: Vec<f64> = (0..m)
        .map(|j| {
            let t = j as f64 / (m - 1) as f64;
            bounds.min * (1.0 - t) + bounds.max * t
        })
        .collect();
    for row in 0..height {
        for col in 0..width {
            depths.ray_mut(row, col).copy_from_slice(&ladder);
        }
    }
    Ok(HypothesisVolume { depths })
}
