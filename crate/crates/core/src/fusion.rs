//! Mixing constraint channels into per-ray probabilities and regressing the
//! fused depth.
//!
//! The three constraint channels are optionally box-smoothed in the image
//! plane, mixed into a scalar score
//! `w_support * support - w_occlusion * occlusion - w_freespace * freespace`,
//! and turned into per-ray probabilities by a temperature softmax along the
//! hypothesis axis.  The fused depth is the probability-weighted mean of the
//! hypothesis ladder, so it always stays inside the pixel's search window.
//! Window tightness doubles as the fused confidence.

use crate::dual::{pairwise_sum, Real};
use crate::error::{Error, Result};
use crate::geometry::{
    is_valid_depth, reproject_hypothesis, CameraModel, ConfidenceMap, DepthMap, RenderedViewSet,
    Reprojection, ViewInput, SENTINEL_DEPTH,
};
use crate::grid::{Grid2, Grid3};
use crate::swe::{HypothesisVolume, SceneDepthBounds, SearchWindowField};
use crate::vcv::ConstraintVolume;
use serde::{Deserialize, Serialize};

/// Channel mixing weights, spatial smoothing, and softmax temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AggregatorParams {
    pub w_support: f64,
    pub w_occlusion: f64,
    pub w_freespace: f64,
    /// Box half-width in pixels; 0 disables spatial smoothing.
    pub smoothing_radius: usize,
    pub temperature: f64,
}

impl Default for AggregatorParams {
    fn default() -> Self {
        AggregatorParams {
            w_support: 1.0,
            w_occlusion: 1.0,
            w_freespace: 1.0,
            smoothing_radius: 1,
            temperature: 1.0,
        }
    }
}

impl AggregatorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::invalid("softmax temperature must be positive"));
        }
        for w in [self.w_support, self.w_occlusion, self.w_freespace] {
            if !w.is_finite() {
                return Err(Error::invalid("aggregator weights must be finite"));
            }
        }
        Ok(())
    }
}

/// Per-ray hypothesis probabilities; every ray sums to 1.
#[derive(Debug, Clone)]
pub struct ProbabilityVolume<T = f64> {
    pub probs: Grid3<T>,
}

/// Fused depth and confidence for one reference view.
#[derive(Debug, Clone)]
pub struct FusedOutput {
    pub depth: DepthMap,
    pub confidence: ConfidenceMap,
}

/// Box-smooth one channel in the two image dimensions (clipped window mean,
/// every hypothesis slot independently).
fn box_smooth<T: Real>(channel: &Grid3<T>, radius: usize) -> Grid3<T> {
    if radius == 0 {
        return channel.clone();
    }
    let (h, w, m) = channel.shape();
    let mut out = Grid3::filled(h, w, m, T::lit(0.0));
    for row in 0..h {
        let r0 = row.saturating_sub(radius);
        let r1 = (row + radius).min(h - 1);
        for col in 0..w {
            let c0 = col.saturating_sub(radius);
            let c1 = (col + radius).min(w - 1);
            let count = T::lit(((r1 - r0 + 1) * (c1 - c0 + 1)) as f64);
            for j in 0..m {
                let mut acc = T::lit(0.0);
                for rr in r0..=r1 {
                    for cc in c0..=c1 {
                        acc = acc + channel.get(rr, cc, j);
                    }
                }
                out.set(row, col, j, acc / count);
            }
        }
    }
    out
}

/// Mix the channels into per-ray probabilities.
///
/// Rays with no valid rendered view get the uniform distribution.
pub fn aggregate<T: Real>(
    volume: &ConstraintVolume<T>,
    weights: [T; 3],
    temperature: T,
    smoothing_radius: usize,
) -> Result<ProbabilityVolume<T>> {
    let (h, w, m) = volume.support.shape();
    if temperature.value() <= 0.0 {
        return Err(Error::invalid("softmax temperature must be positive"));
    }
    if smoothing_radius > h.min(w) / 2 {
        return Err(Error::invalid(format!(
            "smoothing radius {smoothing_radius} too large for a {h}x{w} image"
        )));
    }
    let support = box_smooth(&volume.support, smoothing_radius);
    let occlusion = box_smooth(&volume.occlusion, smoothing_radius);
    let freespace = box_smooth(&volume.freespace, smoothing_radius);

    let mut probs = Grid3::filled(h, w, m, T::lit(0.0));
    let uniform = T::lit(1.0 / m as f64);
    for row in 0..h {
        for col in 0..w {
            let ray = probs.ray_mut(row, col);
            if volume.valid_views.get(row, col) == 0 {
                for p in ray.iter_mut() {
                    *p = uniform;
                }
                continue;
            }
            // Scores, shifted by the ray maximum for a stable softmax.
            let mut best = f64::NEG_INFINITY;
            for (j, slot) in ray.iter_mut().enumerate() {
                let score = (weights[0] * support.get(row, col, j)
                    - weights[1] * occlusion.get(row, col, j)
                    - weights[2] * freespace.get(row, col, j))
                    / temperature;
                if score.value() > best {
                    best = score.value();
                }
                *slot = score;
            }
            let shift = T::lit(best);
            let mut total = T::lit(0.0);
            for p in ray.iter_mut() {
                *p = (*p - shift).exp_clamped();
                total = total + *p;
            }
            for p in ray.iter_mut() {
                *p = *p / total;
            }
        }
    }
    Ok(ProbabilityVolume { probs })
}

/// Probability-weighted mean of the hypothesis ladder per pixel.
///
/// The result lies within `[min, max]` of each pixel's ladder; rays with
/// uniform probabilities regress to the ladder mean.
pub fn soft_argmax<T: Real>(
    ladder: &HypothesisVolume<T>,
    probabilities: &ProbabilityVolume<T>,
) -> Result<Grid2<T>> {
    let (h, w, m) = ladder.depths.shape();
    if !ladder.depths.same_shape(&probabilities.probs) {
        return Err(Error::shape("ladder and probability volume shapes disagree"));
    }
    let mut out = Grid2::filled(h, w, T::lit(0.0));
    let mut terms = vec![T::lit(0.0); m];
    for row in 0..h {
        for col in 0..w {
            let s = ladder.depths.ray(row, col);
            let p = probabilities.probs.ray(row, col);
            for j in 0..m {
                terms[j] = s[j] * p[j];
            }
            out.set(row, col, pairwise_sum(&terms));
        }
    }
    Ok(out)
}

/// Largest probability along each ray (confidence proxy for dense sweeps).
pub fn max_probability<T: Real>(probabilities: &ProbabilityVolume<T>) -> Grid2<T> {
    let (h, w, m) = probabilities.probs.shape();
    let mut out = Grid2::filled(h, w, T::lit(0.0));
    for row in 0..h {
        for col in 0..w {
            let mut best = probabilities.probs.get(row, col, 0);
            for j in 1..m {
                best = best.vmax(probabilities.probs.get(row, col, j));
            }
            out.set(row, col, best);
        }
    }
    out
}

/// Fused confidence: `1 - O`, i.e. the window radius normalized to the fixed
/// feasible range `[r_min, r_min + r_max]` and inverted.  Pixels with no
/// rendered view get confidence 0.
pub fn fused_confidence<T: Real>(windows: &SearchWindowField<T>) -> Grid2<T> {
    let (h, w) = windows.center.shape();
    let mut out = Grid2::filled(h, w, T::lit(0.0));
    for row in 0..h {
        for col in 0..w {
            if windows.valid_count.get(row, col) == 0 {
                continue;
            }
            out.set(row, col, T::lit(1.0) - windows.scale.get(row, col));
        }
    }
    out
}

/// Conventional per-candidate fusion baseline.
///
/// Each pixel's candidates are its rendered depths; every candidate is
/// scored by `support - occlusion - freespace` evaluated at that single
/// depth with full-range bandwidths (`sigma = gamma_sigma / M` of the scene
/// range, `lambda = gamma_lambda * M` over it).  The best-scoring candidate
/// wins (ties keep the lowest view index) and its support response becomes
/// the confidence.
pub fn conventional_fuse(
    views: &[ViewInput],
    ref_cam: &CameraModel,
    rendered: &RenderedViewSet,
    params: &crate::vcv::ConstraintParams,
    bounds: &SceneDepthBounds,
    m: usize,
    view_id: u32,
) -> Result<FusedOutput> {
    params.validate()?;
    if m == 0 {
        return Err(Error::invalid("hypothesis count must be positive"));
    }
    let (h, w) = rendered.valid_count.shape();
    let range = bounds.range();
    let sigma = params.gamma_sigma * range / (m as f64 * range);
    let lambda = params.gamma_lambda * (m as f64 * range) / range;
    let two_sigma2 = 2.0 * sigma * sigma;

    let mut depth = Grid2::filled(h, w, SENTINEL_DEPTH);
    let mut conf = Grid2::filled(h, w, 0.0);
    for row in 0..h {
        for col in 0..w {
            let k = rendered.valid_count.get(row, col);
            if k == 0 {
                continue;
            }
            let kf = f64::from(k);
            let mut best_score = f64::NEG_INFINITY;
            let mut best = (SENTINEL_DEPTH, 0.0);
            for cand_view in 0..rendered.n_views() {
                let s = rendered.depths[cand_view].get(row, col);
                if !is_valid_depth(s) {
                    continue;
                }
                let mut sup = 0.0;
                let mut occ = 0.0;
                for v in 0..rendered.n_views() {
                    let d = rendered.depths[v].get(row, col);
                    if !is_valid_depth(d) {
                        continue;
                    }
                    let c = rendered.confidences[v].get(row, col);
                    let diff = s - d;
                    sup += c * (-(diff * diff) / two_sigma2).exp_clamped();
                    occ += c * crate::dual::logistic(lambda * (s - d));
                }
                sup /= kf;
                occ /= kf;
                let mut fsv = 0.0;
                let mut fsv_k = 0u32;
                for view in views {
                    let Reprojection::InView { nearest, depth: s_src, .. } =
                        reproject_hypothesis(ref_cam, (row, col), s, &view.camera)
                    else {
                        continue;
                    };
                    let d_src = view.depth.get(nearest.0, nearest.1);
                    if !is_valid_depth(d_src) {
                        continue;
                    }
                    let c_src = view.confidence.get(nearest.0, nearest.1);
                    fsv += c_src * crate::dual::logistic(lambda * (d_src - s_src));
                    fsv_k += 1;
                }
                if fsv_k > 0 {
                    fsv /= f64::from(fsv_k);
                }
                let score = sup - occ - fsv;
                // Strict comparison keeps the lowest candidate view on ties.
                if score > best_score {
                    best_score = score;
                    best = (s, sup);
                }
            }
            depth.set(row, col, best.0);
            conf.set(row, col, best.1.clamp(0.0, 1.0));
        }
    }
    Ok(FusedOutput {
        depth: DepthMap { view_id, values: depth },
        confidence: ConfidenceMap { view_id, values: conf },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::render_all_into_reference;
    use crate::swe::{
        compute_features, predict_window, uniform_hypotheses, WindowPredictorParams,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_volume(seed: u64, h: usize, w: usize, m: usize) -> ConstraintVolume {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |lo: f64, hi: f64| {
            let mut g = Grid3::filled(h, w, m, 0.0);
            for v in g.as_mut_slice() {
                *v = rng.gen_range(lo..hi);
            }
            g
        };
        ConstraintVolume {
            support: fill(0.0, 1.0),
            occlusion: fill(0.0, 1.0),
            freespace: fill(0.0, 1.0),
            valid_views: Grid2::filled(h, w, 2),
            freespace_views: Grid3::filled(h, w, m, 2),
        }
    }

    #[test]
    fn probabilities_sum_to_one() {
        for seed in 0..5 {
            let vol = random_volume(seed, 4, 5, 6);
            let pv = aggregate(&vol, [1.0, 1.0, 1.0], 0.7, 1).unwrap();
            for row in 0..4 {
                for col in 0..5 {
                    let total: f64 = pv.probs.ray(row, col).iter().sum();
                    assert!((total - 1.0).abs() < 1e-9);
                    assert!(pv.probs.ray(row, col).iter().all(|p| *p >= 0.0));
                }
            }
        }
    }

    #[test]
    fn empty_rays_get_uniform_probabilities() {
        let mut vol = random_volume(3, 2, 2, 8);
        vol.valid_views.set(1, 1, 0);
        let pv = aggregate(&vol, [1.0, 1.0, 1.0], 1.0, 0).unwrap();
        for p in pv.probs.ray(1, 1) {
            assert_eq!(*p, 0.125);
        }
    }

    #[test]
    fn constant_score_shift_leaves_probabilities_unchanged() {
        let vol = random_volume(11, 3, 3, 5);
        let mut shifted = vol.clone();
        for v in shifted.support.as_mut_slice() {
            *v += 7.5; // w_support = 1: shifts every score by the same amount
        }
        let a = aggregate(&vol, [1.0, 0.5, 2.0], 1.3, 1).unwrap();
        let b = aggregate(&shifted, [1.0, 0.5, 2.0], 1.3, 1).unwrap();
        for (x, y) in a.probs.as_slice().iter().zip(b.probs.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn smoothing_radius_is_bounded_by_the_image() {
        let vol = random_volume(0, 4, 4, 3);
        assert!(aggregate(&vol, [1.0, 1.0, 1.0], 1.0, 3).is_err());
        assert!(aggregate(&vol, [1.0, 1.0, 1.0], 1.0, 2).is_ok());
    }

    #[test]
    fn soft_argmax_one_hot_and_uniform_are_exact() {
        let bounds = SceneDepthBounds::new(10.0, 20.0).unwrap();
        let ladder = uniform_hypotheses(&bounds, 8, 1, 1).unwrap();
        let mut probs = Grid3::filled(1, 1, 8, 0.0);
        probs.set(0, 0, 3, 1.0);
        let d = soft_argmax(&ladder, &ProbabilityVolume { probs }).unwrap();
        assert_eq!(d.get(0, 0), ladder.depths.get(0, 0, 3));

        let uniform = ProbabilityVolume { probs: Grid3::filled(1, 1, 8, 0.125) };
        let d = soft_argmax(&ladder, &uniform).unwrap();
        let mean: f64 = ladder.depths.ray(0, 0).iter().sum::<f64>() / 8.0;
        assert!((d.get(0, 0) - mean).abs() < 1e-12);
    }

    #[test]
    fn soft_argmax_stays_inside_the_ladder() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let bounds = SceneDepthBounds::new(5.0, 50.0).unwrap();
        let ladder = uniform_hypotheses(&bounds, 6, 2, 2).unwrap();
        for _ in 0..20 {
            let mut probs = Grid3::filled(2, 2, 6, 0.0);
            for row in 0..2 {
                for col in 0..2 {
                    let raw: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..1.0)).collect();
                    let total: f64 = raw.iter().sum();
                    for (j, r) in raw.iter().enumerate() {
                        probs.set(row, col, j, r / total);
                    }
                }
            }
            let d = soft_argmax(&ladder, &ProbabilityVolume { probs }).unwrap();
            for row in 0..2 {
                for col in 0..2 {
                    let v = d.get(row, col);
                    assert!((5.0..=50.0).contains(&v));
                }
            }
        }
    }

    #[test]
    fn occlusion_weight_never_attracts_occluded_samples() {
        // On two-sample rays, growing w_occlusion may only move the argmax
        // toward the sample with the smaller occlusion response.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let mut vol = random_volume(rng.gen(), 1, 1, 2);
            vol.freespace = Grid3::filled(1, 1, 2, 0.0);
            let occ = [vol.occlusion.get(0, 0, 0), vol.occlusion.get(0, 0, 1)];
            let mut last_arg = None;
            for step in 0..8 {
                let w_occ = step as f64 * 0.5;
                let pv = aggregate(&vol, [1.0, w_occ, 1.0], 1.0, 0).unwrap();
                let ray = pv.probs.ray(0, 0);
                let arg = usize::from(ray[1] > ray[0]);
                if let Some(prev) = last_arg {
                    if arg != prev {
                        assert!(
                            occ[arg] <= occ[prev],
                            "argmax moved toward a more occluded sample"
                        );
                    }
                }
                last_arg = Some(arg);
            }
        }
    }

    #[test]
    fn fused_confidence_inverts_the_window_scale() {
        let cam = CameraModel::centered(50.0, 50.0, 2, 2).unwrap();
        let views = vec![ViewInput::new(
            Grid2::filled(2, 2, 12.0),
            Grid2::filled(2, 2, 0.9),
            cam.clone(),
        )
        .unwrap()];
        let rendered = render_all_into_reference(&views, &cam).unwrap();
        let bounds = SceneDepthBounds::new(10.0, 20.0).unwrap();
        let features = compute_features(&rendered);
        let windows =
            predict_window(&features, &WindowPredictorParams::default(), &bounds).unwrap();
        let c = fused_confidence(&windows);
        let o = windows.scale.get(0, 0);
        assert!((c.get(0, 0) - (1.0 - o)).abs() < 1e-15);
        // Normalized-radius form agrees.
        let r_norm = (windows.radius.get(0, 0) - windows.r_min) / windows.r_max;
        assert!((c.get(0, 0) - (1.0 - r_norm)).abs() < 1e-12);
    }

    #[test]
    fn conventional_fuse_picks_the_consensus_depth() {
        let cam = CameraModel::centered(50.0, 50.0, 3, 3).unwrap();
        let views: Vec<ViewInput> = [12.0, 12.0, 17.0]
            .iter()
            .map(|&d| {
                ViewInput::new(Grid2::filled(3, 3, d), Grid2::filled(3, 3, 1.0), cam.clone())
                    .unwrap()
            })
            .collect();
        let rendered = render_all_into_reference(&views, &cam).unwrap();
        let bounds = SceneDepthBounds::new(10.0, 20.0).unwrap();
        let out = conventional_fuse(
            &views,
            &cam,
            &rendered,
            &crate::vcv::ConstraintParams::default(),
            &bounds,
            8,
            0,
        )
        .unwrap();
        assert_eq!(out.depth.values.get(1, 1), 12.0);
        assert!(out.confidence.values.get(1, 1) > 0.0);
    }

    #[test]
    fn conventional_fuse_marks_empty_pixels() {
        let cam = CameraModel::centered(50.0, 50.0, 3, 3).unwrap();
        let views = vec![ViewInput::new(
            Grid2::filled(3, 3, SENTINEL_DEPTH),
            Grid2::filled(3, 3, SENTINEL_DEPTH),
            cam.clone(),
        )
        .unwrap()];
        let rendered = render_all_into_reference(&views, &cam).unwrap();
        let bounds = SceneDepthBounds::new(10.0, 20.0).unwrap();
        let out = conventional_fuse(
            &views,
            &cam,
            &rendered,
            &crate::vcv::ConstraintParams::default(),
            &bounds,
            8,
            0,
        )
        .unwrap();
        assert!(!is_valid_depth(out.depth.values.get(1, 1)));
        assert_eq!(out.confidence.values.get(1, 1), 0.0);
    }
}
