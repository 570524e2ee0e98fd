//! End-to-end fusion of one reference view, and the flattened parameter
//! vector that makes the whole pipeline differentiable for fitting.
//!
//! The production entry point is [`fuse_view`]: select source views, render
//! them into the reference camera, predict per-pixel search windows, build
//! the three-channel constraint volume, aggregate it into per-hypothesis
//! probabilities, and regress a fused depth with a confidence map.
//!
//! For fitting, [`prepare_scene`] freezes everything that does not depend on
//! the trainable parameters (view selection, rendering, window features),
//! and [`scene_loss`] evaluates the loss terms generically — with plain
//! `f64` or with dual numbers carrying exact derivatives in all
//! [`PARAM_COUNT`] trainable parameters.

use serde::{Deserialize, Serialize};

use crate::dual::{Dual, Real};
use crate::error::{Error, Result};
use crate::fusion::{
    aggregate, conventional_fuse, fused_confidence, max_probability, soft_argmax,
    AggregatorParams, FusedOutput,
};
use crate::geometry::{
    render_all_into_reference, select_source_views, ConfidenceMap, DepthMap, ViewInput,
    SENTINEL_DEPTH,
};
use crate::grid::Grid2;
use crate::losses::{coverage_loss, depth_loss, radius_loss, valid_mask, LossTerm, LossWeights};
use crate::swe::{
    compute_features, full_range_windows, predict_window_with, uniform_hypotheses,
    windowed_hypotheses, SceneDepthBounds, SearchWindowField, WindowFeatures,
    WindowPredictorParams,
};
use crate::vcv::{build_vcv, ConstraintParams, ConstraintVolume};

/// Number of trainable parameters: five predictor weights, two constraint
/// gammas, three aggregator weights, and the softmax temperature.
pub const PARAM_COUNT: usize = 11;

/// Flat-vector indices that must stay strictly positive
/// (`gamma_sigma`, `gamma_lambda`, `temperature`).
const POSITIVE_INDICES: [usize; 3] = [5, 6, 10];
const POSITIVE_FLOOR: f64 = 1e-6;

/// The trainable pipeline parameters.
///
/// Flat order: `theta[0..5]`, `gamma_sigma`, `gamma_lambda`, `w_support`,
/// `w_occlusion`, `w_freespace`, `temperature`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    pub theta: [f64; 5],
    pub gamma_sigma: f64,
    pub gamma_lambda: f64,
    pub w_support: f64,
    pub w_occlusion: f64,
    pub w_freespace: f64,
    pub temperature: f64,
}

impl FitParams {
    /// Collect the trainable subset of a pipeline configuration.
    pub fn from_config(config: &PipelineConfig) -> Self {
        FitParams {
            theta: config.predictor.theta,
            gamma_sigma: config.constraint.gamma_sigma,
            gamma_lambda: config.constraint.gamma_lambda,
            w_support: config.aggregator.w_support,
            w_occlusion: config.aggregator.w_occlusion,
            w_freespace: config.aggregator.w_freespace,
            temperature: config.aggregator.temperature,
        }
    }

    /// Write the trainable subset back into a configuration.
    pub fn apply_to(&self, config: &PipelineConfig) -> PipelineConfig {
        let mut out = config.clone();
        out.predictor.theta = self.theta;
        out.constraint.gamma_sigma = self.gamma_sigma;
        out.constraint.gamma_lambda = self.gamma_lambda;
        out.aggregator.w_support = self.w_support;
        out.aggregator.w_occlusion = self.w_occlusion;
        out.aggregator.w_freespace = self.w_freespace;
        out.aggregator.temperature = self.temperature;
        out
    }

    pub fn to_array(&self) -> [f64; PARAM_COUNT] {
        [
            self.theta[0],
            self.theta[1],
            self.theta[2],
            self.theta[3],
            self.theta[4],
            self.gamma_sigma,
            self.gamma_lambda,
            self.w_support,
            self.w_occlusion,
            self.w_freespace,
            self.temperature,
        ]
    }

    pub fn from_array(x: &[f64; PARAM_COUNT]) -> Self {
        FitParams {
            theta: [x[0], x[1], x[2], x[3], x[4]],
            gamma_sigma: x[5],
            gamma_lambda: x[6],
            w_support: x[7],
            w_occlusion: x[8],
            w_freespace: x[9],
            temperature: x[10],
        }
    }

    /// Project a flat vector back onto the feasible set (bandwidth gammas
    /// and the temperature stay strictly positive).
    pub fn project(x: &mut [f64; PARAM_COUNT]) {
        for &i in &POSITIVE_INDICES {
            // f64::max maps NaN onto the floor as well.
            x[i] = x[i].max(POSITIVE_FLOOR);
        }
    }
}

/// [`FitParams`] lifted to a generic scalar, so the same pipeline code runs
/// with `f64` or with gradient-carrying duals.
#[derive(Debug, Clone, Copy)]
pub struct FitParamsT<T> {
    pub theta: [T; 5],
    pub gamma_sigma: T,
    pub gamma_lambda: T,
    pub w_support: T,
    pub w_occlusion: T,
    pub w_freespace: T,
    pub temperature: T,
}

impl<T: Real> FitParamsT<T> {
    /// Lift concrete values without seeding any derivatives.
    pub fn constant(p: &FitParams) -> Self {
        FitParamsT {
            theta: p.theta.map(T::lit),
            gamma_sigma: T::lit(p.gamma_sigma),
            gamma_lambda: T::lit(p.gamma_lambda),
            w_support: T::lit(p.w_support),
            w_occlusion: T::lit(p.w_occlusion),
            w_freespace: T::lit(p.w_freespace),
            temperature: T::lit(p.temperature),
        }
    }
}

impl FitParamsT<Dual<PARAM_COUNT>> {
    /// Lift concrete values with each entry seeded as an independent
    /// parameter, in flat-vector order.
    pub fn seeded(p: &FitParams) -> Self {
        let x = p.to_array();
        let d = |i: usize| Dual::parameter(x[i], i);
        FitParamsT {
            theta: [d(0), d(1), d(2), d(3), d(4)],
            gamma_sigma: d(5),
            gamma_lambda: d(6),
            w_support: d(7),
            w_occlusion: d(8),
            w_freespace: d(9),
            temperature: d(10),
        }
    }
}

/// How a reference view is fused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FuseMode {
    /// Windowed hypothesis ladders with the three-channel constraint volume.
    #[default]
    Vcv,
    /// Dense full-range sweep (no window prediction); confidence is the
    /// peak hypothesis probability.
    BruteForce,
    /// Per-pixel hard vote over a full-range ladder, no volume.
    Conventional,
}

/// Everything needed to fuse and fit, bundled for serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Views per fusion, including the reference.
    pub n_views: usize,
    /// Hypotheses per pixel in windowed mode.
    pub hypotheses: usize,
    /// Hypotheses per pixel in brute-force mode.
    pub brute_force_hypotheses: usize,
    pub mode: FuseMode,
    pub predictor: WindowPredictorParams,
    pub constraint: ConstraintParams,
    pub aggregator: AggregatorParams,
    pub loss_weights: LossWeights,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            n_views: 5,
            hypotheses: 8,
            brute_force_hypotheses: 128,
            mode: FuseMode::Vcv,
            predictor: WindowPredictorParams::default(),
            constraint: ConstraintParams::default(),
            aggregator: AggregatorParams::default(),
            loss_weights: LossWeights::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_views == 0 {
            return Err(Error::invalid("a fusion needs at least the reference view"));
        }
        if self.hypotheses < 2 || self.brute_force_hypotheses < 2 {
            return Err(Error::invalid("hypothesis counts must be at least 2"));
        }
        self.predictor.validate()?;
        self.constraint.validate()?;
        self.aggregator.validate()?;
        let w = &self.loss_weights;
        for v in [w.depth, w.coverage, w.radius] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid("loss weights must be finite and non-negative"));
            }
        }
        Ok(())
    }
}

/// Result of fusing one reference view.
#[derive(Debug, Clone)]
pub struct FuseOutcome {
    pub output: FusedOutput,
    /// Predicted windows (`None` in conventional mode, which has none).
    pub windows: Option<SearchWindowField<f64>>,
    /// The constraint volume, kept only on request.
    pub volume: Option<ConstraintVolume<f64>>,
    /// Heap size of the constraint volume while it existed (0 in
    /// conventional mode).
    pub volume_bytes: usize,
}

fn ordered_views(views: &[ViewInput], ref_index: usize, n_views: usize) -> Result<Vec<ViewInput>> {
    if ref_index >= views.len() {
        return Err(Error::invalid(format!(
            "reference index {ref_index} out of range for {} views",
            views.len()
        )));
    }
    let cams: Vec<_> = views.iter().map(|v| v.camera.clone()).collect();
    let sources = select_source_views(&cams, ref_index, n_views.saturating_sub(1));
    let mut ordered = Vec::with_capacity(1 + sources.len());
    ordered.push(views[ref_index].clone());
    ordered.extend(sources.into_iter().map(|i| views[i].clone()));
    Ok(ordered)
}

/// Fuse one reference view from a set of input views.
///
/// Source views are the `n_views - 1` others closest in optical-axis angle.
/// Pixels no view lands on come back with the sentinel depth and zero
/// confidence.
pub fn fuse_view(
    views: &[ViewInput],
    ref_index: usize,
    bounds: &SceneDepthBounds,
    config: &PipelineConfig,
    keep_volume: bool,
) -> Result<FuseOutcome> {
    config.validate()?;
    let ordered = ordered_views(views, ref_index, config.n_views)?;
    let ref_cam = ordered[0].camera.clone();
    let view_id = ref_index as u32;
    let rendered = render_all_into_reference(&ordered, &ref_cam)?;

    if config.mode == FuseMode::Conventional {
        let output = conventional_fuse(
            &ordered,
            &ref_cam,
            &rendered,
            &config.constraint,
            bounds,
            config.brute_force_hypotheses,
            view_id,
        )?;
        return Ok(FuseOutcome { output, windows: None, volume: None, volume_bytes: 0 });
    }

    let (windows, ladder) = match config.mode {
        FuseMode::Vcv => {
            let features = compute_features(&rendered);
            let windows = predict_window_with(
                &features,
                &config.predictor.theta,
                &config.predictor,
                bounds,
            )?;
            let ladder = windowed_hypotheses(&windows, config.hypotheses)?;
            (windows, ladder)
        }
        FuseMode::BruteForce => {
            let windows = full_range_windows(bounds, &rendered.valid_count, &config.predictor);
            let ladder = uniform_hypotheses(
                bounds,
                config.brute_force_hypotheses,
                rendered.height(),
                rendered.width(),
            )?;
            (windows, ladder)
        }
        FuseMode::Conventional => unreachable!("handled above"),
    };

    let volume = build_vcv(
        &ordered,
        &ref_cam,
        &rendered,
        &ladder,
        &windows,
        config.constraint.gamma_sigma,
        config.constraint.gamma_lambda,
        bounds,
    )?;
    let volume_bytes = volume.memory_bytes();
    let probs = aggregate(
        &volume,
        [
            config.aggregator.w_support,
            config.aggregator.w_occlusion,
            config.aggregator.w_freespace,
        ],
        config.aggregator.temperature,
        config.aggregator.smoothing_radius,
    )?;
    let mut depth = soft_argmax(&ladder, &probs)?;
    let mut confidence = match config.mode {
        FuseMode::Vcv => fused_confidence(&windows),
        _ => max_probability(&probs),
    };
    for ((row, col), k) in rendered.valid_count.enumerate() {
        if k == 0 {
            depth.set(row, col, SENTINEL_DEPTH);
            confidence.set(row, col, 0.0);
        }
    }

    Ok(FuseOutcome {
        output: FusedOutput {
            depth: DepthMap::new(view_id, depth)?,
            confidence: ConfidenceMap::new(view_id, confidence)?,
        },
        windows: Some(windows),
        volume: keep_volume.then_some(volume),
        volume_bytes,
    })
}

/// One reference view frozen for fitting: everything that does not depend
/// on the trainable parameters is precomputed.
#[derive(Debug, Clone)]
pub struct PreparedScene {
    /// Reference first, then the selected sources.
    pub views: Vec<ViewInput>,
    pub view_id: u32,
    pub rendered: crate::geometry::RenderedViewSet,
    pub features: WindowFeatures,
    pub gt: Grid2<f64>,
    /// Pixels with valid ground truth that at least one view lands on.
    pub mask: Grid2<bool>,
    pub bounds: SceneDepthBounds,
}

impl PreparedScene {
    pub fn ref_cam(&self) -> &crate::geometry::CameraModel {
        &self.views[0].camera
    }
}

/// Freeze one reference view of a scene for [`scene_loss`].
pub fn prepare_scene(
    views: &[ViewInput],
    ref_index: usize,
    gt: &Grid2<f64>,
    bounds: &SceneDepthBounds,
    n_views: usize,
) -> Result<PreparedScene> {
    if n_views == 0 {
        return Err(Error::invalid("a fusion needs at least the reference view"));
    }
    let ordered = ordered_views(views, ref_index, n_views)?;
    let ref_cam = ordered[0].camera.clone();
    if gt.shape() != (ref_cam.height, ref_cam.width) {
        return Err(Error::shape("ground truth does not match the reference image size"));
    }
    let rendered = render_all_into_reference(&ordered, &ref_cam)?;
    let features = compute_features(&rendered);
    let gt_mask = valid_mask(gt);
    let mut mask = Grid2::filled(gt.height(), gt.width(), false);
    for ((row, col), ok) in gt_mask.enumerate() {
        mask.set(row, col, ok && rendered.valid_count.get(row, col) > 0);
    }
    Ok(PreparedScene {
        views: ordered,
        view_id: ref_index as u32,
        rendered,
        features,
        gt: gt.clone(),
        mask,
        bounds: *bounds,
    })
}

/// The three loss terms of one scene.
#[derive(Debug, Clone, Copy)]
pub struct SceneLossBreakdown<T> {
    pub depth: LossTerm<T>,
    pub coverage: LossTerm<T>,
    pub radius: LossTerm<T>,
}

impl<T: Real> SceneLossBreakdown<T> {
    pub fn total(&self, weights: &LossWeights) -> T {
        T::lit(weights.depth) * self.depth.sum
            + T::lit(weights.coverage) * self.coverage.sum
            + T::lit(weights.radius) * self.radius.sum
    }
}

/// Run the differentiable part of the pipeline on a prepared scene and
/// return the loss terms.
///
/// The scalar type decides what flows: `f64` evaluates values only, a dual
/// carries exact derivatives in the seeded parameters.  The non-trainable
/// knobs (hypothesis count, smoothing radius, psi limits, center strategy)
/// come from `config`; `config.predictor.theta` is superseded by
/// `params.theta`.
pub fn scene_loss<T: Real>(
    scene: &PreparedScene,
    params: &FitParamsT<T>,
    config: &PipelineConfig,
) -> Result<SceneLossBreakdown<T>> {
    let windows =
        predict_window_with(&scene.features, &params.theta, &config.predictor, &scene.bounds)?;
    let ladder = windowed_hypotheses(&windows, config.hypotheses)?;
    let volume = build_vcv(
        &scene.views,
        scene.ref_cam(),
        &scene.rendered,
        &ladder,
        &windows,
        params.gamma_sigma,
        params.gamma_lambda,
        &scene.bounds,
    )?;
    let probs = aggregate(
        &volume,
        [params.w_support, params.w_occlusion, params.w_freespace],
        params.temperature,
        config.aggregator.smoothing_radius,
    )?;
    let fused = soft_argmax(&ladder, &probs)?;
    Ok(SceneLossBreakdown {
        depth: depth_loss(&fused, &scene.gt, &scene.mask),
        coverage: coverage_loss(&windows, &scene.gt, &scene.mask),
        radius: radius_loss(&windows, &scene.mask),
    })
}
