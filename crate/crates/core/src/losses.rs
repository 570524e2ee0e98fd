//! Training losses, gradient checking, and parameter fitting.
//!
//! Three sum-style losses drive the fit, all restricted to the mask of
//! pixels with ground truth:
//!
//! - **depth** — `sum |fused - gt|`;
//! - **coverage** — `sum |center - gt| / R`, pushing windows to contain the
//!   truth (a term drops below 1 exactly when the truth is inside);
//! - **radius** — `sum R`, pulling windows tight.
//!
//! The weighted total is minimized by plain gradient descent with a
//! geometric step decay.  Gradients are exact (forward-mode duals through
//! the whole pipeline); [`grad_check`] verifies any gradient against central
//! differences.

use serde::{Deserialize, Serialize};

use crate::dual::{pairwise_sum, Dual, Real};
use crate::error::{Error, Result};
use crate::geometry::is_valid_depth;
use crate::grid::Grid2;
use crate::pipeline::{scene_loss, FitParams, FitParamsT, PipelineConfig, PreparedScene, PARAM_COUNT};
use crate::swe::SearchWindowField;

/// Weights of the three loss terms in the fitted total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub depth: f64,
    pub coverage: f64,
    pub radius: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { depth: 0.5, coverage: 20.0, radius: 0.5 }
    }
}

/// A summed loss together with the number of pixels that entered the sum,
/// so callers can normalize when they need a mean.
#[derive(Debug, Clone, Copy)]
pub struct LossTerm<T> {
    pub sum: T,
    pub count: usize,
}

/// Mask of pixels carrying valid ground truth.
pub fn valid_mask(gt: &Grid2<f64>) -> Grid2<bool> {
    gt.map(is_valid_depth)
}

/// `sum |fused - gt|` over masked pixels with a finite fused value.
pub fn depth_loss<T: Real>(fused: &Grid2<T>, gt: &Grid2<f64>, mask: &Grid2<bool>) -> LossTerm<T> {
    let mut terms = Vec::new();
    for row in 0..gt.height() {
        for col in 0..gt.width() {
            if !mask.get(row, col) {
                continue;
            }
            let f = fused.get(row, col);
            if !f.value().is_finite() {
                continue;
            }
            terms.push((f - T::lit(gt.get(row, col))).abs());
        }
    }
    LossTerm { sum: pairwise_sum(&terms), count: terms.len() }
}

/// `sum |center - gt| / R` over masked pixels.
pub fn coverage_loss<T: Real>(
    windows: &SearchWindowField<T>,
    gt: &Grid2<f64>,
    mask: &Grid2<bool>,
) -> LossTerm<T> {
    let mut terms = Vec::new();
    for row in 0..gt.height() {
        for col in 0..gt.width() {
            if !mask.get(row, col) {
                continue;
            }
            let miss = (windows.center.get(row, col) - gt.get(row, col)).abs();
            terms.push(T::lit(miss) / windows.radius.get(row, col));
        }
    }
    LossTerm { sum: pairwise_sum(&terms), count: terms.len() }
}

/// `sum R` over masked pixels.
pub fn radius_loss<T: Real>(windows: &SearchWindowField<T>, mask: &Grid2<bool>) -> LossTerm<T> {
    let mut terms = Vec::new();
    for row in 0..mask.height() {
        for col in 0..mask.width() {
            if mask.get(row, col) {
                terms.push(windows.radius.get(row, col));
            }
        }
    }
    LossTerm { sum: pairwise_sum(&terms), count: terms.len() }
}

/// Weighted total `w_d L_d + w_c L_c + w_r L_r`.
pub fn total_loss<T: Real>(
    depth: &LossTerm<T>,
    coverage: &LossTerm<T>,
    radius: &LossTerm<T>,
    weights: &LossWeights,
) -> T {
    T::lit(weights.depth) * depth.sum
        + T::lit(weights.coverage) * coverage.sum
        + T::lit(weights.radius) * radius.sum
}

/// Outcome of a gradient check.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Central-difference gradient at the probe step.
    pub numeric: Vec<f64>,
    /// The gradient under test (when one was supplied).
    pub analytic: Option<Vec<f64>>,
    /// Central differences at half the step (consistency probe when no
    /// analytic gradient exists).
    pub half_step: Option<Vec<f64>>,
    /// Largest per-coordinate relative error (components below unit size are
    /// compared absolutely).
    pub max_rel_error: f64,
    pub worst_index: usize,
    /// True when any evaluation returned a non-finite value.
    pub non_finite: bool,
}

fn rel_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Compare a gradient against central differences of `f` at `x0`.
///
/// The step for coordinate `i` is `eps * max(1, |x0[i]|)`.  With an
/// `analytic` gradient the report scores numeric-vs-analytic; without one it
/// scores the consistency of two step sizes (`eps` and `eps / 2`).
pub fn grad_check(
    f: &dyn Fn(&[f64]) -> f64,
    x0: &[f64],
    eps: f64,
    analytic: Option<&[f64]>,
) -> Result<GradCheckReport> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::invalid("grad_check step must be positive"));
    }
    if let Some(a) = analytic {
        if a.len() != x0.len() {
            return Err(Error::shape("analytic gradient length disagrees with x0"));
        }
    }
    let mut non_finite = false;
    let mut central = |step_scale: f64| -> Vec<f64> {
        let mut g = vec![0.0; x0.len()];
        let mut x = x0.to_vec();
        for i in 0..x0.len() {
            let h = eps * step_scale * x0[i].abs().max(1.0);
            // Use the exactly-representable step around x0[i].
            let hi = x0[i] + h;
            let lo = x0[i] - h;
            x[i] = hi;
            let f_hi = f(&x);
            x[i] = lo;
            let f_lo = f(&x);
            x[i] = x0[i];
            if !(f_hi.is_finite() && f_lo.is_finite()) {
                non_finite = true;
            }
            g[i] = (f_hi - f_lo) / (hi - lo);
        }
        g
    };

    let numeric = central(1.0);
    let half_step = if analytic.is_none() { Some(central(0.5)) } else { None };
    let compare: &[f64] = match analytic {
        Some(a) => a,
        None => half_step.as_deref().unwrap(),
    };
    let mut max_rel_error = 0.0;
    let mut worst_index = 0;
    for (i, (&n, &c)) in numeric.iter().zip(compare.iter()).enumerate() {
        let e = rel_error(n, c);
        if e > max_rel_error {
            max_rel_error = e;
            worst_index = i;
        }
    }
    Ok(GradCheckReport {
        numeric,
        analytic: analytic.map(|a| a.to_vec()),
        half_step,
        max_rel_error,
        worst_index,
        non_finite,
    })
}

/// Gradient-descent settings for [`fit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Step size applied per valid pixel (the gradient is divided by the
    /// total masked pixel count across scenes).
    pub learning_rate: f64,
    pub epochs: usize,
    /// Multiply the learning rate by `decay` every `decay_every` epochs.
    pub decay_every: usize,
    pub decay: f64,
    /// Abort when the total loss becomes non-finite or exceeds the initial
    /// loss by this factor.
    pub divergence_factor: f64,
    /// Parameters (by flat index) held at their initial value, e.g. to fit
    /// an ablated variant with some channel weights pinned to zero.
    pub frozen: [bool; PARAM_COUNT],
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            learning_rate: 1.0,
            epochs: 40,
            decay_every: 2,
            decay: 0.95,
            divergence_factor: 1e3,
            frozen: [false; PARAM_COUNT],
        }
    }
}

/// One row of the fit trace.
#[derive(Debug, Clone, Copy)]
pub struct FitTraceRow {
    pub epoch: usize,
    pub loss_depth: f64,
    pub loss_coverage: f64,
    pub loss_radius: f64,
    pub loss_total: f64,
    pub grad_depth_norm: f64,
    pub grad_coverage_norm: f64,
    pub grad_radius_norm: f64,
}

/// Result of [`fit`]: the best parameters seen and the per-epoch trace.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: FitParams,
    pub best_loss: f64,
    pub trace: Vec<FitTraceRow>,
    pub diverged: bool,
}

fn norm(g: &[f64]) -> f64 {
    g.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Fit the pipeline parameters (predictor weights, constraint gammas,
/// aggregator weights, temperature) on prepared scenes by plain gradient
/// descent on the weighted total loss.
pub fn fit(
    scenes: &[PreparedScene],
    config: &PipelineConfig,
    init: &FitParams,
    options: &FitOptions,
) -> Result<FitResult> {
    if scenes.is_empty() {
        return Err(Error::invalid("fit needs at least one scene"));
    }
    if options.epochs == 0 {
        return Err(Error::invalid("fit needs at least one epoch"));
    }
    if !(options.learning_rate.is_finite() && options.learning_rate >= 0.0) {
        return Err(Error::invalid("learning rate must be non-negative"));
    }

    let mut x = init.to_array();
    let mut lr = options.learning_rate;
    let mut trace = Vec::with_capacity(options.epochs);
    let mut best_loss = f64::INFINITY;
    let mut best = *init;
    let mut initial_loss = None;
    let mut diverged = false;

    for epoch in 0..options.epochs {
        let params = FitParamsT::<Dual<PARAM_COUNT>>::seeded(&FitParams::from_array(&x));
        let mut ld = Dual::<PARAM_COUNT>::constant(0.0);
        let mut lc = Dual::<PARAM_COUNT>::constant(0.0);
        let mut lr_term = Dual::<PARAM_COUNT>::constant(0.0);
        let mut pixel_count = 0usize;
        for scene in scenes {
            let b = scene_loss(scene, &params, config)?;
            ld = ld + b.depth.sum;
            lc = lc + b.coverage.sum;
            lr_term = lr_term + b.radius.sum;
            pixel_count += b.coverage.count;
        }
        let w = &config.loss_weights;
        let total = Dual::constant(w.depth) * ld
            + Dual::constant(w.coverage) * lc
            + Dual::constant(w.radius) * lr_term;

        trace.push(FitTraceRow {
            epoch,
            loss_depth: ld.v,
            loss_coverage: lc.v,
            loss_radius: lr_term.v,
            loss_total: total.v,
            grad_depth_norm: norm(&ld.g),
            grad_coverage_norm: norm(&lc.g),
            grad_radius_norm: norm(&lr_term.g),
        });

        let first = *initial_loss.get_or_insert(total.v);
        if !total.v.is_finite() || total.v > options.divergence_factor * first.abs().max(1.0) {
            diverged = true;
            break;
        }
        if total.v < best_loss {
            best_loss = total.v;
            best = FitParams::from_array(&x);
        }

        // Per-pixel step: sums grow with the mask, the step should not.
        let scale = lr / pixel_count.max(1) as f64;
        for (i, (xi, gi)) in x.iter_mut().zip(total.g.iter()).enumerate() {
            if !options.frozen[i] {
                *xi -= scale * gi;
            }
        }
        FitParams::project(&mut x);

        if options.decay_every > 0 && (epoch + 1) % options.decay_every == 0 {
            lr *= options.decay;
        }
    }

    Ok(FitResult { params: best, best_loss, trace, diverged })
}
