//! Depth-map accuracy metrics and confidence sparsification.

use crate::geometry::is_valid_depth;
use crate::grid::Grid2;

/// Mean absolute error over pixels valid in both maps; `None` when no pixel
/// is.
pub fn mae(pred: &Grid2<f64>, gt: &Grid2<f64>) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for ((row, col), g) in gt.enumerate() {
        let p = pred.get(row, col);
        if is_valid_depth(g) && is_valid_depth(p) {
            sum += (p - g).abs();
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// Fraction of jointly valid pixels with `|pred - gt| <= threshold`; `None`
/// when no pixel is jointly valid.
pub fn inlier_fraction(pred: &Grid2<f64>, gt: &Grid2<f64>, threshold: f64) -> Option<f64> {
    let mut hits = 0usize;
    let mut n = 0usize;
    for ((row, col), g) in gt.enumerate() {
        let p = pred.get(row, col);
        if is_valid_depth(g) && is_valid_depth(p) {
            n += 1;
            if (p - g).abs() <= threshold {
                hits += 1;
            }
        }
    }
    (n > 0).then(|| hits as f64 / n as f64)
}

/// Fraction of ground-truth pixels carrying a valid prediction
/// (vacuously 1 when the ground truth is empty).
pub fn completeness(pred: &Grid2<f64>, gt: &Grid2<f64>) -> f64 {
    let mut covered = 0usize;
    let mut n = 0usize;
    for ((row, col), g) in gt.enumerate() {
        if is_valid_depth(g) {
            n += 1;
            if is_valid_depth(pred.get(row, col)) {
                covered += 1;
            }
        }
    }
    if n == 0 {
        1.0
    } else {
        covered as f64 / n as f64
    }
}

/// Per-pixel `|pred - gt|`, infinite where either map is missing.
pub fn error_map(pred: &Grid2<f64>, gt: &Grid2<f64>) -> Grid2<f64> {
    let (h, w) = gt.shape();
    let mut out = Grid2::filled(h, w, f64::INFINITY);
    for row in 0..h {
        for col in 0..w {
            let g = gt.get(row, col);
            let p = pred.get(row, col);
            if is_valid_depth(g) && is_valid_depth(p) {
                out.set(row, col, (p - g).abs());
            }
        }
    }
    out
}

/// MAE of the most confident pixels, at a ladder of retained fractions.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsificationCurve {
    /// Retained fraction of pixels, ascending; the last entry is 1.
    pub fractions: Vec<f64>,
    /// MAE of the top `fractions[k]` pixels by confidence.
    pub mae: Vec<f64>,
}

/// Sparsify by confidence: sort jointly valid pixels by confidence
/// (descending, ties by pixel index), then report the MAE of the top
/// `k / steps` fraction for `k = 1..=steps`.
///
/// A confidence that ranks errors well makes the curve rise toward the
/// full-density MAE; a useless one keeps it flat.
pub fn sparsification(
    pred: &Grid2<f64>,
    conf: &Grid2<f64>,
    gt: &Grid2<f64>,
    steps: usize,
) -> Option<SparsificationCurve> {
    if steps == 0 {
        return None;
    }
    let mut pixels: Vec<(f64, usize, f64)> = Vec::new();
    for ((row, col), g) in gt.enumerate() {
        let p = pred.get(row, col);
        if is_valid_depth(g) && is_valid_depth(p) {
            let c = conf.get(row, col);
            let c = if c.is_finite() { c } else { 0.0 };
            pixels.push((c, gt.linear(row, col), (p - g).abs()));
        }
    }
    if pixels.is_empty() {
        return None;
    }
    pixels.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let n = pixels.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for (i, p) in pixels.iter().enumerate() {
        prefix.push(prefix[i] + p.2);
    }

    let mut fractions = Vec::with_capacity(steps);
    let mut curve = Vec::with_capacity(steps);
    for k in 1..=steps {
        let fraction = k as f64 / steps as f64;
        let count = ((n as f64 * fraction).round() as usize).clamp(1, n);
        fractions.push(fraction);
        curve.push(prefix[count] / count as f64);
    }
    Some(SparsificationCurve { fractions, mae: curve })
}

/// Area under a sparsification curve: the trapezoid integral over the
/// sampled span, normalized by its width (so a flat curve scores its own
/// level).
pub fn auc(curve: &SparsificationCurve) -> Option<f64> {
    let n = curve.fractions.len();
    if n == 0 || n != curve.mae.len() {
        return None;
    }
    if n == 1 {
        return Some(curve.mae[0]);
    }
    let span = curve.fractions[n - 1] - curve.fractions[0];
    if span <= 0.0 {
        return Some(curve.mae[0]);
    }
    let mut area = 0.0;
    for i in 0..n - 1 {
        let df = curve.fractions[i + 1] - curve.fractions[i];
        area += 0.5 * df * (curve.mae[i] + curve.mae[i + 1]);
    }
    Some(area / span)
}
