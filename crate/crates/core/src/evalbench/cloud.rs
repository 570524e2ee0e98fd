//! Point-cloud export with consistency filtering, and Chamfer distance.
//!
//! Nearest-neighbor queries are exact.  Small clouds use the brute-force
//! scan; above [`GRID_NN_THRESHOLD`] points a uniform voxel index takes
//! over, with an expanding-shell search that stops only once no closer cell
//! can exist.  Both paths return identical distances.

use std::collections::HashMap;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::{
    is_valid_depth, pixel_center, reproject_hypothesis, unproject, CameraModel, Reprojection,
};
use crate::grid::Grid2;

/// Cloud size at which Chamfer switches from brute-force NN to the voxel
/// index.
pub const GRID_NN_THRESHOLD: usize = 2_000;

/// One point with its provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudPoint {
    pub position: Vector3<f64>,
    pub confidence: f64,
    pub view_id: u32,
    /// Source pixel `(row, col)` in the view the point came from.
    pub pixel: (u32, u32),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<CloudPoint>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// One depth map feeding the cloud export.
#[derive(Debug, Clone, Copy)]
pub struct CloudSource<'a> {
    pub depth: &'a Grid2<f64>,
    pub confidence: &'a Grid2<f64>,
    pub camera: &'a CameraModel,
    pub view_id: u32,
}

/// Outlier rejection for [`export_cloud`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct FilterParams {
    /// Points below this confidence are dropped.
    pub min_confidence: f64,
    /// A point must agree with at least this many *other* views.
    pub min_consistent_views: usize,
    /// Agreement means the other view observes a depth within this distance
    /// (absolute, in depth units) of the point where it lands in that view's
    /// image — and only observations that themselves clear
    /// `min_confidence` are allowed to vouch, so two spurious depths cannot
    /// validate each other by coincidence.
    pub max_depth_error: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        FilterParams { min_confidence: 0.32, min_consistent_views: 1, max_depth_error: 0.18 }
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.min_confidence) {
            return Err(Error::invalid("confidence threshold must lie in [0, 1]"));
        }
        if !(self.max_depth_error.is_finite() && self.max_depth_error > 0.0) {
            return Err(Error::invalid("depth-error threshold must be positive"));
        }
        Ok(())
    }
}

/// Unproject every valid pixel of every source into one cloud, in view then
/// row-major pixel order.
///
/// With `filter`, a point survives only if its confidence clears the
/// threshold and enough other views hold a confident depth that agrees
/// with it where it lands in their image.
pub fn export_cloud(sources: &[CloudSource], filter: Option<&FilterParams>) -> Result<PointCloud> {
    if let Some(f) = filter {
        f.validate()?;
    }
    for s in sources {
        if s.depth.shape() != (s.camera.height, s.camera.width)
            || !s.depth.same_shape(s.confidence)
        {
            return Err(Error::shape("cloud source maps must match their camera image size"));
        }
    }

    let mut points = Vec::new();
    for (i, s) in sources.iter().enumerate() {
        for ((row, col), d) in s.depth.enumerate() {
            if !is_valid_depth(d) {
                continue;
            }
            let c = s.confidence.get(row, col);
            let c = if c.is_finite() { c.clamp(0.0, 1.0) } else { 0.0 };
            if let Some(f) = filter {
                if c < f.min_confidence {
                    continue;
                }
                let mut agreeing = 0usize;
                for (j, other) in sources.iter().enumerate() {
                    if j == i {
                        continue;
                    }
                    let Reprojection::InView { nearest, depth: hyp, .. } =
                        reproject_hypothesis(s.camera, (row, col), d, other.camera)
                    else {
                        continue;
                    };
                    let observed = other.depth.get(nearest.0, nearest.1);
                    if !is_valid_depth(observed) {
                        continue;
                    }
                    let oc = other.confidence.get(nearest.0, nearest.1);
                    let vouches = oc.is_finite() && oc.clamp(0.0, 1.0) >= f.min_confidence;
                    if vouches && (observed - hyp).abs() <= f.max_depth_error {
                        agreeing += 1;
                    }
                }
                if agreeing < f.min_consistent_views {
                    continue;
                }
            }
            points.push(CloudPoint {
                position: unproject(s.camera, pixel_center(row, col), d),
                confidence: c,
                view_id: s.view_id,
                pixel: (row as u32, col as u32),
            });
        }
    }
    Ok(PointCloud { points })
}

fn nearest_sq_brute(q: &Vector3<f64>, to: &[Vector3<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for p in to {
        let d = (q - p).norm_squared();
        if d < best {
            best = d;
        }
    }
    best
}

/// Uniform voxel hash over a point set, for exact NN on large clouds.
struct VoxelIndex {
    cell: f64,
    origin: Vector3<f64>,
    buckets: HashMap<(i64, i64, i64), Vec<u32>>,
    /// Upper bound on the shell radius that can still contain anything.
    max_shell: i64,
}

impl VoxelIndex {
    fn build(points: &[Vector3<f64>]) -> Self {
        let mut lo = points[0];
        let mut hi = points[0];
        for p in points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let extent = (hi - lo).max().max(1e-9);
        let per_axis = (points.len() as f64).cbrt().ceil().max(1.0);
        let cell = (extent / per_axis).max(1e-9);
        let mut buckets: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            let key = Self::key_of(p, &lo, cell);
            buckets.entry(key).or_default().push(i as u32);
        }
        let max_shell = (extent / cell).ceil() as i64 + 2;
        VoxelIndex { cell, origin: lo, buckets, max_shell }
    }

    fn key_of(p: &Vector3<f64>, origin: &Vector3<f64>, cell: f64) -> (i64, i64, i64) {
        (
            ((p.x - origin.x) / cell).floor() as i64,
            ((p.y - origin.y) / cell).floor() as i64,
            ((p.z - origin.z) / cell).floor() as i64,
        )
    }

    fn nearest_sq(&self, q: &Vector3<f64>, points: &[Vector3<f64>]) -> f64 {
        let (cx, cy, cz) = Self::key_of(q, &self.origin, self.cell);
        let mut best = f64::INFINITY;
        for shell in 0..=self.max_shell {
            // Cells exactly `shell` rings away (Chebyshev distance).
            for dx in -shell..=shell {
                for dy in -shell..=shell {
                    for dz in -shell..=shell {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != shell {
                            continue;
                        }
                        if let Some(bucket) = self.buckets.get(&(cx + dx, cy + dy, cz + dz)) {
                            for &i in bucket {
                                let d = (q - points[i as usize]).norm_squared();
                                if d < best {
                                    best = d;
                                }
                            }
                        }
                    }
                }
            }
            // Anything in shell `shell + 1` or beyond is at least
            // `shell * cell` away, so the current best cannot be beaten.
            if best.is_finite() && best.sqrt() <= shell as f64 * self.cell {
                break;
            }
        }
        best
    }
}

/// Distance from each point of `from` to its nearest neighbor in `to`.
fn nn_dists(from: &[Vector3<f64>], to: &[Vector3<f64>]) -> Vec<f64> {
    let use_grid = from.len().max(to.len()) >= GRID_NN_THRESHOLD;
    let index = use_grid.then(|| VoxelIndex::build(to));
    from.iter()
        .map(|q| {
            let sq = match &index {
                Some(ix) => ix.nearest_sq(q, to),
                None => nearest_sq_brute(q, to),
            };
            sq.sqrt()
        })
        .collect()
}

/// Mean distance from each point of `from` to its nearest neighbor in `to`.
fn mean_nn(from: &[Vector3<f64>], to: &[Vector3<f64>]) -> f64 {
    let dists = nn_dists(from, to);
    crate::dual::pairwise_sum(&dists) / from.len() as f64
}

/// The two directed mean nearest-neighbor distances and their average.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChamferScores {
    /// Mean distance from each estimated point to the reference cloud.
    pub accuracy: f64,
    /// Mean distance from each reference point to the estimated cloud.
    pub completeness: f64,
    /// `(accuracy + completeness) / 2`.
    pub overall: f64,
}

/// Both directed Chamfer terms for `est` against the reference `gt`.
/// `None` when either cloud is empty.
pub fn chamfer_parts(est: &PointCloud, gt: &PointCloud) -> Option<ChamferScores> {
    if est.is_empty() || gt.is_empty() {
        return None;
    }
    let pe: Vec<Vector3<f64>> = est.points.iter().map(|p| p.position).collect();
    let pg: Vec<Vector3<f64>> = gt.points.iter().map(|p| p.position).collect();
    let accuracy = mean_nn(&pe, &pg);
    let completeness = mean_nn(&pg, &pe);
    Some(ChamferScores { accuracy, completeness, overall: 0.5 * (accuracy + completeness) })
}

/// Symmetric Chamfer distance: the average of the two directed mean
/// nearest-neighbor distances.  `None` when either cloud is empty.
pub fn chamfer(a: &PointCloud, b: &PointCloud) -> Option<f64> {
    chamfer_parts(a, b).map(|s| s.overall)
}

/// Fractions of points within a distance threshold, in both directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdScores {
    /// Fraction of estimated points within `tau` of the reference cloud.
    pub accuracy: f64,
    /// Fraction of reference points within `tau` of the estimated cloud.
    pub completeness: f64,
    /// `(accuracy + completeness) / 2`.
    pub mean: f64,
}

/// Fraction of points within `tau` of the other cloud, both ways.
/// `None` when either cloud is empty or `tau` is not a non-negative number.
pub fn pct_within(est: &PointCloud, gt: &PointCloud, tau: f64) -> Option<ThresholdScores> {
    if est.is_empty() || gt.is_empty() || tau.is_nan() || tau < 0.0 {
        return None;
    }
    let pe: Vec<Vector3<f64>> = est.points.iter().map(|p| p.position).collect();
    let pg: Vec<Vector3<f64>> = gt.points.iter().map(|p| p.position).collect();
    let frac = |from: &[Vector3<f64>], to: &[Vector3<f64>]| {
        let within = nn_dists(from, to).iter().filter(|&&d| d <= tau).count();
        within as f64 / from.len() as f64
    };
    let accuracy = frac(&pe, &pg);
    let completeness = frac(&pg, &pe);
    Some(ThresholdScores { accuracy, completeness, mean: 0.5 * (accuracy + completeness) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn chamfer_parts_reports_both_directions() {
        let est = cloud_of(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        let gt = cloud_of(&[[0.0, 0.0, 0.0]]);
        let scores = chamfer_parts(&est, &gt).unwrap();
        assert_eq!(scores.accuracy, 0.5);
        assert_eq!(scores.completeness, 0.0);
        assert_eq!(scores.overall, 0.25);
        assert_eq!(chamfer(&est, &gt), Some(0.25));
    }

    #[test]
    fn pct_within_counts_threshold_hits_both_ways() {
        let est = cloud_of(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        let gt = cloud_of(&[[0.0, 0.0, 0.0]]);
        let scores = pct_within(&est, &gt, 0.5).unwrap();
        assert_eq!(scores.accuracy, 0.5);
        assert_eq!(scores.completeness, 1.0);
        assert_eq!(scores.mean, 0.75);
        // A zero threshold keeps only exact matches.
        let zero = pct_within(&est, &gt, 0.0).unwrap();
        assert_eq!(zero.accuracy, 0.5);
        // Negative and NaN thresholds are rejected; empty clouds give None.
        assert!(pct_within(&est, &gt, -1.0).is_none());
        assert!(pct_within(&est, &gt, f64::NAN).is_none());
        assert!(pct_within(&PointCloud::default(), &gt, 1.0).is_none());
    }

    fn cloud_of(positions: &[[f64; 3]]) -> PointCloud {
        PointCloud {
            points: positions
                .iter()
                .map(|p| CloudPoint {
                    position: Vector3::new(p[0], p[1], p[2]),
                    confidence: 1.0,
                    view_id: 0,
                    pixel: (0, 0),
                })
                .collect(),
        }
    }

    #[test]
    fn identical_clouds_have_zero_chamfer() {
        let a = cloud_of(&[[0.0, 0.0, 0.0], [1.0, 2.0, 3.0], [-1.0, 0.5, 2.0]]);
        assert_eq!(chamfer(&a, &a.clone()), Some(0.0));
    }

    #[test]
    fn single_point_clouds_measure_their_distance() {
        let a = cloud_of(&[[0.0, 0.0, 0.0]]);
        let b = cloud_of(&[[3.0, 4.0, 0.0]]);
        assert_eq!(chamfer(&a, &b), Some(5.0));
        assert_eq!(chamfer(&b, &a), Some(5.0));
        assert_eq!(chamfer(&a, &PointCloud::default()), None);
    }

    #[test]
    fn voxel_index_matches_brute_force_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut pts = |n: usize| -> Vec<Vector3<f64>> {
            (0..n)
                .map(|_| {
                    Vector3::new(
                        rng.gen_range(-2.0..2.0),
                        rng.gen_range(-1.0..3.0),
                        rng.gen_range(5.0..9.0),
                    )
                })
                .collect()
        };
        let from = pts(300);
        let to = pts(400);
        let index = VoxelIndex::build(&to);
        for q in &from {
            assert_eq!(index.nearest_sq(q, &to), nearest_sq_brute(q, &to));
        }
    }

    #[test]
    fn export_unprojects_the_principal_ray_onto_the_axis() {
        let cam = CameraModel::centered(50.0, 50.0, 5, 5).unwrap();
        let mut depth = Grid2::filled(5, 5, f64::INFINITY);
        depth.set(2, 2, 7.0);
        let conf = Grid2::filled(5, 5, 0.8);
        let cloud = export_cloud(
            &[CloudSource { depth: &depth, confidence: &conf, camera: &cam, view_id: 4 }],
            None,
        )
        .unwrap();
        assert_eq!(cloud.len(), 1);
        let p = &cloud.points[0];
        assert!((p.position - Vector3::new(0.0, 0.0, 7.0)).norm() < 1e-12);
        assert_eq!(p.confidence, 0.8);
        assert_eq!(p.view_id, 4);
    }

    #[test]
    fn filter_drops_low_confidence_and_inconsistent_points() {
        let cam = CameraModel::centered(50.0, 50.0, 3, 3).unwrap();
        let agree_a = Grid2::filled(3, 3, 10.0);
        let mut agree_b = Grid2::filled(3, 3, 10.0);
        agree_b.set(1, 1, 17.0); // one rogue depth in view 1
        let mut conf = Grid2::filled(3, 3, 1.0);
        conf.set(0, 0, 0.1); // one low-confidence pixel in every view
        let sources = [
            CloudSource { depth: &agree_a, confidence: &conf, camera: &cam, view_id: 0 },
            CloudSource { depth: &agree_b, confidence: &conf, camera: &cam, view_id: 1 },
            CloudSource { depth: &agree_a, confidence: &conf, camera: &cam, view_id: 2 },
        ];
        let filter =
            FilterParams { min_confidence: 0.5, min_consistent_views: 1, max_depth_error: 0.1 };

        let unfiltered = export_cloud(&sources, None).unwrap();
        assert_eq!(unfiltered.len(), 27);

        let filtered = export_cloud(&sources, Some(&filter)).unwrap();
        // Dropped: the rogue depth (agrees with nobody) and the three
        // low-confidence pixels.  The two views that still agree at the
        // rogue pixel keep each other.
        assert_eq!(filtered.len(), 27 - 1 - 3);
        assert!(filtered.points.iter().all(|p| p.confidence >= 0.5));
        assert!(filtered
            .points
            .iter()
            .all(|p| (p.position.z - 10.0).abs() < 1e-9 || p.view_id != 1));
    }

    #[test]
    fn agreement_only_counts_confident_source_observations() {
        let cam = CameraModel::centered(50.0, 50.0, 3, 3).unwrap();
        let depth = Grid2::filled(3, 3, 10.0);
        let confident = Grid2::filled(3, 3, 1.0);
        let timid = Grid2::filled(3, 3, 0.1);
        let filter =
            FilterParams { min_confidence: 0.5, min_consistent_views: 1, max_depth_error: 0.1 };

        // View 1's depths agree with view 0 everywhere, but its confidence
        // is below the threshold, so it cannot vouch for anyone — and its
        // own points fall at the confidence gate.
        let sources = [
            CloudSource { depth: &depth, confidence: &confident, camera: &cam, view_id: 0 },
            CloudSource { depth: &depth, confidence: &timid, camera: &cam, view_id: 1 },
        ];
        let filtered = export_cloud(&sources, Some(&filter)).unwrap();
        assert!(filtered.is_empty());

        // Raise view 1's confidence and both views keep everything.
        let sources = [
            CloudSource { depth: &depth, confidence: &confident, camera: &cam, view_id: 0 },
            CloudSource { depth: &depth, confidence: &confident, camera: &cam, view_id: 1 },
        ];
        let filtered = export_cloud(&sources, Some(&filter)).unwrap();
        assert_eq!(filtered.len(), 18);
    }

    #[test]
    fn filter_rejects_bad_thresholds() {
        assert!(FilterParams { min_confidence: 1.5, ..Default::default() }.validate().is_err());
        assert!(FilterParams { max_depth_error: 0.0, ..Default::default() }.validate().is_err());
    }
}
