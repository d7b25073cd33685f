//! The five alignment error metrics and the RMSE normalization used to make
//! their curves comparable across differing correspondence counts.
//!
//! Residuals are stored unsquared, one per surviving correspondence, and
//! squared only inside the RMSE aggregation; this gives all metrics a single
//! aggregation path.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::PointCloud;
use crate::correspondence::PointCorrespondenceSet;
use crate::features::{EdgeLine, PlanarPatch};
use crate::geometry::RigidTransform;

#[derive(Debug, Error, PartialEq)]
pub enum ObjectiveError {
    #[error("{cloud} cloud has no normals; the {metric} metric requires them")]
    MissingNormals {
        cloud: &'static str,
        metric: ObjectiveKind,
    },
    #[error("no correspondences survived; the objective value is undefined")]
    NoCorrespondences,
}

/// The available objective functions, named as they appear in plot legends.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    PointToPoint,
    PointToPlane,
    Symmetric,
    EdgeToEdgeLine,
    PlanarToPlanarPatch,
}

impl ObjectiveKind {
    pub const ALL: [ObjectiveKind; 5] = [
        ObjectiveKind::PointToPoint,
        ObjectiveKind::PointToPlane,
        ObjectiveKind::Symmetric,
        ObjectiveKind::EdgeToEdgeLine,
        ObjectiveKind::PlanarToPlanarPatch,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ObjectiveKind::PointToPoint => "point-to-point",
            ObjectiveKind::PointToPlane => "point-to-plane",
            ObjectiveKind::Symmetric => "symmetric",
            ObjectiveKind::EdgeToEdgeLine => "edge-to-edge-line",
            ObjectiveKind::PlanarToPlanarPatch => "planar-to-planar-patch",
        }
    }

    /// True for the metrics that match feature points against fitted lines
    /// or patches instead of point pairs.
    pub fn is_feature_based(&self) -> bool {
        matches!(
            self,
            ObjectiveKind::EdgeToEdgeLine | ObjectiveKind::PlanarToPlanarPatch
        )
    }
}

impl std::fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Unsquared residuals, one per correspondence that produced a value.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualSet {
    residuals: Vec<f64>,
    metric: ObjectiveKind,
    /// Subtracted from the aggregated RMSE; nonzero only for metric variants
    /// whose perfect-match value is a constant other than zero.
    aggregate_offset: f64,
}

impl ResidualSet {
    pub fn new(residuals: Vec<f64>, metric: ObjectiveKind) -> Self {
        Self {
            residuals,
            metric,
            aggregate_offset: 0.0,
        }
    }

    pub fn with_offset(residuals: Vec<f64>, metric: ObjectiveKind, offset: f64) -> Self {
        Self {
            residuals,
            metric,
            aggregate_offset: offset,
        }
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn metric(&self) -> ObjectiveKind {
        self.metric
    }

    pub fn len(&self) -> usize {
        self.residuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residuals.is_empty()
    }
}

/// Euclidean distance between each transformed source point and its target.
pub fn point_to_point(
    transform: &RigidTransform,
    pairs: &PointCorrespondenceSet,
    source: &PointCloud,
    reference: &PointCloud,
) -> ResidualSet {
    let residuals = pairs
        .pairs()
        .iter()
        .map(|pair| {
            (transform.apply(&source.points()[pair.source]) - reference.points()[pair.target])
                .norm()
        })
        .collect();
    ResidualSet::new(residuals, ObjectiveKind::PointToPoint)
}

/// Distance projected onto the target normal, so sliding along the local
/// surface is free. Pairs whose target normal is degenerate are skipped.
pub fn point_to_plane(
    transform: &RigidTransform,
    pairs: &PointCorrespondenceSet,
    source: &PointCloud,
    reference: &PointCloud,
) -> Result<ResidualSet, ObjectiveError> {
    let normals = reference.normals().ok_or(ObjectiveError::MissingNormals {
        cloud: "reference",
        metric: ObjectiveKind::PointToPlane,
    })?;
    let residuals = pairs
        .pairs()
        .iter()
        .filter(|pair| reference.normal_is_valid(pair.target))
        .map(|pair| {
            (transform.apply(&source.points()[pair.source]) - reference.points()[pair.target])
                .dot(&normals[pair.target])
        })
        .collect();
    Ok(ResidualSet::new(residuals, ObjectiveKind::PointToPlane))
}

/// Distance projected onto the sum of both normals. The source normal is
/// taken as stored and is deliberately not rotated by the transform. Pairs
/// with a degenerate normal on either side are skipped.
pub fn symmetric(
    transform: &RigidTransform,
    pairs: &PointCorrespondenceSet,
    source: &PointCloud,
    reference: &PointCloud,
) -> Result<ResidualSet, ObjectiveError> {
    let source_normals = source.normals().ok_or(ObjectiveError::MissingNormals {
        cloud: "source",
        metric: ObjectiveKind::Symmetric,
    })?;
    let reference_normals = reference.normals().ok_or(ObjectiveError::MissingNormals {
        cloud: "reference",
        metric: ObjectiveKind::Symmetric,
    })?;
    let residuals = pairs
        .pairs()
        .iter()
        .filter(|pair| {
            source.normal_is_valid(pair.source) && reference.normal_is_valid(pair.target)
        })
        .map(|pair| {
            let offset =
                transform.apply(&source.points()[pair.source]) - reference.points()[pair.target];
            offset.dot(&(source_normals[pair.source] + reference_normals[pair.target]))
        })
        .collect();
    Ok(ResidualSet::new(residuals, ObjectiveKind::Symmetric))
}

/// Perpendicular distance from each transformed edge point to its fitted
/// line: `|(T(p) - a) x (T(p) - b)| / |a - b|`.
///
/// `points` and `lines` run in parallel; the caller pairs each edge point
/// with the line fitted for it.
pub fn edge_to_edge_line(
    transform: &RigidTransform,
    points: &[Vector3<f64>],
    lines: &[EdgeLine],
) -> ResidualSet {
    let residuals = points
        .iter()
        .zip(lines)
        .map(|(p, line)| {
            let tp = transform.apply(p);
            (tp - line.point_a()).cross(&(tp - line.point_b())).norm()
                / (line.point_a() - line.point_b()).norm()
        })
        .collect();
    ResidualSet::new(residuals, ObjectiveKind::EdgeToEdgeLine)
}

/// Distance from each transformed planar point to its fitted patch plane:
/// the offset projected on the normalized span cross product.
///
/// `offset` is subtracted from the aggregated RMSE (see [`rmse`]); under the
/// plain plane-distance reading used here a perfect match already evaluates
/// to zero, so it defaults to zero.
pub fn planar_to_planar_patch(
    transform: &RigidTransform,
    points: &[Vector3<f64>],
    patches: &[PlanarPatch],
    offset: f64,
) -> ResidualSet {
    let residuals = points
        .iter()
        .zip(patches)
        .map(|(p, patch)| {
            let spanned =
                (patch.origin() - patch.span_a()).cross(&(patch.origin() - patch.span_b()));
            (transform.apply(p) - patch.origin()).dot(&spanned).abs() / spanned.norm()
        })
        .collect();
    ResidualSet::with_offset(residuals, ObjectiveKind::PlanarToPlanarPatch, offset)
}

/// Root-mean-square of the residuals, minus the set's aggregate offset.
///
/// An empty set is an error: "no correspondences survived" is distinct from
/// a perfect alignment value of zero.
pub fn rmse(set: &ResidualSet) -> Result<f64, ObjectiveError> {
    if set.residuals.is_empty() {
        return Err(ObjectiveError::NoCorrespondences);
    }
    let sum_sq: f64 = set.residuals.iter().map(|r| r * r).sum();
    Ok((sum_sq / set.residuals.len() as f64).sqrt() - set.aggregate_offset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correspondence::Correspondence;
    use approx::assert_relative_eq;
    use nalgebra::UnitQuaternion;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn identity_pairs(n: usize, distance: f64) -> PointCorrespondenceSet {
        PointCorrespondenceSet::from_pairs(
            (0..n)
                .map(|i| Correspondence {
                    source: i,
                    target: i,
                    distance,
                })
                .collect(),
        )
    }

    fn plain(points: Vec<Vector3<f64>>) -> PointCloud {
        PointCloud::new(points).unwrap()
    }

    fn with_normals(points: Vec<Vector3<f64>>, normals: Vec<Vector3<f64>>) -> PointCloud {
        PointCloud::with_normals(points, normals, Vector3::zeros()).unwrap()
    }

    #[test]
    fn point_to_point_unit_offset() {
        let p = plain(vec![Vector3::new(1.0, 0.0, 0.0)]);
        let q = plain(vec![Vector3::zeros()]);
        let set = point_to_point(&RigidTransform::identity(), &identity_pairs(1, 1.0), &p, &q);
        assert_eq!(set.residuals(), &[1.0]);
        assert_eq!(rmse(&set).unwrap(), 1.0);
    }

    #[test]
    fn perfect_alignment_is_zero() {
        let q = plain(vec![
            Vector3::new(0.0, 1.0, 2.0),
            Vector3::new(3.0, -1.0, 0.5),
        ]);
        let t = RigidTransform::from_translation(Vector3::new(4.0, 0.0, 0.0));
        let p = q.transformed(&t.inverse());
        let set = point_to_point(&t, &identity_pairs(2, 0.0), &p, &q);
        for r in set.residuals() {
            assert!(r.abs() < 1e-12);
        }
    }

    #[test]
    fn sum_of_squares_recovered_by_rmse() {
        // residuals {1, 2}: total squared error 5, rmse sqrt(5/2)
        let set = ResidualSet::new(vec![1.0, 2.0], ObjectiveKind::PointToPoint);
        let value = rmse(&set).unwrap();
        assert_relative_eq!(value * value * 2.0, 5.0, epsilon = 1e-12);
    }

    #[test]
    fn point_to_plane_in_plane_slide_is_free() {
        let q = with_normals(vec![Vector3::zeros()], vec![Vector3::z()]);
        let p = plain(vec![Vector3::new(1.0, 1.0, 0.0)]);
        let set =
            point_to_plane(&RigidTransform::identity(), &identity_pairs(1, 0.0), &p, &q).unwrap();
        assert_eq!(set.residuals(), &[0.0]);
    }

    #[test]
    fn point_to_plane_out_of_plane_distance() {
        let q = with_normals(vec![Vector3::zeros()], vec![Vector3::z()]);
        let p = plain(vec![Vector3::new(0.0, 0.0, 2.0)]);
        let set =
            point_to_plane(&RigidTransform::identity(), &identity_pairs(1, 2.0), &p, &q).unwrap();
        assert_eq!(set.residuals(), &[2.0]);
        let value = rmse(&set).unwrap();
        assert_eq!(value * value, 4.0);
    }

    #[test]
    fn point_to_plane_requires_normals_and_skips_flagged() {
        let q_plain = plain(vec![Vector3::zeros()]);
        let p = plain(vec![Vector3::new(0.0, 0.0, 2.0)]);
        assert!(matches!(
            point_to_plane(
                &RigidTransform::identity(),
                &identity_pairs(1, 2.0),
                &p,
                &q_plain
            ),
            Err(ObjectiveError::MissingNormals { .. })
        ));
        let q_flagged = with_normals(
            vec![Vector3::zeros(), Vector3::new(5.0, 0.0, 0.0)],
            vec![Vector3::z(), Vector3::zeros()],
        );
        let p2 = plain(vec![
            Vector3::new(0.0, 0.0, 2.0),
            Vector3::new(5.0, 0.0, 1.0),
        ]);
        let set = point_to_plane(
            &RigidTransform::identity(),
            &identity_pairs(2, 0.0),
            &p2,
            &q_flagged,
        )
        .unwrap();
        assert_eq!(set.len(), 1);
    }

    #[test]
    fn symmetric_doubles_point_to_plane_for_shared_normals() {
        let n = Vector3::z();
        let q = with_normals(vec![Vector3::zeros()], vec![n]);
        let p = with_normals(vec![Vector3::new(0.0, 0.0, 1.0)], vec![n]);
        let set = symmetric(&RigidTransform::identity(), &identity_pairs(1, 1.0), &p, &q).unwrap();
        assert_eq!(set.residuals(), &[2.0]);
        assert_eq!(rmse(&set).unwrap(), 2.0);
    }

    #[test]
    fn symmetric_opposed_normals_cancel() {
        let q = with_normals(vec![Vector3::zeros()], vec![Vector3::z()]);
        let p = with_normals(vec![Vector3::new(7.0, -2.0, 3.0)], vec![-Vector3::z()]);
        let set = symmetric(&RigidTransform::identity(), &identity_pairs(1, 0.0), &p, &q).unwrap();
        assert_eq!(set.residuals(), &[0.0]);
    }

    #[test]
    fn symmetric_does_not_rotate_source_normals() {
        // A half turn about z maps the source point onto the target. If the
        // source normal were rotated too, the normals would cancel and the
        // residual would vanish; as specified it must not.
        let q = with_normals(vec![Vector3::new(-1.0, 0.0, 1.0)], vec![Vector3::x()]);
        let p = with_normals(vec![Vector3::new(1.0, 0.0, 0.0)], vec![Vector3::x()]);
        let t = RigidTransform::new(
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), std::f64::consts::PI),
            Vector3::zeros(),
        );
        let set = symmetric(&t, &identity_pairs(1, 0.0), &p, &q).unwrap();
        // offset = T(p) - q = (0, 0, -1); normal sum = (2, 0, 0)
        assert_relative_eq!(set.residuals()[0], 0.0, epsilon = 1e-12);
        let q2 = with_normals(vec![Vector3::new(-1.0, 0.0, 1.0)], vec![Vector3::z()]);
        let set2 = symmetric(&t, &identity_pairs(1, 0.0), &p, &q2).unwrap();
        // offset dot (x + z) = (0,0,-1) . (1,0,1) = -1
        assert_relative_eq!(set2.residuals()[0], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn edge_line_perpendicular_distance() {
        let line = EdgeLine::new(Vector3::zeros(), Vector3::new(1.0, 0.0, 0.0)).unwrap();
        let set = edge_to_edge_line(
            &RigidTransform::identity(),
            &[Vector3::new(0.5, 2.0, 0.0)],
            &[line],
        );
        assert_relative_eq!(set.residuals()[0], 2.0, epsilon = 1e-12);
        let on_line = edge_to_edge_line(
            &RigidTransform::identity(),
            &[Vector3::new(0.25, 0.0, 0.0)],
            &[line],
        );
        assert_relative_eq!(on_line.residuals()[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn edge_line_invariant_to_support_point_choice() {
        let mut rng = ChaCha8Rng::seed_from_u64(91);
        for _ in 0..50 {
            let origin = Vector3::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            );
            let dir = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
            .normalize();
            let p = Vector3::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            );
            let a = EdgeLine::new(origin + dir * 0.1, origin - dir * 0.1).unwrap();
            let b = EdgeLine::new(origin + dir * 3.7, origin - dir * 0.9).unwrap();
            let t = RigidTransform::identity();
            let ra = edge_to_edge_line(&t, &[p], &[a]).residuals()[0];
            let rb = edge_to_edge_line(&t, &[p], &[b]).residuals()[0];
            assert!(
                (ra - rb).abs() < 1e-9,
                "support choice leaked: {ra} vs {rb}"
            );
        }
    }

    #[test]
    fn patch_plane_distance() {
        let patch = crate::features::fit_planar_patch(
            &[
                Vector3::new(0.0, 0.0, 0.0),
                Vector3::new(1.0, 0.0, 0.0),
                Vector3::new(0.0, 1.0, 0.0),
                Vector3::new(1.0, 1.0, 0.0),
            ],
            3.0,
            1e-4,
            0.5,
        )
        .unwrap();
        let set = planar_to_planar_patch(
            &RigidTransform::identity(),
            &[Vector3::new(0.3, 0.7, 2.0)],
            &[patch],
            0.0,
        );
        assert_relative_eq!(set.residuals()[0], 2.0, epsilon = 1e-12);
        let on_plane = planar_to_planar_patch(
            &RigidTransform::identity(),
            &[Vector3::new(-3.0, 9.0, 0.0)],
            &[patch],
            0.0,
        );
        assert_relative_eq!(on_plane.residuals()[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn patch_invariant_to_support_point_choice() {
        let mut rng = ChaCha8Rng::seed_from_u64(92);
        for _ in 0..50 {
            // Two patches on the same plane with different support points.
            let z0 = rng.random_range(-2.0..2.0);
            let sample = |rng: &mut ChaCha8Rng| {
                Vector3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), z0)
            };
            let a: Vec<Vector3<f64>> = (0..5).map(|_| sample(&mut rng)).collect();
            let b: Vec<Vector3<f64>> = (0..5).map(|_| sample(&mut rng)).collect();
            let (Some(pa), Some(pb)) = (
                crate::features::fit_planar_patch(&a, 3.0, 1e-4, 0.1),
                crate::features::fit_planar_patch(&b, 3.0, 1e-4, 1.0),
            ) else {
                continue;
            };
            let p = Vector3::new(
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            );
            let t = RigidTransform::identity();
            let ra = planar_to_planar_patch(&t, &[p], &[pa], 0.0).residuals()[0];
            let rb = planar_to_planar_patch(&t, &[p], &[pb], 0.0).residuals()[0];
            assert!((ra - rb).abs() < 1e-9);
        }
    }

    #[test]
    fn patch_offset_shifts_aggregate() {
        let patch = crate::features::fit_planar_patch(
            &[
                Vector3::new(0.0, 0.0, 0.0),
                Vector3::new(1.0, 0.0, 0.0),
                Vector3::new(0.0, 1.0, 0.0),
            ],
            3.0,
            1e-4,
            0.1,
        )
        .unwrap();
        let set = planar_to_planar_patch(
            &RigidTransform::identity(),
            &[Vector3::new(0.0, 0.0, 3.0)],
            &[patch],
            1.0,
        );
        assert_relative_eq!(rmse(&set).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn rmse_hand_values() {
        let set = ResidualSet::new(vec![3.0, 4.0], ObjectiveKind::PointToPoint);
        assert_relative_eq!(rmse(&set).unwrap(), 12.5f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(rmse(&set).unwrap(), 3.53553, epsilon = 1e-5);
        let zeros = ResidualSet::new(vec![0.0; 5], ObjectiveKind::PointToPoint);
        assert_eq!(rmse(&zeros).unwrap(), 0.0);
        let single = ResidualSet::new(vec![-2.5], ObjectiveKind::PointToPlane);
        assert_eq!(rmse(&single).unwrap(), 2.5);
    }

    #[test]
    fn rmse_rejects_empty_set() {
        let set = ResidualSet::new(vec![], ObjectiveKind::PointToPoint);
        assert_eq!(rmse(&set), Err(ObjectiveError::NoCorrespondences));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn plane_residual_never_exceeds_point_residual(
                px in -5.0f64..5.0, py in -5.0f64..5.0, pz in -5.0f64..5.0,
                nx in -1.0f64..1.0, ny in -1.0f64..1.0, nz in 0.1f64..1.0,
            ) {
                let n = Vector3::new(nx, ny, nz).normalize();
                let q = with_normals(vec![Vector3::zeros()], vec![n]);
                let p = plain(vec![Vector3::new(px, py, pz)]);
                let t = RigidTransform::identity();
                let pairs = identity_pairs(1, 0.0);
                let plane = point_to_plane(&t, &pairs, &p, &q).unwrap().residuals()[0].abs();
                let point = point_to_point(&t, &pairs, &p, &q).residuals()[0];
                prop_assert!(plane <= point + 1e-12);
            }

            #[test]
            fn rmse_permutation_invariant_and_scales(
                mut residuals in proptest::collection::vec(-10.0f64..10.0, 1..20),
                scale in -4.0f64..4.0,
            ) {
                let base = rmse(&ResidualSet::new(residuals.clone(), ObjectiveKind::PointToPoint)).unwrap();
                residuals.reverse();
                let reversed = rmse(&ResidualSet::new(residuals.clone(), ObjectiveKind::PointToPoint)).unwrap();
                prop_assert!((base - reversed).abs() < 1e-12);
                let scaled: Vec<f64> = residuals.iter().map(|r| r * scale).collect();
                let scaled_rmse = rmse(&ResidualSet::new(scaled, ObjectiveKind::PointToPoint)).unwrap();
                prop_assert!((scaled_rmse - scale.abs() * reversed).abs() < 1e-9);
            }
        }
    }
}
