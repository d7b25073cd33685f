//! Data filters that remove points without meaningful correspondences before
//! alignment: the ego blind spot filter, its artificial-blind-spot
//! preprocessor, and the voxel occupancy correspondence filter.

use nalgebra::Vector3;
use thiserror::Error;

use crate::cloud::{build_voxel_occupancy, PointCloud};
use crate::geometry::RigidTransform;

#[derive(Debug, Error, PartialEq)]
pub enum FilterError {
    #[error("blind spot radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("voxel size must be positive, got {0}")]
    NonPositiveVoxelSize(f64),
}

/// Blind spot geometry and the alignment estimate locating it in each cloud.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlindSpotConfig {
    radius: f64,
    estimate: RigidTransform,
}

impl BlindSpotConfig {
    pub fn new(radius: f64, estimate: RigidTransform) -> Result<Self, FilterError> {
        if radius <= 0.0 || !radius.is_finite() {
            return Err(FilterError::NonPositiveRadius(radius));
        }
        Ok(Self { radius, estimate })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn estimate(&self) -> &RigidTransform {
        &self.estimate
    }
}

/// Voxel size and alignment estimate for the occupancy correspondence filter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OcfConfig {
    voxel_size: f64,
    estimate: RigidTransform,
}

impl OcfConfig {
    pub fn new(voxel_size: f64, estimate: RigidTransform) -> Result<Self, FilterError> {
        if voxel_size <= 0.0 || !voxel_size.is_finite() {
            return Err(FilterError::NonPositiveVoxelSize(voxel_size));
        }
        Ok(Self {
            voxel_size,
            estimate,
        })
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    pub fn estimate(&self) -> &RigidTransform {
        &self.estimate
    }
}

fn inside_horizontal_circle(p: &Vector3<f64>, center_xy: (f64, f64), radius: f64) -> bool {
    let dx = p.x - center_xy.0;
    let dy = p.y - center_xy.1;
    // Inclusive: points exactly on the circle are inside the blind spot.
    dx * dx + dy * dy <= radius * radius
}

/// Removes the points of each cloud that fall inside the other scan's blind
/// spot, a horizontal circle of the configured radius (the z coordinate is
/// ignored).
///
/// In the reference cloud the circle sits at the translation of the
/// alignment estimate; in the source cloud at the translation of its
/// inverse. Survivors are copied by index, so their coordinates are
/// bit-identical to the inputs.
pub fn ego_blind_spot_filter(
    source: &PointCloud,
    reference: &PointCloud,
    config: &BlindSpotConfig,
) -> (PointCloud, PointCloud) {
    let t_fwd = config.estimate.translation();
    let t_inv = config.estimate.inverse();
    let t_bwd = t_inv.translation();
    let keep_source: Vec<usize> = source
        .points()
        .iter()
        .enumerate()
        .filter(|(_, p)| !inside_horizontal_circle(p, (t_bwd.x, t_bwd.y), config.radius))
        .map(|(i, _)| i)
        .collect();
    let keep_reference: Vec<usize> = reference
        .points()
        .iter()
        .enumerate()
        .filter(|(_, p)| !inside_horizontal_circle(p, (t_fwd.x, t_fwd.y), config.radius))
        .map(|(i, _)| i)
        .collect();
    (
        source.select(&keep_source),
        reference.select(&keep_reference),
    )
}

/// Removes every point within the horizontal circle of radius `r` around the
/// cloud's own frame origin. Used to regularize a sensor's irregular blind
/// spot into an exact circle before applying [`ego_blind_spot_filter`].
pub fn artificial_blind_spot(cloud: &PointCloud, radius: f64) -> Result<PointCloud, FilterError> {
    if radius <= 0.0 || !radius.is_finite() {
        return Err(FilterError::NonPositiveRadius(radius));
    }
    let keep: Vec<usize> = cloud
        .points()
        .iter()
        .enumerate()
        .filter(|(_, p)| !inside_horizontal_circle(p, (0.0, 0.0), radius))
        .map(|(i, _)| i)
        .collect();
    Ok(cloud.select(&keep))
}

/// Removes the points of both clouds that occupy voxels claimed by only one
/// of them once the source is pre-aligned with the estimate.
///
/// The source is transformed into the reference frame, both clouds are
/// voxelized at the configured size, and every voxel occupied in exactly one
/// cloud has its points deleted from that cloud. Dynamic objects and
/// non-overlapping regions produce exactly such single-sided voxels.
/// Survivors are selected from the original clouds by index, which makes the
/// final back-transform of the source exact.
pub fn octree_correspondence_filter(
    source: &PointCloud,
    reference: &PointCloud,
    config: &OcfConfig,
) -> (PointCloud, PointCloud) {
    let aligned = source.transformed(&config.estimate);
    let occ_source = build_voxel_occupancy(&aligned, config.voxel_size)
        .expect("config guarantees a positive voxel size");
    let occ_reference = build_voxel_occupancy(reference, config.voxel_size)
        .expect("config guarantees a positive voxel size");
    let mut keep_source = vec![true; source.len()];
    let mut keep_reference = vec![true; reference.len()];
    for (key, indices) in occ_source.cells() {
        if !occ_reference.is_occupied(key) {
            for &i in indices {
                keep_source[i] = false;
            }
        }
    }
    for (key, indices) in occ_reference.cells() {
        if !occ_source.is_occupied(key) {
            for &i in indices {
                keep_reference[i] = false;
            }
        }
    }
    let source_survivors: Vec<usize> = keep_source
        .iter()
        .enumerate()
        .filter(|(_, k)| **k)
        .map(|(i, _)| i)
        .collect();
    let reference_survivors: Vec<usize> = keep_reference
        .iter()
        .enumerate()
        .filter(|(_, k)| **k)
        .map(|(i, _)| i)
        .collect();
    (
        source.select(&source_survivors),
        reference.select(&reference_survivors),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(points: Vec<Vector3<f64>>) -> PointCloud {
        PointCloud::new(points).unwrap()
    }

    fn estimate_z_shift() -> RigidTransform {
        RigidTransform::from_translation(Vector3::new(0.0, 0.0, 4.0))
    }

    #[test]
    fn blind_spot_membership_cases() {
        let cfg = BlindSpotConfig::new(5.0, estimate_z_shift()).unwrap();
        let q = cloud(vec![
            Vector3::new(3.0, 0.0, 5.0),  // inside (9 <= 25, z ignored)
            Vector3::new(6.0, 0.0, 0.0),  // outside (36 > 25)
            Vector3::new(5.0, 0.0, -2.0), // exactly on the circle: inside
        ]);
        let p = cloud(vec![]);
        let (_, q_filtered) = ego_blind_spot_filter(&p, &q, &cfg);
        assert_eq!(q_filtered.points(), &[Vector3::new(6.0, 0.0, 0.0)]);
    }

    #[test]
    fn blind_spot_uses_inverse_estimate_for_source() {
        let estimate = RigidTransform::from_translation(Vector3::new(3.0, 0.0, 0.0));
        let cfg = BlindSpotConfig::new(1.0, estimate).unwrap();
        // Source circle is centered on the inverse translation (-3, 0).
        let p = cloud(vec![
            Vector3::new(-3.0, 0.0, 0.0),
            Vector3::new(0.0, 0.0, 0.0),
        ]);
        let q = cloud(vec![
            Vector3::new(3.0, 0.0, 0.0),
            Vector3::new(0.0, 0.0, 0.0),
        ]);
        let (p_f, q_f) = ego_blind_spot_filter(&p, &q, &cfg);
        assert_eq!(p_f.points(), &[Vector3::new(0.0, 0.0, 0.0)]);
        assert_eq!(q_f.points(), &[Vector3::new(0.0, 0.0, 0.0)]);
    }

    #[test]
    fn blind_spot_with_tiny_radius_removes_only_center() {
        let cfg = BlindSpotConfig::new(1e-12, RigidTransform::identity()).unwrap();
        let q = cloud(vec![
            Vector3::new(0.0, 0.0, 7.0),
            Vector3::new(1e-3, 0.0, 0.0),
        ]);
        let (_, q_f) = ego_blind_spot_filter(&cloud(vec![]), &q, &cfg);
        assert_eq!(q_f.points(), &[Vector3::new(1e-3, 0.0, 0.0)]);
    }

    #[test]
    fn artificial_blind_spot_cases() {
        let c = cloud(vec![
            Vector3::new(1.0, 1.0, 0.0),
            Vector3::new(10.0, 0.0, 0.0),
        ]);
        let filtered = artificial_blind_spot(&c, 5.0).unwrap();
        assert_eq!(filtered.points(), &[Vector3::new(10.0, 0.0, 0.0)]);
        assert!(artificial_blind_spot(&c, 0.0).is_err());
    }

    #[test]
    fn artificial_blind_spot_survival_fraction_on_disk() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let points: Vec<Vector3<f64>> = (0..4000)
            .map(|_| {
                // Uniform over a radius-10 disk via rejection sampling.
                loop {
                    let x = rng.random_range(-10.0..10.0);
                    let y = rng.random_range(-10.0..10.0);
                    if x * x + y * y <= 100.0 {
                        return Vector3::new(x, y, 0.0);
                    }
                }
            })
            .collect();
        let c = cloud(points.clone());
        let filtered = artificial_blind_spot(&c, 5.0).unwrap();
        // Predicate-scan oracle.
        let expected = points
            .iter()
            .filter(|p| p.x * p.x + p.y * p.y > 25.0)
            .count();
        assert_eq!(filtered.len(), expected);
        let fraction = filtered.len() as f64 / points.len() as f64;
        assert!((fraction - 0.75).abs() < 0.03, "fraction {fraction}");
    }

    #[test]
    fn ocf_keeps_identical_clouds() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c = crate::cloud::tests::random_cloud(&mut rng, 500, 10.0);
        let cfg = OcfConfig::new(0.1, RigidTransform::identity()).unwrap();
        let (p_f, q_f) = octree_correspondence_filter(&c, &c, &cfg);
        assert_eq!(p_f.points(), c.points());
        assert_eq!(q_f.points(), c.points());
    }

    #[test]
    fn ocf_removes_isolated_extra_point() {
        let base: Vec<Vector3<f64>> = (0..20)
            .map(|i| Vector3::new(i as f64 * 0.05, 0.0, 0.0))
            .collect();
        let mut with_extra = base.clone();
        with_extra.push(Vector3::new(10.0, 10.0, 10.0));
        let p = cloud(with_extra);
        let q = cloud(base.clone());
        let cfg = OcfConfig::new(0.1, RigidTransform::identity()).unwrap();
        let (p_f, q_f) = octree_correspondence_filter(&p, &q, &cfg);
        assert_eq!(p_f.points(), &base[..]);
        assert_eq!(q_f.points(), &base[..]);
    }

    /// Static grid with a displaced cluster: the cluster must vanish from
    /// both clouds, the statics must survive untouched.
    #[test]
    fn ocf_removes_displaced_cluster() {
        let mut statics = Vec::new();
        for i in 0..20 {
            for j in 0..20 {
                statics.push(Vector3::new(i as f64, j as f64, 0.0));
            }
        }
        let cluster: Vec<Vector3<f64>> = (0..50)
            .map(|k| {
                Vector3::new(
                    5.0 + (k % 5) as f64 * 0.04,
                    5.0 + (k / 5) as f64 * 0.04,
                    2.0,
                )
            })
            .collect();
        let mut p_points = statics.clone();
        p_points.extend(cluster.iter().map(|c| c + Vector3::new(2.0, 0.0, 0.0)));
        let mut q_points = statics.clone();
        q_points.extend(cluster.iter());
        let p = cloud(p_points);
        let q = cloud(q_points);
        let cfg = OcfConfig::new(0.1, RigidTransform::identity()).unwrap();
        let (p_f, q_f) = octree_correspondence_filter(&p, &q, &cfg);
        assert_eq!(p_f.points(), &statics[..]);
        assert_eq!(q_f.points(), &statics[..]);

        // Brute-force voxel set intersection oracle: survivors are exactly
        // the points whose voxel appears in both clouds.
        let key = |p: &Vector3<f64>| crate::cloud::voxel_key(p, 0.1);
        let p_keys: std::collections::HashSet<_> = p.points().iter().map(key).collect();
        let q_keys: std::collections::HashSet<_> = q.points().iter().map(key).collect();
        let expected_p: Vec<Vector3<f64>> = p
            .points()
            .iter()
            .filter(|pt| q_keys.contains(&key(pt)))
            .copied()
            .collect();
        let expected_q: Vec<Vector3<f64>> = q
            .points()
            .iter()
            .filter(|pt| p_keys.contains(&key(pt)))
            .copied()
            .collect();
        assert_eq!(p_f.points(), &expected_p[..]);
        assert_eq!(q_f.points(), &expected_q[..]);
    }

    #[test]
    fn ocf_back_transform_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let p = crate::cloud::tests::random_cloud(&mut rng, 300, 5.0);
        let q = crate::cloud::tests::random_cloud(&mut rng, 300, 5.0);
        let estimate =
            RigidTransform::from_axis_angle(&Vector3::z_axis(), 0.3, Vector3::new(1.0, -0.5, 0.2));
        let cfg = OcfConfig::new(0.5, estimate).unwrap();
        let (p_f, _) = octree_correspondence_filter(&p, &q, &cfg);
        for survivor in p_f.points() {
            assert!(
                p.points().iter().any(|orig| orig == survivor),
                "survivor coordinates must be bit-identical to an input point"
            );
        }
    }

    #[test]
    fn ocf_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let p = crate::cloud::tests::random_cloud(&mut rng, 400, 5.0);
        let q = crate::cloud::tests::random_cloud(&mut rng, 400, 5.0);
        let cfg = OcfConfig::new(0.4, RigidTransform::identity()).unwrap();
        let (p1, q1) = octree_correspondence_filter(&p, &q, &cfg);
        let (p2, q2) = octree_correspondence_filter(&p1, &q1, &cfg);
        assert_eq!(p1.points(), p2.points());
        assert_eq!(q1.points(), q2.points());
    }

    #[test]
    fn ocf_role_swap_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        // Points placed at voxel centers, away from boundaries.
        let grid = |rng: &mut ChaCha8Rng, n: usize| {
            let pts: Vec<Vector3<f64>> = (0..n)
                .map(|_| {
                    Vector3::new(
                        rng.random_range(-10i64..10) as f64 + 0.5,
                        rng.random_range(-10i64..10) as f64 + 0.5,
                        rng.random_range(-10i64..10) as f64 + 0.5,
                    )
                })
                .collect();
            cloud(pts)
        };
        let p = grid(&mut rng, 200);
        let q = grid(&mut rng, 200);
        let estimate = RigidTransform::from_translation(Vector3::new(2.0, -1.0, 0.0));
        let forward = OcfConfig::new(1.0, estimate).unwrap();
        let backward = OcfConfig::new(1.0, estimate.inverse()).unwrap();
        let (p_f, q_f) = octree_correspondence_filter(&p, &q, &forward);
        let (q_b, p_b) = octree_correspondence_filter(&q, &p, &backward);
        assert_eq!(p_f.points(), p_b.points());
        assert_eq!(q_f.points(), q_b.points());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_points() -> impl Strategy<Value = Vec<Vector3<f64>>> {
            proptest::collection::vec(
                (-20.0f64..20.0, -20.0f64..20.0, -2.0f64..2.0)
                    .prop_map(|(x, y, z)| Vector3::new(x, y, z)),
                1..80,
            )
        }

        proptest! {
            #[test]
            fn filters_are_subset_operations(
                p in arb_points(),
                q in arb_points(),
                radius in 0.5f64..10.0,
                voxel in 0.2f64..2.0,
            ) {
                let p = cloud(p);
                let q = cloud(q);
                let estimate = RigidTransform::from_translation(Vector3::new(1.0, 0.0, 0.0));
                let bs = BlindSpotConfig::new(radius, estimate).unwrap();
                let (p1, q1) = ego_blind_spot_filter(&p, &q, &bs);
                let ocf = OcfConfig::new(voxel, estimate).unwrap();
                let (p2, q2) = octree_correspondence_filter(&p, &q, &ocf);
                for (filtered, original) in [(&p1, &p), (&q1, &q), (&p2, &p), (&q2, &q)] {
                    prop_assert!(filtered.len() <= original.len());
                    for pt in filtered.points() {
                        prop_assert!(original.points().contains(pt));
                    }
                }
            }
        }
    }
}
