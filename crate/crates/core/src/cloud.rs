//! Point cloud container plus the spatial indices and local-geometry
//! primitives used by every downstream stage: an exact kd-tree for
//! nearest-neighbor queries, covariance eigendecomposition, normal
//! estimation, and a voxel occupancy map.

use std::collections::HashMap;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::RigidTransform;

/// Squared neighborhood extent below which a covariance is treated as
/// degenerate (all points coincident) and no direction can be extracted.
const DEGENERATE_SPREAD_SQ: f64 = 1e-24;

#[derive(Debug, Error, PartialEq)]
pub enum CloudError {
    #[error("point {index} has a non-finite coordinate")]
    NonFinitePoint { index: usize },
    #[error("normal count {normals} does not match point count {points}")]
    NormalCountMismatch { points: usize, normals: usize },
    #[error("normal {index} is neither unit length nor the zero (degenerate) marker")]
    InvalidNormal { index: usize },
    #[error("operation requires a non-empty cloud")]
    EmptyCloud,
    #[error("k = {k} exceeds cloud size {size}")]
    KTooLarge { k: usize, size: usize },
    #[error("operation requires at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("voxel size must be positive, got {0}")]
    NonPositiveVoxelSize(f64),
    #[error("normal estimation needs 3 <= k <= cloud size, got k = {k} for {size} points")]
    BadNeighborhoodSize { k: usize, size: usize },
}

/// An ordered set of 3D points with optional per-point unit normals and the
/// sensor position the points were observed from.
///
/// A zero normal marks a point whose neighborhood was too degenerate for
/// normal estimation; such points are skipped by the plane-based metrics.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    points: Vec<Vector3<f64>>,
    normals: Option<Vec<Vector3<f64>>>,
    sensor_origin: Vector3<f64>,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>) -> Result<Self, CloudError> {
        Self::with_sensor_origin(points, Vector3::zeros())
    }

    pub fn with_sensor_origin(
        points: Vec<Vector3<f64>>,
        sensor_origin: Vector3<f64>,
    ) -> Result<Self, CloudError> {
        for (index, p) in points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(CloudError::NonFinitePoint { index });
            }
        }
        Ok(Self {
            points,
            normals: None,
            sensor_origin,
        })
    }

    pub fn with_normals(
        points: Vec<Vector3<f64>>,
        normals: Vec<Vector3<f64>>,
        sensor_origin: Vector3<f64>,
    ) -> Result<Self, CloudError> {
        let mut cloud = Self::with_sensor_origin(points, sensor_origin)?;
        if normals.len() != cloud.points.len() {
            return Err(CloudError::NormalCountMismatch {
                points: cloud.points.len(),
                normals: normals.len(),
            });
        }
        for (index, n) in normals.iter().enumerate() {
            let norm = n.norm();
            if !norm.is_finite() || (norm != 0.0 && (norm - 1.0).abs() > 1e-6) {
                return Err(CloudError::InvalidNormal { index });
            }
        }
        cloud.normals = Some(normals);
        Ok(cloud)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[Vector3<f64>]> {
        self.normals.as_deref()
    }

    pub fn sensor_origin(&self) -> &Vector3<f64> {
        &self.sensor_origin
    }

    /// True when the point carries a usable (non-degenerate) normal.
    pub fn normal_is_valid(&self, index: usize) -> bool {
        self.normals
            .as_ref()
            .is_some_and(|n| n[index] != Vector3::zeros())
    }

    /// Subset of the cloud by original point index; coordinates, normals and
    /// the sensor origin are copied bit-for-bit.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|ns| indices.iter().map(|&i| ns[i]).collect()),
            sensor_origin: self.sensor_origin,
        }
    }

    /// Cloud with every point mapped through `transform`. Normals are
    /// dropped: transformed clouds are only used for spatial queries, and the
    /// metrics that need normals read them from the untransformed cloud.
    pub fn transformed(&self, transform: &RigidTransform) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| transform.apply(p)).collect(),
            normals: None,
            sensor_origin: transform.apply(&self.sensor_origin),
        }
    }
}

/// A neighbor candidate ordered by distance, with index as the tie breaker so
/// equidistant results are deterministic.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Neighbor {
    dist_sq: f64,
    index: usize,
}

impl Eq for Neighbor {}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.dist_sq
            .total_cmp(&other.dist_sq)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Exact nearest-neighbor index over one cloud (a kd-tree).
///
/// Queries return the true global minimum; equidistant candidates resolve to
/// the lowest point index. Read-only queries are safe from multiple threads.
#[derive(Clone, Debug)]
pub struct NearestNeighborIndex {
    points: Vec<Vector3<f64>>,
    /// Point indices arranged so that each subrange's median element splits
    /// the range along `axes` at the same position.
    order: Vec<u32>,
    axes: Vec<u8>,
}

impl NearestNeighborIndex {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, index: usize) -> &Vector3<f64> {
        &self.points[index]
    }

    /// Index and distance of the exact nearest neighbor.
    pub fn nearest(&self, query: &Vector3<f64>) -> (usize, f64) {
        let mut heap = std::collections::BinaryHeap::with_capacity(2);
        self.search(query, 1, 0, self.points.len(), &mut heap);
        let n = heap.pop().expect("index is never empty");
        (n.index, n.dist_sq.sqrt())
    }

    /// The `k` nearest neighbors as `(index, distance)`, sorted by ascending
    /// distance with ties broken by ascending index.
    pub fn knn(&self, query: &Vector3<f64>, k: usize) -> Result<Vec<(usize, f64)>, CloudError> {
        if k > self.points.len() {
            return Err(CloudError::KTooLarge {
                k,
                size: self.points.len(),
            });
        }
        let mut heap = std::collections::BinaryHeap::with_capacity(k + 1);
        self.search(query, k, 0, self.points.len(), &mut heap);
        Ok(heap
            .into_sorted_vec()
            .into_iter()
            .map(|n| (n.index, n.dist_sq.sqrt()))
            .collect())
    }

    fn search(
        &self,
        query: &Vector3<f64>,
        k: usize,
        lo: usize,
        hi: usize,
        heap: &mut std::collections::BinaryHeap<Neighbor>,
    ) {
        if lo >= hi || k == 0 {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let index = self.order[mid] as usize;
        let split = &self.points[index];
        let candidate = Neighbor {
            dist_sq: (query - split).norm_squared(),
            index,
        };
        if heap.len() < k {
            heap.push(candidate);
        } else if candidate < *heap.peek().expect("heap non-empty") {
            heap.pop();
            heap.push(candidate);
        }
        let axis = self.axes[mid] as usize;
        let delta = query[axis] - split[axis];
        let (near, far) = if delta < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(query, k, near.0, near.1, heap);
        // The far half may still hold an equal-distance, lower-index point,
        // so it is pruned only on a strictly larger plane distance.
        let worst = heap.peek().expect("heap non-empty").dist_sq;
        if heap.len() < k || delta * delta <= worst {
            self.search(query, k, far.0, far.1, heap);
        }
    }
}

/// Builds the kd-tree; rejects empty clouds.
pub fn build_nn_index(cloud: &PointCloud) -> Result<NearestNeighborIndex, CloudError> {
    if cloud.is_empty() {
        return Err(CloudError::EmptyCloud);
    }
    let points = cloud.points().to_vec();
    let mut order: Vec<u32> = (0..points.len() as u32).collect();
    let mut axes = vec![0u8; points.len()];
    build_recursive(&points, &mut order, &mut axes, 0, points.len());
    Ok(NearestNeighborIndex {
        points,
        order,
        axes,
    })
}

fn build_recursive(
    points: &[Vector3<f64>],
    order: &mut [u32],
    axes: &mut [u8],
    lo: usize,
    hi: usize,
) {
    if hi - lo <= 1 {
        return;
    }
    // Split along the axis with the widest spread over this range.
    let mut min = Vector3::repeat(f64::INFINITY);
    let mut max = Vector3::repeat(f64::NEG_INFINITY);
    for &i in &order[lo..hi] {
        let p = &points[i as usize];
        min = min.inf(p);
        max = max.sup(p);
    }
    let extent = max - min;
    let axis = if extent.x >= extent.y && extent.x >= extent.z {
        0
    } else if extent.y >= extent.z {
        1
    } else {
        2
    };
    let mid = lo + (hi - lo) / 2;
    order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
        points[a as usize][axis]
            .total_cmp(&points[b as usize][axis])
            .then(a.cmp(&b))
    });
    axes[mid] = axis as u8;
    build_recursive(points, order, axes, lo, mid);
    build_recursive(points, order, axes, mid + 1, hi);
}

/// Orthonormal eigenbasis of a 3x3 covariance, eigenvalues descending.
#[derive(Clone, Copy, Debug)]
pub struct EigenBasis {
    /// Sorted descending: `eigenvalues[0] >= eigenvalues[1] >= eigenvalues[2]`.
    pub eigenvalues: [f64; 3],
    /// Unit eigenvectors matched to `eigenvalues`; the basis is right-handed.
    pub eigenvectors: [Vector3<f64>; 3],
}

/// Centroid and sample covariance (normalized by `n - 1`) of a point set.
pub fn covariance(points: &[Vector3<f64>]) -> (Vector3<f64>, Matrix3<f64>) {
    let n = points.len() as f64;
    let centroid = points.iter().sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    (centroid, cov / (n - 1.0).max(1.0))
}

/// Eigendecomposition of the sample covariance about the centroid.
pub fn covariance_eigen(points: &[Vector3<f64>]) -> Result<EigenBasis, CloudError> {
    if points.len() < 3 {
        return Err(CloudError::TooFewPoints {
            needed: 3,
            got: points.len(),
        });
    }
    let (_, cov) = covariance(points);
    Ok(eigen_descending(&cov))
}

/// Symmetric 3x3 eigendecomposition sorted descending with a right-handed
/// eigenvector basis.
pub fn eigen_descending(cov: &Matrix3<f64>) -> EigenBasis {
    let se = nalgebra::SymmetricEigen::new(*cov);
    let mut pairs: [(f64, Vector3<f64>); 3] = [
        (se.eigenvalues[0], se.eigenvectors.column(0).into_owned()),
        (se.eigenvalues[1], se.eigenvectors.column(1).into_owned()),
        (se.eigenvalues[2], se.eigenvectors.column(2).into_owned()),
    ];
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let e0 = pairs[0].1.normalize();
    let e1 = pairs[1].1.normalize();
    // Rebuild the third axis from the first two so the basis is exactly
    // right-handed; for a symmetric matrix it equals the third eigenvector
    // up to sign.
    let e2 = e0.cross(&e1).normalize();
    EigenBasis {
        eigenvalues: [pairs[0].0, pairs[1].0, pairs[2].0],
        eigenvectors: [e0, e1, e2],
    }
}

/// Estimates per-point normals from the k-nearest neighborhood covariance.
///
/// Each normal is the smallest-eigenvalue eigenvector, sign-flipped to point
/// toward the sensor origin. Neighborhoods with no spatial extent yield the
/// zero normal, marking the point as degenerate.
pub fn estimate_normals(cloud: &PointCloud, k: usize) -> Result<PointCloud, CloudError> {
    if k < 3 || k > cloud.len() {
        return Err(CloudError::BadNeighborhoodSize {
            k,
            size: cloud.len(),
        });
    }
    let index = build_nn_index(cloud)?;
    let origin = *cloud.sensor_origin();
    let normals: Vec<Vector3<f64>> = cloud
        .points()
        .par_iter()
        .map(|p| {
            let neighbors = index.knn(p, k).expect("k validated against cloud size");
            let pts: Vec<Vector3<f64>> = neighbors.iter().map(|(i, _)| *index.point(*i)).collect();
            let basis = eigen_descending(&covariance(&pts).1);
            if basis.eigenvalues[0] <= DEGENERATE_SPREAD_SQ {
                return Vector3::zeros();
            }
            let mut n = basis.eigenvectors[2];
            if n.dot(&(origin - p)) < 0.0 {
                n = -n;
            }
            n
        })
        .collect();
    PointCloud::with_normals(cloud.points().to_vec(), normals, origin)
}

/// Integer voxel coordinates of a point: `floor(p / size)` per axis, so each
/// voxel is half-open and boundary points land in the higher-index voxel.
pub fn voxel_key(p: &Vector3<f64>, voxel_size: f64) -> (i64, i64, i64) {
    (
        (p.x / voxel_size).floor() as i64,
        (p.y / voxel_size).floor() as i64,
        (p.z / voxel_size).floor() as i64,
    )
}

/// Occupancy map from voxel coordinates to the point indices inside.
#[derive(Clone, Debug)]
pub struct VoxelOccupancy {
    voxel_size: f64,
    cells: HashMap<(i64, i64, i64), Vec<usize>>,
}

impl VoxelOccupancy {
    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.len()
    }

    pub fn is_occupied(&self, key: &(i64, i64, i64)) -> bool {
        self.cells.contains_key(key)
    }

    pub fn cells(&self) -> &HashMap<(i64, i64, i64), Vec<usize>> {
        &self.cells
    }
}

/// Assigns every point of the cloud to exactly one voxel.
pub fn build_voxel_occupancy(
    cloud: &PointCloud,
    voxel_size: f64,
) -> Result<VoxelOccupancy, CloudError> {
    if voxel_size <= 0.0 || !voxel_size.is_finite() {
        return Err(CloudError::NonPositiveVoxelSize(voxel_size));
    }
    let mut cells: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in cloud.points().iter().enumerate() {
        cells.entry(voxel_key(p, voxel_size)).or_default().push(i);
    }
    Ok(VoxelOccupancy { voxel_size, cells })
}
