//! Feature extraction for the line/patch metrics: per-point smoothness,
//! edge/planar classification, and eigenvalue-based fitting of edge lines and
//! planar patches in the reference cloud.

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::{build_nn_index, covariance, eigen_descending, CloudError, PointCloud};

/// Points closer than this to the sensor origin have no defined smoothness
/// (the value divides by the point's range).
const MIN_RANGE: f64 = 1e-6;

/// Rank guard: the second eigenvalue must carry at least this fraction of the
/// first for a neighborhood to count as two-dimensional. Rejects collinear
/// sets whose trailing eigenvalues are pure floating-point noise.
const PLANE_RANK_RATIO: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("smoothness needs more points than the neighborhood size ({size} <= {neighborhood})")]
    CloudTooSmall { size: usize, neighborhood: usize },
    #[error("edge line endpoints must be distinct")]
    DegenerateEdgeLine,
    #[error(transparent)]
    Cloud(#[from] CloudError),
}

/// Classification of a point by its smoothness value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureLabel {
    Edge,
    Planar,
    /// Smoothness undefined (point at the sensor origin).
    Invalid,
}

impl std::fmt::Display for FeatureLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FeatureLabel::Edge => write!(f, "edge"),
            FeatureLabel::Planar => write!(f, "planar"),
            FeatureLabel::Invalid => write!(f, "invalid"),
        }
    }
}

/// Per-point smoothness values and labels, parallel to the cloud.
#[derive(Clone, Debug)]
pub struct FeatureLabels {
    pub smoothness: Vec<f64>,
    pub labels: Vec<FeatureLabel>,
}

impl FeatureLabels {
    pub fn indices_with(&self, label: FeatureLabel) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == label)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Parameters for feature extraction and line/patch fitting.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureParams {
    /// Neighbor count for the smoothness sum (the point itself excluded).
    pub neighborhood_size: usize,
    /// Points with smoothness strictly below this are planar, the rest edge.
    pub planar_threshold: f64,
    /// Reference-cloud neighbor count for eigen fitting.
    pub eigen_neighbors: usize,
    /// A dominant eigenvalue must be at least this factor above the next one.
    pub eigen_ratio: f64,
    /// Largest admissible smallest-eigenvalue for a planar patch.
    pub flatness_max: f64,
    /// Half-width of the synthesized line/patch support points, in meters.
    /// The metrics are invariant to this value; it only conditions the
    /// arithmetic.
    pub half_width: f64,
}

impl Default for FeatureParams {
    fn default() -> Self {
        Self {
            neighborhood_size: 10,
            planar_threshold: 0.1,
            eigen_neighbors: 5,
            eigen_ratio: 3.0,
            flatness_max: 1e-4,
            half_width: 0.1,
        }
    }
}

/// Computes the smoothness value of every point from its neighborhood
/// difference sum, normalized by neighborhood size and point range:
/// `s = |sum(p - p_j)| / (|S| * |p|)`.
///
/// Small values mean locally flat surroundings, large values mean edges; the
/// range factor weights distant points down.
pub fn smoothness(
    cloud: &PointCloud,
    neighborhood_size: usize,
    planar_threshold: f64,
) -> Result<FeatureLabels, FeatureError> {
    if cloud.len() <= neighborhood_size {
        return Err(FeatureError::CloudTooSmall {
            size: cloud.len(),
            neighborhood: neighborhood_size,
        });
    }
    let index = build_nn_index(cloud)?;
    let smoothness: Vec<f64> = cloud
        .points()
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let range = p.norm();
            if range < MIN_RANGE {
                return f64::NAN;
            }
            let neighbors = index
                .knn(p, (neighborhood_size + 1).min(cloud.len()))
                .expect("bounded by cloud size");
            let mut sum = Vector3::zeros();
            let mut count = 0usize;
            for (j, _) in neighbors {
                if j == i || count == neighborhood_size {
                    continue;
                }
                sum += p - cloud.points()[j];
                count += 1;
            }
            sum.norm() / (count as f64 * range)
        })
        .collect();
    let labels = smoothness
        .iter()
        .map(|s| {
            if s.is_nan() {
                FeatureLabel::Invalid
            } else if *s < planar_threshold {
                FeatureLabel::Planar
            } else {
                FeatureLabel::Edge
            }
        })
        .collect();
    Ok(FeatureLabels { smoothness, labels })
}

/// A line in the reference cloud, carried by two synthesized support points.
/// The support points are constructed from the neighborhood eigenbasis and
/// are not members of the cloud.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeLine {
    point_a: Vector3<f64>,
    point_b: Vector3<f64>,
}

impl EdgeLine {
    pub fn new(point_a: Vector3<f64>, point_b: Vector3<f64>) -> Result<Self, FeatureError> {
        if point_a == point_b {
            return Err(FeatureError::DegenerateEdgeLine);
        }
        Ok(Self { point_a, point_b })
    }

    pub fn point_a(&self) -> &Vector3<f64> {
        &self.point_a
    }

    pub fn point_b(&self) -> &Vector3<f64> {
        &self.point_b
    }
}

/// A plane patch in the reference cloud, carried by three synthesized
/// support points spanning it and the plane normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanarPatch {
    origin: Vector3<f64>,
    span_a: Vector3<f64>,
    span_b: Vector3<f64>,
    normal: Vector3<f64>,
}

impl PlanarPatch {
    pub fn origin(&self) -> &Vector3<f64> {
        &self.origin
    }

    pub fn span_a(&self) -> &Vector3<f64> {
        &self.span_a
    }

    pub fn span_b(&self) -> &Vector3<f64> {
        &self.span_b
    }

    pub fn normal(&self) -> &Vector3<f64> {
        &self.normal
    }
}

/// Fits an edge line through a neighborhood when its covariance has one
/// dominant eigenvalue (at least `ratio_threshold` times the second).
///
/// Returns the line through the centroid along the dominant direction,
/// carried by two support points `half_width` apart on each side.
pub fn fit_edge_line(
    neighbors: &[Vector3<f64>],
    ratio_threshold: f64,
    half_width: f64,
) -> Option<EdgeLine> {
    if neighbors.len() < 3 {
        return None;
    }
    let (centroid, cov) = covariance(neighbors);
    let basis = eigen_descending(&cov);
    let [l0, l1, _] = basis.eigenvalues;
    if !l0.is_finite() || l0 <= 0.0 || l0 < ratio_threshold * l1.max(0.0) {
        return None;
    }
    let offset = basis.eigenvectors[0] * half_width;
    EdgeLine::new(centroid + offset, centroid - offset).ok()
}

/// Fits a planar patch when the neighborhood covariance has two dominant
/// eigenvalues (both at least `ratio_threshold` times the smallest) and the
/// smallest stays under `flatness_max`.
///
/// The patch is carried by the centroid and two support points offset along
/// the in-plane eigenvectors; the normal is the smallest-eigenvalue
/// eigenvector.
pub fn fit_planar_patch(
    neighbors: &[Vector3<f64>],
    ratio_threshold: f64,
    flatness_max: f64,
    half_width: f64,
) -> Option<PlanarPatch> {
    if neighbors.len() < 3 {
        return None;
    }
    let (centroid, cov) = covariance(neighbors);
    let basis = eigen_descending(&cov);
    let [l0, l1, l2] = basis.eigenvalues;
    let l2 = l2.max(0.0);
    if !l0.is_finite() || l0 <= 0.0 || l1 < PLANE_RANK_RATIO * l0 {
        return None;
    }
    if l0 < ratio_threshold * l2 || l1 < ratio_threshold * l2 || l2 >= flatness_max {
        return None;
    }
    Some(PlanarPatch {
        origin: centroid,
        span_a: centroid + basis.eigenvectors[0] * half_width,
        span_b: centroid + basis.eigenvectors[1] * half_width,
        normal: basis.eigenvectors[2],
    })
}
