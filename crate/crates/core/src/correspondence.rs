//! Correspondence determination between a transformed source cloud and a
//! reference cloud: classical closest point plus strict and relaxed
//! reciprocal matching.

use rayon::prelude::*;
use thiserror::Error;

use crate::cloud::{build_nn_index, NearestNeighborIndex, PointCloud};

#[derive(Debug, Error, PartialEq)]
pub enum CorrespondenceError {
    #[error("correspondence search requires non-empty clouds")]
    EmptyCloud,
    #[error("reciprocal relaxation must be a non-negative finite distance, got {0}")]
    InvalidRelaxation(f64),
}

/// One source-to-target pair; `distance` is the Euclidean distance between
/// the transformed source point and its target.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Correspondence {
    pub source: usize,
    pub target: usize,
    pub distance: f64,
}

/// Point-pair correspondences; each source index appears at most once.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCorrespondenceSet {
    pairs: Vec<Correspondence>,
}

impl PointCorrespondenceSet {
    /// Builds a set from raw pairs. The caller is responsible for the pair
    /// semantics (unique sources, distances matching the clouds in use).
    pub fn from_pairs(pairs: Vec<Correspondence>) -> Self {
        Self { pairs }
    }

    pub fn pairs(&self) -> &[Correspondence] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Maps every source point to its exact nearest neighbor in the reference
/// cloud. The source cloud is expected to be already transformed into the
/// reference frame.
pub fn closest_point(
    source_transformed: &PointCloud,
    reference_index: &NearestNeighborIndex,
) -> Result<PointCorrespondenceSet, CorrespondenceError> {
    if source_transformed.is_empty() || reference_index.is_empty() {
        return Err(CorrespondenceError::EmptyCloud);
    }
    let pairs = source_transformed
        .points()
        .par_iter()
        .enumerate()
        .map(|(source, p)| {
            let (target, distance) = reference_index.nearest(p);
            Correspondence {
                source,
                target,
                distance,
            }
        })
        .collect();
    Ok(PointCorrespondenceSet { pairs })
}

/// Keeps the pair `(i, j)` only when the match is mutual: `j` is the nearest
/// reference point to source `i`, and the nearest source point to `j` lies
/// within `relaxation` of source `i`. A relaxation of zero demands strict
/// reciprocity.
pub fn reciprocal(
    source_transformed: &PointCloud,
    reference_index: &NearestNeighborIndex,
    relaxation: f64,
) -> Result<PointCorrespondenceSet, CorrespondenceError> {
    if relaxation < 0.0 || !relaxation.is_finite() {
        return Err(CorrespondenceError::InvalidRelaxation(relaxation));
    }
    let forward = closest_point(source_transformed, reference_index)?;
    let source_index =
        build_nn_index(source_transformed).map_err(|_| CorrespondenceError::EmptyCloud)?;
    let pairs = forward
        .pairs
        .into_par_iter()
        .filter(|pair| {
            let (back, _) = source_index.nearest(reference_index.point(pair.target));
            let gap = (source_transformed.points()[pair.source]
                - source_transformed.points()[back])
                .norm();
            gap <= relaxation
        })
        .collect();
    Ok(PointCorrespondenceSet { pairs })
}
