//! Open-loop evaluation of a configured alignment pipeline: instead of
//! letting a minimizer steer the transform, the source cloud is driven
//! through an interpolated path of query transforms and the objective value
//! is recorded at every sample, yielding a plot-ready error curve.
//!
//! Data filters run once, before the sweep, with a caller-chosen alignment
//! estimate. Normals and source feature labels are computed once on the
//! filtered clouds; correspondence determination (including line/patch
//! fitting in the reference cloud) is redone at every sample because it
//! depends on the query transform.

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::{build_nn_index, CloudError, NearestNeighborIndex, PointCloud};
use crate::correspondence::{closest_point, reciprocal, CorrespondenceError};
use crate::features::{
    fit_edge_line, fit_planar_patch, smoothness, FeatureError, FeatureLabel, FeatureParams,
};
use crate::filters::{
    artificial_blind_spot, ego_blind_spot_filter, octree_correspondence_filter, BlindSpotConfig,
    FilterError, OcfConfig,
};
use crate::geometry::{make_path, GeometryError, RigidTransform};
use crate::objectives::{
    edge_to_edge_line, planar_to_planar_patch, point_to_plane, point_to_point, rmse, symmetric,
    ObjectiveError, ObjectiveKind,
};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid pipeline config `{name}`: {reason}")]
    InvalidConfig { name: String, reason: String },
    #[error("sweep suite needs at least one config")]
    EmptySuite,
    #[error("sweep suite configs must share one sampling grid: {0}")]
    MismatchedGrids(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Cloud(#[from] CloudError),
    #[error(transparent)]
    Correspondence(#[from] CorrespondenceError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Filter(#[from] FilterError),
}

/// How point pairs are established for the point-pair metrics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrespondenceMode {
    ClosestPoint,
    Reciprocal { relaxation: f64 },
}

/// One data filtering step; steps run in configuration order, before the
/// sweep starts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "filter")]
pub enum DataFilter {
    EgoBlindSpot { radius: f64 },
    Ocf { voxel_size: f64 },
    ArtificialBlindSpot { radius: f64 },
}

/// Where the filters' alignment estimate comes from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateSource {
    /// The sweep's initial transform (a previous-frame estimate in odometry).
    Initial,
    /// The ground-truth transform, for best-case filter analysis.
    GroundTruth,
    Identity,
    /// An explicitly supplied transform.
    Fixed(RigidTransform),
}

/// Declarative description of one pipeline variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Label used in summaries and output file names.
    pub name: String,
    pub objective: ObjectiveKind,
    pub correspondence: CorrespondenceMode,
    pub data_filters: Vec<DataFilter>,
    pub estimate_source: EstimateSource,
    /// Neighborhood size for normal estimation.
    pub normal_k: usize,
    pub features: FeatureParams,
    /// Subtracted from the aggregated patch metric; zero under the plane
    /// distance reading used here.
    pub patch_rmse_offset: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub samples: usize,
}

impl PipelineConfig {
    pub fn new(name: impl Into<String>, objective: ObjectiveKind) -> Self {
        Self {
            name: name.into(),
            objective,
            correspondence: CorrespondenceMode::ClosestPoint,
            data_filters: Vec::new(),
            estimate_source: EstimateSource::Initial,
            normal_k: 10,
            features: FeatureParams::default(),
            patch_rmse_offset: 0.0,
            u_min: -1.0,
            u_max: 2.0,
            samples: 100,
        }
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        let fail = |reason: &str| {
            Err(SweepError::InvalidConfig {
                name: self.name.clone(),
                reason: reason.to_string(),
            })
        };
        if self.samples < 2 {
            return fail("at least 2 path samples are required");
        }
        if self.u_min >= self.u_max || !self.u_min.is_finite() || !self.u_max.is_finite() {
            return fail("u_min must be less than u_max");
        }
        if self.objective.is_feature_based() {
            // Feature metrics establish their own eigen-fitted
            // correspondences; an explicit reciprocal request cannot be
            // honored there.
            if matches!(self.correspondence, CorrespondenceMode::Reciprocal { .. }) {
                return fail("reciprocal correspondence only applies to point-pair objectives");
            }
        }
        if let CorrespondenceMode::Reciprocal { relaxation } = self.correspondence {
            if relaxation < 0.0 || !relaxation.is_finite() {
                return fail("reciprocal relaxation must be a non-negative finite distance");
            }
        }
        if self.normal_k < 3 {
            return fail("normal estimation needs at least 3 neighbors");
        }
        for f in &self.data_filters {
            match f {
                DataFilter::EgoBlindSpot { radius }
                | DataFilter::ArtificialBlindSpot { radius } => {
                    if *radius <= 0.0 {
                        return fail("filter radius must be positive");
                    }
                }
                DataFilter::Ocf { voxel_size } => {
                    if *voxel_size <= 0.0 {
                        return fail("voxel size must be positive");
                    }
                }
            }
        }
        Ok(())
    }

    /// Deterministic identifier of everything that shapes the curve,
    /// including fixed engine policies such as computing features on the
    /// filtered source cloud.
    pub fn digest(&self) -> String {
        #[derive(Serialize)]
        struct DigestInput<'a> {
            config: &'a PipelineConfig,
            features_from: &'static str,
            normals_per_sample: bool,
        }
        let canonical = serde_json::to_string(&DigestInput {
            config: self,
            features_from: "filtered-source",
            normals_per_sample: false,
        })
        .expect("config serialization cannot fail");
        format!("{:016x}", fnv1a(canonical.as_bytes()))
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// One sampled point of the error curve. `rmse` is `None` when no
/// correspondence survived at this sample; serializers write it as `nan` so
/// plots show a gap instead of a fake zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub u: f64,
    pub rmse: Option<f64>,
    pub correspondences: usize,
}

/// A sampled error curve over the interpolation parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub entries: Vec<SweepEntry>,
    pub config_name: String,
    pub config_digest: String,
    pub reference_id: String,
    pub source_id: String,
}

impl SweepCurve {
    /// Sample with the smallest defined error, if any is defined.
    pub fn argmin(&self) -> Option<&SweepEntry> {
        self.entries
            .iter()
            .filter(|e| e.rmse.is_some())
            .min_by(|a, b| a.rmse.unwrap().total_cmp(&b.rmse.unwrap()))
    }
}

/// The clouds and transforms one sweep operates on. The source cloud is
/// expressed in its own frame; `t_ground_truth` maps it into the reference
/// frame and `t_initial` is the path start.
#[derive(Clone, Debug)]
pub struct SweepInput {
    pub source: PointCloud,
    pub reference: PointCloud,
    pub t_initial: RigidTransform,
    pub t_ground_truth: RigidTransform,
    pub source_id: String,
    pub reference_id: String,
}

impl SweepInput {
    pub fn new(source: PointCloud, reference: PointCloud) -> Self {
        Self {
            source,
            reference,
            t_initial: RigidTransform::identity(),
            t_ground_truth: RigidTransform::identity(),
            source_id: "source".to_string(),
            reference_id: "reference".to_string(),
        }
    }

    pub fn with_transforms(
        mut self,
        t_initial: RigidTransform,
        t_ground_truth: RigidTransform,
    ) -> Self {
        self.t_initial = t_initial;
        self.t_ground_truth = t_ground_truth;
        self
    }

    pub fn with_ids(
        mut self,
        reference_id: impl Into<String>,
        source_id: impl Into<String>,
    ) -> Self {
        self.reference_id = reference_id.into();
        self.source_id = source_id.into();
        self
    }
}

fn resolve_estimate(input: &SweepInput, source: &EstimateSource) -> RigidTransform {
    match source {
        EstimateSource::Initial => input.t_initial,
        EstimateSource::GroundTruth => input.t_ground_truth,
        EstimateSource::Identity => RigidTransform::identity(),
        EstimateSource::Fixed(t) => *t,
    }
}

fn apply_filters(
    source: PointCloud,
    reference: PointCloud,
    filters: &[DataFilter],
    estimate: &RigidTransform,
) -> Result<(PointCloud, PointCloud), SweepError> {
    let mut p = source;
    let mut q = reference;
    for step in filters {
        match step {
            DataFilter::EgoBlindSpot { radius } => {
                let cfg = BlindSpotConfig::new(*radius, *estimate)?;
                (p, q) = ego_blind_spot_filter(&p, &q, &cfg);
            }
            DataFilter::Ocf { voxel_size } => {
                let cfg = OcfConfig::new(*voxel_size, *estimate)?;
                (p, q) = octree_correspondence_filter(&p, &q, &cfg);
            }
            DataFilter::ArtificialBlindSpot { radius } => {
                p = artificial_blind_spot(&p, *radius)?;
                q = artificial_blind_spot(&q, *radius)?;
            }
        }
    }
    Ok((p, q))
}

/// Sweeps one configured pipeline over the interpolated transform path and
/// records the normalized objective value at every sample.
pub fn run_sweep(input: &SweepInput, config: &PipelineConfig) -> Result<SweepCurve, SweepError> {
    config.validate()?;
    if input.source.is_empty() || input.reference.is_empty() {
        return Err(SweepError::Cloud(CloudError::EmptyCloud));
    }
    let estimate = resolve_estimate(input, &config.estimate_source);
    let (mut source, mut reference) = apply_filters(
        input.source.clone(),
        input.reference.clone(),
        &config.data_filters,
        &estimate,
    )?;
    if source.is_empty() || reference.is_empty() {
        return Err(SweepError::Cloud(CloudError::EmptyCloud));
    }

    match config.objective {
        ObjectiveKind::PointToPlane => {
            reference = crate::cloud::estimate_normals(&reference, config.normal_k)?;
        }
        ObjectiveKind::Symmetric => {
            source = crate::cloud::estimate_normals(&source, config.normal_k)?;
            reference = crate::cloud::estimate_normals(&reference, config.normal_k)?;
        }
        _ => {}
    }

    // Feature labels are computed once, on the filtered source cloud, in its
    // own frame; line/patch fitting happens per sample in the reference.
    let feature_points: Option<Vec<Vector3<f64>>> = if config.objective.is_feature_based() {
        let labels = smoothness(
            &source,
            config.features.neighborhood_size,
            config.features.planar_threshold,
        )?;
        let wanted = match config.objective {
            ObjectiveKind::EdgeToEdgeLine => FeatureLabel::Edge,
            _ => FeatureLabel::Planar,
        };
        Some(
            labels
                .indices_with(wanted)
                .into_iter()
                .map(|i| source.points()[i])
                .collect(),
        )
    } else {
        None
    };
    if config.objective.is_feature_based() && reference.len() < config.features.eigen_neighbors {
        return Err(SweepError::Cloud(CloudError::KTooLarge {
            k: config.features.eigen_neighbors,
            size: reference.len(),
        }));
    }

    let reference_index = build_nn_index(&reference)?;
    let path = make_path(
        &input.t_initial,
        &input.t_ground_truth,
        config.u_min,
        config.u_max,
        config.samples,
    )?;

    let entries: Result<Vec<SweepEntry>, SweepError> = path
        .samples()
        .par_iter()
        .map(|(u, transform)| {
            let set = evaluate_sample(
                transform,
                config,
                &source,
                &reference,
                &reference_index,
                feature_points.as_deref(),
            )?;
            let correspondences = set.len();
            Ok(SweepEntry {
                u: *u,
                rmse: rmse(&set).ok(),
                correspondences,
            })
        })
        .collect();

    Ok(SweepCurve {
        entries: entries?,
        config_name: config.name.clone(),
        config_digest: config.digest(),
        reference_id: input.reference_id.clone(),
        source_id: input.source_id.clone(),
    })
}

fn evaluate_sample(
    transform: &RigidTransform,
    config: &PipelineConfig,
    source: &PointCloud,
    reference: &PointCloud,
    reference_index: &NearestNeighborIndex,
    feature_points: Option<&[Vector3<f64>]>,
) -> Result<crate::objectives::ResidualSet, SweepError> {
    match config.objective {
        ObjectiveKind::PointToPoint | ObjectiveKind::PointToPlane | ObjectiveKind::Symmetric => {
            let moved = source.transformed(transform);
            let pairs = match config.correspondence {
                CorrespondenceMode::ClosestPoint => closest_point(&moved, reference_index)?,
                CorrespondenceMode::Reciprocal { relaxation } => {
                    reciprocal(&moved, reference_index, relaxation)?
                }
            };
            Ok(match config.objective {
                ObjectiveKind::PointToPoint => point_to_point(transform, &pairs, source, reference),
                ObjectiveKind::PointToPlane => {
                    point_to_plane(transform, &pairs, source, reference)?
                }
                _ => symmetric(transform, &pairs, source, reference)?,
            })
        }
        ObjectiveKind::EdgeToEdgeLine => {
            let feature_points = feature_points.expect("prepared for feature objectives");
            let mut points = Vec::new();
            let mut lines = Vec::new();
            for p in feature_points {
                let moved = transform.apply(p);
                let neighborhood =
                    neighbor_positions(reference_index, &moved, config.features.eigen_neighbors)?;
                if let Some(line) = fit_edge_line(
                    &neighborhood,
                    config.features.eigen_ratio,
                    config.features.half_width,
                ) {
                    points.push(*p);
                    lines.push(line);
                }
            }
            Ok(edge_to_edge_line(transform, &points, &lines))
        }
        ObjectiveKind::PlanarToPlanarPatch => {
            let feature_points = feature_points.expect("prepared for feature objectives");
            let mut points = Vec::new();
            let mut patches = Vec::new();
            for p in feature_points {
                let moved = transform.apply(p);
                let neighborhood =
                    neighbor_positions(reference_index, &moved, config.features.eigen_neighbors)?;
                if let Some(patch) = fit_planar_patch(
                    &neighborhood,
                    config.features.eigen_ratio,
                    config.features.flatness_max,
                    config.features.half_width,
                ) {
                    points.push(*p);
                    patches.push(patch);
                }
            }
            Ok(planar_to_planar_patch(
                transform,
                &points,
                &patches,
                config.patch_rmse_offset,
            ))
        }
    }
}

fn neighbor_positions(
    index: &NearestNeighborIndex,
    query: &Vector3<f64>,
    k: usize,
) -> Result<Vec<Vector3<f64>>, SweepError> {
    Ok(index
        .knn(query, k)?
        .into_iter()
        .map(|(i, _)| *index.point(i))
        .collect())
}

/// Runs several configs over the same input; all configs must share one
/// sampling grid so the curves are directly comparable. Per-config failures
/// are isolated in the returned vector.
pub fn run_sweep_suite(
    input: &SweepInput,
    configs: &[PipelineConfig],
) -> Result<Vec<Result<SweepCurve, SweepError>>, SweepError> {
    let Some(first) = configs.first() else {
        return Err(SweepError::EmptySuite);
    };
    for c in configs {
        if (c.u_min, c.u_max, c.samples) != (first.u_min, first.u_max, first.samples) {
            return Err(SweepError::MismatchedGrids(format!(
                "`{}` samples [{}, {}] x {} but `{}` samples [{}, {}] x {}",
                first.name,
                first.u_min,
                first.u_max,
                first.samples,
                c.name,
                c.u_min,
                c.u_max,
                c.samples
            )));
        }
    }
    Ok(configs.iter().map(|c| run_sweep(input, c)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid_cloud(n: usize, spacing: f64) -> PointCloud {
        let points = (0..n)
            .flat_map(|i| {
                (0..n).map(move |j| Vector3::new(i as f64 * spacing, j as f64 * spacing, 0.0))
            })
            .collect();
        PointCloud::new(points).unwrap()
    }

    fn exact_copy_input(t_gt: RigidTransform) -> SweepInput {
        let reference = grid_cloud(15, 0.5);
        let source = reference.transformed(&t_gt.inverse());
        SweepInput::new(source, reference).with_transforms(RigidTransform::identity(), t_gt)
    }

    #[test]
    fn exact_copy_sweep_reaches_zero_at_one() {
        let t_gt = RigidTransform::from_translation(Vector3::new(5.0, 0.0, 0.0));
        let input = exact_copy_input(t_gt);
        let mut config = PipelineConfig::new("point-to-point", ObjectiveKind::PointToPoint);
        config.u_min = 0.0;
        config.u_max = 1.0;
        config.samples = 11;
        let curve = run_sweep(&input, &config).unwrap();
        let at_one = curve.entries.iter().find(|e| e.u == 1.0).unwrap();
        assert!(at_one.rmse.unwrap() < 1e-9);
        let at_zero = curve.entries.iter().find(|e| e.u == 0.0).unwrap();
        assert!(at_zero.rmse.unwrap() > 0.0);
        assert_eq!(curve.argmin().unwrap().u, 1.0);
    }

    #[test]
    fn plane_scene_is_invisible_to_point_to_plane() {
        // An in-plane slide of a planar scene leaves the plane metric at
        // zero for every sample along the path.
        let t_gt = RigidTransform::from_translation(Vector3::new(1.25, 0.75, 0.0));
        let input = exact_copy_input(t_gt);
        let mut config = PipelineConfig::new("point-to-plane", ObjectiveKind::PointToPlane);
        config.u_min = -1.0;
        config.u_max = 2.0;
        config.samples = 16;
        let curve = run_sweep(&input, &config).unwrap();
        for entry in &curve.entries {
            assert!(
                entry.rmse.unwrap() < 1e-6,
                "u = {}: rmse = {:?}",
                entry.u,
                entry.rmse
            );
        }
    }

    #[test]
    fn default_grid_matches_canonical_sampling() {
        let config = PipelineConfig::new("defaults", ObjectiveKind::PointToPoint);
        assert_eq!(
            (config.u_min, config.u_max, config.samples),
            (-1.0, 2.0, 100)
        );
        let input = exact_copy_input(RigidTransform::from_translation(Vector3::new(
            1.0, 0.0, 0.0,
        )));
        let curve = run_sweep(&input, &config).unwrap();
        assert_eq!(curve.entries.len(), 100);
        assert_eq!(curve.entries[0].u, -1.0);
        assert_eq!(curve.entries[99].u, 2.0);
        assert_eq!(curve.entries[66].u, 1.0);
    }

    #[test]
    fn correspondence_counts_closest_vs_reciprocal() {
        let t_gt = RigidTransform::from_translation(Vector3::new(2.0, 0.0, 0.0));
        let input = exact_copy_input(t_gt);
        let closest = PipelineConfig::new("closest", ObjectiveKind::PointToPoint);
        let mut recip = PipelineConfig::new("reciprocal", ObjectiveKind::PointToPoint);
        recip.correspondence = CorrespondenceMode::Reciprocal { relaxation: 0.0 };
        let c1 = run_sweep(&input, &closest).unwrap();
        let c2 = run_sweep(&input, &recip).unwrap();
        let n = input.source.len();
        for (a, b) in c1.entries.iter().zip(&c2.entries) {
            assert_eq!(a.correspondences, n);
            assert!(b.correspondences <= a.correspondences);
        }
    }

    #[test]
    fn sweep_is_deterministic() {
        let t_gt =
            RigidTransform::from_axis_angle(&Vector3::z_axis(), 0.1, Vector3::new(1.0, 0.3, 0.0));
        let input = exact_copy_input(t_gt);
        let mut config = PipelineConfig::new("symmetric", ObjectiveKind::Symmetric);
        config.samples = 25;
        let a = run_sweep(&input, &config).unwrap();
        let b = run_sweep(&input, &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_survivor_samples_are_undefined_not_zero() {
        let input = exact_copy_input(RigidTransform::identity());
        let mut config = PipelineConfig::new("edges", ObjectiveKind::EdgeToEdgeLine);
        config.u_min = 0.0;
        config.u_max = 1.0;
        config.samples = 3;
        // No neighborhood of the flat grid passes an absurd dominance ratio,
        // so every sample ends up with zero line correspondences.
        config.features.eigen_ratio = 1e30;
        let curve = run_sweep(&input, &config).unwrap();
        for e in &curve.entries {
            assert_eq!(e.rmse, None);
            assert_eq!(e.correspondences, 0);
        }
    }

    #[test]
    fn validate_rejects_inconsistent_configs() {
        let mut config = PipelineConfig::new("bad", ObjectiveKind::EdgeToEdgeLine);
        config.correspondence = CorrespondenceMode::Reciprocal { relaxation: 0.0 };
        assert!(matches!(
            config.validate(),
            Err(SweepError::InvalidConfig { .. })
        ));
        let mut config = PipelineConfig::new("bad-grid", ObjectiveKind::PointToPoint);
        config.u_min = 2.0;
        config.u_max = -1.0;
        assert!(config.validate().is_err());
        let mut config = PipelineConfig::new("bad-filter", ObjectiveKind::PointToPoint);
        config
            .data_filters
            .push(DataFilter::Ocf { voxel_size: 0.0 });
        assert!(config.validate().is_err());
    }

    #[test]
    fn feature_objective_ignores_closest_point_mode() {
        let input = exact_copy_input(RigidTransform::from_translation(Vector3::new(
            0.5, 0.0, 0.0,
        )));
        let mut config = PipelineConfig::new("patches", ObjectiveKind::PlanarToPlanarPatch);
        config.u_min = 0.0;
        config.u_max = 1.0;
        config.samples = 3;
        config.correspondence = CorrespondenceMode::ClosestPoint;
        let curve = run_sweep(&input, &config).unwrap();
        let at_one = curve.entries.iter().find(|e| e.u == 1.0).unwrap();
        assert!(at_one.correspondences > 0);
        assert!(at_one.rmse.unwrap() < 1e-9);
    }

    #[test]
    fn suite_requires_matching_grids() {
        let input = exact_copy_input(RigidTransform::identity());
        assert!(matches!(
            run_sweep_suite(&input, &[]),
            Err(SweepError::EmptySuite)
        ));
        let a = PipelineConfig::new("a", ObjectiveKind::PointToPoint);
        let mut b = PipelineConfig::new("b", ObjectiveKind::PointToPoint);
        b.samples = 50;
        assert!(matches!(
            run_sweep_suite(&input, &[a, b]),
            Err(SweepError::MismatchedGrids(_))
        ));
    }

    #[test]
    fn suite_runs_all_objectives_on_shared_grid() {
        let t_gt = RigidTransform::from_translation(Vector3::new(1.0, 0.5, 0.0));
        let input = exact_copy_input(t_gt);
        let configs: Vec<PipelineConfig> = ObjectiveKind::ALL
            .iter()
            .map(|k| {
                let mut c = PipelineConfig::new(k.name(), *k);
                c.u_min = 0.0;
                c.u_max = 1.0;
                c.samples = 5;
                c
            })
            .collect();
        let curves = run_sweep_suite(&input, &configs).unwrap();
        assert_eq!(curves.len(), 5);
        let us: Vec<Vec<f64>> = curves
            .iter()
            .map(|c| c.as_ref().unwrap().entries.iter().map(|e| e.u).collect())
            .collect();
        for u in &us[1..] {
            assert_eq!(u, &us[0]);
        }
    }

    #[test]
    fn digest_changes_with_config() {
        let a = PipelineConfig::new("a", ObjectiveKind::PointToPoint);
        let mut b = a.clone();
        b.samples = 42;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest(), a.clone().digest());
        assert_eq!(a.digest().len(), 16);
    }

    #[test]
    fn estimate_sources_resolve() {
        let input = exact_copy_input(RigidTransform::from_translation(Vector3::new(
            3.0, 0.0, 0.0,
        )));
        assert_eq!(
            resolve_estimate(&input, &EstimateSource::GroundTruth),
            input.t_ground_truth
        );
        assert_eq!(
            resolve_estimate(&input, &EstimateSource::Identity),
            RigidTransform::identity()
        );
        let fixed = RigidTransform::from_translation(Vector3::new(0.0, 9.0, 0.0));
        assert_eq!(
            resolve_estimate(&input, &EstimateSource::Fixed(fixed)),
            fixed
        );
        assert_eq!(
            resolve_estimate(&input, &EstimateSource::Initial),
            input.t_initial
        );
    }

    #[test]
    fn filters_run_before_sweep_and_shrink_clouds() {
        let t_gt = RigidTransform::from_translation(Vector3::new(1.0, 0.0, 0.0));
        let reference = grid_cloud(21, 1.0);
        let source = reference.transformed(&t_gt.inverse());
        let input =
            SweepInput::new(source, reference).with_transforms(RigidTransform::identity(), t_gt);
        let mut config = PipelineConfig::new("blindspot", ObjectiveKind::PointToPoint);
        config.u_min = 0.0;
        config.u_max = 1.0;
        config.samples = 3;
        // Cut a circular hole around each frame's own origin, then drop the
        // points that fall into the other frame's hole. What survives is an
        // exact copy on both sides.
        config.data_filters = vec![
            DataFilter::ArtificialBlindSpot { radius: 3.0 },
            DataFilter::EgoBlindSpot { radius: 3.0 },
        ];
        config.estimate_source = EstimateSource::GroundTruth;
        let curve = run_sweep(&input, &config).unwrap();
        assert!(curve.entries[0].correspondences < input.source.len());
        let at_one = curve.entries.iter().find(|e| e.u == 1.0).unwrap();
        assert_relative_eq!(at_one.rmse.unwrap(), 0.0, epsilon = 1e-12);
    }
}
