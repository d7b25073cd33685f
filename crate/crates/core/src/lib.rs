//! Point cloud registration analysis toolkit.
//!
//! The crate decomposes scan alignment into the classic stages — data
//! filtering, data processing, correspondence determination, and objective
//! function — and drives them open loop: instead of minimizing, it samples a
//! configured objective along an interpolated transform path between an
//! initial guess and the ground truth, producing plot-ready error curves.
//! That makes local minima, blind-spot artifacts, and dynamic-object damage
//! directly visible per pipeline variant.
//!
//! Module map:
//! - [`geometry`]: rigid transforms, LERP/SLERP, interpolation paths.
//! - [`cloud`]: point cloud container, exact kd-tree, covariance eigen
//!   analysis, normal estimation, voxel occupancy.
//! - [`correspondence`]: closest-point and reciprocal pair search.
//! - [`features`]: smoothness labeling and edge-line / planar-patch fitting.
//! - [`objectives`]: the five alignment metrics and RMSE normalization.
//! - [`filters`]: ego blind spot filter and voxel occupancy correspondence
//!   filter.
//! - [`sweep`]: the open-loop sweep engine and pipeline configuration.
//! - [`dataio`]: KITTI ingestion, synthetic scenes, curve tables.

pub mod cloud;
pub mod correspondence;
pub mod dataio;
pub mod features;
pub mod filters;
pub mod geometry;
pub mod objectives;
pub mod sweep;

pub use cloud::{
    build_nn_index, build_voxel_occupancy, covariance_eigen, estimate_normals, CloudError,
    NearestNeighborIndex, PointCloud, VoxelOccupancy,
};
pub use correspondence::{
    closest_point, reciprocal, Correspondence, CorrespondenceError, PointCorrespondenceSet,
};
pub use dataio::{
    load_poses, load_velodyne_bin, make_scene, relative_transform, write_curve_table, DataIoError,
    KittiDataset, KittiFrame, PointLabel, SceneSpec, SyntheticScene,
};
pub use features::{
    fit_edge_line, fit_planar_patch, smoothness, EdgeLine, FeatureError, FeatureLabel,
    FeatureLabels, FeatureParams, PlanarPatch,
};
pub use filters::{
    artificial_blind_spot, ego_blind_spot_filter, octree_correspondence_filter, BlindSpotConfig,
    FilterError, OcfConfig,
};
pub use geometry::{
    interpolate, lerp, make_path, slerp, GeometryError, InterpolationPath, RigidTransform,
};
pub use objectives::{rmse, ObjectiveError, ObjectiveKind, ResidualSet};
pub use sweep::{
    run_sweep, run_sweep_suite, CorrespondenceMode, DataFilter, EstimateSource, PipelineConfig,
    SweepCurve, SweepEntry, SweepError, SweepInput,
};
