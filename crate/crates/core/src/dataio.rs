//! Data ingestion and serialization: KITTI odometry scans, poses and
//! calibration, synthetic scene generation for desk-scale verification, and
//! the two-column curve tables consumed by plotting tools.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::{CloudError, PointCloud};
use crate::geometry::RigidTransform;
use crate::sweep::SweepCurve;

/// Orthonormality drift above which a parsed rotation is replaced by its
/// nearest proper rotation.
const ROTATION_DRIFT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DataIoError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(
        "{path}: record truncated at byte offset {offset} (file length must be a multiple of 16)"
    )]
    TruncatedRecord { path: PathBuf, offset: usize },
    #[error("{path}:{line}: expected 12 numbers, got {got}")]
    BadPoseLine {
        path: PathBuf,
        line: usize,
        got: usize,
    },
    #[error("{path}:{line}: {token:?} is not a number")]
    BadNumber {
        path: PathBuf,
        line: usize,
        token: String,
    },
    #[error("{path}:{line}: matrix is not a proper rotation (determinant {det})")]
    NotARotation {
        path: PathBuf,
        line: usize,
        det: f64,
    },
    #[error("{path}: no `{key}` entry in calibration file")]
    MissingCalibration { path: PathBuf, key: String },
    #[error("frame index {index} out of range: sequence has {count} poses")]
    FrameOutOfRange { index: usize, count: usize },
    #[error("scene produces no static points")]
    EmptyScene,
    #[error("curve has no entries to write")]
    EmptyCurve,
    #[error("{path}:{line}: malformed curve row")]
    BadCurveRow { path: PathBuf, line: usize },
    #[error(transparent)]
    Cloud(#[from] CloudError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataIoError + '_ {
    move |source| DataIoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parses a raw scan: little-endian `f32` quadruplets of x, y, z and
/// reflectance. Reflectance is discarded; points with non-finite coordinates
/// are dropped and counted in the second return value.
pub fn load_velodyne_bin(path: &Path) -> Result<(PointCloud, usize), DataIoError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() % 16 != 0 {
        return Err(DataIoError::TruncatedRecord {
            path: path.to_path_buf(),
            offset: bytes.len() - bytes.len() % 16,
        });
    }
    let mut points = Vec::with_capacity(bytes.len() / 16);
    let mut dropped = 0usize;
    for record in bytes.chunks_exact(16) {
        let x = f32::from_le_bytes(record[0..4].try_into().unwrap()) as f64;
        let y = f32::from_le_bytes(record[4..8].try_into().unwrap()) as f64;
        let z = f32::from_le_bytes(record[8..12].try_into().unwrap()) as f64;
        if x.is_finite() && y.is_finite() && z.is_finite() {
            points.push(Vector3::new(x, y, z));
        } else {
            dropped += 1;
        }
    }
    Ok((PointCloud::new(points)?, dropped))
}

/// Writes a cloud in the raw scan layout; reflectance is written as zero.
pub fn write_velodyne_bin(cloud: &PointCloud, path: &Path) -> Result<(), DataIoError> {
    let mut bytes = Vec::with_capacity(cloud.len() * 16);
    for p in cloud.points() {
        for v in [p.x as f32, p.y as f32, p.z as f32, 0.0f32] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(io_err(path))
}

fn parse_rigid_transform(
    values: &[f64],
    path: &Path,
    line: usize,
    reorthonormalized: &mut usize,
) -> Result<RigidTransform, DataIoError> {
    let rotation = Matrix3::new(
        values[0], values[1], values[2], //
        values[4], values[5], values[6], //
        values[8], values[9], values[10],
    );
    let translation = Vector3::new(values[3], values[7], values[11]);
    let det = rotation.determinant();
    if det <= 0.0 || !det.is_finite() {
        return Err(DataIoError::NotARotation {
            path: path.to_path_buf(),
            line,
            det,
        });
    }
    let drift = (rotation.transpose() * rotation - Matrix3::identity())
        .abs()
        .max();
    let quaternion = if drift > ROTATION_DRIFT_TOLERANCE {
        *reorthonormalized += 1;
        UnitQuaternion::from_matrix(&rotation)
    } else {
        UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(rotation))
    };
    Ok(RigidTransform::new(quaternion, translation))
}

fn parse_pose_values(tokens: &[&str], path: &Path, line: usize) -> Result<Vec<f64>, DataIoError> {
    if tokens.len() != 12 {
        return Err(DataIoError::BadPoseLine {
            path: path.to_path_buf(),
            line,
            got: tokens.len(),
        });
    }
    tokens
        .iter()
        .map(|t| {
            t.parse::<f64>().map_err(|_| DataIoError::BadNumber {
                path: path.to_path_buf(),
                line,
                token: t.to_string(),
            })
        })
        .collect()
}

/// Parses a pose file: one row-major 3x4 matrix of 12 whitespace-separated
/// decimals per non-empty line. Returns the transforms and the number of
/// rows whose rotation drifted past tolerance and was re-orthonormalized.
pub fn load_poses(path: &Path) -> Result<(Vec<RigidTransform>, usize), DataIoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut poses = Vec::new();
    let mut reorthonormalized = 0usize;
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        let values = parse_pose_values(&tokens, path, i + 1)?;
        poses.push(parse_rigid_transform(
            &values,
            path,
            i + 1,
            &mut reorthonormalized,
        )?);
    }
    Ok((poses, reorthonormalized))
}

/// Reads the sensor extrinsic (`Tr` entry) from a calibration file. The
/// entry uses the same 12-decimal layout as a pose line after its key.
pub fn load_calibration(path: &Path) -> Result<RigidTransform, DataIoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    for (i, raw) in text.lines().enumerate() {
        let Some(rest) = raw.strip_prefix("Tr:").or_else(|| raw.strip_prefix("Tr ")) else {
            continue;
        };
        let tokens: Vec<&str> = rest.split_whitespace().collect();
        let values = parse_pose_values(&tokens, path, i + 1)?;
        let mut reortho = 0;
        return parse_rigid_transform(&values, path, i + 1, &mut reortho);
    }
    Err(DataIoError::MissingCalibration {
        path: path.to_path_buf(),
        key: "Tr".to_string(),
    })
}

/// Formats a transform as one pose line (row-major 3x4, 12 decimals) with
/// enough digits to round-trip exactly.
pub fn pose_line(transform: &RigidTransform) -> String {
    let r = transform.rotation().to_rotation_matrix();
    let t = transform.translation();
    let mut line = String::new();
    for row in 0..3 {
        for col in 0..3 {
            write!(line, "{:.17e} ", r.matrix()[(row, col)]).unwrap();
        }
        if row < 2 {
            write!(line, "{:.17e} ", t[row]).unwrap();
        } else {
            write!(line, "{:.17e}", t[row]).unwrap();
        }
    }
    line
}

/// Relative transform aligning frame `b` into frame `a`:
/// `inverse(pose_a) ∘ pose_b`.
pub fn relative_transform(pose_a: &RigidTransform, pose_b: &RigidTransform) -> RigidTransform {
    pose_a.inverse().compose(pose_b)
}

/// One scan with its ground-truth sensor pose in the world frame.
#[derive(Clone, Debug)]
pub struct KittiFrame {
    pub sequence: String,
    pub frame_index: usize,
    pub cloud: PointCloud,
    /// Sensor-to-world pose: the published camera pose composed with the
    /// camera-from-sensor calibration, so all filter geometry stays
    /// sensor-centric.
    pub pose: RigidTransform,
    /// Points dropped while parsing the scan (non-finite coordinates).
    pub dropped_points: usize,
}

/// Accessor for the odometry benchmark directory layout:
/// `sequences/<seq>/velodyne/<frame>.bin`, `sequences/<seq>/calib.txt`, and
/// poses in `poses/<seq>.txt` (or `sequences/<seq>/poses.txt`).
#[derive(Clone, Debug)]
pub struct KittiDataset {
    root: PathBuf,
}

impl KittiDataset {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn velodyne_path(&self, sequence: &str, frame: usize) -> PathBuf {
        self.root
            .join("sequences")
            .join(sequence)
            .join("velodyne")
            .join(format!("{frame:06}.bin"))
    }

    pub fn calib_path(&self, sequence: &str) -> PathBuf {
        self.root.join("sequences").join(sequence).join("calib.txt")
    }

    pub fn poses_path(&self, sequence: &str) -> PathBuf {
        let standard = self.root.join("poses").join(format!("{sequence}.txt"));
        if standard.exists() {
            standard
        } else {
            self.root.join("sequences").join(sequence).join("poses.txt")
        }
    }

    /// Loads the sensor pose of every frame in a sequence (camera poses
    /// composed with the calibration extrinsic) and the number of rows whose
    /// rotation had to be re-orthonormalized.
    pub fn load_sensor_poses(
        &self,
        sequence: &str,
    ) -> Result<(Vec<RigidTransform>, usize), DataIoError> {
        let calibration = load_calibration(&self.calib_path(sequence))?;
        let (poses, reorthonormalized) = load_poses(&self.poses_path(sequence))?;
        Ok((
            poses.iter().map(|p| p.compose(&calibration)).collect(),
            reorthonormalized,
        ))
    }

    pub fn load_frame(&self, sequence: &str, frame: usize) -> Result<KittiFrame, DataIoError> {
        let (poses, _) = self.load_sensor_poses(sequence)?;
        let pose = *poses.get(frame).ok_or(DataIoError::FrameOutOfRange {
            index: frame,
            count: poses.len(),
        })?;
        let (cloud, dropped_points) = load_velodyne_bin(&self.velodyne_path(sequence, frame))?;
        Ok(KittiFrame {
            sequence: sequence.to_string(),
            frame_index: frame,
            cloud,
            pose,
            dropped_points,
        })
    }
}

/// Provenance of a synthetic point, carried alongside the generated clouds
/// so filters can be validated against ground truth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointLabel {
    /// World-fixed point visible in both frames.
    Static,
    /// Point on the independently moving object.
    Dynamic,
    /// World-fixed point falling inside the other frame's blind spot, hence
    /// without a cross-frame counterpart.
    BlindSpot,
}

impl std::fmt::Display for PointLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PointLabel::Static => write!(f, "static"),
            PointLabel::Dynamic => write!(f, "dynamic"),
            PointLabel::BlindSpot => write!(f, "blindspot"),
        }
    }
}

/// Lidar-like ground sampling: concentric rings around the origin with
/// geometrically growing radii, so point density falls off with range the
/// way a real scan's does.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundRings {
    pub radius_min: f64,
    pub radius_max: f64,
    pub rings: usize,
    pub points_per_ring: usize,
    #[serde(default)]
    pub z: f64,
}

/// Uniform ground lattice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundGrid {
    pub half_extent_x: f64,
    pub half_extent_y: f64,
    pub spacing: f64,
    #[serde(default)]
    pub z: f64,
}

/// Vertical rectangle of points between two ground anchors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Wall {
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub z_min: f64,
    pub z_max: f64,
    pub spacing: f64,
}

/// Vertical line of points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pole {
    pub x: f64,
    pub y: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub spacing: f64,
}

/// A box-shaped object that moves independently of the ego motion between
/// the two frames.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicBox {
    pub center: [f64; 3],
    pub size: [f64; 3],
    pub spacing: f64,
    pub displacement: [f64; 3],
}

/// Ego motion between the two frames: the transform mapping source-frame
/// coordinates into the reference frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MotionSpec {
    pub translation: [f64; 3],
    #[serde(default)]
    pub yaw_deg: f64,
}

impl MotionSpec {
    pub fn to_transform(&self) -> RigidTransform {
        RigidTransform::from_axis_angle(
            &Vector3::z_axis(),
            self.yaw_deg.to_radians(),
            Vector3::new(
                self.translation[0],
                self.translation[1],
                self.translation[2],
            ),
        )
    }
}

/// Declarative description of a two-frame synthetic scene.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    #[serde(default)]
    pub ground_rings: Option<GroundRings>,
    #[serde(default)]
    pub ground_grid: Option<GroundGrid>,
    #[serde(default)]
    pub walls: Vec<Wall>,
    #[serde(default)]
    pub poles: Vec<Pole>,
    #[serde(default)]
    pub dynamic_box: Option<DynamicBox>,
    /// When set, each frame loses the points within this horizontal radius
    /// of its own origin.
    #[serde(default)]
    pub blind_spot_radius: Option<f64>,
    /// Standard deviation of isotropic Gaussian noise applied to the shared
    /// world geometry. Both frames observe the same perturbed points, so
    /// static source points remain exact rigid copies of their reference
    /// counterparts.
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub ego_motion: MotionSpec,
}

/// A generated frame pair with ground truth and per-point provenance labels.
#[derive(Clone, Debug)]
pub struct SyntheticScene {
    pub reference: PointCloud,
    pub source: PointCloud,
    pub ground_truth: RigidTransform,
    pub reference_labels: Vec<PointLabel>,
    pub source_labels: Vec<PointLabel>,
}

fn world_static_points(spec: &SceneSpec) -> Vec<Vector3<f64>> {
    let mut points = Vec::new();
    if let Some(g) = &spec.ground_rings {
        let growth = if g.rings > 1 {
            (g.radius_max / g.radius_min).powf(1.0 / (g.rings - 1) as f64)
        } else {
            1.0
        };
        for ring in 0..g.rings {
            let radius = g.radius_min * growth.powi(ring as i32);
            let phase = ring as f64 * 0.37;
            for j in 0..g.points_per_ring {
                let theta = phase + std::f64::consts::TAU * j as f64 / g.points_per_ring as f64;
                points.push(Vector3::new(
                    radius * theta.cos(),
                    radius * theta.sin(),
                    g.z,
                ));
            }
        }
    }
    if let Some(g) = &spec.ground_grid {
        let nx = (2.0 * g.half_extent_x / g.spacing).round() as i64;
        let ny = (2.0 * g.half_extent_y / g.spacing).round() as i64;
        for i in 0..=nx {
            for j in 0..=ny {
                points.push(Vector3::new(
                    -g.half_extent_x + i as f64 * g.spacing,
                    -g.half_extent_y + j as f64 * g.spacing,
                    g.z,
                ));
            }
        }
    }
    for w in &spec.walls {
        let start = Vector3::new(w.start[0], w.start[1], 0.0);
        let end = Vector3::new(w.end[0], w.end[1], 0.0);
        let length = (end - start).norm();
        let along = (length / w.spacing).round() as i64;
        let up = ((w.z_max - w.z_min) / w.spacing).round() as i64;
        for i in 0..=along {
            let base = start + (end - start) * (i as f64 / along.max(1) as f64);
            for j in 0..=up {
                points.push(Vector3::new(base.x, base.y, w.z_min + j as f64 * w.spacing));
            }
        }
    }
    for pole in &spec.poles {
        let steps = ((pole.z_max - pole.z_min) / pole.spacing).round() as i64;
        for j in 0..=steps {
            points.push(Vector3::new(
                pole.x,
                pole.y,
                pole.z_min + j as f64 * pole.spacing,
            ));
        }
    }
    points
}

fn box_points(b: &DynamicBox) -> Vec<Vector3<f64>> {
    let mut points = Vec::new();
    let counts: Vec<i64> = b
        .size
        .iter()
        .map(|s| (s / b.spacing).round() as i64)
        .collect();
    for i in 0..=counts[0] {
        for j in 0..=counts[1] {
            for k in 0..=counts[2] {
                points.push(Vector3::new(
                    b.center[0] - b.size[0] / 2.0 + i as f64 * b.spacing,
                    b.center[1] - b.size[1] / 2.0 + j as f64 * b.spacing,
                    b.center[2] - b.size[2] / 2.0 + k as f64 * b.spacing,
                ));
            }
        }
    }
    points
}

fn in_blind_spot(p: &Vector3<f64>, radius: f64) -> bool {
    p.x * p.x + p.y * p.y <= radius * radius
}

/// Generates a two-frame scene from its description.
///
/// The reference frame coincides with the world frame. Static source points
/// are the reference statics mapped by the inverse ego motion; the dynamic
/// box is additionally displaced in world coordinates between the frames.
/// Each frame drops the points inside its own blind-spot circle; a static
/// point surviving in one frame but cut from the other is labeled
/// [`PointLabel::BlindSpot`] in the frame that still sees it.
pub fn make_scene(spec: &SceneSpec, seed: u64) -> Result<SyntheticScene, DataIoError> {
    let mut statics = world_static_points(spec);
    if statics.is_empty() {
        return Err(DataIoError::EmptyScene);
    }
    let ground_truth = spec.ego_motion.to_transform();
    let inverse_motion = ground_truth.inverse();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if spec.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, spec.noise_sigma).expect("finite sigma");
        for p in &mut statics {
            *p += Vector3::new(
                normal.sample(&mut rng),
                normal.sample(&mut rng),
                normal.sample(&mut rng),
            );
        }
    }

    let mut reference_points = Vec::new();
    let mut reference_labels = Vec::new();
    let mut source_points = Vec::new();
    let mut source_labels = Vec::new();
    let mut static_pairs = Vec::new();

    for w in &statics {
        let in_source_frame = inverse_motion.apply(w);
        let (ref_cut, src_cut) = match spec.blind_spot_radius {
            Some(r) => (in_blind_spot(w, r), in_blind_spot(&in_source_frame, r)),
            None => (false, false),
        };
        if !ref_cut {
            reference_points.push(*w);
            reference_labels.push(if src_cut {
                PointLabel::BlindSpot
            } else {
                PointLabel::Static
            });
        }
        if !src_cut {
            source_points.push(in_source_frame);
            source_labels.push(if ref_cut {
                PointLabel::BlindSpot
            } else {
                PointLabel::Static
            });
            if !ref_cut {
                static_pairs.push((*w, in_source_frame));
            }
        }
    }

    if let Some(b) = &spec.dynamic_box {
        let displacement = Vector3::new(b.displacement[0], b.displacement[1], b.displacement[2]);
        let noise = (spec.noise_sigma > 0.0)
            .then(|| Normal::new(0.0, spec.noise_sigma).expect("finite sigma"));
        for corner in box_points(b) {
            let mut world_ref = corner;
            if let Some(normal) = &noise {
                world_ref += Vector3::new(
                    normal.sample(&mut rng),
                    normal.sample(&mut rng),
                    normal.sample(&mut rng),
                );
            }
            let world_src = world_ref + displacement;
            let in_source_frame = inverse_motion.apply(&world_src);
            let ref_cut = spec
                .blind_spot_radius
                .is_some_and(|r| in_blind_spot(&world_ref, r));
            let src_cut = spec
                .blind_spot_radius
                .is_some_and(|r| in_blind_spot(&in_source_frame, r));
            if !ref_cut {
                reference_points.push(world_ref);
                reference_labels.push(PointLabel::Dynamic);
            }
            if !src_cut {
                source_points.push(in_source_frame);
                source_labels.push(PointLabel::Dynamic);
            }
        }
    }

    // Ground-truth consistency: mapping a static source point back through
    // the ego motion must land on its reference counterpart.
    for (reference, source) in &static_pairs {
        let back = ground_truth.apply(source);
        assert!(
            (back - reference).norm() <= 1e-12,
            "scene construction broke the rigid-copy contract"
        );
    }

    Ok(SyntheticScene {
        reference: PointCloud::new(reference_points)?,
        source: PointCloud::new(source_points)?,
        ground_truth,
        reference_labels,
        source_labels,
    })
}

/// Writes a curve as plain two-column text: `u rmse`, one sample per line,
/// six decimal places, `nan` for samples where the objective was undefined.
pub fn write_curve_table(curve: &SweepCurve, path: &Path) -> Result<(), DataIoError> {
    if curve.entries.is_empty() {
        return Err(DataIoError::EmptyCurve);
    }
    let mut out = String::with_capacity(curve.entries.len() * 20);
    for entry in &curve.entries {
        match entry.rmse {
            Some(value) => writeln!(out, "{:.6} {:.6}", entry.u, value).unwrap(),
            None => writeln!(out, "{:.6} nan", entry.u).unwrap(),
        }
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Parses a two-column curve table back into `(u, rmse)` rows; `nan` rows
/// come back as `None`.
pub fn read_curve_table(path: &Path) -> Result<Vec<(f64, Option<f64>)>, DataIoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let bad_row = || DataIoError::BadCurveRow {
            path: path.to_path_buf(),
            line: i + 1,
        };
        let mut cols = raw.split_whitespace();
        let u: f64 = cols
            .next()
            .ok_or_else(bad_row)?
            .parse()
            .map_err(|_| bad_row())?;
        let value: f64 = cols
            .next()
            .ok_or_else(bad_row)?
            .parse()
            .map_err(|_| bad_row())?;
        if cols.next().is_some() {
            return Err(bad_row());
        }
        rows.push((u, if value.is_nan() { None } else { Some(value) }));
    }
    Ok(rows)
}

/// Writes per-point labels, one per line.
pub fn write_labels(labels: &[PointLabel], path: &Path) -> Result<(), DataIoError> {
    let mut out = String::new();
    for (i, label) in labels.iter().enumerate() {
        writeln!(out, "{i} {label}").unwrap();
    }
    fs::write(path, out).map_err(io_err(path))
}
