//! Subcommand implementations. Every file a command writes is registered
//! with the output tracker first, so a failing run can remove its partial
//! outputs before exiting nonzero.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::Vector3;
use serde::Serialize;

use regsweep_core::dataio::{
    load_poses, load_velodyne_bin, make_scene, pose_line, write_curve_table, write_labels,
    write_velodyne_bin, KittiDataset, SceneSpec,
};
use regsweep_core::{
    artificial_blind_spot, build_voxel_occupancy, ego_blind_spot_filter,
    octree_correspondence_filter, relative_transform, run_sweep_suite, smoothness, BlindSpotConfig,
    EstimateSource, FeatureLabel, OcfConfig, PipelineConfig, PointCloud, RigidTransform,
    SweepCurve, SweepInput,
};

use crate::manifest::{InitialTransformSpec, ManifestInput, RunManifest};
use crate::variant::{parse_variant, table_file_name, VariantParams};
use crate::{FeaturesArgs, FilterArgs, SweepArgs, SynthArgs};

/// Files written by the running command; on failure they are deleted so no
/// partial outputs survive.
#[derive(Default)]
pub struct OutputTracker {
    written: Vec<PathBuf>,
}

impl OutputTracker {
    pub fn track(&mut self, path: PathBuf) -> PathBuf {
        self.written.push(path.clone());
        path
    }

    pub fn remove_all(&self) {
        for path in &self.written {
            let _ = fs::remove_file(path);
        }
    }
}

fn ensure_out_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path)
        .with_context(|| format!("creating output directory {}", path.display()))
}

fn load_cloud(path: &Path) -> Result<PointCloud> {
    let (cloud, dropped) = load_velodyne_bin(path)?;
    if dropped > 0 {
        eprintln!(
            "note: dropped {dropped} non-finite points while reading {}",
            path.display()
        );
    }
    Ok(cloud)
}

/// Parses `--t0`: `identity`, `previous`, or a literal `x,y,z` translation.
pub fn parse_t0(spec: &str) -> Result<InitialTransformSpec> {
    match spec {
        "identity" => Ok(InitialTransformSpec::Identity),
        "previous" => Ok(InitialTransformSpec::Previous),
        other => {
            let parts: Vec<&str> = other.split(',').collect();
            if parts.len() != 3 {
                bail!("--t0 accepts `identity`, `previous`, or `x,y,z`, got `{other}`");
            }
            let mut t = [0.0f64; 3];
            for (slot, part) in t.iter_mut().zip(&parts) {
                *slot = part
                    .trim()
                    .parse()
                    .map_err(|_| anyhow!("`{part}` in --t0 is not a number"))?;
            }
            Ok(InitialTransformSpec::Translation(t))
        }
    }
}

/// A resolved sweep problem: clouds, transforms, and the estimate available
/// to the data filters.
struct ResolvedInput {
    sweep: SweepInput,
    /// Relative motion of the preceding frame pair, when one exists.
    previous_motion: Option<RigidTransform>,
}

fn resolve_kitti(
    root: &Path,
    sequence: &str,
    reference_frame: usize,
    source_frame: usize,
    t_initial: InitialTransformSpec,
) -> Result<ResolvedInput> {
    let dataset = KittiDataset::new(root);
    let (poses, reorthonormalized) = dataset.load_sensor_poses(sequence)?;
    if reorthonormalized > 0 {
        eprintln!("note: re-orthonormalized {reorthonormalized} drifted pose rotations");
    }
    let pose = |frame: usize| -> Result<RigidTransform> {
        poses.get(frame).copied().ok_or_else(|| {
            anyhow!(
                "frame {frame} out of range: sequence {sequence} has {} poses",
                poses.len()
            )
        })
    };
    let t_ground_truth = relative_transform(&pose(reference_frame)?, &pose(source_frame)?);
    let previous_motion = if reference_frame >= 1 {
        Some(relative_transform(
            &pose(reference_frame - 1)?,
            &pose(reference_frame)?,
        ))
    } else {
        None
    };
    let reference = load_cloud(&dataset.velodyne_path(sequence, reference_frame))?;
    let source = load_cloud(&dataset.velodyne_path(sequence, source_frame))?;
    let t0 = match t_initial {
        InitialTransformSpec::Identity => RigidTransform::identity(),
        InitialTransformSpec::Previous => previous_motion
            .ok_or_else(|| anyhow!("--t0 previous needs a frame before {reference_frame}"))?,
        InitialTransformSpec::Translation(t) => {
            RigidTransform::from_translation(Vector3::new(t[0], t[1], t[2]))
        }
    };
    let sweep = SweepInput::new(source, reference)
        .with_transforms(t0, t_ground_truth)
        .with_ids(
            format!("{sequence}:{reference_frame:06}"),
            format!("{sequence}:{source_frame:06}"),
        );
    Ok(ResolvedInput {
        sweep,
        previous_motion,
    })
}

fn resolve_synthetic(
    scene: &SceneSpec,
    seed: u64,
    t_initial: InitialTransformSpec,
) -> Result<ResolvedInput> {
    let generated = make_scene(scene, seed)?;
    let t0 = match t_initial {
        InitialTransformSpec::Identity => RigidTransform::identity(),
        InitialTransformSpec::Previous => {
            bail!("--t0 previous needs a frame sequence; synthetic scenes have none")
        }
        InitialTransformSpec::Translation(t) => {
            RigidTransform::from_translation(Vector3::new(t[0], t[1], t[2]))
        }
    };
    let sweep = SweepInput::new(generated.source, generated.reference)
        .with_transforms(t0, generated.ground_truth)
        .with_ids(
            format!("synthetic:{seed}:reference"),
            format!("synthetic:{seed}:source"),
        );
    Ok(ResolvedInput {
        sweep,
        previous_motion: None,
    })
}

fn resolve_estimate(
    arg: Option<&str>,
    input: &ManifestInput,
    previous_motion: Option<RigidTransform>,
) -> Result<EstimateSource> {
    let default = match input {
        ManifestInput::Kitti { .. } => "previous",
        ManifestInput::Synthetic { .. } => "ground-truth",
    };
    match arg.unwrap_or(default) {
        "ground-truth" => Ok(EstimateSource::GroundTruth),
        "identity" => Ok(EstimateSource::Identity),
        "previous" => previous_motion.map(EstimateSource::Fixed).ok_or_else(|| {
            anyhow!(
                "--estimate previous is unavailable here (no preceding frame); \
                 use --estimate ground-truth or --estimate identity"
            )
        }),
        other => bail!("--estimate accepts previous, ground-truth, or identity, got `{other}`"),
    }
}

fn summarize(curve: &SweepCurve) {
    match curve.argmin() {
        Some(best) => println!(
            "{}: argmin u={:.6} rmse={:.6} (n={})",
            curve.config_name,
            best.u,
            best.rmse.unwrap_or(f64::NAN),
            best.correspondences
        ),
        None => println!("{}: all samples undefined", curve.config_name),
    }
}

pub fn cmd_sweep(args: &SweepArgs, tracker: &mut OutputTracker) -> Result<()> {
    let (input_desc, t_initial, variants) = if let Some(manifest_path) = &args.manifest {
        if args.kitti_root.is_some() || args.scene_spec.is_some() {
            bail!("--manifest replaces the other input flags; pass it alone");
        }
        let manifest = RunManifest::load(manifest_path)?;
        if manifest.command != "sweep" {
            bail!("manifest records a `{}` run, not a sweep", manifest.command);
        }
        (manifest.input, manifest.t_initial, manifest.variants)
    } else {
        let t_initial = parse_t0(&args.t0)?;
        let input_desc = match (&args.kitti_root, &args.scene_spec) {
            (Some(root), None) => {
                let sequence = args
                    .sequence
                    .clone()
                    .ok_or_else(|| anyhow!("--kitti-root needs --sequence"))?;
                let (reference_frame, source_frame) = match args.frame.as_slice() {
                    [f] => (*f, f + 1),
                    [a, b] => (*a, *b),
                    [] => {
                        bail!("--kitti-root needs --frame (once for a frame pair n, n+1, or twice)")
                    }
                    _ => bail!("--frame may be given at most twice"),
                };
                ManifestInput::Kitti {
                    root: root.display().to_string(),
                    sequence,
                    reference_frame,
                    source_frame,
                }
            }
            (None, Some(spec_path)) => {
                let text = fs::read_to_string(spec_path)
                    .with_context(|| format!("reading scene spec {}", spec_path.display()))?;
                let scene: SceneSpec = serde_json::from_str(&text)
                    .with_context(|| format!("parsing scene spec {}", spec_path.display()))?;
                ManifestInput::Synthetic {
                    scene,
                    seed: args.seed,
                }
            }
            (Some(_), Some(_)) => bail!("--kitti-root and --scene-spec are mutually exclusive"),
            (None, None) => bail!("no input: pass --kitti-root, --scene-spec, or --manifest"),
        };
        // Variants are parsed after the input is built: the filter estimate
        // may need the preceding frame pair's motion.
        (input_desc, t_initial, Vec::new())
    };

    let resolved = match &input_desc {
        ManifestInput::Kitti {
            root,
            sequence,
            reference_frame,
            source_frame,
        } => resolve_kitti(
            Path::new(root),
            sequence,
            *reference_frame,
            *source_frame,
            t_initial,
        )?,
        ManifestInput::Synthetic { scene, seed } => resolve_synthetic(scene, *seed, t_initial)?,
    };

    let variants = if variants.is_empty() {
        let estimate_source = resolve_estimate(
            args.estimate.as_deref(),
            &input_desc,
            resolved.previous_motion,
        )?;
        let params = VariantParams {
            voxel_size: args.voxel_size,
            blindspot_radius: args.blindspot_radius,
            reciprocal_relaxation: args.reciprocal_relaxation,
            normal_k: args.normal_k,
            u_min: args.u_min,
            u_max: args.u_max,
            samples: args.samples,
            estimate_source,
        };
        let names: Vec<String> = if args.variant.is_empty() {
            crate::variant::objective_names()
                .into_iter()
                .map(str::to_string)
                .collect()
        } else {
            args.variant.clone()
        };
        names
            .iter()
            .map(|name| parse_variant(name, &params))
            .collect::<Result<Vec<PipelineConfig>>>()?
    } else {
        variants
    };

    ensure_out_dir(&args.out)?;
    let results = run_sweep_suite(&resolved.sweep, &variants)?;
    let mut outputs = Vec::new();
    let mut failures = Vec::new();
    for (config, result) in variants.iter().zip(results) {
        match result {
            Ok(curve) => {
                let name = table_file_name(&config.name);
                let path = tracker.track(args.out.join(&name));
                write_curve_table(&curve, &path)?;
                summarize(&curve);
                outputs.push(name);
            }
            Err(err) => failures.push(format!("{}: {err}", config.name)),
        }
    }
    if !failures.is_empty() {
        bail!(
            "{} variant(s) failed:\n  {}",
            failures.len(),
            failures.join("\n  ")
        );
    }

    let manifest = RunManifest::new("sweep", input_desc, t_initial, variants, outputs);
    tracker.track(manifest.save(&args.out)?);
    Ok(())
}

#[derive(Serialize)]
struct FilterReport {
    filter: String,
    source_points_in: usize,
    source_points_removed: usize,
    reference_points_in: usize,
    reference_points_removed: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    voxels_cleared: Option<usize>,
}

pub fn cmd_filter(args: &FilterArgs, tracker: &mut OutputTracker) -> Result<()> {
    let source = load_cloud(&args.source)?;
    let reference = load_cloud(&args.reference)?;
    let estimate = match &args.estimate_file {
        Some(path) => {
            let (poses, _) = load_poses(path)?;
            *poses
                .first()
                .ok_or_else(|| anyhow!("{}: no pose line found", path.display()))?
        }
        None => RigidTransform::identity(),
    };

    let mut voxels_cleared = None;
    let (source_filtered, reference_filtered) = match args.filter.as_str() {
        "ocf" => {
            let cfg = OcfConfig::new(args.voxel_size, estimate)?;
            let occ_source =
                build_voxel_occupancy(&source.transformed(&estimate), args.voxel_size)?;
            let occ_reference = build_voxel_occupancy(&reference, args.voxel_size)?;
            let one_sided = occ_source
                .cells()
                .keys()
                .filter(|k| !occ_reference.is_occupied(k))
                .count()
                + occ_reference
                    .cells()
                    .keys()
                    .filter(|k| !occ_source.is_occupied(k))
                    .count();
            voxels_cleared = Some(one_sided);
            octree_correspondence_filter(&source, &reference, &cfg)
        }
        "ego-overlap" => {
            let cfg = BlindSpotConfig::new(args.blindspot_radius, estimate)?;
            ego_blind_spot_filter(&source, &reference, &cfg)
        }
        "artificial-blindspot" => (
            artificial_blind_spot(&source, args.blindspot_radius)?,
            artificial_blind_spot(&reference, args.blindspot_radius)?,
        ),
        other => {
            bail!("unknown filter `{other}`; valid filters: ocf, ego-overlap, artificial-blindspot")
        }
    };

    ensure_out_dir(&args.out)?;
    let source_path = tracker.track(args.out.join("source_filtered.bin"));
    write_velodyne_bin(&source_filtered, &source_path)?;
    let reference_path = tracker.track(args.out.join("reference_filtered.bin"));
    write_velodyne_bin(&reference_filtered, &reference_path)?;

    let report = FilterReport {
        filter: args.filter.clone(),
        source_points_in: source.len(),
        source_points_removed: source.len() - source_filtered.len(),
        reference_points_in: reference.len(),
        reference_points_removed: reference.len() - reference_filtered.len(),
        voxels_cleared,
    };
    let report_path = tracker.track(args.out.join("report.json"));
    fs::write(&report_path, serde_json::to_string_pretty(&report)?)
        .with_context(|| format!("writing {}", report_path.display()))?;
    println!(
        "{}: removed {} of {} source points, {} of {} reference points{}",
        report.filter,
        report.source_points_removed,
        report.source_points_in,
        report.reference_points_removed,
        report.reference_points_in,
        match report.voxels_cleared {
            Some(v) => format!(", cleared {v} voxels"),
            None => String::new(),
        }
    );
    Ok(())
}

pub fn cmd_features(args: &FeaturesArgs, tracker: &mut OutputTracker) -> Result<()> {
    let cloud = load_cloud(&args.cloud)?;
    let labels = smoothness(&cloud, args.neighborhood_size, args.planar_threshold)?;
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_out_dir(parent)?;
        }
    }
    let mut table = String::with_capacity(cloud.len() * 24);
    for (i, (s, label)) in labels.smoothness.iter().zip(&labels.labels).enumerate() {
        use std::fmt::Write;
        if label == &FeatureLabel::Invalid {
            writeln!(table, "{i} nan {label}").unwrap();
        } else {
            writeln!(table, "{i} {s:.6} {label}").unwrap();
        }
    }
    let path = tracker.track(args.out.clone());
    fs::write(&path, table).with_context(|| format!("writing {}", path.display()))?;
    let count = |l: FeatureLabel| labels.labels.iter().filter(|x| **x == l).count();
    println!(
        "{} points: {} edge, {} planar, {} invalid",
        cloud.len(),
        count(FeatureLabel::Edge),
        count(FeatureLabel::Planar),
        count(FeatureLabel::Invalid)
    );
    Ok(())
}

pub fn cmd_synth(args: &SynthArgs, tracker: &mut OutputTracker) -> Result<()> {
    let text = fs::read_to_string(&args.scene_spec)
        .with_context(|| format!("reading scene spec {}", args.scene_spec.display()))?;
    let spec: SceneSpec = serde_json::from_str(&text)
        .with_context(|| format!("parsing scene spec {}", args.scene_spec.display()))?;
    let scene = make_scene(&spec, args.seed)?;

    ensure_out_dir(&args.out)?;
    let reference_path = tracker.track(args.out.join("reference.bin"));
    write_velodyne_bin(&scene.reference, &reference_path)?;
    let source_path = tracker.track(args.out.join("source.bin"));
    write_velodyne_bin(&scene.source, &source_path)?;
    let gt_path = tracker.track(args.out.join("t_gt.txt"));
    fs::write(&gt_path, format!("{}\n", pose_line(&scene.ground_truth)))
        .with_context(|| format!("writing {}", gt_path.display()))?;
    let ref_labels = tracker.track(args.out.join("reference_labels.txt"));
    write_labels(&scene.reference_labels, &ref_labels)?;
    let src_labels = tracker.track(args.out.join("source_labels.txt"));
    write_labels(&scene.source_labels, &src_labels)?;
    let manifest = RunManifest::new(
        "synth",
        ManifestInput::Synthetic {
            scene: spec,
            seed: args.seed,
        },
        InitialTransformSpec::Identity,
        Vec::new(),
        vec![
            "reference.bin".into(),
            "source.bin".into(),
            "t_gt.txt".into(),
            "reference_labels.txt".into(),
            "source_labels.txt".into(),
        ],
    );
    tracker.track(manifest.save(&args.out)?);
    println!(
        "wrote scene: {} reference points, {} source points",
        scene.reference.len(),
        scene.source.len()
    );
    Ok(())
}
