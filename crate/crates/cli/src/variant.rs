//! Variant-string parsing: a variant names an objective function plus any
//! preprocessing modifiers, joined with `+`, mirroring plot legend labels —
//! e.g. `point-to-point+artificial-blindspot+ego-overlap` or
//! `point-to-plane+ocf`.

use anyhow::{bail, Result};
use regsweep_core::{
    CorrespondenceMode, DataFilter, EstimateSource, FeatureParams, ObjectiveKind, PipelineConfig,
};

pub const MODIFIERS: [&str; 4] = ["ocf", "ego-overlap", "artificial-blindspot", "reciprocal"];

/// Shared knobs applied to every parsed variant.
#[derive(Clone, Copy, Debug)]
pub struct VariantParams {
    pub voxel_size: f64,
    pub blindspot_radius: f64,
    pub reciprocal_relaxation: f64,
    pub normal_k: usize,
    pub u_min: f64,
    pub u_max: f64,
    pub samples: usize,
    pub estimate_source: EstimateSource,
}

pub fn objective_names() -> Vec<&'static str> {
    ObjectiveKind::ALL.iter().map(|k| k.name()).collect()
}

fn parse_objective(name: &str) -> Result<ObjectiveKind> {
    ObjectiveKind::ALL
        .into_iter()
        .find(|k| k.name() == name)
        .ok_or_else(|| {
            anyhow::anyhow!(
                "unknown objective `{name}`; valid objectives: {}",
                objective_names().join(", ")
            )
        })
}

pub fn parse_variant(spec: &str, params: &VariantParams) -> Result<PipelineConfig> {
    let mut parts = spec.split('+');
    let objective = parse_objective(parts.next().unwrap_or_default().trim())?;
    let mut config = PipelineConfig::new(spec, objective);
    config.u_min = params.u_min;
    config.u_max = params.u_max;
    config.samples = params.samples;
    config.normal_k = params.normal_k;
    config.features = FeatureParams::default();
    config.estimate_source = params.estimate_source;
    for modifier in parts {
        match modifier.trim() {
            "ocf" => config.data_filters.push(DataFilter::Ocf {
                voxel_size: params.voxel_size,
            }),
            "ego-overlap" => config.data_filters.push(DataFilter::EgoBlindSpot {
                radius: params.blindspot_radius,
            }),
            "artificial-blindspot" => config.data_filters.push(DataFilter::ArtificialBlindSpot {
                radius: params.blindspot_radius,
            }),
            "reciprocal" => {
                config.correspondence = CorrespondenceMode::Reciprocal {
                    relaxation: params.reciprocal_relaxation,
                }
            }
            other => bail!(
                "unknown variant modifier `{other}` in `{spec}`; valid modifiers: {}",
                MODIFIERS.join(", ")
            ),
        }
    }
    config.validate()?;
    Ok(config)
}

/// File-system-safe table name for a variant label.
pub fn table_file_name(variant: &str) -> String {
    let safe: String = variant
        .chars()
        .map(|c| match c {
            'a'..='z' | 'A'..='Z' | '0'..='9' | '-' | '_' | '+' | '.' => c,
            _ => '_',
        })
        .collect();
    format!("{safe}.txt")
}
