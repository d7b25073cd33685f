//! Run manifests: every sweep writes one next to its outputs with the fully
//! resolved configuration, so the run can be reproduced bit-identically from
//! the manifest alone.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use regsweep_core::{PipelineConfig, SceneSpec};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
#[allow(clippy::large_enum_variant)]
pub enum ManifestInput {
    Kitti {
        root: String,
        sequence: String,
        reference_frame: usize,
        source_frame: usize,
    },
    Synthetic {
        scene: SceneSpec,
        seed: u64,
    },
}

/// How the sweep's initial transform (the u = 0 pose) is derived.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum InitialTransformSpec {
    Identity,
    /// Relative motion of the preceding frame pair (constant-motion guess).
    Previous,
    /// A fixed pure translation.
    Translation([f64; 3]),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub input: ManifestInput,
    pub t_initial: InitialTransformSpec,
    pub variants: Vec<PipelineConfig>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(
        command: &str,
        input: ManifestInput,
        t_initial: InitialTransformSpec,
        variants: Vec<PipelineConfig>,
        outputs: Vec<String>,
    ) -> Self {
        Self {
            tool: "regsweep".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            input,
            t_initial,
            variants,
            outputs,
        }
    }

    pub fn save(&self, dir: &Path) -> Result<std::path::PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(self)?;
        fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }
}
