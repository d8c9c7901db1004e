//! The resolved run configuration and the output manifest.
//!
//! `RunConfig` is what `infer` executes; it can come from flags, from a JSON
//! file with the same keys, or from a previously written `run_manifest.json`
//! (the manifest embeds the config under `"config"`). Re-running from a
//! manifest reproduces the outputs byte for byte, which is why the manifest
//! carries no timestamps, hostnames, or thread counts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use ttls::inference::SelectionPolicy;
use ttls::pipeline::Method;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

fn default_true() -> bool {
    true
}

fn default_method() -> Method {
    Method::Ttls
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub matrix: PathBuf,
    pub labels: PathBuf,
    #[serde(default)]
    pub row_names: Option<PathBuf>,
    #[serde(default)]
    pub col_names: Option<PathBuf>,
    #[serde(default)]
    pub transpose: bool,
    #[serde(default = "default_true")]
    pub standardize: bool,
    #[serde(default)]
    pub pre_shrink: bool,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default)]
    pub policy: SelectionPolicy,
    #[serde(default)]
    pub gamma_override: Option<(f64, f64)>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads (0 = all cores). Never serialized: results do not
    /// depend on it, and manifests must be identical across thread counts.
    #[serde(default, skip_serializing)]
    pub threads: usize,
}

impl RunConfig {
    /// Read a config from JSON; accepts either a bare `RunConfig` or a
    /// manifest that embeds one under `"config"`.
    pub fn from_json_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        let config_value = match value.get("config") {
            Some(embedded) => embedded.clone(),
            None => value,
        };
        serde_json::from_value(config_value)
            .with_context(|| format!("interpreting config {}", path.display()))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ManifestCounts {
    pub groups: usize,
    pub variables: usize,
    pub observations: BTreeMap<String, usize>,
    pub selected_edges: BTreeMap<String, usize>,
    pub shared_edges: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: ToolInfo,
    /// RNG contract for anything seeded: ChaCha8 streams with
    /// SplitMix64-derived per-purpose seeds.
    pub rng: String,
    pub config: RunConfig,
    pub counts: ManifestCounts,
    pub warnings: BTreeMap<String, Vec<String>>,
}

impl RunManifest {
    pub fn new(config: RunConfig, counts: ManifestCounts, warnings: BTreeMap<String, Vec<String>>) -> Self {
        Self {
            schema_version: MANIFEST_SCHEMA_VERSION,
            tool: ToolInfo {
                name: "ttls".into(),
                version: env!("CARGO_PKG_VERSION").into(),
            },
            rng: "chacha8; per-purpose seeds derived via splitmix64".into(),
            config,
            counts,
            warnings,
        }
    }
}
