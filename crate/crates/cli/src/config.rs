//! Layered configuration: defaults, then the TOML file, then command-line
//! flags (flags win). Every command writes its resolved configuration next
//! to its outputs.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

/// Optional TOML file mirroring the command-line surface.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub emit: Option<String>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub tree: TreeSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub predict: PredictSection,
    #[serde(default)]
    pub prune: PruneSection,
    #[serde(default)]
    pub analyze: AnalyzeSection,
    #[serde(default)]
    pub cost: CostSection,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
    pub n_features: Option<u32>,
    pub n_labels: Option<u32>,
    pub zero_based: Option<bool>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeSection {
    pub k: Option<u32>,
    pub d_max: Option<u32>,
    pub preset: Option<String>,
    pub ovr: Option<bool>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub loss: Option<String>,
    pub lambda: Option<f64>,
    pub eps: Option<f64>,
    pub max_iter: Option<u32>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictSection {
    pub beam: Option<usize>,
    pub top_k: Option<usize>,
    pub ks: Option<Vec<usize>>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PruneSection {
    pub tau: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeSection {
    pub l: Option<u64>,
    pub k: Option<u64>,
    pub alphas: Option<Vec<f64>>,
    pub d_from: Option<u32>,
    pub d_to: Option<u32>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSection {
    pub ell: Option<f64>,
    pub nbar: Option<f64>,
    pub c: Option<f64>,
    pub kmeans_iters: Option<f64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::data(format!("reading {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))
    }
}

/// First `Some` wins: flag, then file, then default.
pub fn pick<T: Clone>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Like [`pick`] but without a default.
pub fn pick_opt<T: Clone>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}
