//! Experiment configuration: feature roster per context, SVM costs, fusion
//! and selection modes, seeds, and dictionary locations. Stored as JSON;
//! relative paths resolve against the config file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::AugmentRanges;
use crate::ensemble::ComponentKey;
use crate::error::{Error, Result};
use crate::features::{CAFFE_FC6, COLOR_HIST, DRN_CONCEPTS, EDGE_HIST, MSLBP, SC_GRAY, SC_RGB, UNET_SHAPE};
use crate::pipeline::store::Context;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionMode {
    Avg,
    Vote,
}

impl std::str::FromStr for FusionMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "avg" => Ok(FusionMode::Avg),
            "vote" => Ok(FusionMode::Vote),
            other => Err(format!("fusion must be avg or vote (got `{other}`)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    #[default]
    None,
    Greedy,
    Forward,
}

impl std::str::FromStr for SelectionMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" => Ok(SelectionMode::None),
            "greedy" => Ok(SelectionMode::Greedy),
            "forward" => Ok(SelectionMode::Forward),
            other => Err(format!("selection must be none, greedy, or forward (got `{other}`)")),
        }
    }
}

fn default_folds() -> usize {
    3
}

fn default_working_resolution() -> usize {
    256
}

fn default_c() -> f64 {
    crate::classify::DEFAULT_C
}

fn default_lambda() -> f64 {
    crate::sparse::DEFAULT_LAMBDA
}

fn default_fusion() -> FusionMode {
    FusionMode::Avg
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Feature names per context tag (WI, CR, CRGT).
    pub features: BTreeMap<String, Vec<String>>,
    /// Soft-margin cost; `svm_c_per_component` overrides by "CTX:feature" id.
    #[serde(default = "default_c")]
    pub svm_c: f64,
    #[serde(default)]
    pub svm_c_per_component: BTreeMap<String, f64>,
    #[serde(default = "default_fusion")]
    pub fusion: FusionMode,
    #[serde(default)]
    pub selection: SelectionMode,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub seed: u64,
    /// Sparse-coding dictionary file per feature name (sc_rgb, sc_gray).
    #[serde(default)]
    pub dictionaries: BTreeMap<String, PathBuf>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Long-side resolution for hand-coded feature extraction.
    #[serde(default = "default_working_resolution")]
    pub working_resolution: usize,
    /// Worker threads for per-component training; defaults to the CPU count.
    #[serde(default)]
    pub parallelism: Option<usize>,
    #[serde(default)]
    pub augment: Option<AugmentRanges>,
}

impl ExperimentConfig {
    /// Minimal config over the given components with library defaults.
    pub fn with_features(features: BTreeMap<String, Vec<String>>) -> Self {
        ExperimentConfig {
            features,
            svm_c: default_c(),
            svm_c_per_component: BTreeMap::new(),
            fusion: default_fusion(),
            selection: SelectionMode::None,
            folds: default_folds(),
            seed: 0,
            dictionaries: BTreeMap::new(),
            lambda: default_lambda(),
            working_resolution: default_working_resolution(),
            parallelism: None,
            augment: None,
        }
    }

    /// The (context, feature) components this config trains, sorted.
    pub fn components(&self) -> Result<Vec<(Context, String)>> {
        let mut out = Vec::new();
        for (ctx, names) in &self.features {
            let context: Context = ctx
                .parse()
                .map_err(|e: String| Error::validation(format!("features key: {e}")))?;
            for name in names {
                out.push((context, name.clone()));
            }
        }
        out.sort_by(|a, b| (a.0.tag(), &a.1).cmp(&(b.0.tag(), &b.1)));
        if out.is_empty() {
            return Err(Error::validation("config must request at least one feature"));
        }
        Ok(out)
    }

    pub fn cost_for(&self, key: &ComponentKey) -> f64 {
        self.svm_c_per_component.get(&key.id()).copied().unwrap_or(self.svm_c)
    }

    pub fn validate(&self) -> Result<()> {
        self.components()?;
        if self.folds < 2 {
            return Err(Error::validation("folds must be >= 2"));
        }
        if self.svm_c <= 0.0 || self.svm_c_per_component.values().any(|&c| c <= 0.0) {
            return Err(Error::validation("SVM cost C must be > 0"));
        }
        if self.lambda <= 0.0 {
            return Err(Error::validation("lambda must be > 0"));
        }
        if self.working_resolution < 16 {
            return Err(Error::validation("working_resolution must be >= 16"));
        }
        for (name, path) in &self.dictionaries {
            if !matches!(name.as_str(), SC_RGB | SC_GRAY) {
                return Err(Error::validation(format!(
                    "dictionaries entry `{name}` must be {SC_RGB} or {SC_GRAY}"
                )));
            }
            if !path.is_file() {
                return Err(Error::validation(format!(
                    "dictionary file not found: {}",
                    path.display()
                )));
            }
        }
        // every requested sparse feature needs its dictionary
        for (_, name) in self.components()? {
            if matches!(name.as_str(), SC_RGB | SC_GRAY) && !self.dictionaries.contains_key(&name) {
                return Err(Error::validation(format!("feature {name} requires a dictionary path")));
            }
        }
        Ok(())
    }
}

/// Feature names computed by this crate (as opposed to ingested vectors).
pub fn is_computable(name: &str) -> bool {
    matches!(name, COLOR_HIST | EDGE_HIST | MSLBP | SC_RGB | SC_GRAY)
}

/// Known external descriptor names.
pub fn is_external(name: &str) -> bool {
    matches!(name, CAFFE_FC6 | DRN_CONCEPTS | UNET_SHAPE)
}

/// Load a config file, resolving dictionary paths against its directory.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg: ExperimentConfig = serde_json::from_str(&text)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    for p in cfg.dictionaries.values_mut() {
        if p.is_relative() {
            *p = base.join(&p);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn save_config(path: &Path, cfg: &ExperimentConfig) -> Result<()> {
    let text = serde_json::to_string_pretty(cfg)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
