//! Dataset manifests, feature caching, external descriptor ingestion,
//! experiment orchestration, model persistence, and the batch commands.

pub mod commands;
pub mod config;
pub mod contexts;
pub mod experiment;
pub mod manifest;
pub mod store;
pub mod tables;

pub use config::{load_config, save_config, ExperimentConfig, FusionMode, SelectionMode};
pub use contexts::build_contexts;
pub use experiment::{run_experiment, ComponentModel, ExperimentBundle, StagedLabels};
pub use manifest::{load_manifest, ManifestEntry, Split};
pub use store::{ingest_external_features, Context, FeatureRecord, FeatureStore};
