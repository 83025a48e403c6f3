//! Feature store and external deep-feature ingestion.
//!
//! Records are newline-delimited JSON objects with the vector carried as a
//! base64-encoded little-endian f64 array, so cached features round-trip
//! exactly and the file can be appended to while readers stream it.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{declared_dims, DRN_CONCEPTS, UNET_SHAPE};

/// Image context a feature was computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Context {
    #[serde(rename = "WI")]
    WholeImage,
    #[serde(rename = "CR")]
    Crop,
    #[serde(rename = "CRGT")]
    CropGroundTruth,
}

impl Context {
    pub const ALL: [Context; 3] = [Context::WholeImage, Context::Crop, Context::CropGroundTruth];

    pub fn tag(self) -> &'static str {
        match self {
            Context::WholeImage => "WI",
            Context::Crop => "CR",
            Context::CropGroundTruth => "CRGT",
        }
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for Context {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "WI" => Ok(Context::WholeImage),
            "CR" => Ok(Context::Crop),
            "CRGT" => Ok(Context::CropGroundTruth),
            other => Err(format!("context must be WI, CR, or CRGT (got `{other}`)")),
        }
    }
}

/// One stored feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub sample_id: String,
    pub context: Context,
    pub feature_name: String,
    pub vector: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct WireRecord {
    sample_id: String,
    context: Context,
    feature_name: String,
    vector_b64: String,
}

fn encode_vector(v: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(v.len() * 8);
    for x in v {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

fn decode_vector(b64: &str) -> Result<Vec<f64>> {
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(b64)
        .map_err(|e| Error::validation(format!("bad vector encoding: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::validation("vector byte length not a multiple of 8"));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

impl FeatureRecord {
    pub fn to_line(&self) -> Result<String> {
        Ok(serde_json::to_string(&WireRecord {
            sample_id: self.sample_id.clone(),
            context: self.context,
            feature_name: self.feature_name.clone(),
            vector_b64: encode_vector(&self.vector),
        })?)
    }

    pub fn from_line(line: &str) -> Result<Self> {
        let wire: WireRecord = serde_json::from_str(line)?;
        Ok(FeatureRecord {
            sample_id: wire.sample_id,
            context: wire.context,
            feature_name: wire.feature_name,
            vector: decode_vector(&wire.vector_b64)?,
        })
    }
}

type Key = (String, Context, String);

/// Append-only feature cache keyed by (sample, context, feature).
#[derive(Debug, Default)]
pub struct FeatureStore {
    records: HashMap<Key, Vec<f64>>,
    /// Dimensionality per feature name, fixed by declaration or first record.
    dims: HashMap<String, usize>,
    path: Option<PathBuf>,
}

impl FeatureStore {
    pub fn in_memory() -> Self {
        FeatureStore::default()
    }

    /// Open a file-backed store, creating the file on first append. Existing
    /// records are validated while loading.
    pub fn open(path: &Path) -> Result<Self> {
        let mut store = FeatureStore {
            records: HashMap::new(),
            dims: HashMap::new(),
            path: Some(path.to_path_buf()),
        };
        if path.is_file() {
            let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
            for (idx, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let record = FeatureRecord::from_line(&line).map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    reason: e.to_string(),
                })?;
                store.insert_validated(record, false).map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    reason: e.to_string(),
                })?;
            }
        }
        Ok(store)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn check_dims(&mut self, record: &FeatureRecord) -> Result<()> {
        let expected = declared_dims(&record.feature_name)
            .or_else(|| self.dims.get(&record.feature_name).copied());
        match expected {
            Some(d) if d != record.vector.len() => Err(Error::validation(format!(
                "feature {} expects {d} dims, record for {}/{} has {}",
                record.feature_name,
                record.sample_id,
                record.context,
                record.vector.len()
            ))),
            Some(_) => Ok(()),
            None => {
                self.dims.insert(record.feature_name.clone(), record.vector.len());
                Ok(())
            }
        }
    }

    fn insert_validated(&mut self, record: FeatureRecord, write: bool) -> Result<()> {
        self.check_dims(&record)?;
        let key = (record.sample_id.clone(), record.context, record.feature_name.clone());
        if self.records.contains_key(&key) {
            return Err(Error::validation(format!(
                "duplicate record for {}/{}/{}",
                key.0, key.1, key.2
            )));
        }
        if write {
            if let Some(path) = &self.path {
                let mut file = std::fs::OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)
                    .map_err(|e| Error::io(path, e))?;
                writeln!(file, "{}", record.to_line()?).map_err(|e| Error::io(path, e))?;
            }
        }
        self.records.insert(key, record.vector);
        Ok(())
    }

    /// Insert a record, persisting it when the store is file-backed.
    pub fn append(&mut self, record: FeatureRecord) -> Result<()> {
        self.insert_validated(record, true)
    }

    pub fn contains(&self, sample_id: &str, context: Context, feature: &str) -> bool {
        self.records
            .contains_key(&(sample_id.to_string(), context, feature.to_string()))
    }

    pub fn get(&self, sample_id: &str, context: Context, feature: &str) -> Option<&[f64]> {
        self.records
            .get(&(sample_id.to_string(), context, feature.to_string()))
            .map(|v| v.as_slice())
    }
}

/// Parse and validate newline-delimited external feature records. Known
/// feature names must carry their declared dimensionality, and concept/shape
/// descriptors are only valid in the whole-image context.
pub fn ingest_external_features(path: &Path) -> Result<Vec<FeatureRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    let mut adhoc_dims: HashMap<String, usize> = HashMap::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |reason: String| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            reason,
        };
        let record = FeatureRecord::from_line(&line).map_err(|e| parse_err(e.to_string()))?;
        if matches!(record.feature_name.as_str(), DRN_CONCEPTS | UNET_SHAPE)
            && record.context != Context::WholeImage
        {
            return Err(parse_err(format!(
                "{} is a whole-image descriptor; context {} rejected",
                record.feature_name, record.context
            )));
        }
        let expected = declared_dims(&record.feature_name)
            .or_else(|| adhoc_dims.get(&record.feature_name).copied());
        match expected {
            Some(d) if d != record.vector.len() => {
                return Err(parse_err(format!(
                    "feature {} expects {d} dims, got {}",
                    record.feature_name,
                    record.vector.len()
                )));
            }
            Some(_) => {}
            None => {
                adhoc_dims.insert(record.feature_name.clone(), record.vector.len());
            }
        }
        records.push(record);
    }
    Ok(records)
}
