//! Dataset manifests: one CSV row per sample with image, mask, and split
//! bookkeeping. Relative paths resolve against the manifest's directory.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_HEADER: [&str; 6] =
    ["sample_id", "image_path", "mask_path", "pred_mask_path", "label", "split"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "validation" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(format!("split must be train, validation, or test (got `{other}`)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub sample_id: String,
    pub image_path: PathBuf,
    pub mask_path: Option<PathBuf>,
    pub pred_mask_path: Option<PathBuf>,
    pub label: Option<bool>,
    pub split: Split,
}

fn parse_error(path: &Path, line: usize, reason: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, reason: reason.into() }
}

/// Load and validate a manifest CSV. Duplicate ids, malformed labels or
/// splits, and missing image files are parse errors naming the line.
pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    {
        let headers = reader
            .headers()
            .map_err(|e| parse_error(path, 1, e.to_string()))?;
        let got: Vec<&str> = headers.iter().collect();
        if got != MANIFEST_HEADER {
            return Err(parse_error(
                path,
                1,
                format!("header must be {} (got {})", MANIFEST_HEADER.join(","), got.join(",")),
            ));
        }
    }

    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_error(path, 0, e.to_string()))?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(entries.len() + 2);
        let field = |i: usize| record.get(i).unwrap_or("").to_string();

        let sample_id = field(0);
        if sample_id.is_empty() {
            return Err(parse_error(path, line, "sample_id must be nonempty"));
        }
        if !seen.insert(sample_id.clone()) {
            return Err(parse_error(path, line, format!("duplicate sample_id `{sample_id}`")));
        }

        let resolve = |p: String| -> Option<PathBuf> {
            if p.is_empty() {
                None
            } else {
                let pb = PathBuf::from(&p);
                Some(if pb.is_absolute() { pb } else { base.join(pb) })
            }
        };
        let image_path = resolve(field(1))
            .ok_or_else(|| parse_error(path, line, "image_path must be nonempty"))?;
        if !image_path.is_file() {
            return Err(parse_error(
                path,
                line,
                format!("image file not found: {}", image_path.display()),
            ));
        }
        let mask_path = resolve(field(2));
        let pred_mask_path = resolve(field(3));
        for (name, p) in [("mask_path", &mask_path), ("pred_mask_path", &pred_mask_path)] {
            if let Some(p) = p {
                if !p.is_file() {
                    return Err(parse_error(
                        path,
                        line,
                        format!("{name} file not found: {}", p.display()),
                    ));
                }
            }
        }

        let label = match field(4).as_str() {
            "" => None,
            "0" => Some(false),
            "1" => Some(true),
            other => {
                return Err(parse_error(path, line, format!("label must be 0 or 1 (got `{other}`)")))
            }
        };
        let split: Split = field(5)
            .parse()
            .map_err(|e: String| parse_error(path, line, e))?;
        if split == Split::Train && label.is_none() {
            return Err(parse_error(path, line, "train entries must be labeled"));
        }

        entries.push(ManifestEntry { sample_id, image_path, mask_path, pred_mask_path, label, split });
    }
    Ok(entries)
}

/// Reassign a stratified fraction of the train split to validation,
/// reproducibly per seed. Entries outside the train split stay untouched;
/// label balance is preserved per class.
pub fn assign_validation_split(
    entries: &mut [ManifestEntry],
    fraction: f64,
    seed: u64,
) -> Result<usize> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::contract("validation fraction must lie in [0, 1)"));
    }
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut moved = 0;
    for class in [Some(true), Some(false), None] {
        let mut idx: Vec<usize> = (0..entries.len())
            .filter(|&i| entries[i].split == Split::Train && entries[i].label == class)
            .collect();
        idx.shuffle(&mut rng);
        let take = (idx.len() as f64 * fraction).round() as usize;
        for &i in idx.iter().take(take) {
            entries[i].split = Split::Validation;
            moved += 1;
        }
    }
    Ok(moved)
}
