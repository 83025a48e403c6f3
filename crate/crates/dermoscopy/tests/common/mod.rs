//! Shared fixtures: a synthetic labeled dataset with one perfectly
//! informative feature and three noise features, written to disk in the
//! pipeline's own formats.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use dermoscopy::imaging::{encode_png_rgb, ColorSpace, ImageTensor};
use dermoscopy::pipeline::{Context, ExperimentConfig, FeatureRecord, FeatureStore};

pub struct SyntheticDataset {
    pub manifest: PathBuf,
    pub store: PathBuf,
    pub config: PathBuf,
}

fn xorshift(state: &mut u64) -> f64 {
    *state ^= *state << 13;
    *state ^= *state >> 7;
    *state ^= *state << 17;
    (*state >> 11) as f64 / (1u64 << 53) as f64
}

/// 60 samples over train/validation/test splits. The `informative` feature
/// separates classes perfectly; `noise_a..c` are seeded noise.
pub fn write_synthetic_dataset(dir: &Path, selection: &str, fusion: &str) -> SyntheticDataset {
    let manifest = dir.join("manifest.csv");
    let store_path = dir.join("store.ndjson");
    let config = dir.join("config.json");

    let img = ImageTensor::new(4, 4, ColorSpace::Rgb, vec![0.25; 48]).unwrap();
    let png = encode_png_rgb(&img).unwrap();

    let mut manifest_file = std::fs::File::create(&manifest).unwrap();
    writeln!(manifest_file, "sample_id,image_path,mask_path,pred_mask_path,label,split").unwrap();

    let mut store = FeatureStore::open(&store_path).unwrap();
    let mut rng = 0x5eed_0001u64;
    for i in 0..60 {
        let split = match i % 4 {
            0 | 1 => "train",
            2 => "validation",
            _ => "test",
        };
        let label = i % 5 < 2; // 24 positives of 60, both classes in all splits
        let id = format!("s{i:02}");
        let image_name = format!("{id}.png");
        std::fs::write(dir.join(&image_name), &png).unwrap();
        writeln!(
            manifest_file,
            "{id},{image_name},,,{},{split}",
            if label { 1 } else { 0 }
        )
        .unwrap();

        let base = if label { 0.8 } else { 0.2 };
        let informative: Vec<f64> =
            (0..4).map(|_| base + 0.1 * (xorshift(&mut rng) - 0.5)).collect();
        store
            .append(FeatureRecord {
                sample_id: id.clone(),
                context: Context::WholeImage,
                feature_name: "informative".into(),
                vector: informative,
            })
            .unwrap();
        for name in ["noise_a", "noise_b", "noise_c"] {
            let vector: Vec<f64> = (0..4).map(|_| xorshift(&mut rng)).collect();
            store
                .append(FeatureRecord {
                    sample_id: id.clone(),
                    context: Context::WholeImage,
                    feature_name: name.into(),
                    vector,
                })
                .unwrap();
        }
    }

    let mut features = BTreeMap::new();
    features.insert(
        "WI".to_string(),
        vec![
            "informative".to_string(),
            "noise_a".to_string(),
            "noise_b".to_string(),
            "noise_c".to_string(),
        ],
    );
    let mut cfg = ExperimentConfig::with_features(features);
    cfg.selection = selection.parse().unwrap();
    cfg.fusion = fusion.parse().unwrap();
    cfg.seed = 7;
    dermoscopy::pipeline::save_config(&config, &cfg).unwrap();

    SyntheticDataset { manifest, store: store_path, config }
}
