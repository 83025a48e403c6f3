//! The append-only feature store and external descriptor ingestion: exact
//! round-trips, per-feature dimensionality enforcement, and the whole-image
//! restriction on concept/shape vectors.

use dermoscopy::pipeline::{ingest_external_features, Context, FeatureRecord, FeatureStore};

fn main() -> dermoscopy::Result<()> {
    let dir = tempfile::tempdir().map_err(|e| dermoscopy::Error::io("tempdir", e))?;
    let store_path = dir.path().join("features.ndjson");

    {
        let mut store = FeatureStore::open(&store_path)?;
        store.append(FeatureRecord {
            sample_id: "ISIC_0000000".into(),
            context: Context::WholeImage,
            feature_name: "color_hist".into(),
            vector: {
                let mut v = vec![0.0; 166];
                v[8] = 0.75;
                v[165] = 0.25;
                v
            },
        })?;
        store.append(FeatureRecord {
            sample_id: "ISIC_0000000".into(),
            context: Context::CropGroundTruth,
            feature_name: "color_hist".into(),
            vector: vec![1.0 / 166.0; 166],
        })?;
        println!("stored {} records to {}", store.len(), store_path.display());
    }

    // reopening streams and revalidates every line
    let store = FeatureStore::open(&store_path)?;
    let v = store
        .get("ISIC_0000000", Context::WholeImage, "color_hist")
        .expect("cached vector");
    println!("reloaded vector, bin 8 = {} (exact round-trip)", v[8]);

    // a declared feature with the wrong dimensionality is rejected
    let mut store = FeatureStore::open(&store_path)?;
    let bad = store.append(FeatureRecord {
        sample_id: "ISIC_0000001".into(),
        context: Context::WholeImage,
        feature_name: "edge_hist".into(),
        vector: vec![0.0; 63],
    });
    println!("63-dim edge_hist rejected: {}", bad.is_err());

    // external descriptor files use the same line format
    let external = dir.path().join("deep_features.ndjson");
    let good = FeatureRecord {
        sample_id: "ISIC_0000002".into(),
        context: Context::WholeImage,
        feature_name: "drn_concepts".into(),
        vector: vec![0.01; 1000],
    };
    let wrong_context = FeatureRecord {
        context: Context::Crop,
        ..good.clone()
    };
    std::fs::write(&external, format!("{}\n", good.to_line()?))
        .map_err(|e| dermoscopy::Error::io(&external, e))?;
    let records = ingest_external_features(&external)?;
    println!("ingested {} external record(s)", records.len());

    std::fs::write(&external, format!("{}\n", wrong_context.to_line()?))
        .map_err(|e| dermoscopy::Error::io(&external, e))?;
    match ingest_external_features(&external) {
        Err(e) => println!("crop-context concept vector rejected: {e}"),
        Ok(_) => println!("unexpected acceptance"),
    }
    Ok(())
}
