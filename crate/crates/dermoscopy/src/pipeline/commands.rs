//! Batch command implementations behind the CLI: each function does one
//! subcommand's work and returns a structured error on failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::augment::{apply, sample_params, AugmentRanges};
use crate::ensemble::{average_fusion, forward_selection, greedy_selection, vote_fusion};
use crate::error::{Error, Result};
use crate::imaging;
use crate::metrics::{classification_report, roc_curve, seg_metrics, SegReport};
use crate::nettopo::{fuse_masks, infer_shapes, param_count, UNetConfig};
use crate::pipeline::config::{FusionMode, SelectionMode};
use crate::pipeline::experiment::{
    assemble_features, load_model, run_experiment, save_model, ComponentModel, StagedLabels,
    DECISION_THRESHOLD,
};
use crate::pipeline::manifest::{load_manifest, ManifestEntry, Split};
use crate::pipeline::store::{ingest_external_features, FeatureStore};
use crate::pipeline::tables::{load_score_csv, save_forward_csv, save_greedy_csv, save_roc_csv, save_score_csv, ScoreRows};

/// Command-line overrides applied on top of a loaded config.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConfigOverrides {
    pub seed: Option<u64>,
    pub folds: Option<usize>,
}

impl ConfigOverrides {
    fn apply(self, cfg: &mut crate::pipeline::config::ExperimentConfig) {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(folds) = self.folds {
            cfg.folds = folds;
        }
    }
}

/// `extract`: compute configured features into the store; optionally ingest
/// external descriptor files first.
pub fn extract(
    manifest: &Path,
    store_path: &Path,
    config: &Path,
    external: &[PathBuf],
    overrides: ConfigOverrides,
) -> Result<()> {
    let entries = load_manifest(manifest)?;
    let mut cfg = crate::pipeline::config::load_config(config)?;
    overrides.apply(&mut cfg);
    let mut store = FeatureStore::open(store_path)?;
    for path in external {
        for record in ingest_external_features(path)? {
            store.append(record)?;
        }
    }
    let before = store.len();
    assemble_features(&entries, &cfg, &mut store)?;
    log::info!(
        "extract: {} records cached ({} new)",
        store.len(),
        store.len() - before
    );
    Ok(())
}

/// `train`: fit one calibrated SVM per configured component and write the
/// model files.
pub fn train(
    manifest: &Path,
    store_path: &Path,
    config: &Path,
    out_dir: &Path,
    overrides: ConfigOverrides,
) -> Result<()> {
    let entries = load_manifest(manifest)?;
    let mut cfg = crate::pipeline::config::load_config(config)?;
    overrides.apply(&mut cfg);
    let mut store = FeatureStore::open(store_path)?;
    let bundle = run_experiment(&cfg, &entries, &mut store, None)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    for model in &bundle.models {
        save_model(&out_dir.join(model.file_name()), model)?;
    }
    log::info!("train: wrote {} models to {}", bundle.models.len(), out_dir.display());
    Ok(())
}

/// `predict`: score samples with previously trained models and write the
/// score table CSV (per-component columns plus the fused column).
pub fn predict(
    manifest: &Path,
    store_path: &Path,
    config: &Path,
    models_dir: &Path,
    out: &Path,
    split: Option<Split>,
    overrides: ConfigOverrides,
) -> Result<()> {
    let all_entries = load_manifest(manifest)?;
    let entries: Vec<ManifestEntry> = all_entries
        .into_iter()
        .filter(|e| split.map(|s| e.split == s).unwrap_or(true))
        .collect();
    if entries.is_empty() {
        return Err(Error::validation("no samples match the requested split"));
    }
    let mut cfg = crate::pipeline::config::load_config(config)?;
    overrides.apply(&mut cfg);
    let mut store = FeatureStore::open(store_path)?;
    let matrix = assemble_features(&entries, &cfg, &mut store)?;

    let mut models: Vec<ComponentModel> = Vec::new();
    for key in matrix.keys() {
        let path = models_dir.join(format!("{}_{}.json", key.context, key.feature));
        if !path.is_file() {
            return Err(Error::validation(format!("model file missing: {}", path.display())));
        }
        let model = load_model(&path)?;
        if &model.key != key {
            return Err(Error::validation(format!(
                "model file {} holds {} instead of {}",
                path.display(),
                model.key.id(),
                key.id()
            )));
        }
        models.push(model);
    }

    let mut scores = vec![Vec::with_capacity(models.len()); entries.len()];
    for (key, model) in matrix.keys().zip(&models) {
        for (i, raw) in matrix[key].iter().enumerate() {
            scores[i].push(model.predict(raw)?);
        }
    }
    let table = crate::ensemble::ScoreTable::new(
        entries.iter().map(|e| e.sample_id.clone()).collect(),
        matrix.keys().cloned().collect(),
        scores.clone(),
        None,
    )?;
    let subset: Vec<usize> = (0..table.components.len()).collect();
    let fused = match cfg.fusion {
        FusionMode::Avg => average_fusion(&table, &subset)?,
        FusionMode::Vote => vote_fusion(&table, &subset, DECISION_THRESHOLD)?,
    };
    let rows = ScoreRows {
        sample_ids: entries.iter().map(|e| e.sample_id.clone()).collect(),
        splits: entries.iter().map(|e| Some(e.split)).collect(),
        labels: entries.iter().map(|e| e.label).collect(),
        components: table.components.clone(),
        scores,
        fused: Some(fused),
    };
    save_score_csv(out, &rows)?;
    log::info!("predict: wrote {} rows to {}", rows.sample_ids.len(), out.display());
    Ok(())
}

/// `evaluate-cls`: report classification metrics for one score column of a
/// score CSV (default: the fused column).
pub fn evaluate_cls(scores_csv: &Path, column: Option<&str>, out_dir: &Path) -> Result<()> {
    let rows = load_score_csv(scores_csv)?;
    let scores: Vec<f64> = match column {
        None | Some("fused") => rows
            .fused
            .clone()
            .ok_or_else(|| Error::validation("score CSV has no fused column"))?,
        Some(name) => {
            let idx = rows
                .components
                .iter()
                .position(|c| c.id() == name)
                .ok_or_else(|| Error::validation(format!("no column `{name}` in score CSV")))?;
            rows.scores.iter().map(|r| r[idx]).collect()
        }
    };
    let mut kept_scores = Vec::new();
    let mut labels = Vec::new();
    for (i, label) in rows.labels.iter().enumerate() {
        if let Some(l) = label {
            kept_scores.push(scores[i]);
            labels.push(*l);
        }
    }
    if labels.is_empty() {
        return Err(Error::validation("score CSV has no labeled rows"));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let report = classification_report(&kept_scores, &labels, DECISION_THRESHOLD)?;
    let report_path = out_dir.join("report.json");
    std::fs::write(&report_path, serde_json::to_string_pretty(&report)?)
        .map_err(|e| Error::io(&report_path, e))?;
    save_roc_csv(&out_dir.join("roc.csv"), &roc_curve(&kept_scores, &labels)?)?;
    println!(
        "ap {:.4}  auc {:.4}  acc {:.4}  sens {:.4}  spec {:.4}  sp95 {:.4}",
        report.ap, report.auc, report.acc, report.sens, report.spec, report.sp95
    );
    Ok(())
}

#[derive(Serialize)]
struct SegEvaluation {
    per_sample: BTreeMap<String, SegReport>,
    mean: SegSummary,
}

#[derive(Serialize)]
struct SegSummary {
    jaccard: f64,
    acc: f64,
    sens: f64,
    spec: f64,
    samples: usize,
}

/// `evaluate-seg`: pixel-wise metrics per sample plus the mean, either from
/// manifest columns or from prediction/ground-truth directories matched by
/// file stem.
pub fn evaluate_seg(
    manifest: Option<&Path>,
    pred_dir: Option<&Path>,
    gt_dir: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let pairs: Vec<(String, PathBuf, PathBuf)> = match (manifest, pred_dir, gt_dir) {
        (Some(m), None, None) => load_manifest(m)?
            .into_iter()
            .filter_map(|e| match (e.pred_mask_path, e.mask_path) {
                (Some(p), Some(g)) => Some((e.sample_id, p, g)),
                _ => None,
            })
            .collect(),
        (None, Some(pred), Some(gt)) => {
            let mut pairs = Vec::new();
            let mut names: Vec<PathBuf> = std::fs::read_dir(pred)
                .map_err(|e| Error::io(pred, e))?
                .filter_map(|r| r.ok().map(|d| d.path()))
                .filter(|p| p.extension().map(|e| e == "png").unwrap_or(false))
                .collect();
            names.sort();
            for p in names {
                let stem = p.file_stem().unwrap_or_default().to_string_lossy().to_string();
                let g = gt.join(p.file_name().unwrap_or_default());
                if !g.is_file() {
                    return Err(Error::validation(format!(
                        "no ground-truth mask for {stem}: {} missing",
                        g.display()
                    )));
                }
                pairs.push((stem, p, g));
            }
            pairs
        }
        _ => {
            return Err(Error::validation(
                "evaluate-seg needs either --manifest or both --pred-dir and --gt-dir",
            ))
        }
    };
    if pairs.is_empty() {
        return Err(Error::validation("no prediction/ground-truth mask pairs found"));
    }

    let mut per_sample = BTreeMap::new();
    let mut sums = (0.0, 0.0, 0.0, 0.0);
    for (id, pred_path, gt_path) in &pairs {
        let pred = imaging::load_mask(pred_path)?;
        let gt = imaging::load_mask(gt_path)?;
        let report = seg_metrics(&pred, &gt)
            .map_err(|e| Error::validation(format!("sample {id}: {e}")))?;
        sums.0 += report.jaccard;
        sums.1 += report.acc;
        sums.2 += report.sens;
        sums.3 += report.spec;
        per_sample.insert(id.clone(), report);
    }
    let n = pairs.len() as f64;
    let evaluation = SegEvaluation {
        mean: SegSummary {
            jaccard: sums.0 / n,
            acc: sums.1 / n,
            sens: sums.2 / n,
            spec: sums.3 / n,
            samples: pairs.len(),
        },
        per_sample,
    };
    std::fs::write(out, serde_json::to_string_pretty(&evaluation)?)
        .map_err(|e| Error::io(out, e))?;
    println!(
        "jaccard {:.4}  acc {:.4}  sens {:.4}  spec {:.4}  ({} samples)",
        evaluation.mean.jaccard,
        evaluation.mean.acc,
        evaluation.mean.sens,
        evaluation.mean.spec,
        evaluation.mean.samples
    );
    Ok(())
}

/// `select`: run greedy or forward selection over a labeled score CSV and
/// write the trace.
pub fn select(mode: SelectionMode, scores_csv: &Path, folds: usize, seed: u64, out: &Path) -> Result<()> {
    let rows = load_score_csv(scores_csv)?;
    let table = rows.to_table()?;
    if table.labels.is_none() {
        return Err(Error::validation("selection requires a fully labeled score CSV"));
    }
    match mode {
        SelectionMode::Greedy => {
            let trace = greedy_selection(&table, folds, seed)?;
            save_greedy_csv(out, &trace)?;
            let chosen: Vec<String> =
                trace.selected.iter().map(|&i| table.components[i].id()).collect();
            println!("selected: {}", chosen.join(", "));
        }
        SelectionMode::Forward => {
            let trace = forward_selection(&table, folds, seed)?;
            save_forward_csv(out, &trace, &table.components)?;
            let chosen: Vec<String> =
                trace.selected.iter().map(|&i| table.components[i].id()).collect();
            println!("selected: {}", chosen.join(", "));
        }
        SelectionMode::None => {
            return Err(Error::validation("select needs mode greedy or forward"));
        }
    }
    Ok(())
}

/// `fuse`: average or vote fusion over all component columns of a score CSV.
pub fn fuse(mode: FusionMode, scores_csv: &Path, out: &Path, threshold: f64) -> Result<()> {
    let rows = load_score_csv(scores_csv)?;
    let table = rows.to_table()?;
    let subset: Vec<usize> = (0..table.components.len()).collect();
    let fused = match mode {
        FusionMode::Avg => average_fusion(&table, &subset)?,
        FusionMode::Vote => vote_fusion(&table, &subset, threshold)?,
    };
    let out_rows = ScoreRows { fused: Some(fused), ..rows };
    save_score_csv(out, &out_rows)?;
    Ok(())
}

/// `segment-fuse`: group confidence masks per sample, average, threshold, and
/// write binary masks. Samples are subdirectories, or files grouped by the
/// stem before the last underscore.
pub fn segment_fuse(mask_dir: &Path, out_dir: &Path) -> Result<()> {
    let mut groups: BTreeMap<String, Vec<PathBuf>> = BTreeMap::new();
    let mut entries: Vec<PathBuf> = std::fs::read_dir(mask_dir)
        .map_err(|e| Error::io(mask_dir, e))?
        .filter_map(|r| r.ok().map(|d| d.path()))
        .collect();
    entries.sort();
    for path in entries {
        if path.is_dir() {
            let sample = path.file_name().unwrap_or_default().to_string_lossy().to_string();
            let mut masks: Vec<PathBuf> = std::fs::read_dir(&path)
                .map_err(|e| Error::io(&path, e))?
                .filter_map(|r| r.ok().map(|d| d.path()))
                .filter(|p| p.extension().map(|e| e == "png").unwrap_or(false))
                .collect();
            masks.sort();
            if !masks.is_empty() {
                groups.insert(sample, masks);
            }
        } else if path.extension().map(|e| e == "png").unwrap_or(false) {
            let stem = path.file_stem().unwrap_or_default().to_string_lossy().to_string();
            let sample = match stem.rsplit_once('_') {
                Some((prefix, _)) => prefix.to_string(),
                None => stem,
            };
            groups.entry(sample).or_default().push(path);
        }
    }
    if groups.is_empty() {
        return Err(Error::validation(format!(
            "no confidence masks found under {}",
            mask_dir.display()
        )));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    for (sample, paths) in &groups {
        let mut masks = Vec::with_capacity(paths.len());
        for p in paths {
            masks.push(imaging::load_mask(p)?);
        }
        let fused = fuse_masks(&masks)
            .map_err(|e| Error::validation(format!("sample {sample}: {e}")))?;
        imaging::save_mask(&out_dir.join(format!("{sample}.png")), &fused)?;
    }
    log::info!("segment-fuse: wrote {} fused masks", groups.len());
    Ok(())
}

/// Parameter total reported for the ensemble segmentation architecture; the
/// layer accounting behind it is not fully specified, so `net-info` prints
/// the difference against this interpretation for reference.
pub const REFERENCE_PARAM_TOTAL: u64 = 543_888_390;

/// `net-info`: print the layer table, per-layer parameters, and the total.
pub fn net_info(config: &UNetConfig, out: &mut impl std::io::Write) -> Result<()> {
    let layers = infer_shapes(config)?;
    writeln!(out, "{:<12} {:>9} {:>11} {:>14}", "layer", "channels", "size", "params")
        .map_err(io_err)?;
    for layer in &layers {
        writeln!(
            out,
            "{:<12} {:>9} {:>5}x{:<5} {:>14}",
            layer.name, layer.out_channels, layer.height, layer.width, layer.params
        )
        .map_err(io_err)?;
    }
    let total = param_count(config)?;
    writeln!(out, "total parameters: {total}").map_err(io_err)?;
    if *config == UNetConfig::default() {
        let diff = total as i64 - REFERENCE_PARAM_TOTAL as i64;
        writeln!(
            out,
            "reference total: {REFERENCE_PARAM_TOTAL} (difference under this interpretation: {diff:+})"
        )
        .map_err(io_err)?;
    }
    Ok(())
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

/// `augment-preview`: write augmented copies of an image (and mask) for a
/// sequence of seeds. Ranges come from the experiment config when given.
pub fn augment_preview(
    image: &Path,
    mask: Option<&Path>,
    seed: u64,
    count: usize,
    out_dir: &Path,
    config: Option<&Path>,
) -> Result<()> {
    let img = imaging::load_image(image)?;
    let mask_img = mask.map(imaging::load_mask).transpose()?;
    let ranges = match config {
        Some(path) => crate::pipeline::config::load_config(path)?
            .augment
            .unwrap_or_else(|| AugmentRanges::default_for(img.width, img.height)),
        None => AugmentRanges::default_for(img.width, img.height),
    };
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let stem = image.file_stem().unwrap_or_default().to_string_lossy().to_string();
    for k in 0..count {
        let params = sample_params(seed.wrapping_add(k as u64), &ranges)?;
        let (out_img, out_mask) = apply(&img, mask_img.as_ref(), &params)?;
        let img_path = out_dir.join(format!("{stem}_aug{k}.png"));
        std::fs::write(&img_path, imaging::encode_png_rgb(&out_img)?)
            .map_err(|e| Error::io(&img_path, e))?;
        if let Some(m) = out_mask {
            imaging::save_mask(&out_dir.join(format!("{stem}_aug{k}_mask.png")), &m)?;
        }
    }
    Ok(())
}

/// `run`-style helper shared by tests: run the experiment from file inputs.
pub fn run_from_files(
    manifest: &Path,
    store_path: &Path,
    config: &Path,
    out_dir: &Path,
) -> Result<()> {
    let entries = load_manifest(manifest)?;
    let cfg = crate::pipeline::config::load_config(config)?;
    let mut store = FeatureStore::open(store_path)?;
    let bundle = run_experiment(&cfg, &entries, &mut store, Some(out_dir))?;
    debug_assert_eq!(bundle.premature_test_label_reads, 0);
    Ok(())
}

/// Expose the staged-access audit for instrumentation-style tests.
pub fn staged_labels_for(entries: &[ManifestEntry]) -> StagedLabels {
    StagedLabels::new(entries)
}
