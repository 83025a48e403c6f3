//! Experiment orchestration: feature extraction and caching, per-component
//! calibrated SVM training, optional ensemble selection, fusion, and metric
//! reporting. Reruns with identical seeds produce bit-identical outputs.

use std::cell::Cell;
use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classify::{
    self, Calibration, SigmoidNormalizer, SvmModel,
};
use crate::cv::derive_seed;
use crate::ensemble::{
    average_fusion, forward_selection, greedy_selection, vote_fusion, ComponentKey, ForwardTrace,
    GreedyTrace, ScoreTable,
};
use crate::error::{Error, Result};
use crate::features::{self, FeatureVector};
use crate::imaging::{self, ImageTensor};
use crate::metrics::{classification_report, roc_curve, MetricsReport};
use crate::pipeline::config::{is_computable, ExperimentConfig, FusionMode, SelectionMode};
use crate::pipeline::contexts::build_contexts;
use crate::pipeline::manifest::{ManifestEntry, Split};
use crate::pipeline::store::{Context, FeatureRecord, FeatureStore};
use crate::pipeline::tables::{
    save_forward_csv, save_greedy_csv, save_roc_csv, save_score_csv, ScoreRows,
};
use crate::sparse::{self, Dictionary};

pub const DECISION_THRESHOLD: f64 = 0.5;

// ---------------------------------------------------------------------------
// Staged label access
// ---------------------------------------------------------------------------

/// Label gate that withholds test labels until evaluation begins. Premature
/// reads fail and are counted, so a run can prove it never peeked.
#[derive(Debug)]
pub struct StagedLabels {
    by_id: HashMap<String, (Option<bool>, Split)>,
    evaluation: Cell<bool>,
    premature: Cell<usize>,
}

impl StagedLabels {
    pub fn new(entries: &[ManifestEntry]) -> Self {
        let by_id = entries
            .iter()
            .map(|e| (e.sample_id.clone(), (e.label, e.split)))
            .collect();
        StagedLabels { by_id, evaluation: Cell::new(false), premature: Cell::new(0) }
    }

    pub fn begin_evaluation(&self) {
        self.evaluation.set(true);
    }

    pub fn split(&self, sample_id: &str) -> Option<Split> {
        self.by_id.get(sample_id).map(|(_, s)| *s)
    }

    /// The sample's label. Test labels are only readable after
    /// [`begin_evaluation`](Self::begin_evaluation).
    pub fn label(&self, sample_id: &str) -> Result<Option<bool>> {
        let (label, split) = self
            .by_id
            .get(sample_id)
            .ok_or_else(|| Error::validation(format!("unknown sample {sample_id}")))?;
        if *split == Split::Test && !self.evaluation.get() {
            self.premature.set(self.premature.get() + 1);
            return Err(Error::StagedAccess { phase: "training".into() });
        }
        Ok(*label)
    }

    pub fn premature_reads(&self) -> usize {
        self.premature.get()
    }
}

// ---------------------------------------------------------------------------
// Trained component persistence
// ---------------------------------------------------------------------------

/// One trained ensemble member with everything needed to score new samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentModel {
    pub key: ComponentKey,
    pub normalizer: SigmoidNormalizer,
    pub model: SvmModel,
    pub calibration: Calibration,
    pub c: f64,
    pub folds: usize,
    pub seed: u64,
}

impl ComponentModel {
    pub fn predict(&self, raw: &[f64]) -> Result<f64> {
        classify::predict_proba(&self.model, &self.calibration, &self.normalizer, raw)
    }

    pub fn file_name(&self) -> String {
        format!("{}_{}.json", self.key.context, self.key.feature)
    }
}

pub fn save_model(path: &Path, model: &ComponentModel) -> Result<()> {
    let text = serde_json::to_string_pretty(model)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<ComponentModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

// ---------------------------------------------------------------------------
// Feature assembly
// ---------------------------------------------------------------------------

fn load_dictionaries(cfg: &ExperimentConfig) -> Result<BTreeMap<String, Dictionary>> {
    cfg.dictionaries
        .iter()
        .map(|(name, path)| Ok((name.clone(), sparse::load_dictionary(path)?)))
        .collect()
}

/// Compute one hand-coded or sparse-coded feature on a context image.
fn compute_feature(
    name: &str,
    image: &ImageTensor,
    cfg: &ExperimentConfig,
    dictionaries: &BTreeMap<String, Dictionary>,
) -> Result<FeatureVector> {
    match name {
        features::COLOR_HIST => {
            features::color_histogram_166(&imaging::resize_long_side(image, cfg.working_resolution)?)
        }
        features::EDGE_HIST => {
            features::edge_histogram_64(&imaging::resize_long_side(image, cfg.working_resolution)?)
        }
        features::MSLBP => {
            features::mslbp_236(&imaging::resize_long_side(image, cfg.working_resolution)?)
        }
        features::SC_RGB => {
            let dict = dictionaries
                .get(features::SC_RGB)
                .ok_or_else(|| Error::validation("sc_rgb dictionary not configured"))?;
            sparse::encode_image(image, dict, cfg.lambda)
        }
        features::SC_GRAY => {
            let dict = dictionaries
                .get(features::SC_GRAY)
                .ok_or_else(|| Error::validation("sc_gray dictionary not configured"))?;
            sparse::encode_image(&imaging::luminance(image)?, dict, cfg.lambda)
        }
        other => Err(Error::validation(format!("feature {other} cannot be computed"))),
    }
}

/// Ensure every configured (sample, context, feature) is in the store,
/// computing what this crate can compute and erroring on anything else
/// missing. Returns the per-component raw feature matrix over `entries`.
pub fn assemble_features(
    entries: &[ManifestEntry],
    cfg: &ExperimentConfig,
    store: &mut FeatureStore,
) -> Result<BTreeMap<ComponentKey, Vec<Vec<f64>>>> {
    let components = cfg.components()?;
    let dictionaries = load_dictionaries(cfg)?;
    let mut missing: Vec<String> = Vec::new();

    for entry in entries {
        let mut context_images: Option<BTreeMap<Context, ImageTensor>> = None;
        for (context, feature) in &components {
            if store.contains(&entry.sample_id, *context, feature) {
                continue;
            }
            if !is_computable(feature) {
                missing.push(format!("{}/{}/{}", entry.sample_id, context, feature));
                continue;
            }
            if context_images.is_none() {
                context_images = Some(build_contexts(entry)?);
            }
            let images = context_images.as_ref().unwrap();
            let image = images.get(context).ok_or_else(|| {
                Error::validation(format!(
                    "sample {} lacks the mask required for context {}",
                    entry.sample_id, context
                ))
            })?;
            let vector = compute_feature(feature, image, cfg, &dictionaries)?;
            store.append(FeatureRecord {
                sample_id: entry.sample_id.clone(),
                context: *context,
                feature_name: feature.clone(),
                vector: vector.values,
            })?;
        }
    }

    if !missing.is_empty() {
        missing.truncate(20);
        return Err(Error::validation(format!(
            "{} feature records absent from the store (external descriptors must be ingested first): {}",
            missing.len(),
            missing.join(", ")
        )));
    }

    let mut matrix = BTreeMap::new();
    for (context, feature) in &components {
        let key = ComponentKey::new(context.tag(), feature.clone());
        let mut rows = Vec::with_capacity(entries.len());
        for entry in entries {
            let v = store.get(&entry.sample_id, *context, feature).ok_or_else(|| {
                Error::validation(format!(
                    "feature {}/{}/{} vanished from the store",
                    entry.sample_id, context, feature
                ))
            })?;
            rows.push(v.to_vec());
        }
        matrix.insert(key, rows);
    }
    Ok(matrix)
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainedComponent {
    model: ComponentModel,
    /// Calibrated probability per entry (all splits).
    scores: Vec<f64>,
    /// Out-of-fold probabilities for train rows, when selection needs them.
    oof_train: Option<Vec<f64>>,
}

fn train_component(
    key: &ComponentKey,
    rows: &[Vec<f64>],
    train_idx: &[usize],
    train_labels: &[f64],
    cfg: &ExperimentConfig,
    need_oof: bool,
) -> Result<TrainedComponent> {
    let seed = derive_seed(cfg.seed, &key.id());
    let c = cfg.cost_for(key);
    let x_train: Vec<Vec<f64>> = train_idx.iter().map(|&i| rows[i].clone()).collect();
    let normalizer = classify::fit_normalizer(&x_train)?;
    let xn: Vec<Vec<f64>> = x_train
        .iter()
        .map(|r| normalizer.apply(r))
        .collect::<Result<_>>()?;
    let (model, calibration) = classify::platt_calibrate(&xn, train_labels, c, cfg.folds, seed)?;
    let oof_train = if need_oof {
        Some(classify::out_of_fold_probabilities(&xn, train_labels, c, cfg.folds, seed)?)
    } else {
        None
    };
    let component = ComponentModel {
        key: key.clone(),
        normalizer,
        model,
        calibration,
        c,
        folds: cfg.folds,
        seed,
    };
    let scores = rows
        .iter()
        .map(|r| component.predict(r))
        .collect::<Result<Vec<f64>>>()?;
    Ok(TrainedComponent { model: component, scores, oof_train })
}

// ---------------------------------------------------------------------------
// The experiment
// ---------------------------------------------------------------------------

/// Everything a run produces, also mirrored to disk when an output directory
/// is provided.
#[derive(Debug)]
pub struct ExperimentBundle {
    pub components: Vec<ComponentKey>,
    pub models: Vec<ComponentModel>,
    /// Indices into `components` retained by selection (all, if none).
    pub selected: Vec<usize>,
    pub rows: ScoreRows,
    pub reports: BTreeMap<String, MetricsReport>,
    pub greedy_trace: Option<GreedyTrace>,
    pub forward_trace: Option<ForwardTrace>,
    /// Always zero unless the staged-access gate was violated.
    pub premature_test_label_reads: usize,
}

/// Summary metadata emitted as run.json.
#[derive(Debug, Serialize)]
struct RunSummary<'a> {
    seed: u64,
    folds: usize,
    fusion: FusionMode,
    selection: SelectionMode,
    components: Vec<String>,
    selected: Vec<String>,
    split_counts: BTreeMap<String, usize>,
    premature_test_label_reads: usize,
    reports: &'a BTreeMap<String, MetricsReport>,
}

fn thread_pool(cfg: &ExperimentConfig) -> Result<rayon::ThreadPool> {
    let threads = cfg.parallelism.unwrap_or_else(|| {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    });
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::validation(format!("thread pool: {e}")))
}

/// Run the full classification experiment: extract/cache features, train one
/// calibrated SVM per component, select, fuse, evaluate per split, and emit
/// the report bundle.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    entries: &[ManifestEntry],
    store: &mut FeatureStore,
    out_dir: Option<&Path>,
) -> Result<ExperimentBundle> {
    cfg.validate()?;
    let staged = StagedLabels::new(entries);

    // up-front split sanity: training needs both classes, `folds` of each
    let train_idx: Vec<usize> = (0..entries.len())
        .filter(|&i| entries[i].split == Split::Train)
        .collect();
    if train_idx.is_empty() {
        return Err(Error::validation("no training samples in manifest"));
    }
    let mut train_labels = Vec::with_capacity(train_idx.len());
    for &i in &train_idx {
        let label = staged
            .label(&entries[i].sample_id)?
            .ok_or_else(|| Error::validation(format!("{} is unlabeled", entries[i].sample_id)))?;
        train_labels.push(if label { 1.0 } else { -1.0 });
    }
    let pos = train_labels.iter().filter(|&&l| l > 0.0).count();
    let neg = train_labels.len() - pos;
    if pos < cfg.folds || neg < cfg.folds {
        return Err(Error::validation(format!(
            "degenerate training split: {pos} positive / {neg} negative with {} folds",
            cfg.folds
        )));
    }

    // features first; any gap fails here, before training begins
    let matrix = assemble_features(entries, cfg, store)?;
    let components: Vec<ComponentKey> = matrix.keys().cloned().collect();
    let need_oof = cfg.selection != SelectionMode::None;

    let pool = thread_pool(cfg)?;
    let trained: Vec<TrainedComponent> = pool.install(|| {
        use rayon::prelude::*;
        components
            .par_iter()
            .map(|key| train_component(key, &matrix[key], &train_idx, &train_labels, cfg, need_oof))
            .collect::<Result<Vec<_>>>()
    })?;

    // selection on the out-of-fold training scores
    let train_label_bools: Vec<bool> = train_labels.iter().map(|&l| l > 0.0).collect();
    let (selected, greedy_trace, forward_trace) = match cfg.selection {
        SelectionMode::None => ((0..components.len()).collect::<Vec<_>>(), None, None),
        mode => {
            let oof_scores: Vec<Vec<f64>> = train_idx
                .iter()
                .enumerate()
                .map(|(row, _)| {
                    trained
                        .iter()
                        .map(|t| t.oof_train.as_ref().expect("oof computed")[row])
                        .collect()
                })
                .collect();
            let oof_table = ScoreTable::new(
                train_idx.iter().map(|&i| entries[i].sample_id.clone()).collect(),
                components.clone(),
                oof_scores,
                Some(train_label_bools.clone()),
            )?;
            match mode {
                SelectionMode::Greedy => {
                    let trace = greedy_selection(&oof_table, cfg.folds, cfg.seed)?;
                    (trace.selected.clone(), Some(trace), None)
                }
                SelectionMode::Forward => {
                    let trace = forward_selection(&oof_table, cfg.folds, cfg.seed)?;
                    (trace.selected.clone(), None, Some(trace))
                }
                SelectionMode::None => unreachable!(),
            }
        }
    };

    // fuse over all samples
    let all_scores: Vec<Vec<f64>> = (0..entries.len())
        .map(|i| trained.iter().map(|t| t.scores[i]).collect())
        .collect();
    let full_table = ScoreTable::new(
        entries.iter().map(|e| e.sample_id.clone()).collect(),
        components.clone(),
        all_scores.clone(),
        None,
    )?;
    let fused = match cfg.fusion {
        FusionMode::Avg => average_fusion(&full_table, &selected)?,
        FusionMode::Vote => vote_fusion(&full_table, &selected, DECISION_THRESHOLD)?,
    };

    // evaluation phase: labels for every split become readable
    staged.begin_evaluation();
    let mut labels: Vec<Option<bool>> = Vec::with_capacity(entries.len());
    for e in entries {
        labels.push(staged.label(&e.sample_id)?);
    }
    let mut reports = BTreeMap::new();
    let mut curves: BTreeMap<String, crate::metrics::RocCurve> = BTreeMap::new();
    for split in [Split::Train, Split::Validation, Split::Test] {
        let idx: Vec<usize> = (0..entries.len())
            .filter(|&i| entries[i].split == split && labels[i].is_some())
            .collect();
        if idx.is_empty() {
            continue;
        }
        let split_scores: Vec<f64> = idx.iter().map(|&i| fused[i]).collect();
        let split_labels: Vec<bool> = idx.iter().map(|&i| labels[i].unwrap()).collect();
        if split_labels.iter().all(|&l| l) || split_labels.iter().all(|&l| !l) {
            continue; // ranking metrics undefined on one-class splits
        }
        reports.insert(
            split.to_string(),
            classification_report(&split_scores, &split_labels, DECISION_THRESHOLD)?,
        );
        curves.insert(split.to_string(), roc_curve(&split_scores, &split_labels)?);
    }

    let rows = ScoreRows {
        sample_ids: entries.iter().map(|e| e.sample_id.clone()).collect(),
        splits: entries.iter().map(|e| Some(e.split)).collect(),
        labels,
        components: components.clone(),
        scores: all_scores,
        fused: Some(fused),
    };

    let bundle = ExperimentBundle {
        components: components.clone(),
        models: trained.iter().map(|t| t.model.clone()).collect(),
        selected,
        rows,
        reports,
        greedy_trace,
        forward_trace,
        premature_test_label_reads: staged.premature_reads(),
    };

    if let Some(dir) = out_dir {
        emit_bundle(dir, cfg, entries, &bundle, &curves)?;
    }
    Ok(bundle)
}

fn emit_bundle(
    dir: &Path,
    cfg: &ExperimentConfig,
    entries: &[ManifestEntry],
    bundle: &ExperimentBundle,
    curves: &BTreeMap<String, crate::metrics::RocCurve>,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_score_csv(&dir.join("scores.csv"), &bundle.rows)?;
    for (split, report) in &bundle.reports {
        let path = dir.join(format!("report_{split}.json"));
        let text = serde_json::to_string_pretty(report)?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    for (split, curve) in curves {
        save_roc_csv(&dir.join(format!("roc_{split}.csv")), curve)?;
    }
    if let Some(trace) = &bundle.greedy_trace {
        save_greedy_csv(&dir.join("selection_greedy.csv"), trace)?;
    }
    if let Some(trace) = &bundle.forward_trace {
        save_forward_csv(&dir.join("selection_forward.csv"), trace, &bundle.components)?;
    }
    let models_dir = dir.join("models");
    std::fs::create_dir_all(&models_dir).map_err(|e| Error::io(&models_dir, e))?;
    for model in &bundle.models {
        save_model(&models_dir.join(model.file_name()), model)?;
    }
    let mut split_counts = BTreeMap::new();
    for e in entries {
        *split_counts.entry(e.split.to_string()).or_insert(0usize) += 1;
    }
    let summary = RunSummary {
        seed: cfg.seed,
        folds: cfg.folds,
        fusion: cfg.fusion,
        selection: cfg.selection,
        components: bundle.components.iter().map(|c| c.id()).collect(),
        selected: bundle.selected.iter().map(|&i| bundle.components[i].id()).collect(),
        split_counts,
        premature_test_label_reads: bundle.premature_test_label_reads,
        reports: &bundle.reports,
    };
    let path = dir.join("run.json");
    let text = serde_json::to_string_pretty(&summary)?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(())
}
