//! Score fusion (average, vote) and ensemble component selection (greedy,
//! forward) over calibrated per-component scores.
//!
//! Selection scores candidates by out-of-fold average precision: samples are
//! split into seeded stratified folds and the per-fold AP of the fused subset
//! is averaged. Everything is deterministic given (table, folds, seed).

use serde::{Deserialize, Serialize};

use crate::cv::stratified_folds;
use crate::error::{Error, Result};
use crate::metrics::average_precision;

/// Identity of one ensemble member: a feature within an image context.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ComponentKey {
    pub context: String,
    pub feature: String,
}

impl ComponentKey {
    pub fn new(context: impl Into<String>, feature: impl Into<String>) -> Self {
        ComponentKey { context: context.into(), feature: feature.into() }
    }

    /// Canonical "context:feature" form used in CSV headers.
    pub fn id(&self) -> String {
        format!("{}:{}", self.context, self.feature)
    }

    pub fn parse(s: &str) -> Result<Self> {
        let (context, feature) = s
            .split_once(':')
            .ok_or_else(|| Error::validation(format!("component id `{s}` is not context:feature")))?;
        Ok(ComponentKey::new(context, feature))
    }
}

/// Per-sample, per-component calibrated probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub sample_ids: Vec<String>,
    pub components: Vec<ComponentKey>,
    /// Row-major: `scores[sample][component]`.
    pub scores: Vec<Vec<f64>>,
    pub labels: Option<Vec<bool>>,
}

impl ScoreTable {
    pub fn new(
        sample_ids: Vec<String>,
        components: Vec<ComponentKey>,
        scores: Vec<Vec<f64>>,
        labels: Option<Vec<bool>>,
    ) -> Result<Self> {
        if scores.len() != sample_ids.len() {
            return Err(Error::contract("one score row per sample required"));
        }
        if scores.iter().any(|r| r.len() != components.len()) {
            return Err(Error::contract("one score column per component required"));
        }
        if scores.iter().flatten().any(|&s| !(0.0..=1.0).contains(&s)) {
            return Err(Error::contract("scores must lie in [0, 1]"));
        }
        if let Some(l) = &labels {
            if l.len() != sample_ids.len() {
                return Err(Error::contract("one label per sample required"));
            }
        }
        Ok(ScoreTable { sample_ids, components, scores, labels })
    }

    fn check_subset(&self, subset: &[usize]) -> Result<()> {
        if subset.is_empty() {
            return Err(Error::contract("component subset must be nonempty"));
        }
        if subset.iter().any(|&i| i >= self.components.len()) {
            return Err(Error::contract("component index out of range"));
        }
        Ok(())
    }
}

/// Arithmetic mean of the subset's scores per sample.
pub fn average_fusion(table: &ScoreTable, subset: &[usize]) -> Result<Vec<f64>> {
    table.check_subset(subset)?;
    Ok(table
        .scores
        .iter()
        .map(|row| subset.iter().map(|&i| row[i]).sum::<f64>() / subset.len() as f64)
        .collect())
}

/// Fraction of subset components voting positive (score >= threshold, ties
/// counting as positive votes).
pub fn vote_fusion(table: &ScoreTable, subset: &[usize], threshold: f64) -> Result<Vec<f64>> {
    table.check_subset(subset)?;
    Ok(table
        .scores
        .iter()
        .map(|row| {
            subset.iter().filter(|&&i| row[i] >= threshold).count() as f64 / subset.len() as f64
        })
        .collect())
}

/// Mean per-fold AP of one score column or fused score vector.
fn cross_validated_ap(scores: &[f64], labels: &[bool], assignment: &[usize], folds: usize) -> Result<f64> {
    let mut total = 0.0;
    for fold in 0..folds {
        let idx: Vec<usize> = (0..scores.len()).filter(|&i| assignment[i] == fold).collect();
        let fold_scores: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
        let fold_labels: Vec<bool> = idx.iter().map(|&i| labels[i]).collect();
        total += average_precision(&fold_scores, &fold_labels)?;
    }
    Ok(total / folds as f64)
}

/// One row of the greedy selection trace, mirroring the ranked table layout:
/// the component, its individual AP, and the AP of the prefix ending here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyStep {
    pub component: ComponentKey,
    pub individual_ap: f64,
    pub cumulative_ap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyTrace {
    pub steps: Vec<GreedyStep>,
    /// Indices (into the table's component list) of the selected prefix.
    pub selected: Vec<usize>,
}

/// Rank components by individual out-of-fold AP and keep the best prefix.
pub fn greedy_selection(table: &ScoreTable, folds: usize, seed: u64) -> Result<GreedyTrace> {
    let labels = table
        .labels
        .as_ref()
        .ok_or_else(|| Error::contract("selection requires labels"))?;
    let assignment = stratified_folds(labels, folds, seed)?;

    let mut ranked: Vec<(usize, f64)> = Vec::with_capacity(table.components.len());
    for c in 0..table.components.len() {
        let column: Vec<f64> = table.scores.iter().map(|row| row[c]).collect();
        ranked.push((c, cross_validated_ap(&column, labels, &assignment, folds)?));
    }
    // descending AP, ties broken by component id for determinism
    ranked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| table.components[a.0].id().cmp(&table.components[b.0].id()))
    });

    let mut steps = Vec::with_capacity(ranked.len());
    let mut prefix: Vec<usize> = Vec::new();
    let mut best_ap = f64::NEG_INFINITY;
    let mut best_len = 0;
    for (c, individual_ap) in ranked {
        prefix.push(c);
        let fused = average_fusion(table, &prefix)?;
        let cumulative_ap = cross_validated_ap(&fused, labels, &assignment, folds)?;
        if cumulative_ap > best_ap {
            best_ap = cumulative_ap;
            best_len = prefix.len();
        }
        steps.push(GreedyStep {
            component: table.components[c].clone(),
            individual_ap,
            cumulative_ap,
        });
    }
    let selected = prefix[..best_len].to_vec();
    Ok(GreedyTrace { steps, selected })
}

/// Candidate evaluations for one forward-selection iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardIteration {
    /// AP of (current ensemble + candidate), keyed by component index.
    pub candidate_ap: Vec<(usize, f64)>,
    /// Component chosen this iteration, if it improved the ensemble.
    pub chosen: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardTrace {
    pub iterations: Vec<ForwardIteration>,
    pub selected: Vec<usize>,
    pub final_ap: f64,
}

/// Iterative best-addition search on the out-of-fold AP of the average-fused
/// subset; halts when no addition strictly improves.
pub fn forward_selection(table: &ScoreTable, folds: usize, seed: u64) -> Result<ForwardTrace> {
    let labels = table
        .labels
        .as_ref()
        .ok_or_else(|| Error::contract("selection requires labels"))?;
    let assignment = stratified_folds(labels, folds, seed)?;

    let mut selected: Vec<usize> = Vec::new();
    let mut remaining: Vec<usize> = (0..table.components.len()).collect();
    let mut current_ap = f64::NEG_INFINITY;
    let mut iterations = Vec::new();

    while !remaining.is_empty() {
        let mut candidate_ap = Vec::with_capacity(remaining.len());
        let mut best: Option<(usize, f64)> = None;
        for &c in &remaining {
            let mut subset = selected.clone();
            subset.push(c);
            let fused = average_fusion(table, &subset)?;
            let ap = cross_validated_ap(&fused, labels, &assignment, folds)?;
            candidate_ap.push((c, ap));
            let better = match best {
                None => true,
                Some((bc, bap)) => {
                    ap > bap
                        || (ap == bap
                            && table.components[c].id() < table.components[bc].id())
                }
            };
            if better {
                best = Some((c, ap));
            }
        }
        let (choice, ap) = best.expect("remaining is nonempty");
        if ap > current_ap + 1e-12 {
            selected.push(choice);
            remaining.retain(|&c| c != choice);
            current_ap = ap;
            iterations.push(ForwardIteration { candidate_ap, chosen: Some(choice) });
        } else {
            iterations.push(ForwardIteration { candidate_ap, chosen: None });
            break;
        }
    }
    if selected.is_empty() {
        return Err(Error::contract("forward selection could not select any component"));
    }
    Ok(ForwardTrace { iterations, selected, final_ap: current_ap })
}
