//! Evaluation metrics: ranking (AP, AUC/ROC, SP95), thresholded confusion
//! statistics, and pixel-wise segmentation scores.
//!
//! Tied scores are always grouped, never broken arbitrarily, so every metric
//! is deterministic and invariant under strictly increasing score transforms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::MaskImage;

/// Operating points of a threshold sweep, from (0,0) at threshold +inf down
/// to (1,1) at the smallest observed score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// Descending decision thresholds; predictions are positive when score >= t.
    pub thresholds: Vec<f64>,
    pub tpr: Vec<f64>,
    pub fpr: Vec<f64>,
}

/// Confusion counts plus the derived rates at one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub acc: f64,
    pub sens: f64,
    pub spec: f64,
    /// Set when sens or spec had an empty denominator and defaulted to 1.0.
    pub degenerate_sens: bool,
    pub degenerate_spec: bool,
}

/// Full classification report at a decision threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ap: f64,
    pub auc: f64,
    pub acc: f64,
    pub sens: f64,
    pub spec: f64,
    pub sp95: f64,
    pub threshold: f64,
    pub counts: Confusion,
}

fn check_same_len(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::contract(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    Ok(())
}

/// Indices sorted by descending score, tied scores grouped together.
/// Returns (sorted indices, group boundaries as index ranges).
fn descending_groups(scores: &[f64]) -> (Vec<usize>, Vec<(usize, usize)>) {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(std::cmp::Ordering::Equal));
    let mut groups = Vec::new();
    let mut start = 0;
    for i in 1..=order.len() {
        if i == order.len() || scores[order[i]] != scores[order[start]] {
            groups.push((start, i));
            start = i;
        }
    }
    (order, groups)
}

/// Average precision: the step integral of the precision-recall curve over a
/// descending-score ranking, with tied samples entering as one group.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_same_len(scores, labels)?;
    let total_pos = labels.iter().filter(|&&l| l).count();
    if total_pos == 0 {
        return Err(Error::contract("average_precision requires at least one positive"));
    }
    let (order, groups) = descending_groups(scores);
    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut weighted_precision = 0.0;
    for (start, end) in groups {
        let group_pos = order[start..end].iter().filter(|&&i| labels[i]).count();
        tp += group_pos;
        seen += end - start;
        if group_pos > 0 {
            // deferring the single division by |positives| keeps a perfect
            // ranking at exactly 1.0
            weighted_precision += (tp as f64 / seen as f64) * group_pos as f64;
        }
    }
    Ok(weighted_precision / total_pos as f64)
}

/// Area under the ROC curve as the Mann-Whitney statistic:
/// P(score+ > score-) + 0.5 P(score+ = score-).
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_same_len(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::contract("roc_auc requires both classes"));
    }
    let (order, groups) = descending_groups(scores);
    // Count (positive, negative) pairs won and tied via one grouped sweep.
    let mut neg_below = n_neg as f64; // negatives with strictly smaller score
    let mut won = 0.0;
    let mut tied = 0.0;
    for (start, end) in &groups {
        let group = &order[*start..*end];
        let gp = group.iter().filter(|&&i| labels[i]).count() as f64;
        let gn = (group.len() as f64) - gp;
        neg_below -= gn;
        won += gp * neg_below;
        tied += gp * gn;
    }
    Ok((won + 0.5 * tied) / (n_pos as f64 * n_neg as f64))
}

/// Threshold sweep with tie grouping. The trapezoidal area over the returned
/// curve equals [`roc_auc`] to floating-point accuracy.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    check_same_len(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::contract("roc_curve requires both classes"));
    }
    let (order, groups) = descending_groups(scores);
    let mut thresholds = vec![f64::INFINITY];
    let mut tpr = vec![0.0];
    let mut fpr = vec![0.0];
    let mut tp = 0usize;
    let mut fp = 0usize;
    for (start, end) in groups {
        let group = &order[start..end];
        tp += group.iter().filter(|&&i| labels[i]).count();
        fp += group.len() - group.iter().filter(|&&i| labels[i]).count();
        thresholds.push(scores[group[0]]);
        tpr.push(tp as f64 / n_pos as f64);
        fpr.push(fp as f64 / n_neg as f64);
    }
    Ok(RocCurve { thresholds, tpr, fpr })
}

impl RocCurve {
    /// Trapezoidal area under the curve.
    pub fn trapezoid_area(&self) -> f64 {
        let mut area = 0.0;
        for i in 1..self.fpr.len() {
            area += (self.fpr[i] - self.fpr[i - 1]) * (self.tpr[i] + self.tpr[i - 1]) / 2.0;
        }
        area
    }
}

/// Confusion counts at a threshold; score >= t predicts positive.
pub fn confusion_at_threshold(scores: &[f64], labels: &[bool], t: f64) -> Result<Confusion> {
    check_same_len(scores, labels)?;
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= t, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let total = scores.len();
    let acc = if total == 0 { 1.0 } else { (tp + tn) as f64 / total as f64 };
    let degenerate_sens = tp + fn_ == 0;
    let degenerate_spec = tn + fp == 0;
    let sens = if degenerate_sens { 1.0 } else { tp as f64 / (tp + fn_) as f64 };
    let spec = if degenerate_spec { 1.0 } else { tn as f64 / (tn + fp) as f64 };
    Ok(Confusion { tp, fp, tn, fn_, acc, sens, spec, degenerate_sens, degenerate_spec })
}

/// Best specificity among empirical operating points whose sensitivity
/// reaches `target`. No interpolation between thresholds.
pub fn spec_at_sens(scores: &[f64], labels: &[bool], target: f64) -> Result<f64> {
    let curve = roc_curve(scores, labels)?;
    let mut best = 0.0f64;
    let mut found = false;
    for i in 0..curve.tpr.len() {
        if curve.tpr[i] >= target {
            let spec = 1.0 - curve.fpr[i];
            if !found || spec > best {
                best = spec;
                found = true;
            }
        }
    }
    // the (1,1) endpoint always satisfies any target <= 1
    Ok(best)
}

/// Compose the full report at one threshold.
pub fn classification_report(scores: &[f64], labels: &[bool], threshold: f64) -> Result<MetricsReport> {
    let counts = confusion_at_threshold(scores, labels, threshold)?;
    Ok(MetricsReport {
        ap: average_precision(scores, labels)?,
        auc: roc_auc(scores, labels)?,
        acc: counts.acc,
        sens: counts.sens,
        spec: counts.spec,
        sp95: spec_at_sens(scores, labels, 0.95)?,
        threshold,
        counts,
    })
}

/// Pixel-wise segmentation scores over binary masks (positive = 255).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegReport {
    pub jaccard: f64,
    pub acc: f64,
    pub sens: f64,
    pub spec: f64,
    pub degenerate: bool,
}

/// Jaccard index and pixel-wise ACC/SENS/SPEC between binary masks.
/// Empty denominators (no positives, no negatives, or empty union) report 1.0
/// with the `degenerate` flag set.
pub fn seg_metrics(pred: &MaskImage, gt: &MaskImage) -> Result<SegReport> {
    if pred.width != gt.width || pred.height != gt.height {
        return Err(Error::contract(format!(
            "mask dimensions differ: {}x{} vs {}x{}",
            pred.width, pred.height, gt.width, gt.height
        )));
    }
    if !pred.is_binary() || !gt.is_binary() {
        return Err(Error::contract("seg_metrics requires binary masks (values in {0, 255})"));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0u64, 0u64, 0u64, 0u64);
    for (&p, &g) in pred.values.iter().zip(&gt.values) {
        match (p == 255, g == 255) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let union = tp + fp + fn_;
    let total = tp + fp + tn + fn_;
    let degenerate = union == 0 || tp + fn_ == 0 || tn + fp == 0;
    let jaccard = if union == 0 { 1.0 } else { tp as f64 / union as f64 };
    let acc = if total == 0 { 1.0 } else { (tp + tn) as f64 / total as f64 };
    let sens = if tp + fn_ == 0 { 1.0 } else { tp as f64 / (tp + fn_) as f64 };
    let spec = if tn + fp == 0 { 1.0 } else { tn as f64 / (tn + fp) as f64 };
    Ok(SegReport { jaccard, acc, sens, spec, degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;

    const B: bool = false;
    const P: bool = true;

    #[test]
    fn ap_perfect_ranking() {
        let ap = average_precision(&[0.9, 0.8, 0.2, 0.1], &[P, P, B, B]).unwrap();
        assert!((ap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ap_alternating_example() {
        let ap = average_precision(&[0.9, 0.8, 0.7, 0.6], &[P, B, P, B]).unwrap();
        assert!((ap - (0.5 + (2.0 / 3.0) * 0.5)).abs() < 1e-12);
    }

    #[test]
    fn ap_all_tied_equals_base_rate() {
        let ap = average_precision(&[0.5; 5], &[P, B, P, B, B]).unwrap();
        assert!((ap - 2.0 / 5.0).abs() < 1e-12);
    }

    #[test]
    fn ap_requires_positives() {
        assert!(average_precision(&[0.1, 0.2], &[B, B]).is_err());
    }

    #[test]
    fn auc_perfect_and_reversed() {
        assert!((roc_auc(&[0.9, 0.8, 0.2], &[P, P, B]).unwrap() - 1.0).abs() < 1e-12);
        assert!(roc_auc(&[0.1, 0.9], &[P, B]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn auc_tie_example() {
        let auc = roc_auc(&[0.9, 0.5, 0.5, 0.1], &[P, P, B, B]).unwrap();
        assert!((auc - 0.875).abs() < 1e-12);
    }

    #[test]
    fn auc_single_class_rejected() {
        assert!(roc_auc(&[0.5, 0.6], &[P, P]).is_err());
    }

    #[test]
    fn roc_curve_endpoints_and_monotonicity() {
        let curve = roc_curve(&[0.8, 0.6, 0.6, 0.3, 0.2], &[P, P, B, B, P]).unwrap();
        assert_eq!((curve.fpr[0], curve.tpr[0]), (0.0, 0.0));
        let last = curve.fpr.len() - 1;
        assert_eq!((curve.fpr[last], curve.tpr[last]), (1.0, 1.0));
        for i in 1..curve.fpr.len() {
            assert!(curve.fpr[i] >= curve.fpr[i - 1]);
            assert!(curve.tpr[i] >= curve.tpr[i - 1]);
            assert!(curve.thresholds[i] <= curve.thresholds[i - 1]);
        }
    }

    #[test]
    fn trapezoid_matches_statistic() {
        let scores = [0.9, 0.5, 0.5, 0.4, 0.4, 0.1, 0.7];
        let labels = [P, P, B, P, B, B, B];
        let auc = roc_auc(&scores, &labels).unwrap();
        let curve = roc_curve(&scores, &labels).unwrap();
        assert!((curve.trapezoid_area() - auc).abs() < 1e-12);
    }

    #[test]
    fn confusion_boundary_counts_positive() {
        let c = confusion_at_threshold(&[0.5], &[P], 0.5).unwrap();
        assert_eq!(c.tp, 1);
        let c = confusion_at_threshold(&[0.6, 0.4], &[P, P], 0.5).unwrap();
        assert!((c.sens - 0.5).abs() < 1e-12);
    }

    #[test]
    fn confusion_all_correct() {
        let c = confusion_at_threshold(&[0.9, 0.1], &[P, B], 0.5).unwrap();
        assert_eq!(c.acc, 1.0);
        assert!(!c.degenerate_sens && !c.degenerate_spec);
    }

    #[test]
    fn sp95_perfect_separation() {
        let s = spec_at_sens(&[0.9, 0.8, 0.2, 0.1], &[P, P, B, B], 0.95).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sp95_enumerated_small_case() {
        // 4 positives above a single negative: sensitivity 1.0 attainable
        // with the negative still excluded.
        let s = spec_at_sens(&[0.9, 0.8, 0.7, 0.6, 0.1], &[P, P, P, P, B], 0.95).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sp95_random_scores_near_complement() {
        // labels independent of scores: expected specificity ~ 1 - target
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        let mut state = 0x9e3779b97f4a7c15u64;
        for i in 0..1000 {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            scores.push((state >> 11) as f64 / (1u64 << 53) as f64);
            labels.push(i % 2 == 0);
        }
        let s = spec_at_sens(&scores, &labels, 0.95).unwrap();
        assert!((s - 0.05).abs() < 0.05, "sp95 {s}");
    }

    #[test]
    fn ap_of_random_scores_concentrates_at_base_rate() {
        let mut state = 0x51ed5eedu64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let n = 1000;
        let labels: Vec<bool> = (0..n).map(|i| i % 4 == 0).collect(); // base rate 0.25
        let scores: Vec<f64> = (0..n).map(|_| next()).collect();
        let ap = average_precision(&scores, &labels).unwrap();
        assert!((ap - 0.25).abs() < 0.1, "random-score AP {ap} far from base rate");
        // the perfect ranking dominates the base rate
        let perfect: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
        assert!(average_precision(&perfect, &labels).unwrap() >= 0.25);
    }

    #[test]
    fn metrics_invariant_under_monotone_transform() {
        let scores = [0.9, 0.5, 0.5, 0.4, 0.2, 0.7, 0.1];
        let labels = [P, B, P, B, P, P, B];
        let squashed: Vec<f64> = scores.iter().map(|s: &f64| 1.0 / (1.0 + (-5.0 * s).exp())).collect();
        assert_eq!(
            average_precision(&scores, &labels).unwrap(),
            average_precision(&squashed, &labels).unwrap()
        );
        assert_eq!(roc_auc(&scores, &labels).unwrap(), roc_auc(&squashed, &labels).unwrap());
    }

    #[test]
    fn auc_complement_identity() {
        let scores = [0.9, 0.5, 0.5, 0.4, 0.2, 0.7, 0.1, 0.35];
        let labels = [P, B, P, B, P, P, B, B];
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        let total = roc_auc(&scores, &labels).unwrap() + roc_auc(&neg, &labels).unwrap();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn seg_identical_masks() {
        let m = MaskImage::new(3, 2, vec![255, 0, 255, 0, 0, 255]).unwrap();
        let r = seg_metrics(&m, &m).unwrap();
        assert_eq!(r.jaccard, 1.0);
        assert_eq!(r.acc, 1.0);
    }

    #[test]
    fn seg_disjoint_masks() {
        let a = MaskImage::new(2, 2, vec![255, 0, 0, 0]).unwrap();
        let b = MaskImage::new(2, 2, vec![0, 0, 0, 255]).unwrap();
        let r = seg_metrics(&a, &b).unwrap();
        assert_eq!(r.jaccard, 0.0);
    }

    #[test]
    fn seg_half_coverage_with_degenerate_spec() {
        // pred = left half, gt = full image on 2x2
        let pred = MaskImage::new(2, 2, vec![255, 0, 255, 0]).unwrap();
        let gt = MaskImage::new(2, 2, vec![255; 4]).unwrap();
        let r = seg_metrics(&pred, &gt).unwrap();
        assert!((r.jaccard - 0.5).abs() < 1e-12);
        assert!((r.sens - 0.5).abs() < 1e-12);
        assert_eq!(r.spec, 1.0);
        assert!(r.degenerate);
    }

    #[test]
    fn seg_jaccard_is_symmetric() {
        let a = MaskImage::new(3, 3, vec![255, 255, 0, 0, 255, 0, 0, 0, 0]).unwrap();
        let b = MaskImage::new(3, 3, vec![255, 0, 0, 255, 255, 0, 0, 0, 255]).unwrap();
        let ab = seg_metrics(&a, &b).unwrap();
        let ba = seg_metrics(&b, &a).unwrap();
        assert_eq!(ab.jaccard, ba.jaccard);
    }

    #[test]
    fn seg_rejects_confidence_masks() {
        let a = MaskImage::new(1, 2, vec![128, 0]).unwrap();
        let b = MaskImage::new(1, 2, vec![255, 0]).unwrap();
        assert!(seg_metrics(&a, &b).is_err());
    }

    #[test]
    fn seg_rejects_dimension_mismatch() {
        let a = MaskImage::new(2, 1, vec![0, 0]).unwrap();
        let b = MaskImage::new(1, 2, vec![0, 0]).unwrap();
        assert!(seg_metrics(&a, &b).is_err());
    }
}
