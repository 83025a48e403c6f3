//! The evaluation suite: average precision, ROC/AUC, thresholded confusion
//! rates, specificity at the 95%-sensitivity operating point, and pixel-wise
//! segmentation scores.

use dermoscopy::imaging::MaskImage;
use dermoscopy::metrics::{
    average_precision, classification_report, roc_curve, seg_metrics, spec_at_sens,
};

fn main() -> dermoscopy::Result<()> {
    // a small ranked list with one inversion and a tie
    let scores = [0.95, 0.88, 0.70, 0.70, 0.55, 0.40, 0.32, 0.10];
    let labels = [true, true, false, true, false, true, false, false];

    let ap = average_precision(&scores, &labels)?;
    let sp95 = spec_at_sens(&scores, &labels, 0.95)?;
    println!("average precision: {ap:.4}");
    println!("specificity at 95% sensitivity: {sp95:.4}");

    let report = classification_report(&scores, &labels, 0.5)?;
    println!(
        "at threshold 0.5: acc {:.3}, sens {:.3}, spec {:.3} (tp {} fp {} tn {} fn {})",
        report.acc, report.sens, report.spec, report.counts.tp, report.counts.fp,
        report.counts.tn, report.counts.fn_
    );
    println!("auc: {:.4}", report.auc);

    let curve = roc_curve(&scores, &labels)?;
    println!("ROC operating points (threshold, fpr, tpr):");
    for i in 0..curve.thresholds.len() {
        println!(
            "  {:>8.3} {:.3} {:.3}",
            curve.thresholds[i], curve.fpr[i], curve.tpr[i]
        );
    }
    println!("trapezoid area equals the pairwise statistic: {}", {
        (curve.trapezoid_area() - report.auc).abs() < 1e-12
    });

    // segmentation: prediction covering the left half of a full-lesion truth
    let pred = MaskImage::new(4, 2, vec![255, 255, 0, 0, 255, 255, 0, 0])?;
    let gt = MaskImage::new(4, 2, vec![255; 8])?;
    let seg = seg_metrics(&pred, &gt)?;
    println!(
        "segmentation: jaccard {:.2}, acc {:.2}, sens {:.2}, spec {:.2} (degenerate spec flagged: {})",
        seg.jaccard, seg.acc, seg.sens, seg.spec, seg.degenerate
    );
    Ok(())
}
