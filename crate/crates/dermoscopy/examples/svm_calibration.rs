//! A calibrated histogram-intersection-kernel classifier end to end: sigmoid
//! feature normalization, SMO training, and logistic calibration fitted on
//! out-of-fold decision values.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dermoscopy::classify::{
    decision, fit_normalizer, hik, platt_calibrate, predict_proba, train_svm_detailed,
};

fn main() -> dermoscopy::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    // two overlapping Gaussian-ish blobs in 3 dimensions
    let mut raw = Vec::new();
    let mut labels = Vec::new();
    for i in 0..60 {
        let positive = i % 2 == 0;
        let center = if positive { 0.65 } else { 0.35 };
        let row: Vec<f64> = (0..3).map(|_| center + 0.18 * (rng.gen::<f64>() - 0.5)).collect();
        raw.push(row);
        labels.push(if positive { 1.0 } else { -1.0 });
    }

    let normalizer = fit_normalizer(&raw)?;
    let normalized: Vec<Vec<f64>> = raw
        .iter()
        .map(|r| normalizer.apply(r))
        .collect::<dermoscopy::Result<_>>()?;
    println!(
        "kernel between two samples: {:.4}",
        hik(&normalized[0], &normalized[1])?
    );

    let (model, solution) = train_svm_detailed(&normalized, &labels, 1.0)?;
    println!(
        "SMO converged in {} pair updates, final KKT gap {:.2e}, {} support vectors",
        solution.iterations,
        solution.violation,
        model.support_vectors.len()
    );
    let coef_sum: f64 = model.dual_coef.iter().sum();
    println!("signed dual coefficients sum to {coef_sum:.2e}");

    let (calibrated, cal) = platt_calibrate(&normalized, &labels, 1.0, 3, 11)?;
    println!("logistic calibration: A = {:.3}, B = {:.3}", cal.a, cal.b);

    // decision values map monotonically onto probabilities
    let probe = [&raw[0], &raw[1], &raw[2], &raw[3]];
    for (k, sample) in probe.iter().enumerate() {
        let xn = normalizer.apply(sample)?;
        let d = decision(&calibrated, &xn)?;
        let p = predict_proba(&calibrated, &cal, &normalizer, sample)?;
        println!(
            "sample {k}: label {:+}, decision {:+.3}, calibrated probability {:.3}",
            labels[k] as i8, d, p
        );
    }
    Ok(())
}
