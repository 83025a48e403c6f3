//! Per-feature binary classifiers: sigmoid feature normalization, a
//! histogram-intersection-kernel SVM trained by pairwise dual decomposition,
//! and logistic calibration fitted on 3-fold out-of-fold decision values.

use serde::{Deserialize, Serialize};

use crate::cv::stratified_folds;
use crate::error::{Error, Result};

pub const DEFAULT_C: f64 = 1.0;
pub const KKT_TOL: f64 = 1e-3;
pub const KERNEL_TAG: &str = "histogram_intersection";

// ---------------------------------------------------------------------------
// Sigmoid feature normalization
// ---------------------------------------------------------------------------

/// Per-dimension logistic squashing fitted from training statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmoidNormalizer {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

/// Fit per-dimension mean and population std. Dimensions with std below 1e-12
/// use sigma = 1 so constant features squash to exactly 0.5.
pub fn fit_normalizer(x: &[Vec<f64>]) -> Result<SigmoidNormalizer> {
    if x.len() < 2 {
        return Err(Error::contract("fit_normalizer requires at least 2 training rows"));
    }
    let dims = x[0].len();
    if x.iter().any(|r| r.len() != dims) {
        return Err(Error::contract("training rows must share one dimension"));
    }
    let n = x.len() as f64;
    let mut mu = vec![0.0; dims];
    for row in x {
        for (m, v) in mu.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in mu.iter_mut() {
        *m /= n;
    }
    let mut sigma = vec![0.0; dims];
    for row in x {
        for ((s, v), m) in sigma.iter_mut().zip(row).zip(&mu) {
            *s += (v - m) * (v - m);
        }
    }
    for s in sigma.iter_mut() {
        *s = (*s / n).sqrt();
        if *s < 1e-12 {
            *s = 1.0;
        }
    }
    Ok(SigmoidNormalizer { mu, sigma })
}

impl SigmoidNormalizer {
    /// Map each dimension through 1 / (1 + exp(-(x - mu) / sigma)).
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.mu.len() {
            return Err(Error::contract(format!(
                "normalizer fitted on {} dims, input has {}",
                self.mu.len(),
                x.len()
            )));
        }
        Ok(x.iter()
            .zip(self.mu.iter().zip(&self.sigma))
            .map(|(v, (m, s))| 1.0 / (1.0 + (-(v - m) / s).exp()))
            .collect())
    }
}

// ---------------------------------------------------------------------------
// Histogram intersection kernel
// ---------------------------------------------------------------------------

/// K(x, y) = sum_d min(x_d, y_d) on nonnegative vectors.
pub fn hik(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::contract(format!("hik dims {} vs {}", x.len(), y.len())));
    }
    Ok(x.iter().zip(y).map(|(a, b)| a.min(*b)).sum())
}

fn gram_matrix(x: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = x.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = hik(&x[i], &x[j])?;
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    Ok(k)
}

// ---------------------------------------------------------------------------
// SMO dual solver
// ---------------------------------------------------------------------------

/// Dual solution of the soft-margin problem on a precomputed Gram matrix.
#[derive(Debug, Clone)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    /// Final maximal KKT violation m(alpha) - M(alpha).
    pub violation: f64,
}

impl SmoSolution {
    /// Dual objective sum(alpha) - 0.5 sum_ij alpha_i alpha_j y_i y_j K_ij.
    pub fn dual_objective(&self, gram: &[f64], y: &[f64]) -> f64 {
        let n = self.alpha.len();
        let mut quad = 0.0;
        for i in 0..n {
            if self.alpha[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                if self.alpha[j] != 0.0 {
                    quad += self.alpha[i] * self.alpha[j] * y[i] * y[j] * gram[i * n + j];
                }
            }
        }
        self.alpha.iter().sum::<f64>() - 0.5 * quad
    }
}

/// Maximal-violating-pair SMO on a precomputed Gram matrix. Labels are +-1.
/// Terminates when the KKT gap falls below `tol` or the pass budget runs out.
pub fn smo_solve(gram: &[f64], y: &[f64], c: f64, tol: f64) -> Result<SmoSolution> {
    let n = y.len();
    if gram.len() != n * n {
        return Err(Error::contract("gram matrix size mismatch"));
    }
    if c <= 0.0 {
        return Err(Error::contract("C must be > 0"));
    }
    let mut alpha = vec![0.0; n];
    // gradient of 0.5 a^T Q a - e^T a, Q_ij = y_i y_j K_ij; starts at -1
    let mut grad = vec![-1.0; n];
    let max_iter = 100_000usize.max(100 * n);
    let mut iterations = 0;
    let mut violation = f64::INFINITY;

    for it in 0..max_iter {
        iterations = it;
        // select i maximizing -y_i grad_i over I_up, j minimizing over I_low
        let mut i_sel: Option<usize> = None;
        let mut j_sel: Option<usize> = None;
        let mut g_max = f64::NEG_INFINITY;
        let mut g_min = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            let in_up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            let in_low = (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c);
            if in_up && v > g_max {
                g_max = v;
                i_sel = Some(t);
            }
            if in_low && v < g_min {
                g_min = v;
                j_sel = Some(t);
            }
        }
        violation = g_max - g_min;
        if violation <= tol {
            break;
        }
        let (i, j) = match (i_sel, j_sel) {
            (Some(i), Some(j)) if i != j => (i, j),
            _ => break,
        };

        // two-variable analytic step along the equality constraint
        let quad = (gram[i * n + i] + gram[j * n + j] - 2.0 * gram[i * n + j]).max(1e-12);
        let delta = (g_max - g_min) / quad;
        // feasible step bounds for alpha_i (up) and alpha_j (down)
        let di_max = if y[i] > 0.0 { c - alpha[i] } else { alpha[i] };
        let dj_max = if y[j] > 0.0 { alpha[j] } else { c - alpha[j] };
        let step = delta.min(di_max).min(dj_max);
        if step <= 0.0 {
            break;
        }
        let ai_new = alpha[i] + if y[i] > 0.0 { step } else { -step };
        let aj_new = alpha[j] + if y[j] > 0.0 { -step } else { step };
        let dai = ai_new - alpha[i];
        let daj = aj_new - alpha[j];
        alpha[i] = ai_new;
        alpha[j] = aj_new;
        for t in 0..n {
            grad[t] += y[t] * (y[i] * dai * gram[i * n + t] + y[j] * daj * gram[j * n + t]);
        }
    }

    // bias from free support vectors, falling back to the KKT midpoint
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    for t in 0..n {
        if alpha[t] > 1e-8 && alpha[t] < c - 1e-8 {
            // y_t - sum_j alpha_j y_j K_tj = y_t (1 + grad_t) ... grad_t = (Qa)_t - 1
            free_sum += y[t] - y[t] * (grad[t] + 1.0);
            free_count += 1;
        }
    }
    let bias = if free_count > 0 {
        free_sum / free_count as f64
    } else {
        let mut g_max = f64::NEG_INFINITY;
        let mut g_min = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            let in_up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            let in_low = (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c);
            if in_up {
                g_max = g_max.max(v);
            }
            if in_low {
                g_min = g_min.min(v);
            }
        }
        (g_max + g_min) / 2.0
    };

    Ok(SmoSolution { alpha, bias, iterations, violation })
}

// ---------------------------------------------------------------------------
// Trained model
// ---------------------------------------------------------------------------

/// Trained kernel classifier: support set, signed dual coefficients, and bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// alpha_i * y_i per support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    pub kernel: String,
}

/// Logistic calibration parameters: p = 1 / (1 + exp(A d + B)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub a: f64,
    pub b: f64,
}

/// Train the soft-margin HIK SVM on normalized rows with labels in {-1, +1}.
pub fn train_svm(x: &[Vec<f64>], y: &[f64], c: f64) -> Result<SvmModel> {
    let (model, _) = train_svm_detailed(x, y, c)?;
    Ok(model)
}

/// As [`train_svm`], additionally returning the raw dual solution.
pub fn train_svm_detailed(x: &[Vec<f64>], y: &[f64], c: f64) -> Result<(SvmModel, SmoSolution)> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::contract("training rows and labels must match and be nonempty"));
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::contract("labels must be -1 or +1"));
    }
    let pos = y.iter().filter(|&&v| v > 0.0).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::contract("training data must contain both classes"));
    }
    let gram = gram_matrix(x)?;
    let solution = smo_solve(&gram, y, c, KKT_TOL)?;
    let mut support_vectors = Vec::new();
    let mut dual_coef = Vec::new();
    for (i, &a) in solution.alpha.iter().enumerate() {
        if a > 1e-12 {
            support_vectors.push(x[i].clone());
            dual_coef.push(a * y[i]);
        }
    }
    let model = SvmModel {
        support_vectors,
        dual_coef,
        bias: solution.bias,
        c,
        kernel: KERNEL_TAG.to_string(),
    };
    Ok((model, solution))
}

/// Decision value sum_i dual_coef_i K(sv_i, x) + bias.
pub fn decision(model: &SvmModel, x: &[f64]) -> Result<f64> {
    let mut sum = model.bias;
    for (sv, &coef) in model.support_vectors.iter().zip(&model.dual_coef) {
        sum += coef * hik(sv, x)?;
    }
    Ok(sum)
}

// ---------------------------------------------------------------------------
// Logistic calibration (3-fold out-of-fold decision values)
// ---------------------------------------------------------------------------

/// Fit A, B of p = 1/(1+exp(A d + B)) by weighted regularized maximum
/// likelihood. Both classes are reweighted to equal effective counts and the
/// smoothed targets use that effective count.
fn fit_logistic(decisions: &[f64], labels: &[f64]) -> Result<Calibration> {
    let n = decisions.len();
    let n_pos = labels.iter().filter(|&&l| l > 0.0).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::contract("calibration needs both classes"));
    }
    // balanced prior: each class carries effective count n/2
    let n_eff = n as f64 / 2.0;
    let w_pos = n_eff / n_pos as f64;
    let w_neg = n_eff / n_neg as f64;
    let t_pos = (n_eff + 1.0) / (n_eff + 2.0);
    let t_neg = 1.0 / (n_eff + 2.0);

    // Newton iterations on the weighted cross-entropy in (A, B).
    // The usual intercept start ln((n_neg+1)/(n_pos+1)) is 0 once both
    // classes carry equal effective counts.
    let mut a = 0.0f64;
    let mut b = 0.0f64;
    let min_step = 1e-10;
    let sigma = 1e-12; // Levenberg-style floor on the Hessian diagonal

    let value = |a: f64, b: f64| -> f64 {
        let mut v = 0.0;
        for (&d, &l) in decisions.iter().zip(labels) {
            let (t, w) = if l > 0.0 { (t_pos, w_pos) } else { (t_neg, w_neg) };
            let z = a * d + b;
            // stable log(1+exp(z)) forms
            let loss = if z >= 0.0 {
                t * z + (1.0 + (-z).exp()).ln()
            } else {
                (t - 1.0) * z + (1.0 + z.exp()).ln()
            };
            v += w * loss;
        }
        v
    };

    let mut fval = value(a, b);
    for _ in 0..200 {
        let (mut h11, mut h22, mut h12) = (sigma, sigma, 0.0);
        let (mut g1, mut g2) = (0.0, 0.0);
        for (&d, &l) in decisions.iter().zip(labels) {
            let (t, w) = if l > 0.0 { (t_pos, w_pos) } else { (t_neg, w_neg) };
            let z = a * d + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            // p = P(target=1 side), derivative terms per Platt's fitting
            let d1 = w * (t - p);
            let d2 = w * p * q;
            g1 += d * d1;
            g2 += d1;
            h11 += d * d * d2;
            h22 += d2;
            h12 += d * d2;
        }
        if g1.abs() < 1e-10 && g2.abs() < 1e-10 {
            break;
        }
        let det = h11 * h22 - h12 * h12;
        let da = -(h22 * g1 - h12 * g2) / det;
        let db = -(-h12 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        loop {
            let na = a + step * da;
            let nb = b + step * db;
            let nf = value(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
            if step < min_step {
                return Ok(Calibration { a, b });
            }
        }
    }
    Ok(Calibration { a, b })
}

/// Train with stratified out-of-fold calibration: per fold, an SVM trained on
/// the remaining folds scores the held-out fold; the collected decision values
/// fit the logistic, and the final model retrains on all data.
pub fn platt_calibrate(
    x: &[Vec<f64>],
    y: &[f64],
    c: f64,
    folds: usize,
    seed: u64,
) -> Result<(SvmModel, Calibration)> {
    if x.len() != y.len() {
        return Err(Error::contract("rows and labels must match"));
    }
    let labels_bool: Vec<bool> = y.iter().map(|&v| v > 0.0).collect();
    let assignment = stratified_folds(&labels_bool, folds, seed)?;
    let mut oof: Vec<(f64, f64)> = Vec::with_capacity(x.len());
    for fold in 0..folds {
        let mut train_x = Vec::new();
        let mut train_y = Vec::new();
        let mut test_idx = Vec::new();
        for i in 0..x.len() {
            if assignment[i] == fold {
                test_idx.push(i);
            } else {
                train_x.push(x[i].clone());
                train_y.push(y[i]);
            }
        }
        let model = train_svm(&train_x, &train_y, c)?;
        for i in test_idx {
            oof.push((decision(&model, &x[i])?, y[i]));
        }
    }
    let decisions: Vec<f64> = oof.iter().map(|p| p.0).collect();
    let labels: Vec<f64> = oof.iter().map(|p| p.1).collect();
    let calibration = fit_logistic(&decisions, &labels)?;
    let model = train_svm(x, y, c)?;
    Ok((model, calibration))
}

/// Out-of-fold calibrated probabilities per training row, in row order.
/// These feed ensemble selection without touching held-out data.
pub fn out_of_fold_probabilities(
    x: &[Vec<f64>],
    y: &[f64],
    c: f64,
    folds: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let labels_bool: Vec<bool> = y.iter().map(|&v| v > 0.0).collect();
    let assignment = stratified_folds(&labels_bool, folds, seed)?;
    let mut decisions = vec![0.0; x.len()];
    for fold in 0..folds {
        let mut train_x = Vec::new();
        let mut train_y = Vec::new();
        for i in 0..x.len() {
            if assignment[i] != fold {
                train_x.push(x[i].clone());
                train_y.push(y[i]);
            }
        }
        let model = train_svm(&train_x, &train_y, c)?;
        for i in 0..x.len() {
            if assignment[i] == fold {
                decisions[i] = decision(&model, &x[i])?;
            }
        }
    }
    let cal = fit_logistic(&decisions, y)?;
    Ok(decisions.iter().map(|&d| calibrated_probability(cal, d)).collect())
}

#[inline]
fn calibrated_probability(cal: Calibration, decision_value: f64) -> f64 {
    1.0 / (1.0 + (cal.a * decision_value + cal.b).exp())
}

/// Calibrated probability of the positive class for a raw feature vector.
pub fn predict_proba(
    model: &SvmModel,
    cal: &Calibration,
    normalizer: &SigmoidNormalizer,
    x_raw: &[f64],
) -> Result<f64> {
    if model.support_vectors.is_empty() && model.dual_coef.is_empty() && model.kernel.is_empty() {
        return Err(Error::contract("model is not fitted"));
    }
    let x = normalizer.apply(x_raw)?;
    let d = decision(model, &x)?;
    Ok(calibrated_probability(*cal, d))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(spec: &[i8]) -> Vec<f64> {
        spec.iter().map(|&v| f64::from(v)).collect()
    }

    #[test]
    fn normalizer_center_maps_to_half() {
        let norm = fit_normalizer(&[vec![0.0], vec![2.0]]).unwrap();
        assert_eq!(norm.mu, vec![1.0]);
        assert_eq!(norm.sigma, vec![1.0]);
        let out = norm.apply(&[1.0]).unwrap();
        assert!((out[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn normalizer_outputs_bounded() {
        let norm = fit_normalizer(&[vec![0.0, 5.0], vec![2.0, 9.0], vec![1.0, 7.0]]).unwrap();
        for x in [[-20.0, -10.0], [20.0, 20.0], [0.5, 7.0]] {
            for v in norm.apply(&x).unwrap() {
                assert!(v > 0.0 && v < 1.0);
            }
        }
        // asymptotic approach to 1
        let hi = norm.apply(&[20.0, 7.0]).unwrap();
        assert!(hi[0] > 0.999 && hi[0] < 1.0);
    }

    #[test]
    fn normalizer_constant_dim_squashes_to_half() {
        let norm = fit_normalizer(&[vec![3.0], vec![3.0], vec![3.0]]).unwrap();
        assert_eq!(norm.sigma, vec![1.0]);
        assert!((norm.apply(&[3.0]).unwrap()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn normalizer_median_centered_on_training_data() {
        let rows: Vec<Vec<f64>> = (0..21).map(|i| vec![i as f64]).collect();
        let norm = fit_normalizer(&rows).unwrap();
        let mut mapped: Vec<f64> =
            rows.iter().map(|r| norm.apply(r).unwrap()[0]).collect();
        mapped.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = mapped[10];
        assert!((0.25..=0.75).contains(&median));
    }

    #[test]
    fn hik_examples() {
        assert_eq!(hik(&[0.3, 0.4], &[0.3, 0.4]).unwrap(), 0.7);
        assert_eq!(hik(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((hik(&[0.2, 0.7], &[0.5, 0.3]).unwrap() - 0.5).abs() < 1e-12);
        assert!(hik(&[0.1], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn smo_two_point_problem() {
        // x = 0 labeled -1, x = 1 labeled +1, after sigmoid normalization
        let norm = fit_normalizer(&[vec![0.0], vec![1.0]]).unwrap();
        let x: Vec<Vec<f64>> = [[0.0], [1.0]].iter().map(|r| norm.apply(r).unwrap()).collect();
        let y = labels(&[-1, 1]);
        let (model, sol) = train_svm_detailed(&x, &y, 1000.0).unwrap();
        assert!(sol.violation <= KKT_TOL);
        assert!(decision(&model, &x[0]).unwrap() < 0.0);
        assert!(decision(&model, &x[1]).unwrap() > 0.0);
        let sum: f64 = model.dual_coef.iter().sum();
        assert!(sum.abs() < 1e-6, "dual coefficients must sum to zero, got {sum}");
    }

    #[test]
    fn smo_free_support_vectors_sit_on_margin() {
        let raw: Vec<Vec<f64>> = vec![
            vec![0.1, 0.2],
            vec![0.2, 0.1],
            vec![0.15, 0.25],
            vec![0.8, 0.9],
            vec![0.9, 0.8],
            vec![0.85, 0.75],
        ];
        let y = labels(&[-1, -1, -1, 1, 1, 1]);
        let norm = fit_normalizer(&raw).unwrap();
        let x: Vec<Vec<f64>> = raw.iter().map(|r| norm.apply(r).unwrap()).collect();
        let (model, sol) = train_svm_detailed(&x, &y, 10.0).unwrap();
        for (i, &a) in sol.alpha.iter().enumerate() {
            if a > 1e-6 && a < 10.0 - 1e-6 {
                let d = decision(&model, &x[i]).unwrap();
                assert!(
                    (d.abs() - 1.0).abs() <= 2.0 * KKT_TOL,
                    "free SV {i} has |decision| {} off margin",
                    d.abs()
                );
            }
        }
    }

    #[test]
    fn label_flip_negates_decisions() {
        let raw: Vec<Vec<f64>> = (0..8)
            .map(|i| vec![(i as f64) / 7.0, ((i * 3) % 8) as f64 / 7.0])
            .collect();
        let y = labels(&[-1, -1, 1, -1, 1, 1, -1, 1]);
        let y_neg: Vec<f64> = y.iter().map(|v| -v).collect();
        let norm = fit_normalizer(&raw).unwrap();
        let x: Vec<Vec<f64>> = raw.iter().map(|r| norm.apply(r).unwrap()).collect();
        let a = train_svm(&x, &y, 1.0).unwrap();
        let b = train_svm(&x, &y_neg, 1.0).unwrap();
        for row in &x {
            let da = decision(&a, row).unwrap();
            let db = decision(&b, row).unwrap();
            assert!((da + db).abs() < 1e-6, "flip asymmetry: {da} vs {db}");
        }
    }

    #[test]
    fn degenerate_model_decision_is_bias() {
        let model = SvmModel {
            support_vectors: vec![],
            dual_coef: vec![],
            bias: 0.37,
            c: 1.0,
            kernel: KERNEL_TAG.into(),
        };
        assert_eq!(decision(&model, &[0.5, 0.5]).unwrap(), 0.37);
    }

    #[test]
    fn single_class_training_rejected() {
        let x = vec![vec![0.1], vec![0.2]];
        assert!(train_svm(&x, &labels(&[1, 1]), 1.0).is_err());
    }

    #[test]
    fn duplicated_rows_with_halved_c_equivalent() {
        // duplicating every row while halving C leaves the primal unchanged
        let raw: Vec<Vec<f64>> = vec![
            vec![0.2, 0.3],
            vec![0.3, 0.1],
            vec![0.4, 0.35],
            vec![0.7, 0.8],
            vec![0.8, 0.65],
            vec![0.6, 0.75],
        ];
        let y = labels(&[-1, -1, -1, 1, 1, 1]);
        let norm = fit_normalizer(&raw).unwrap();
        let x: Vec<Vec<f64>> = raw.iter().map(|r| norm.apply(r).unwrap()).collect();
        let mut x2 = x.clone();
        x2.extend(x.iter().cloned());
        let mut y2 = y.clone();
        y2.extend(y.iter().cloned());
        let a = train_svm(&x, &y, 2.0).unwrap();
        let b = train_svm(&x2, &y2, 1.0).unwrap();
        for row in &x {
            let da = decision(&a, row).unwrap();
            let db = decision(&b, row).unwrap();
            assert!((da - db).abs() < 1e-2, "duplication equivalence broke: {da} vs {db}");
        }
    }

    #[test]
    fn calibration_symmetric_data_centers_at_half() {
        // mirror-image classes around 0.5
        let mut raw = Vec::new();
        let mut y = Vec::new();
        for i in 0..12 {
            let offset = 0.02 * (i % 4) as f64;
            raw.push(vec![0.15 + offset]);
            y.push(-1.0);
            raw.push(vec![0.85 - offset]);
            y.push(1.0);
        }
        let norm = fit_normalizer(&raw).unwrap();
        let x: Vec<Vec<f64>> = raw.iter().map(|r| norm.apply(r).unwrap()).collect();
        let (model, cal) = platt_calibrate(&x, &y, 1.0, 3, 17).unwrap();
        assert!(cal.a < 0.0, "separable data must calibrate with negative A");
        let p_at_zero = calibrated_probability(cal, 0.0);
        assert!((p_at_zero - 0.5).abs() < 0.05, "p(0) = {p_at_zero}");
        // mirror points get complementary probabilities
        let p_lo = predict_proba(&model, &cal, &norm, &[0.15]).unwrap();
        let p_hi = predict_proba(&model, &cal, &norm, &[0.85]).unwrap();
        assert!((p_lo + p_hi - 1.0).abs() < 0.05, "{p_lo} + {p_hi}");
    }

    #[test]
    fn calibration_random_labels_stay_near_base_rate() {
        let mut state = 42u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let n = 200;
        let raw: Vec<Vec<f64>> = (0..n).map(|_| vec![next(), next()]).collect();
        let y: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let norm = fit_normalizer(&raw).unwrap();
        let x: Vec<Vec<f64>> = raw.iter().map(|r| norm.apply(r).unwrap()).collect();
        let (model, cal) = platt_calibrate(&x, &y, 1.0, 3, 5).unwrap();
        let mut mean = 0.0;
        for row in &raw {
            let p = predict_proba(&model, &cal, &norm, row).unwrap();
            assert!(p > 0.0 && p < 1.0);
            mean += p;
        }
        mean /= n as f64;
        assert!((mean - 0.5).abs() < 0.15, "mean probability {mean}");
    }

    #[test]
    fn calibrated_ranking_matches_decision_ranking() {
        let raw: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![i as f64 / 9.0, (9 - i) as f64 / 9.0])
            .collect();
        let y = labels(&[-1, -1, -1, -1, 1, -1, 1, 1, 1, 1]);
        let norm = fit_normalizer(&raw).unwrap();
        let x: Vec<Vec<f64>> = raw.iter().map(|r| norm.apply(r).unwrap()).collect();
        let (model, cal) = platt_calibrate(&x, &y, 1.0, 3, 3).unwrap();
        assert!(cal.a < 0.0);
        let mut decisions: Vec<f64> = Vec::new();
        let mut probas: Vec<f64> = Vec::new();
        for row in &raw {
            let xn = norm.apply(row).unwrap();
            decisions.push(decision(&model, &xn).unwrap());
            probas.push(predict_proba(&model, &cal, &norm, row).unwrap());
        }
        let mut by_decision: Vec<usize> = (0..10).collect();
        by_decision.sort_by(|&a, &b| decisions[a].partial_cmp(&decisions[b]).unwrap());
        let mut by_proba: Vec<usize> = (0..10).collect();
        by_proba.sort_by(|&a, &b| probas[a].partial_cmp(&probas[b]).unwrap());
        assert_eq!(by_decision, by_proba);
    }

    #[test]
    fn calibration_insufficient_class_rejected() {
        let x = vec![vec![0.1], vec![0.9], vec![0.2], vec![0.8]];
        let y = labels(&[-1, 1, -1, 1]);
        assert!(platt_calibrate(&x, &y, 1.0, 3, 0).is_err());
    }
}
