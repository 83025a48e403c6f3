//! Seeded stratified cross-validation splits shared by calibration and
//! ensemble selection.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Assign each sample to one of `folds` folds, stratified by label so every
/// fold keeps both classes when each class has at least `folds` members.
/// Returns `assignment[i] = fold of sample i`.
pub fn stratified_folds(labels: &[bool], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::contract("need at least 2 folds"));
    }
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    if pos.len() < folds || neg.len() < folds {
        return Err(Error::contract(format!(
            "stratified {folds}-fold split needs {folds} samples per class (got {} positive, {} negative)",
            pos.len(),
            neg.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0usize; labels.len()];
    for class in [pos, neg] {
        let mut shuffled = class;
        shuffled.shuffle(&mut rng);
        for (k, idx) in shuffled.into_iter().enumerate() {
            assignment[idx] = k % folds;
        }
    }
    Ok(assignment)
}

/// Derive a reproducible per-component seed from a base seed and a name.
/// FNV-1a over the name keeps the derivation stable across runs and platforms.
pub fn derive_seed(base: u64, name: &str) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for b in name.as_bytes() {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    base ^ hash
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_are_stratified_and_deterministic() {
        let labels: Vec<bool> = (0..20).map(|i| i % 4 == 0).collect();
        let a = stratified_folds(&labels, 3, 7).unwrap();
        let b = stratified_folds(&labels, 3, 7).unwrap();
        assert_eq!(a, b);
        for fold in 0..3 {
            let pos = labels.iter().zip(&a).filter(|(l, f)| **l && **f == fold).count();
            let neg = labels.iter().zip(&a).filter(|(l, f)| !**l && **f == fold).count();
            assert!(pos >= 1, "fold {fold} lost all positives");
            assert!(neg >= 1, "fold {fold} lost all negatives");
        }
    }

    #[test]
    fn too_small_class_rejected() {
        let labels = vec![true, false, false, false, false, false];
        assert!(stratified_folds(&labels, 3, 0).is_err());
    }

    #[test]
    fn derived_seeds_differ_by_name() {
        assert_ne!(derive_seed(1, "WI:color_hist"), derive_seed(1, "CR:color_hist"));
        assert_eq!(derive_seed(9, "x"), derive_seed(9, "x"));
    }
}
