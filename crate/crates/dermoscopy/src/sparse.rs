//! Online sparse-coding dictionary learning and lasso encoding over image
//! patches, pooled into an image-level descriptor.
//!
//! The lasso solver is cyclic coordinate descent on
//! `0.5 * ||x - D a||^2 + lambda * ||a||_1`; dictionary learning alternates
//! mini-batch encoding with block-coordinate descent on accumulated sufficient
//! statistics, projecting atoms onto the unit L2 ball.

use std::io::Write as _;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::{FeatureVector, SC_GRAY, SC_RGB};
use crate::imaging::{self, ColorSpace, ImageTensor};

pub const DEFAULT_LAMBDA: f64 = 0.15;
pub const DEFAULT_ITERATIONS: usize = 1000;
pub const DEFAULT_ATOMS: usize = 1024;
pub const DEFAULT_PATCH_SIDE: usize = 8;
pub const MINI_BATCH: usize = 256;
const LASSO_TOL: f64 = 1e-6;

/// Learned basis. Atoms are stored column-major: atom `j` occupies
/// `atoms[j*atom_dim .. (j+1)*atom_dim]` and has L2 norm at most 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    pub atom_dim: usize,
    pub n_atoms: usize,
    pub atoms: Vec<f64>,
    pub colorspace: ColorSpace,
    pub patch_side: usize,
}

impl Dictionary {
    pub fn atom(&self, j: usize) -> &[f64] {
        &self.atoms[j * self.atom_dim..(j + 1) * self.atom_dim]
    }

    /// Feature name of the descriptor this dictionary produces.
    pub fn feature_name(&self) -> &'static str {
        match self.colorspace {
            ColorSpace::Gray => SC_GRAY,
            _ => SC_RGB,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.atoms.len() != self.atom_dim * self.n_atoms {
            return Err(Error::contract("dictionary matrix size mismatch"));
        }
        for j in 0..self.n_atoms {
            let norm: f64 = self.atom(j).iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1.0 + 1e-9 {
                return Err(Error::contract(format!("atom {j} exceeds unit norm: {norm}")));
            }
        }
        Ok(())
    }
}

/// Sparse coefficient vector: strictly increasing indices, nonzero values.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode {
    pub indices: Vec<usize>,
    pub coefficients: Vec<f64>,
}

impl SparseCode {
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// Dense reconstruction of the coefficient vector.
    pub fn to_dense(&self, n_atoms: usize) -> Vec<f64> {
        let mut dense = vec![0.0; n_atoms];
        for (&i, &c) in self.indices.iter().zip(&self.coefficients) {
            dense[i] = c;
        }
        dense
    }

    /// Objective value 0.5||x - Da||^2 + lambda ||a||_1 for this code.
    pub fn objective(&self, x: &[f64], dict: &Dictionary, lambda: f64) -> f64 {
        let mut residual = x.to_vec();
        for (&j, &c) in self.indices.iter().zip(&self.coefficients) {
            for (r, d) in residual.iter_mut().zip(dict.atom(j)) {
                *r -= c * d;
            }
        }
        let fit: f64 = residual.iter().map(|r| r * r).sum::<f64>() / 2.0;
        let l1: f64 = self.coefficients.iter().map(|c| c.abs()).sum();
        fit + lambda * l1
    }
}

// ---------------------------------------------------------------------------
// Patch extraction
// ---------------------------------------------------------------------------

/// Extract `side` x `side` patches on a `stride` grid, flattened channel-major
/// and standardized to zero mean per patch (all channels jointly).
pub fn extract_patches(img: &ImageTensor, side: usize, stride: usize) -> Result<Vec<Vec<f64>>> {
    if side == 0 || stride == 0 {
        return Err(Error::contract("patch side and stride must be >= 1"));
    }
    if side > img.width || side > img.height {
        return Err(Error::contract(format!(
            "patch side {side} exceeds image {}x{}",
            img.width, img.height
        )));
    }
    let channels = img.channels();
    let dim = side * side * channels;
    let mut patches = Vec::new();
    let mut y = 0;
    while y + side <= img.height {
        let mut x = 0;
        while x + side <= img.width {
            let mut patch = Vec::with_capacity(dim);
            for c in 0..channels {
                for py in 0..side {
                    for px in 0..side {
                        patch.push(img.get(x + px, y + py, c));
                    }
                }
            }
            let mean: f64 = patch.iter().sum::<f64>() / dim as f64;
            for v in patch.iter_mut() {
                *v -= mean;
            }
            patches.push(patch);
            x += stride;
        }
        y += stride;
    }
    Ok(patches)
}

// ---------------------------------------------------------------------------
// Lasso via cyclic coordinate descent
// ---------------------------------------------------------------------------

#[inline]
fn soft_threshold(v: f64, lambda: f64) -> f64 {
    if v > lambda {
        v - lambda
    } else if v < -lambda {
        v + lambda
    } else {
        0.0
    }
}

/// Minimize `0.5||x - Da||^2 + lambda||a||_1` to subgradient tolerance 1e-6.
pub fn lasso_encode(x: &[f64], dict: &Dictionary, lambda: f64) -> Result<SparseCode> {
    if x.len() != dict.atom_dim {
        return Err(Error::contract(format!(
            "patch dim {} does not match atom dim {}",
            x.len(),
            dict.atom_dim
        )));
    }
    if lambda <= 0.0 {
        return Err(Error::contract("lambda must be > 0"));
    }
    let n = dict.n_atoms;
    let m = dict.atom_dim;
    let norms_sq: Vec<f64> = (0..n)
        .map(|j| dict.atom(j).iter().map(|v| v * v).sum())
        .collect();
    let mut alpha = vec![0.0f64; n];
    let mut residual = x.to_vec();
    // Cyclic passes; converged when no coordinate violates the subgradient
    // conditions by more than the tolerance.
    for _pass in 0..10_000 {
        let mut max_violation = 0.0f64;
        for j in 0..n {
            if norms_sq[j] < 1e-20 {
                continue;
            }
            let atom = &dict.atoms[j * m..(j + 1) * m];
            let mut corr = 0.0;
            for (r, d) in residual.iter().zip(atom) {
                corr += r * d;
            }
            // gradient of the smooth part wrt alpha_j is -(corr)
            let violation = if alpha[j] == 0.0 {
                (corr.abs() - lambda).max(0.0)
            } else {
                (corr - lambda * alpha[j].signum()).abs()
            };
            max_violation = max_violation.max(violation);
            let target = corr + norms_sq[j] * alpha[j];
            let new = soft_threshold(target, lambda) / norms_sq[j];
            let delta = new - alpha[j];
            if delta != 0.0 {
                for (r, d) in residual.iter_mut().zip(atom) {
                    *r -= delta * d;
                }
                alpha[j] = new;
            }
        }
        if max_violation <= LASSO_TOL {
            break;
        }
    }
    let mut indices = Vec::new();
    let mut coefficients = Vec::new();
    for (j, &a) in alpha.iter().enumerate() {
        if a != 0.0 {
            indices.push(j);
            coefficients.push(a);
        }
    }
    Ok(SparseCode { indices, coefficients })
}

// ---------------------------------------------------------------------------
// Online dictionary learning
// ---------------------------------------------------------------------------

/// Per-iteration record of the quadratic surrogate around the dictionary
/// update: block-coordinate descent guarantees `after <= before`.
#[derive(Debug, Clone, Copy)]
pub struct SurrogateStep {
    pub before: f64,
    pub after: f64,
}

/// Result of [`learn_dictionary`]: the dictionary plus the surrogate trace.
#[derive(Debug, Clone)]
pub struct LearnedDictionary {
    pub dictionary: Dictionary,
    pub surrogate_trace: Vec<SurrogateStep>,
}

/// Surrogate value 0.5 tr(D^T D A) - tr(D^T B) given accumulated statistics.
fn surrogate_value(atoms: &[f64], m: usize, n: usize, a_mat: &[f64], b_mat: &[f64]) -> f64 {
    // tr(D^T D A) = sum_{j,k} A[j,k] <d_j, d_k>; tr(D^T B) = sum_j <d_j, b_j>
    let mut quad = 0.0;
    for j in 0..n {
        let dj = &atoms[j * m..(j + 1) * m];
        for k in 0..n {
            let ajk = a_mat[j * n + k];
            if ajk == 0.0 {
                continue;
            }
            let dk = &atoms[k * m..(k + 1) * m];
            let dot: f64 = dj.iter().zip(dk).map(|(a, b)| a * b).sum();
            quad += ajk * dot;
        }
    }
    let mut lin = 0.0;
    for j in 0..n {
        let dj = &atoms[j * m..(j + 1) * m];
        let bj = &b_mat[j * m..(j + 1) * m];
        lin += dj.iter().zip(bj).map(|(a, b)| a * b).sum::<f64>();
    }
    0.5 * quad - lin
}

/// Online dictionary learning over a fixed patch set. Per iteration: draw a
/// mini-batch, lasso-encode against the current dictionary, fold the codes
/// into running statistics, then update atoms by block-coordinate descent with
/// unit-ball projection. Deterministic for a fixed seed.
pub fn learn_dictionary(
    patches: &[Vec<f64>],
    n_atoms: usize,
    lambda: f64,
    iterations: usize,
    seed: u64,
    colorspace: ColorSpace,
    patch_side: usize,
) -> Result<LearnedDictionary> {
    if patches.len() < n_atoms {
        return Err(Error::contract(format!(
            "need at least {n_atoms} patches to initialize {n_atoms} atoms (got {})",
            patches.len()
        )));
    }
    if iterations == 0 {
        return Err(Error::contract("iterations must be >= 1"));
    }
    let m = patches[0].len();
    if patches.iter().any(|p| p.len() != m) {
        return Err(Error::contract("patches must share one dimension"));
    }
    let n = n_atoms;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Initialize atoms from distinct random patches, normalized to unit L2.
    let mut order: Vec<usize> = (0..patches.len()).collect();
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let mut atoms = vec![0.0; m * n];
    let mut picked = 0;
    for &idx in &order {
        if picked == n {
            break;
        }
        let norm: f64 = patches[idx].iter().map(|v| v * v).sum::<f64>().sqrt();
        let dst = &mut atoms[picked * m..(picked + 1) * m];
        if norm > 1e-12 {
            for (d, v) in dst.iter_mut().zip(&patches[idx]) {
                *d = v / norm;
            }
        } else {
            // degenerate patch: fall back to a seeded random direction
            for d in dst.iter_mut() {
                *d = rng.gen_range(-1.0..1.0);
            }
            let rn: f64 = dst.iter().map(|v| v * v).sum::<f64>().sqrt();
            for d in dst.iter_mut() {
                *d /= rn;
            }
        }
        picked += 1;
    }

    let mut a_mat = vec![0.0; n * n]; // running sum of alpha alpha^T / batch
    let mut b_mat = vec![0.0; n * m]; // running sum of x alpha^T / batch (column j at j*m)
    let batch = MINI_BATCH.min(patches.len());
    let mut surrogate_trace = Vec::with_capacity(iterations);
    let mut unused_streak = vec![0usize; n];

    for _iter in 0..iterations {
        let dict = Dictionary {
            atom_dim: m,
            n_atoms: n,
            atoms: atoms.clone(),
            colorspace,
            patch_side,
        };
        let mut used = vec![false; n];
        for _ in 0..batch {
            let x = &patches[rng.gen_range(0..patches.len())];
            let code = lasso_encode(x, &dict, lambda)?;
            let scale = 1.0 / batch as f64;
            for (ai, &ji) in code.coefficients.iter().zip(&code.indices) {
                if ai.abs() > 1e-8 {
                    used[ji] = true;
                }
                for (ak, &jk) in code.coefficients.iter().zip(&code.indices) {
                    a_mat[ji * n + jk] += scale * ai * ak;
                }
                for (br, xv) in b_mat[ji * m..(ji + 1) * m].iter_mut().zip(x) {
                    *br += scale * ai * xv;
                }
            }
        }

        let before = surrogate_value(&atoms, m, n, &a_mat, &b_mat);
        // Block-coordinate descent over atoms with unit-ball projection.
        for _pass in 0..2 {
            for j in 0..n {
                let ajj = a_mat[j * n + j];
                if ajj < 1e-12 {
                    continue; // atom unused so far
                }
                // u_j = d_j + (b_j - D a_j) / A[j,j]
                let mut u = vec![0.0; m];
                for r in 0..m {
                    let mut da = 0.0;
                    for k in 0..n {
                        let ajk = a_mat[j * n + k];
                        if ajk != 0.0 {
                            da += atoms[k * m + r] * ajk;
                        }
                    }
                    u[r] = atoms[j * m + r] + (b_mat[j * m + r] - da) / ajj;
                }
                let norm: f64 = u.iter().map(|v| v * v).sum::<f64>().sqrt();
                let scale = if norm > 1.0 { 1.0 / norm } else { 1.0 };
                for r in 0..m {
                    atoms[j * m + r] = u[r] * scale;
                }
            }
        }
        let after = surrogate_value(&atoms, m, n, &a_mat, &b_mat);
        surrogate_trace.push(SurrogateStep { before, after });

        // Reseed atoms the encoder has stopped selecting; their stale
        // statistics are cleared so the next update cannot drag the fresh
        // atom back toward the abandoned direction.
        for j in 0..n {
            if used[j] {
                unused_streak[j] = 0;
                continue;
            }
            unused_streak[j] += 1;
            if unused_streak[j] < 3 {
                continue;
            }
            let idx = rng.gen_range(0..patches.len());
            let norm: f64 = patches[idx].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-12 {
                for (d, v) in atoms[j * m..(j + 1) * m].iter_mut().zip(&patches[idx]) {
                    *d = v / norm;
                }
                for k in 0..n {
                    a_mat[j * n + k] = 0.0;
                    a_mat[k * n + j] = 0.0;
                }
                b_mat[j * m..(j + 1) * m].fill(0.0);
                unused_streak[j] = 0;
            }
        }
    }

    let dictionary = Dictionary { atom_dim: m, n_atoms: n, atoms, colorspace, patch_side };
    dictionary.validate()?;
    Ok(LearnedDictionary { dictionary, surrogate_trace })
}

// ---------------------------------------------------------------------------
// Image-level descriptor
// ---------------------------------------------------------------------------

/// Sparse-coding descriptor: resize to 128x128, extract non-overlapping
/// patches, lasso-encode each, and pool the mean absolute coefficient per atom.
pub fn encode_image(img: &ImageTensor, dict: &Dictionary, lambda: f64) -> Result<FeatureVector> {
    let compatible = matches!(
        (img.colorspace, dict.colorspace),
        (ColorSpace::Rgb, ColorSpace::Rgb) | (ColorSpace::Gray, ColorSpace::Gray)
    );
    if !compatible {
        return Err(Error::contract(format!(
            "image colorspace {:?} does not match dictionary {:?}",
            img.colorspace, dict.colorspace
        )));
    }
    let resized = imaging::resize_bilinear(img, 128, 128)?;
    let patches = extract_patches(&resized, dict.patch_side, dict.patch_side)?;
    let mut pooled = vec![0.0; dict.n_atoms];
    for patch in &patches {
        let code = lasso_encode(patch, dict, lambda)?;
        for (&j, &c) in code.indices.iter().zip(&code.coefficients) {
            pooled[j] += c.abs();
        }
    }
    if !patches.is_empty() {
        let inv = 1.0 / patches.len() as f64;
        for v in pooled.iter_mut() {
            *v *= inv;
        }
    }
    // constructed directly: dimensionality follows the dictionary, which may
    // legitimately be smaller than the production 1024-atom default
    Ok(FeatureVector { name: dict.feature_name().to_string(), values: pooled })
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

const DICT_MAGIC: &[u8; 8] = b"SCDICT01";

fn colorspace_tag(cs: ColorSpace) -> Result<u8> {
    match cs {
        ColorSpace::Rgb => Ok(0),
        ColorSpace::Gray => Ok(1),
        other => Err(Error::contract(format!("dictionaries support RGB or GRAY, not {other:?}"))),
    }
}

/// Binary layout: magic, u32 atom_dim, u32 n_atoms, u8 colorspace tag,
/// u32 patch_side, then atoms as little-endian f64, column-major.
pub fn save_dictionary(path: &Path, dict: &Dictionary) -> Result<()> {
    dict.validate()?;
    let mut out = Vec::with_capacity(21 + dict.atoms.len() * 8);
    out.extend_from_slice(DICT_MAGIC);
    out.extend_from_slice(&(dict.atom_dim as u32).to_le_bytes());
    out.extend_from_slice(&(dict.n_atoms as u32).to_le_bytes());
    out.push(colorspace_tag(dict.colorspace)?);
    out.extend_from_slice(&(dict.patch_side as u32).to_le_bytes());
    for v in &dict.atoms {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&out).map_err(|e| Error::io(path, e))
}

pub fn load_dictionary(path: &Path) -> Result<Dictionary> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 21 || &bytes[..8] != DICT_MAGIC {
        return Err(Error::validation(format!("{}: not a dictionary file", path.display())));
    }
    let atom_dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let n_atoms = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let colorspace = match bytes[16] {
        0 => ColorSpace::Rgb,
        1 => ColorSpace::Gray,
        t => return Err(Error::validation(format!("unknown colorspace tag {t}"))),
    };
    let patch_side = u32::from_le_bytes(bytes[17..21].try_into().unwrap()) as usize;
    let expected = 21 + atom_dim * n_atoms * 8;
    if bytes.len() != expected {
        return Err(Error::validation(format!(
            "{}: dictionary payload is {} bytes, expected {expected}",
            path.display(),
            bytes.len()
        )));
    }
    let atoms = bytes[21..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let dict = Dictionary { atom_dim, n_atoms, atoms, colorspace, patch_side };
    dict.validate()?;
    Ok(dict)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orthonormal_dict(n: usize) -> Dictionary {
        // standard basis atoms
        let mut atoms = vec![0.0; n * n];
        for j in 0..n {
            atoms[j * n + j] = 1.0;
        }
        Dictionary { atom_dim: n, n_atoms: n, atoms, colorspace: ColorSpace::Gray, patch_side: 1 }
    }

    #[test]
    fn patch_grid_counts() {
        let img = ImageTensor::new(8, 8, ColorSpace::Gray, vec![0.5; 64]).unwrap();
        assert_eq!(extract_patches(&img, 8, 8).unwrap().len(), 1);
        let img = ImageTensor::new(128, 128, ColorSpace::Gray, vec![0.1; 128 * 128]).unwrap();
        assert_eq!(extract_patches(&img, 8, 8).unwrap().len(), 256);
    }

    #[test]
    fn constant_patches_are_zero_after_mean_removal() {
        let img = ImageTensor::new(16, 16, ColorSpace::Gray, vec![0.77; 256]).unwrap();
        for p in extract_patches(&img, 8, 8).unwrap() {
            assert!(p.iter().all(|&v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn patch_side_larger_than_image_rejected() {
        let img = ImageTensor::new(4, 4, ColorSpace::Gray, vec![0.0; 16]).unwrap();
        assert!(extract_patches(&img, 8, 8).is_err());
    }

    #[test]
    fn lasso_unit_atom_soft_threshold() {
        let dict = orthonormal_dict(4);
        let x = dict.atom(2).to_vec();
        let code = lasso_encode(&x, &dict, 0.15).unwrap();
        assert_eq!(code.indices, vec![2]);
        assert!((code.coefficients[0] - 0.85).abs() < 1e-9);
    }

    #[test]
    fn lasso_large_lambda_kills_everything() {
        let dict = orthonormal_dict(3);
        let x = vec![0.3, -0.2, 0.1];
        let code = lasso_encode(&x, &dict, 0.35).unwrap();
        assert_eq!(code.nnz(), 0);
    }

    #[test]
    fn lasso_zero_input_zero_output() {
        let dict = orthonormal_dict(5);
        let code = lasso_encode(&[0.0; 5], &dict, 0.15).unwrap();
        assert_eq!(code.nnz(), 0);
    }

    #[test]
    fn lasso_dimension_mismatch_rejected() {
        let dict = orthonormal_dict(4);
        assert!(lasso_encode(&[0.0; 3], &dict, 0.1).is_err());
    }

    /// Subgradient optimality: |d_j^T (x - Da)| <= lambda on the inactive set,
    /// equality with consistent sign on the active set.
    fn check_lasso_kkt(x: &[f64], dict: &Dictionary, lambda: f64, code: &SparseCode, tol: f64) {
        let mut residual = x.to_vec();
        for (&j, &c) in code.indices.iter().zip(&code.coefficients) {
            for (r, d) in residual.iter_mut().zip(dict.atom(j)) {
                *r -= c * d;
            }
        }
        let dense = code.to_dense(dict.n_atoms);
        for j in 0..dict.n_atoms {
            let corr: f64 = dict.atom(j).iter().zip(&residual).map(|(d, r)| d * r).sum();
            if dense[j] == 0.0 {
                assert!(corr.abs() <= lambda + tol, "inactive atom {j}: |corr| {} > {lambda}", corr.abs());
            } else {
                assert!(
                    (corr - lambda * dense[j].signum()).abs() <= tol,
                    "active atom {j}: corr {corr} sign {}",
                    dense[j].signum()
                );
            }
        }
    }

    #[test]
    fn lasso_satisfies_subgradient_conditions() {
        let mut rng_state = 0xdeadbeefu64;
        let mut next = move || {
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            (rng_state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for _ in 0..50 {
            let m = 12;
            let n = 20;
            let mut atoms = vec![0.0; m * n];
            for a in atoms.iter_mut() {
                *a = next();
            }
            for j in 0..n {
                let norm: f64 =
                    atoms[j * m..(j + 1) * m].iter().map(|v| v * v).sum::<f64>().sqrt();
                for v in atoms[j * m..(j + 1) * m].iter_mut() {
                    *v /= norm.max(1e-12);
                }
            }
            let dict = Dictionary {
                atom_dim: m,
                n_atoms: n,
                atoms,
                colorspace: ColorSpace::Gray,
                patch_side: 1,
            };
            let x: Vec<f64> = (0..m).map(|_| next()).collect();
            let code = lasso_encode(&x, &dict, 0.15).unwrap();
            check_lasso_kkt(&x, &dict, 0.15, &code, 1e-5);
        }
    }

    #[test]
    fn dictionary_learning_is_deterministic() {
        let patches: Vec<Vec<f64>> = (0..40)
            .map(|i| (0..6).map(|d| ((i * 7 + d * 3) % 11) as f64 / 11.0 - 0.5).collect())
            .collect();
        let a = learn_dictionary(&patches, 4, 0.15, 20, 99, ColorSpace::Gray, 1).unwrap();
        let b = learn_dictionary(&patches, 4, 0.15, 20, 99, ColorSpace::Gray, 1).unwrap();
        assert_eq!(a.dictionary.atoms, b.dictionary.atoms);
    }

    #[test]
    fn dictionary_update_never_increases_surrogate() {
        let patches: Vec<Vec<f64>> = (0..60)
            .map(|i| {
                (0..8)
                    .map(|d| (((i * 13 + d * 5) % 17) as f64 / 17.0 - 0.5) * 2.0)
                    .collect()
            })
            .collect();
        let learned = learn_dictionary(&patches, 6, 0.1, 30, 3, ColorSpace::Gray, 1).unwrap();
        for (i, step) in learned.surrogate_trace.iter().enumerate() {
            assert!(
                step.after <= step.before + 1e-12,
                "iteration {i}: surrogate rose from {} to {}",
                step.before,
                step.after
            );
        }
    }

    #[test]
    fn dictionary_atoms_stay_in_unit_ball() {
        let patches: Vec<Vec<f64>> = (0..30)
            .map(|i| (0..5).map(|d| ((i + d) % 7) as f64 - 3.0).collect())
            .collect();
        let learned = learn_dictionary(&patches, 5, 0.15, 15, 1, ColorSpace::Gray, 1).unwrap();
        learned.dictionary.validate().unwrap();
    }

    #[test]
    fn too_few_patches_rejected() {
        let patches = vec![vec![0.0; 4]; 3];
        assert!(learn_dictionary(&patches, 8, 0.15, 5, 0, ColorSpace::Gray, 2).is_err());
    }

    #[test]
    fn synthetic_basis_recovery() {
        // 1-sparse combinations of a known orthonormal 8-atom basis must be
        // reconstructable after 200 iterations.
        let m = 8;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let make = |rng: &mut ChaCha8Rng| {
            let j = rng.gen_range(0..m);
            let c: f64 = rng.gen_range(0.5..1.5);
            let mut x = vec![0.0; m];
            x[j] = c;
            x
        };
        let train: Vec<Vec<f64>> = (0..400).map(|_| make(&mut rng)).collect();
        let held_out: Vec<Vec<f64>> = (0..100).map(|_| make(&mut rng)).collect();
        let learned =
            learn_dictionary(&train, m, 0.1, 200, 7, ColorSpace::Gray, 1).unwrap();
        let mut err = 0.0;
        for x in &held_out {
            let code = lasso_encode(x, &learned.dictionary, 0.1).unwrap();
            err += code.objective(x, &learned.dictionary, 0.0); // pure reconstruction
        }
        err /= held_out.len() as f64;
        assert!(err < 0.05, "held-out reconstruction error {err}");
    }

    #[test]
    fn encode_constant_image_is_zero() {
        let mut dict = orthonormal_dict(4);
        dict.patch_side = 2;
        let img = ImageTensor::new(64, 64, ColorSpace::Gray, vec![0.6; 64 * 64]).unwrap();
        let f = encode_image(&img, &dict, 0.15).unwrap();
        assert!(f.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn encode_tiled_patch_matches_single_code() {
        // an image tiled from one fixed patch yields identical codes per patch,
        // so pooling equals the single |code| densified
        let mut dict = orthonormal_dict(4);
        dict.patch_side = 2;
        let tile = [0.9, 0.1, 0.4, 0.6];
        let mut values = vec![0.0; 128 * 128];
        for y in 0..128 {
            for x in 0..128 {
                values[y * 128 + x] = tile[(y % 2) * 2 + (x % 2)];
            }
        }
        let img = ImageTensor::new(128, 128, ColorSpace::Gray, values).unwrap();
        let f = encode_image(&img, &dict, 0.05).unwrap();
        let mut patch = vec![tile[0], tile[1], tile[2], tile[3]];
        let mean: f64 = patch.iter().sum::<f64>() / 4.0;
        for v in patch.iter_mut() {
            *v -= mean;
        }
        let expected = lasso_encode(&patch, &dict, 0.05).unwrap().to_dense(4);
        for (got, want) in f.values.iter().zip(expected.iter().map(|v| v.abs())) {
            assert!((got - want).abs() < 1e-9, "pooled {got} vs single-patch {want}");
        }
    }

    #[test]
    fn encode_with_production_sized_dictionary() {
        // 1024 atoms over 8x8 grayscale patches, the default roster size
        let mut rng_state = 0x600dd1c7u64;
        let mut next = move || {
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            (rng_state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let m = DEFAULT_PATCH_SIDE * DEFAULT_PATCH_SIDE;
        let mut atoms = vec![0.0; m * DEFAULT_ATOMS];
        for j in 0..DEFAULT_ATOMS {
            let col = &mut atoms[j * m..(j + 1) * m];
            for v in col.iter_mut() {
                *v = next();
            }
            let norm: f64 = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            for v in col.iter_mut() {
                *v /= norm;
            }
        }
        let dict = Dictionary {
            atom_dim: m,
            n_atoms: DEFAULT_ATOMS,
            atoms,
            colorspace: ColorSpace::Gray,
            patch_side: DEFAULT_PATCH_SIDE,
        };
        let img = ImageTensor::new(64, 64, ColorSpace::Gray, vec![0.3; 64 * 64]).unwrap();
        let f = encode_image(&img, &dict, DEFAULT_LAMBDA).unwrap();
        assert_eq!(f.dims(), 1024);
        assert!(f.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn encode_colorspace_mismatch_rejected() {
        let dict = orthonormal_dict(4);
        let img = ImageTensor::new(16, 16, ColorSpace::Rgb, vec![0.0; 16 * 16 * 3]).unwrap();
        assert!(encode_image(&img, &dict, 0.15).is_err());
    }

    #[test]
    fn dictionary_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.dict");
        let mut dict = orthonormal_dict(6);
        dict.colorspace = ColorSpace::Rgb;
        dict.patch_side = 8;
        save_dictionary(&path, &dict).unwrap();
        let back = load_dictionary(&path).unwrap();
        assert_eq!(back, dict);
    }
}
