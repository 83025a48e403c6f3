//! Online dictionary learning and lasso encoding: learn atoms from image
//! patches, serialize the dictionary, and pool sparse codes into an
//! image-level descriptor.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dermoscopy::imaging::{ColorSpace, ImageTensor};
use dermoscopy::sparse::{
    encode_image, extract_patches, lasso_encode, learn_dictionary, load_dictionary,
    save_dictionary,
};

fn main() -> dermoscopy::Result<()> {
    // a textured grayscale image: sums of shifted waves
    let side = 128usize;
    let mut values = vec![0.0; side * side];
    for y in 0..side {
        for x in 0..side {
            let u = x as f64 / 9.0;
            let v = y as f64 / 7.0;
            values[y * side + x] = 0.5 + 0.25 * u.sin() + 0.2 * (u + v).cos();
        }
    }
    let image = ImageTensor::new(side, side, ColorSpace::Gray, values)?;

    // training patches sampled densely (stride 4), encoding later uses stride 8
    let patches = extract_patches(&image, 8, 4)?;
    println!("training on {} mean-removed 8x8 patches", patches.len());

    let learned = learn_dictionary(&patches, 32, 0.15, 60, 7, ColorSpace::Gray, 8)?;
    let first = learned.surrogate_trace.first().unwrap();
    let last = learned.surrogate_trace.last().unwrap();
    println!(
        "surrogate objective: {:.4} -> {:.4} over {} iterations (never rising within an update)",
        first.before,
        last.after,
        learned.surrogate_trace.len()
    );

    // every update step decreased the quadratic surrogate
    let monotone = learned
        .surrogate_trace
        .iter()
        .all(|s| s.after <= s.before + 1e-12);
    println!("block-coordinate descent monotone: {monotone}");

    // round-trip the dictionary file
    let dir = tempfile::tempdir().map_err(|e| dermoscopy::Error::io("tempdir", e))?;
    let path = dir.path().join("texture.dict");
    save_dictionary(&path, &learned.dictionary)?;
    let dict = load_dictionary(&path)?;
    println!(
        "dictionary round-trip: {} atoms of dim {} ({:?})",
        dict.n_atoms, dict.atom_dim, dict.colorspace
    );

    // sparse code of one patch
    let code = lasso_encode(&patches[10], &dict, 0.15)?;
    println!(
        "patch 10 encodes with {} active atoms: {:?}",
        code.nnz(),
        code.indices
    );

    // pooled image-level descriptor
    let descriptor = encode_image(&image, &dict, 0.15)?;
    let active = descriptor.values.iter().filter(|&&v| v > 0.0).count();
    println!(
        "pooled descriptor: {} dims, {} nonzero, all nonnegative: {}",
        descriptor.dims(),
        active,
        descriptor.values.iter().all(|&v| v >= 0.0)
    );

    // a noise dictionary reconstructs worse than the learned one
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let noise_patches: Vec<Vec<f64>> = (0..64)
        .map(|_| (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let noise = learn_dictionary(&noise_patches, 32, 0.15, 1, 1, ColorSpace::Gray, 8)?;
    let err = |d: &dermoscopy::sparse::Dictionary| -> dermoscopy::Result<f64> {
        let mut total = 0.0;
        for p in patches.iter().take(50) {
            let code = lasso_encode(p, d, 0.15)?;
            total += code.objective(p, d, 0.0);
        }
        Ok(total / 50.0)
    };
    println!(
        "mean reconstruction error: learned {:.5} vs noise atoms {:.5}",
        err(&dict)?,
        err(&noise.dictionary)?
    );
    Ok(())
}
