//! The three hand-coded descriptors on a synthetic two-tone lesion image:
//! 166-bin HSV color histogram, 64-bin Sobel edge histogram, and the
//! 236-bin multiscale color LBP.

use dermoscopy::features::{color_histogram_166, edge_histogram_64, mslbp_236};
use dermoscopy::imaging::{ColorSpace, ImageTensor};

fn main() -> dermoscopy::Result<()> {
    let side = 64usize;
    let n = side * side;
    let mut values = vec![0.0; n * 3];
    for y in 0..side {
        for x in 0..side {
            let inside = {
                let dx = x as f64 - 32.0;
                let dy = y as f64 - 32.0;
                dx * dx + dy * dy < 18.0 * 18.0
            };
            let i = y * side + x;
            if inside {
                // brownish lesion with a little texture
                let t = ((x * 3 + y * 5) % 7) as f64 / 40.0;
                values[i] = 0.45 + t;
                values[n + i] = 0.25 + t;
                values[2 * n + i] = 0.15;
            } else {
                // pale skin
                values[i] = 0.85;
                values[n + i] = 0.72;
                values[2 * n + i] = 0.62;
            }
        }
    }
    let image = ImageTensor::new(side, side, ColorSpace::Rgb, values)?;

    for feature in [
        color_histogram_166(&image)?,
        edge_histogram_64(&image)?,
        mslbp_236(&image)?,
    ] {
        let sum: f64 = feature.values.iter().sum();
        let mut indexed: Vec<(usize, f64)> =
            feature.values.iter().cloned().enumerate().collect();
        indexed.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        let top: Vec<String> = indexed
            .iter()
            .take(3)
            .map(|(i, v)| format!("bin {i}: {v:.3}"))
            .collect();
        println!(
            "{:<12} {} dims, L1 mass {:.6}, heaviest bins: {}",
            feature.name,
            feature.dims(),
            sum,
            top.join(", ")
        );
    }
    Ok(())
}
