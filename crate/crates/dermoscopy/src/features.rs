//! Hand-coded descriptors: 166-bin HSV color histogram, 64-bin Sobel edge
//! histogram, and 236-bin multiscale color LBP.
//!
//! Every extractor returns an L1-normalized nonnegative histogram, which is
//! what the histogram-intersection kernel downstream expects.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{self, ColorSpace, ImageTensor};

pub const COLOR_HIST: &str = "color_hist";
pub const EDGE_HIST: &str = "edge_hist";
pub const MSLBP: &str = "mslbp";
pub const SC_RGB: &str = "sc_rgb";
pub const SC_GRAY: &str = "sc_gray";
pub const CAFFE_FC6: &str = "caffe_fc6";
pub const DRN_CONCEPTS: &str = "drn_concepts";
pub const UNET_SHAPE: &str = "unet_shape";

/// Fixed dimensionality of a named feature, if declared.
pub fn declared_dims(name: &str) -> Option<usize> {
    match name {
        COLOR_HIST => Some(166),
        EDGE_HIST => Some(64),
        MSLBP => Some(236),
        SC_RGB | SC_GRAY | UNET_SHAPE => Some(1024),
        CAFFE_FC6 => Some(4096),
        DRN_CONCEPTS => Some(1000),
        _ => None,
    }
}

/// A named nonnegative feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub name: String,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if let Some(dims) = declared_dims(&name) {
            if values.len() != dims {
                return Err(Error::contract(format!(
                    "feature {name} declares {dims} dims, got {}",
                    values.len()
                )));
            }
        }
        Ok(FeatureVector { name, values })
    }

    pub fn dims(&self) -> usize {
        self.values.len()
    }
}

fn l1_normalize(values: &mut [f64]) {
    let sum: f64 = values.iter().sum();
    if sum > 0.0 {
        for v in values.iter_mut() {
            *v /= sum;
        }
    }
}

// ---------------------------------------------------------------------------
// 166-bin HSV color histogram
// ---------------------------------------------------------------------------

/// Chromatic pixels fall into 18 hue x 3 saturation x 3 value bins; pixels
/// with S or V below this cutoff land in 4 achromatic bins split by V.
const ACHROMATIC_CUTOFF: f64 = 0.1;
const GRAY_BIN_BASE: usize = 162;

fn color_bin(r: f64, g: f64, b: f64) -> usize {
    let (h, s, v) = imaging::pixel_rgb_to_hsv(r, g, b);
    if s < ACHROMATIC_CUTOFF || v < ACHROMATIC_CUTOFF {
        let q = ((v * 4.0) as usize).min(3);
        GRAY_BIN_BASE + q
    } else {
        let hb = ((h * 18.0) as usize).min(17);
        let sb = ((s * 3.0) as usize).min(2);
        let vb = ((v * 3.0) as usize).min(2);
        hb * 9 + sb * 3 + vb
    }
}

/// 166-dimensional HSV color histogram; each pixel increments exactly one bin.
pub fn color_histogram_166(img: &ImageTensor) -> Result<FeatureVector> {
    if img.colorspace != ColorSpace::Rgb {
        return Err(Error::contract("color_histogram_166 requires a 3-channel RGB tensor"));
    }
    let n = img.width * img.height;
    if n == 0 {
        return Err(Error::contract("color_histogram_166 requires a nonempty image"));
    }
    let mut hist = vec![0.0; 166];
    for i in 0..n {
        hist[color_bin(img.values[i], img.values[n + i], img.values[2 * n + i])] += 1.0;
    }
    l1_normalize(&mut hist);
    FeatureVector::new(COLOR_HIST, hist)
}

// ---------------------------------------------------------------------------
// 64-bin Sobel edge histogram
// ---------------------------------------------------------------------------

/// Largest possible Sobel response magnitude for a luminance plane in [0,1].
const SOBEL_MAX_MAGNITUDE: f64 = 5.656854249492381; // 4 * sqrt(2)

/// Joint 8-direction x 8-magnitude Sobel histogram over interior pixels.
/// Directions fold to [0, pi); zero-gradient pixels count in bin (0, 0).
pub fn edge_histogram_64(img: &ImageTensor) -> Result<FeatureVector> {
    if img.width < 3 || img.height < 3 {
        return Err(Error::contract("edge_histogram_64 requires at least a 3x3 image"));
    }
    let luma = imaging::luminance(img)?;
    let (w, h) = (luma.width, luma.height);
    let p = &luma.values;
    let mut hist = vec![0.0; 64];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let idx = |dx: isize, dy: isize| {
                p[((y as isize + dy) as usize) * w + (x as isize + dx) as usize]
            };
            let gx = idx(1, -1) + 2.0 * idx(1, 0) + idx(1, 1)
                - idx(-1, -1)
                - 2.0 * idx(-1, 0)
                - idx(-1, 1);
            let gy = idx(-1, 1) + 2.0 * idx(0, 1) + idx(1, 1)
                - idx(-1, -1)
                - 2.0 * idx(0, -1)
                - idx(1, -1);
            let mag = (gx * gx + gy * gy).sqrt();
            // flat regions leave rounding residue in gx/gy; treat as zero
            let dir_bin = if mag < 1e-12 {
                0
            } else {
                let mut theta = gy.atan2(gx);
                if theta < 0.0 {
                    theta += std::f64::consts::PI;
                }
                if theta >= std::f64::consts::PI {
                    theta = 0.0;
                }
                ((theta / std::f64::consts::PI * 8.0) as usize).min(7)
            };
            let mag_bin = if mag < 1e-12 {
                0
            } else {
                ((mag / SOBEL_MAX_MAGNITUDE * 8.0) as usize).min(7)
            };
            hist[dir_bin * 8 + mag_bin] += 1.0;
        }
    }
    l1_normalize(&mut hist);
    FeatureVector::new(EDGE_HIST, hist)
}

// ---------------------------------------------------------------------------
// 236-bin multiscale color LBP
// ---------------------------------------------------------------------------

/// Map byte patterns to 59 bins: the 58 uniform patterns (at most two circular
/// 0/1 transitions) in ascending byte order, then one catch-all.
fn uniform_lbp_table() -> [u8; 256] {
    let mut table = [58u8; 256];
    let mut next = 0u8;
    for pattern in 0u16..256 {
        let p = pattern as u8;
        let transitions = (0..8)
            .filter(|&i| {
                let a = (p >> i) & 1;
                let b = (p >> ((i + 1) % 8)) & 1;
                a != b
            })
            .count();
        if transitions <= 2 {
            table[p as usize] = next;
            next += 1;
        }
    }
    debug_assert_eq!(next, 58);
    table
}

/// Neighbor offsets in lookup order: bit k set when neighbor k >= center.
const LBP_NEIGHBORS: [(isize, isize); 8] =
    [(-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0)];

/// The uniform bin holding the all-ones pattern (every neighbor >= center,
/// which is what ties on a constant patch produce).
pub const LBP_ALL_ONES_BIN: usize = 57;
/// The catch-all bin for non-uniform patterns.
pub const LBP_CATCH_ALL_BIN: usize = 58;

fn lbp_histogram_59(plane: &[f64], w: usize, h: usize, table: &[u8; 256]) -> Vec<f64> {
    let mut hist = vec![0.0; 59];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let center = plane[y * w + x];
            let mut pattern = 0u8;
            for (bit, (dx, dy)) in LBP_NEIGHBORS.iter().enumerate() {
                let v = plane[((y as isize + dy) as usize) * w + (x as isize + dx) as usize];
                if v >= center {
                    pattern |= 1 << bit;
                }
            }
            hist[table[pattern as usize] as usize] += 1.0;
        }
    }
    l1_normalize(&mut hist);
    hist
}

const LBP_SCALES: [f64; 4] = [1.0, 0.5, 0.25, 0.125];

/// Multiscale color LBP over R, G, B, and Hue: per channel, uniform-pattern
/// histograms at 1/1, 1/2, 1/4, 1/8 scale are combined with weights equal to
/// the scale factor, then L1-normalized; channels concatenate to 236 dims.
/// Scales smaller than 3x3 are skipped and the weights renormalized.
pub fn mslbp_236(img: &ImageTensor) -> Result<FeatureVector> {
    if img.colorspace != ColorSpace::Rgb {
        return Err(Error::contract("mslbp_236 requires a 3-channel RGB tensor"));
    }
    if img.width < 3 || img.height < 3 {
        return Err(Error::contract("mslbp_236 requires at least a 3x3 image"));
    }
    let table = uniform_lbp_table();
    let hsv = imaging::rgb_to_hsv(img)?;
    let n = img.width * img.height;
    let mut channels: Vec<Vec<f64>> = Vec::with_capacity(4);
    for c in 0..3 {
        channels.push(img.values[c * n..(c + 1) * n].to_vec());
    }
    channels.push(hsv.values[..n].to_vec()); // hue plane

    let mut out = Vec::with_capacity(236);
    for plane in &channels {
        let tensor =
            ImageTensor::new(img.width, img.height, ColorSpace::Gray, plane.clone())?;
        let mut acc = vec![0.0; 59];
        let mut total_weight = 0.0;
        for &s in &LBP_SCALES {
            let sw = ((img.width as f64 * s).round() as usize).max(1);
            let sh = ((img.height as f64 * s).round() as usize).max(1);
            if sw < 3 || sh < 3 {
                continue;
            }
            let scaled = if s == 1.0 {
                tensor.clone()
            } else {
                imaging::resize_bilinear(&tensor, sw, sh)?
            };
            let hist = lbp_histogram_59(&scaled.values, sw, sh, &table);
            for (a, v) in acc.iter_mut().zip(&hist) {
                *a += s * v;
            }
            total_weight += s;
        }
        if total_weight == 0.0 {
            return Err(Error::contract("mslbp_236: no scale is at least 3x3"));
        }
        l1_normalize(&mut acc);
        out.extend_from_slice(&acc);
    }
    // channels carry equal mass; the whole vector sums to 1
    l1_normalize(&mut out);
    FeatureVector::new(MSLBP, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rgb_const(w: usize, h: usize, r: f64, g: f64, b: f64) -> ImageTensor {
        let n = w * h;
        let mut values = vec![0.0; n * 3];
        values[..n].fill(r);
        values[n..2 * n].fill(g);
        values[2 * n..].fill(b);
        ImageTensor::new(w, h, ColorSpace::Rgb, values).unwrap()
    }

    fn sums_to_one(v: &[f64]) -> bool {
        (v.iter().sum::<f64>() - 1.0).abs() < 1e-6 && v.iter().all(|&x| x >= 0.0)
    }

    #[test]
    fn color_hist_pure_red_single_bin() {
        let hist = color_histogram_166(&rgb_const(4, 4, 1.0, 0.0, 0.0)).unwrap();
        assert_eq!(hist.dims(), 166);
        assert!(sums_to_one(&hist.values));
        let nonzero: Vec<usize> =
            (0..166).filter(|&i| hist.values[i] > 0.0).collect();
        assert_eq!(nonzero.len(), 1);
        assert!(nonzero[0] < GRAY_BIN_BASE, "red must land in a chromatic bin");
        assert!((hist.values[nonzero[0]] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn color_hist_black_darkest_gray_bin() {
        let hist = color_histogram_166(&rgb_const(2, 2, 0.0, 0.0, 0.0)).unwrap();
        assert!((hist.values[GRAY_BIN_BASE] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn color_hist_two_pixel_split() {
        let values = vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]; // red + black, planar
        let img = ImageTensor::new(2, 1, ColorSpace::Rgb, values).unwrap();
        let hist = color_histogram_166(&img).unwrap();
        let red_bin = color_bin(1.0, 0.0, 0.0);
        assert!((hist.values[red_bin] - 0.5).abs() < 1e-12);
        assert!((hist.values[GRAY_BIN_BASE] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn color_hist_permutation_invariant() {
        let mut values = vec![0.0; 12 * 3];
        for i in 0..12 {
            values[i] = (i as f64) / 11.0;
            values[12 + i] = ((i * 7) % 12) as f64 / 11.0;
            values[24 + i] = ((i * 5) % 12) as f64 / 11.0;
        }
        let img = ImageTensor::new(4, 3, ColorSpace::Rgb, values.clone()).unwrap();
        let a = color_histogram_166(&img).unwrap();
        // reverse pixel order within each plane
        let mut rev = vec![0.0; 36];
        for c in 0..3 {
            for i in 0..12 {
                rev[c * 12 + i] = values[c * 12 + (11 - i)];
            }
        }
        let img2 = ImageTensor::new(4, 3, ColorSpace::Rgb, rev).unwrap();
        let b = color_histogram_166(&img2).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn edge_hist_constant_image_bin_zero() {
        let hist = edge_histogram_64(&rgb_const(5, 5, 0.4, 0.4, 0.4)).unwrap();
        assert_eq!(hist.dims(), 64);
        assert!((hist.values[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn edge_hist_vertical_step_single_direction() {
        // left half dark, right half bright: all gradient mass is horizontal,
        // so every nonzero-count bin shares direction bin 0.
        let n = 8 * 8;
        let mut values = vec![0.0; n * 3];
        for y in 0..8 {
            for x in 4..8 {
                for c in 0..3 {
                    values[c * n + y * 8 + x] = 1.0;
                }
            }
        }
        let img = ImageTensor::new(8, 8, ColorSpace::Rgb, values).unwrap();
        let hist = edge_histogram_64(&img).unwrap();
        let dir0_mass: f64 = hist.values[..8].iter().sum();
        assert!((dir0_mass - 1.0).abs() < 1e-12, "direction-0 mass {dir0_mass}");
        assert!(sums_to_one(&hist.values));
    }

    #[test]
    fn edge_hist_rejects_tiny_images() {
        assert!(edge_histogram_64(&rgb_const(2, 3, 0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn lbp_table_has_58_uniform_patterns() {
        let table = uniform_lbp_table();
        let uniform = table.iter().filter(|&&b| b != 58).count();
        assert_eq!(uniform, 58);
        assert_eq!(table[0], 0);
        assert_eq!(table[255], LBP_ALL_ONES_BIN as u8);
        assert_eq!(table[0b01010101], LBP_CATCH_ALL_BIN as u8);
    }

    #[test]
    fn mslbp_constant_image_all_ones_bin() {
        // each of the 4 channels carries mass 1/4, all of it in the uniform
        // bin of the all-ones pattern because ties compare as >=
        for &v in &[0.0, 0.37, 1.0] {
            let hist = mslbp_236(&rgb_const(16, 16, v, v, v)).unwrap();
            assert_eq!(hist.dims(), 236);
            for c in 0..4 {
                assert!(
                    (hist.values[c * 59 + LBP_ALL_ONES_BIN] - 0.25).abs() < 1e-9,
                    "channel {c}: ties must produce the all-ones pattern"
                );
            }
        }
    }

    #[test]
    fn mslbp_constant_value_independent() {
        let a = mslbp_236(&rgb_const(16, 16, 0.2, 0.2, 0.2)).unwrap();
        let b = mslbp_236(&rgb_const(16, 16, 0.9, 0.9, 0.9)).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn mslbp_checkerboard_hits_catch_all() {
        // Enumerating the 8-neighborhoods of a 0/1 checkerboard under the >=
        // rule: centers valued 1 see the alternating pattern 0b01010101
        // (catch-all); centers valued 0 see ties everywhere (all-ones). The
        // bilinear downsamples are constant 0.5, so every coarser scale lands
        // in the all-ones bin. At 16x16 the 1/8 scale (2x2) is skipped, so
        // scale 1 carries weight 1/1.75 and the catch-all bin gets
        // (1/1.75) * 0.5 = 2/7 of its channel's quarter share.
        let n = 16 * 16;
        let mut values = vec![0.0; n * 3];
        for y in 0..16 {
            for x in 0..16 {
                if (x + y) % 2 == 0 {
                    for c in 0..3 {
                        values[c * n + y * 16 + x] = 1.0;
                    }
                }
            }
        }
        let img = ImageTensor::new(16, 16, ColorSpace::Rgb, values).unwrap();
        let hist = mslbp_236(&img).unwrap();
        let expected_catch_all = 0.25 * (2.0 / 7.0);
        for c in 0..3 {
            let got = hist.values[c * 59 + LBP_CATCH_ALL_BIN];
            assert!(
                (got - expected_catch_all).abs() < 1e-9,
                "channel {c} catch-all {got} vs {expected_catch_all}"
            );
            let rest = hist.values[c * 59 + LBP_ALL_ONES_BIN];
            assert!((rest - (0.25 - expected_catch_all)).abs() < 1e-9);
        }
        // 0 and 1 pixels are both achromatic, so the hue plane is constant
        assert!((hist.values[3 * 59 + LBP_ALL_ONES_BIN] - 0.25).abs() < 1e-9);
    }

    #[test]
    fn extractors_stable_under_tiling() {
        // Tiling a periodic image 2x2 introduces no seams. Triangle waves
        // keep gradient magnitude constant everywhere, so the border rows the
        // smaller image never counts carry no special mass and (edge pixels
        // aside) each histogram shifts by < 2% L1 distance.
        let side = 24usize;
        let n = side * side;
        // phase-shifted so the slope creases sit interior to both images
        let tri = |t: usize| {
            let p = ((t + 6) % side) as f64 / side as f64 * 2.0;
            if p < 1.0 { p } else { 2.0 - p }
        };
        let mut values = vec![0.0; n * 3];
        for y in 0..side {
            for x in 0..side {
                values[y * side + x] = 0.2 + 0.6 * tri(x);
                values[n + y * side + x] = 0.2 + 0.6 * tri(y);
                values[2 * n + y * side + x] = 0.3 + 0.35 * (tri(x) + tri(y));
            }
        }
        let img = ImageTensor::new(side, side, ColorSpace::Rgb, values.clone()).unwrap();
        let big = side * 2;
        let bn = big * big;
        let mut tiled = vec![0.0; bn * 3];
        for c in 0..3 {
            for y in 0..big {
                for x in 0..big {
                    tiled[c * bn + y * big + x] =
                        values[c * n + (y % side) * side + (x % side)];
                }
            }
        }
        let tiled = ImageTensor::new(big, big, ColorSpace::Rgb, tiled).unwrap();
        for (f, g) in [
            (color_histogram_166(&img).unwrap(), color_histogram_166(&tiled).unwrap()),
            (edge_histogram_64(&img).unwrap(), edge_histogram_64(&tiled).unwrap()),
        ] {
            let l1: f64 = f.values.iter().zip(&g.values).map(|(a, b)| (a - b).abs()).sum();
            assert!(l1 < 0.02 * 2.0, "{} drifted by {l1}", f.name);
        }
    }

    #[test]
    fn mslbp_stable_under_tiling() {
        // The multiscale descriptor needs a meaningful interior at its 1/8
        // scale, so duplication invariance is checked at a working size.
        let side = 96usize;
        let n = side * side;
        let tri = |t: usize| {
            let p = ((t + side / 4) % side) as f64 / side as f64 * 2.0;
            if p < 1.0 { p } else { 2.0 - p }
        };
        let mut values = vec![0.0; n * 3];
        for y in 0..side {
            for x in 0..side {
                values[y * side + x] = 0.2 + 0.6 * tri(x);
                values[n + y * side + x] = 0.2 + 0.6 * tri(y);
                values[2 * n + y * side + x] = 0.3 + 0.35 * (tri(x) + tri(y));
            }
        }
        let img = ImageTensor::new(side, side, ColorSpace::Rgb, values.clone()).unwrap();
        let big = side * 2;
        let bn = big * big;
        let mut tiled = vec![0.0; bn * 3];
        for c in 0..3 {
            for y in 0..big {
                for x in 0..big {
                    tiled[c * bn + y * big + x] =
                        values[c * n + (y % side) * side + (x % side)];
                }
            }
        }
        let tiled = ImageTensor::new(big, big, ColorSpace::Rgb, tiled).unwrap();
        let f = mslbp_236(&img).unwrap();
        let g = mslbp_236(&tiled).unwrap();
        let l1: f64 = f.values.iter().zip(&g.values).map(|(a, b)| (a - b).abs()).sum();
        assert!(l1 < 0.02 * 2.0, "mslbp drifted by {l1}");
    }

    #[test]
    fn all_outputs_l1_normalized() {
        let mut values = vec![0.0; 16 * 16 * 3];
        for (i, v) in values.iter_mut().enumerate() {
            *v = ((i * 31) % 97) as f64 / 96.0;
        }
        let img = ImageTensor::new(16, 16, ColorSpace::Rgb, values).unwrap();
        for f in [
            color_histogram_166(&img).unwrap(),
            edge_histogram_64(&img).unwrap(),
            mslbp_236(&img).unwrap(),
        ] {
            assert!(sums_to_one(&f.values), "{} not normalized", f.name);
        }
    }
}
