//! Deterministic, seedable data augmentation: affine perturbations plus a
//! sinusoidal nonlinear warp, applied consistently to an image and its mask.
//!
//! Images resample bilinearly, masks nearest-neighbor, so a binary mask stays
//! binary under every transform. All sampling is inverse-mapped (output-driven)
//! with border clamping.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{ImageTensor, MaskImage};

/// Sinusoidal remapping parameters. Displacement along one axis is driven by
/// the coordinate on the *other* axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarpSpec {
    /// Peak horizontal displacement in pixels.
    pub amp_x: f64,
    /// Peak vertical displacement in pixels.
    pub amp_y: f64,
    /// Cycles per image height driving horizontal displacement.
    pub freq_x: f64,
    /// Cycles per image width driving vertical displacement.
    pub freq_y: f64,
    pub phase_x: f64,
    pub phase_y: f64,
}

impl WarpSpec {
    pub fn identity() -> Self {
        WarpSpec { amp_x: 0.0, amp_y: 0.0, freq_x: 0.0, freq_y: 0.0, phase_x: 0.0, phase_y: 0.0 }
    }

    fn validate(&self) -> Result<()> {
        if self.amp_x < 0.0 || self.amp_y < 0.0 || self.freq_x < 0.0 || self.freq_y < 0.0 {
            return Err(Error::contract("warp amplitudes and frequencies must be >= 0"));
        }
        Ok(())
    }
}

/// One concrete draw of augmentation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentParams {
    pub rotation_deg: f64,
    pub flip_h: bool,
    pub flip_v: bool,
    pub scale: f64,
    pub shift_x: f64,
    pub shift_y: f64,
    /// Centered crop retaining this fraction of each dimension, re-resized back.
    pub crop_fraction: f64,
    pub warp: WarpSpec,
}

impl AugmentParams {
    pub fn identity() -> Self {
        AugmentParams {
            rotation_deg: 0.0,
            flip_h: false,
            flip_v: false,
            scale: 1.0,
            shift_x: 0.0,
            shift_y: 0.0,
            crop_fraction: 1.0,
            warp: WarpSpec::identity(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.scale <= 0.0 {
            return Err(Error::contract("scale must be > 0"));
        }
        if !(self.crop_fraction > 0.0 && self.crop_fraction <= 1.0) {
            return Err(Error::contract("crop_fraction must lie in (0, 1]"));
        }
        self.warp.validate()
    }
}

/// Per-field sampling bounds for [`sample_params`]. Boolean fields toggle
/// whether the corresponding flip is ever drawn (50/50 when enabled).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentRanges {
    pub rotation_deg: (f64, f64),
    pub flip_h: bool,
    pub flip_v: bool,
    pub scale: (f64, f64),
    pub shift_x: (f64, f64),
    pub shift_y: (f64, f64),
    pub crop_fraction: (f64, f64),
    pub amp: (f64, f64),
    pub freq: (f64, f64),
    pub phase: (f64, f64),
}

impl AugmentRanges {
    /// Conservative defaults for a `width` x `height` image.
    pub fn default_for(width: usize, height: usize) -> Self {
        AugmentRanges {
            rotation_deg: (-180.0, 180.0),
            flip_h: true,
            flip_v: true,
            scale: (0.8, 1.2),
            shift_x: (-0.1 * width as f64, 0.1 * width as f64),
            shift_y: (-0.1 * height as f64, 0.1 * height as f64),
            crop_fraction: (0.8, 1.0),
            amp: (0.0, 5.0),
            freq: (0.0, 3.0),
            phase: (0.0, std::f64::consts::TAU),
        }
    }

    /// Degenerate ranges that always sample the identity transform.
    pub fn identity() -> Self {
        AugmentRanges {
            rotation_deg: (0.0, 0.0),
            flip_h: false,
            flip_v: false,
            scale: (1.0, 1.0),
            shift_x: (0.0, 0.0),
            shift_y: (0.0, 0.0),
            crop_fraction: (1.0, 1.0),
            amp: (0.0, 0.0),
            freq: (0.0, 0.0),
            phase: (0.0, 0.0),
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [
            ("rotation_deg", self.rotation_deg),
            ("scale", self.scale),
            ("shift_x", self.shift_x),
            ("shift_y", self.shift_y),
            ("crop_fraction", self.crop_fraction),
            ("amp", self.amp),
            ("freq", self.freq),
            ("phase", self.phase),
        ] {
            if lo > hi {
                return Err(Error::contract(format!("inverted range for {name}: {lo} > {hi}")));
            }
        }
        if self.scale.0 <= 0.0 {
            return Err(Error::contract("scale range must be positive"));
        }
        if self.crop_fraction.0 <= 0.0 || self.crop_fraction.1 > 1.0 {
            return Err(Error::contract("crop_fraction range must lie in (0, 1]"));
        }
        if self.amp.0 < 0.0 || self.freq.0 < 0.0 {
            return Err(Error::contract("amp and freq ranges must be >= 0"));
        }
        Ok(())
    }
}

/// Draw one parameter set uniformly from `ranges`, reproducibly per seed.
pub fn sample_params(seed: u64, ranges: &AugmentRanges) -> Result<AugmentParams> {
    ranges.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |(lo, hi): (f64, f64)| if lo == hi { lo } else { rng.gen_range(lo..=hi) };
    let rotation_deg = draw(ranges.rotation_deg);
    let scale = draw(ranges.scale);
    let shift_x = draw(ranges.shift_x);
    let shift_y = draw(ranges.shift_y);
    let crop_fraction = draw(ranges.crop_fraction);
    let amp_x = draw(ranges.amp);
    let amp_y = draw(ranges.amp);
    let freq_x = draw(ranges.freq);
    let freq_y = draw(ranges.freq);
    let phase_x = draw(ranges.phase);
    let phase_y = draw(ranges.phase);
    let flip_h = ranges.flip_h && rng.gen_bool(0.5);
    let flip_v = ranges.flip_v && rng.gen_bool(0.5);
    Ok(AugmentParams {
        rotation_deg,
        flip_h,
        flip_v,
        scale,
        shift_x,
        shift_y,
        crop_fraction,
        warp: WarpSpec { amp_x, amp_y, freq_x, freq_y, phase_x, phase_y },
    })
}

/// Row-major 2x3 affine matrix mapping output pixel coordinates to source.
#[derive(Debug, Clone, Copy)]
struct Affine {
    m: [f64; 6],
}

impl Affine {
    fn identity() -> Self {
        Affine { m: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0] }
    }

    fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.m[0] * x + self.m[1] * y + self.m[2],
            self.m[3] * x + self.m[4] * y + self.m[5],
        )
    }

    fn then(&self, other: &Affine) -> Affine {
        // other after self
        let a = &self.m;
        let b = &other.m;
        Affine {
            m: [
                b[0] * a[0] + b[1] * a[3],
                b[0] * a[1] + b[1] * a[4],
                b[0] * a[2] + b[1] * a[5] + b[2],
                b[3] * a[0] + b[4] * a[3],
                b[3] * a[1] + b[4] * a[4],
                b[3] * a[2] + b[4] * a[5] + b[5],
            ],
        }
    }
}

/// Inverse transform: maps output coordinates back to input coordinates.
/// Forward order is flip, scale (including crop zoom), rotate about the image
/// center, then shift; the inverse composes the opposite way.
fn inverse_affine(p: &AugmentParams, width: usize, height: usize) -> Affine {
    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    let theta = -p.rotation_deg.to_radians(); // inverse rotation
    let (sin, cos) = theta.sin_cos();
    let s = p.crop_fraction / p.scale; // inverse zoom
    let fx = if p.flip_h { -1.0 } else { 1.0 };
    let fy = if p.flip_v { -1.0 } else { 1.0 };

    let to_center = Affine { m: [1.0, 0.0, -cx - p.shift_x, 0.0, 1.0, -cy - p.shift_y] };
    let rotate = Affine { m: [cos, -sin, 0.0, sin, cos, 0.0] };
    let zoom_flip = Affine { m: [s * fx, 0.0, 0.0, 0.0, s * fy, 0.0] };
    let from_center = Affine { m: [1.0, 0.0, cx, 0.0, 1.0, cy] };

    Affine::identity()
        .then(&to_center)
        .then(&rotate)
        .then(&zoom_flip)
        .then(&from_center)
}

#[inline]
fn sample_bilinear(plane: &[f64], w: usize, h: usize, x: f64, y: f64) -> f64 {
    let sx = x.clamp(0.0, (w - 1) as f64);
    let sy = y.clamp(0.0, (h - 1) as f64);
    let x0 = sx.floor() as usize;
    let y0 = sy.floor() as usize;
    let tx = sx - x0 as f64;
    let ty = sy - y0 as f64;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let top = plane[y0 * w + x0] * (1.0 - tx) + plane[y0 * w + x1] * tx;
    let bot = plane[y1 * w + x0] * (1.0 - tx) + plane[y1 * w + x1] * tx;
    top * (1.0 - ty) + bot * ty
}

#[inline]
fn sample_nearest(values: &[u8], w: usize, h: usize, x: f64, y: f64) -> u8 {
    let xi = x.round().clamp(0.0, (w - 1) as f64) as usize;
    let yi = y.round().clamp(0.0, (h - 1) as f64) as usize;
    values[yi * w + xi]
}

fn resample_affine(img: &ImageTensor, inv: &Affine) -> ImageTensor {
    let (w, h) = (img.width, img.height);
    let mut values = vec![0.0; img.values.len()];
    for c in 0..img.channels() {
        let plane = img.plane(c);
        let dst = &mut values[c * w * h..(c + 1) * w * h];
        for y in 0..h {
            for x in 0..w {
                let (sx, sy) = inv.apply(x as f64, y as f64);
                dst[y * w + x] = sample_bilinear(plane, w, h, sx, sy);
            }
        }
    }
    ImageTensor { width: w, height: h, colorspace: img.colorspace, values }
}

fn resample_affine_mask(mask: &MaskImage, inv: &Affine) -> MaskImage {
    let (w, h) = (mask.width, mask.height);
    let mut values = vec![0u8; mask.values.len()];
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = inv.apply(x as f64, y as f64);
            values[y * w + x] = sample_nearest(&mask.values, w, h, sx, sy);
        }
    }
    MaskImage { width: w, height: h, values }
}

/// Source coordinate of output pixel (x, y) under the sinusoidal remap.
#[inline]
fn warp_source(w: &WarpSpec, x: usize, y: usize, width: usize, height: usize) -> (f64, f64) {
    let sx = x as f64
        + w.amp_x * (std::f64::consts::TAU * w.freq_x * y as f64 / height as f64 + w.phase_x).sin();
    let sy = y as f64
        + w.amp_y * (std::f64::consts::TAU * w.freq_y * x as f64 / width as f64 + w.phase_y).sin();
    (sx, sy)
}

/// Sinusoidal remap of an image and optional mask. Zero amplitude is an exact
/// identity because source coordinates stay integral.
pub fn sinusoidal_warp(
    img: &ImageTensor,
    mask: Option<&MaskImage>,
    w: &WarpSpec,
) -> Result<(ImageTensor, Option<MaskImage>)> {
    w.validate()?;
    let (width, height) = (img.width, img.height);
    let mut values = vec![0.0; img.values.len()];
    for c in 0..img.channels() {
        let plane = img.plane(c);
        let dst = &mut values[c * width * height..(c + 1) * width * height];
        for y in 0..height {
            for x in 0..width {
                let (sx, sy) = warp_source(w, x, y, width, height);
                dst[y * width + x] = sample_bilinear(plane, width, height, sx, sy);
            }
        }
    }
    let out_img = ImageTensor { width, height, colorspace: img.colorspace, values };
    let out_mask = mask.map(|m| {
        let mut values = vec![0u8; m.values.len()];
        for y in 0..height {
            for x in 0..width {
                let (sx, sy) = warp_source(w, x, y, width, height);
                values[y * width + x] = sample_nearest(&m.values, width, height, sx, sy);
            }
        }
        MaskImage { width, height, values }
    });
    Ok((out_img, out_mask))
}

/// Apply one augmentation draw to an image and optional mask. The image
/// resamples bilinearly and the mask nearest-neighbor; output dimensions equal
/// input dimensions.
pub fn apply(
    img: &ImageTensor,
    mask: Option<&MaskImage>,
    p: &AugmentParams,
) -> Result<(ImageTensor, Option<MaskImage>)> {
    p.validate()?;
    if let Some(m) = mask {
        if m.width != img.width || m.height != img.height {
            return Err(Error::contract(format!(
                "mask {}x{} does not match image {}x{}",
                m.width, m.height, img.width, img.height
            )));
        }
    }
    let affine_is_identity = p.rotation_deg == 0.0
        && !p.flip_h
        && !p.flip_v
        && p.scale == 1.0
        && p.shift_x == 0.0
        && p.shift_y == 0.0
        && p.crop_fraction == 1.0;
    let (img1, mask1) = if affine_is_identity {
        (img.clone(), mask.cloned())
    } else {
        let inv = inverse_affine(p, img.width, img.height);
        (resample_affine(img, &inv), mask.map(|m| resample_affine_mask(m, &inv)))
    };
    if p.warp.amp_x == 0.0 && p.warp.amp_y == 0.0 {
        return Ok((img1, mask1));
    }
    sinusoidal_warp(&img1, mask1.as_ref(), &p.warp)
}
