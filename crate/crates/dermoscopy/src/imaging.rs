//! Image decoding, color conversion, resizing, normalization, mask handling,
//! and the two-context cropping scheme.
//!
//! Pixel data is stored planar: one full `width * height` row-major plane per
//! channel. All values are `f64`; decoded 8-bit images are scaled by 1/255.

use std::io::Cursor;
use std::path::Path;

use crate::error::{Error, Result};

/// Color space tag of an [`ImageTensor`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ColorSpace {
    Rgb,
    Hsv,
    /// Six channels ordered R, G, B, H, S, V.
    RgbHsv6,
    Gray,
}

impl ColorSpace {
    pub fn channels(self) -> usize {
        match self {
            ColorSpace::Rgb | ColorSpace::Hsv => 3,
            ColorSpace::RgbHsv6 => 6,
            ColorSpace::Gray => 1,
        }
    }
}

/// Multi-channel floating-point raster. The unit of all pixel processing.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    pub width: usize,
    pub height: usize,
    pub colorspace: ColorSpace,
    /// Planar storage: plane `c` occupies `values[c*w*h .. (c+1)*w*h]`, row-major.
    pub values: Vec<f64>,
}

impl ImageTensor {
    pub fn new(width: usize, height: usize, colorspace: ColorSpace, values: Vec<f64>) -> Result<Self> {
        let expected = width * height * colorspace.channels();
        if values.len() != expected {
            return Err(Error::contract(format!(
                "image tensor needs {expected} values for {width}x{height}x{} ({} given)",
                colorspace.channels(),
                values.len()
            )));
        }
        Ok(Self { width, height, colorspace, values })
    }

    pub fn channels(&self) -> usize {
        self.colorspace.channels()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.values[c * self.width * self.height + y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        self.values[c * self.width * self.height + y * self.width + x] = v;
    }

    /// Row-major view of one channel plane.
    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.values[c * n..(c + 1) * n]
    }
}

/// Single-channel 8-bit raster; 0 = background, 255 = lesion, intermediate = confidence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskImage {
    pub width: usize,
    pub height: usize,
    pub values: Vec<u8>,
}

impl MaskImage {
    pub fn new(width: usize, height: usize, values: Vec<u8>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::contract(format!(
                "mask needs {} values for {width}x{height} ({} given)",
                width * height,
                values.len()
            )));
        }
        Ok(Self { width, height, values })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.values[y * self.width + x]
    }

    /// True when every pixel is exactly 0 or 255.
    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == 0 || v == 255)
    }
}

/// Half-open pixel rectangle: `x0, y0` inclusive, `x1, y1` exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundingBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl BoundingBox {
    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }
}

// ---------------------------------------------------------------------------
// Decoding
// ---------------------------------------------------------------------------

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];

/// Decode PNG (8-bit) or binary PPM (P6) bytes into an RGB tensor scaled by 1/255.
pub fn decode_image(bytes: &[u8]) -> Result<ImageTensor> {
    if bytes.starts_with(&PNG_SIGNATURE) {
        decode_png_rgb(bytes)
    } else if bytes.starts_with(b"P6") {
        decode_ppm(bytes)
    } else {
        Err(Error::Decode {
            offset: 0,
            reason: "unrecognized magic: expected PNG or binary PPM (P6)".into(),
        })
    }
}

/// Decode an 8-bit grayscale (or uniform RGB) PNG into a mask.
pub fn decode_mask(bytes: &[u8]) -> Result<MaskImage> {
    let (width, height, channels, data) = decode_png_raw(bytes)?;
    let n = width * height;
    let mut values = Vec::with_capacity(n);
    match channels {
        1 => values.extend_from_slice(&data),
        2 => values.extend(data.chunks_exact(2).map(|p| p[0])),
        3 | 4 => {
            for p in data.chunks_exact(channels) {
                if p[0] != p[1] || p[1] != p[2] {
                    return Err(Error::Decode {
                        offset: 0,
                        reason: "mask PNG has non-uniform RGB channels; expected grayscale".into(),
                    });
                }
                values.push(p[0]);
            }
        }
        _ => unreachable!(),
    }
    MaskImage::new(width, height, values)
}

fn decode_png_rgb(bytes: &[u8]) -> Result<ImageTensor> {
    let (width, height, channels, data) = decode_png_raw(bytes)?;
    let n = width * height;
    let mut values = vec![0.0; n * 3];
    for (i, px) in data.chunks_exact(channels).enumerate() {
        let (r, g, b) = match channels {
            1 => (px[0], px[0], px[0]),
            2 => (px[0], px[0], px[0]),
            3 | 4 => (px[0], px[1], px[2]),
            _ => unreachable!(),
        };
        values[i] = f64::from(r) / 255.0;
        values[n + i] = f64::from(g) / 255.0;
        values[2 * n + i] = f64::from(b) / 255.0;
    }
    ImageTensor::new(width, height, ColorSpace::Rgb, values)
}

/// Decode any 8-bit PNG to (width, height, samples-per-pixel, interleaved bytes).
fn decode_png_raw(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<u8>)> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder
        .read_info()
        .map_err(|e| png_error(bytes, e.to_string()))?;
    let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(0)];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| png_error(bytes, e.to_string()))?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Decode {
            offset: 0,
            reason: format!("unsupported PNG bit depth {:?}; only 8-bit supported", info.bit_depth),
        });
    }
    let channels = info.color_type.samples();
    buf.truncate(info.buffer_size());
    Ok((info.width as usize, info.height as usize, channels, buf))
}

/// Locate the first structurally broken byte so PNG errors can name an offset.
fn png_error(bytes: &[u8], reason: String) -> Error {
    let mut pos = PNG_SIGNATURE.len();
    loop {
        if pos + 8 > bytes.len() {
            return Error::Decode { offset: pos, reason };
        }
        let len = u32::from_be_bytes([bytes[pos], bytes[pos + 1], bytes[pos + 2], bytes[pos + 3]])
            as usize;
        let chunk_end = pos + 8 + len + 4;
        if chunk_end > bytes.len() {
            return Error::Decode { offset: bytes.len(), reason };
        }
        if &bytes[pos + 4..pos + 8] == b"IEND" {
            // Structure is intact; the failure is inside compressed data.
            return Error::Decode { offset: pos, reason };
        }
        pos = chunk_end;
    }
}

/// Binary PPM (P6, maxval 255) decoder.
fn decode_ppm(bytes: &[u8]) -> Result<ImageTensor> {
    let mut pos = 2; // past "P6"
    let width = ppm_int(bytes, &mut pos)?;
    let height = ppm_int(bytes, &mut pos)?;
    let maxval = ppm_int(bytes, &mut pos)?;
    if maxval != 255 {
        return Err(Error::Decode {
            offset: pos,
            reason: format!("PPM maxval {maxval} unsupported; expected 255"),
        });
    }
    // Exactly one whitespace byte separates the header from pixel data.
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => {
            return Err(Error::Decode {
                offset: pos,
                reason: "expected single whitespace after PPM maxval".into(),
            })
        }
    }
    let n = width * height;
    let needed = n * 3;
    if bytes.len() < pos + needed {
        return Err(Error::Decode {
            offset: bytes.len(),
            reason: format!(
                "truncated PPM payload: {} of {} pixel bytes present",
                bytes.len() - pos,
                needed
            ),
        });
    }
    let data = &bytes[pos..pos + needed];
    let mut values = vec![0.0; needed];
    for (i, px) in data.chunks_exact(3).enumerate() {
        values[i] = f64::from(px[0]) / 255.0;
        values[n + i] = f64::from(px[1]) / 255.0;
        values[2 * n + i] = f64::from(px[2]) / 255.0;
    }
    ImageTensor::new(width, height, ColorSpace::Rgb, values)
}

/// Parse one whitespace/comment-delimited decimal field of a PPM header.
fn ppm_int(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    loop {
        match bytes.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while let Some(&b) = bytes.get(*pos) {
                    *pos += 1;
                    if b == b'\n' {
                        break;
                    }
                }
            }
            Some(_) => break,
            None => {
                return Err(Error::Decode {
                    offset: *pos,
                    reason: "truncated PPM header".into(),
                })
            }
        }
    }
    let start = *pos;
    while let Some(b) = bytes.get(*pos) {
        if b.is_ascii_digit() {
            *pos += 1;
        } else {
            break;
        }
    }
    if start == *pos {
        return Err(Error::Decode {
            offset: start,
            reason: "expected decimal integer in PPM header".into(),
        });
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or(Error::Decode {
            offset: start,
            reason: "invalid integer in PPM header".into(),
        })
}

// ---------------------------------------------------------------------------
// Encoding
// ---------------------------------------------------------------------------

/// Encode an RGB tensor as an 8-bit PNG (values clamped to [0,1] and rescaled).
pub fn encode_png_rgb(img: &ImageTensor) -> Result<Vec<u8>> {
    if img.colorspace != ColorSpace::Rgb {
        return Err(Error::contract("encode_png_rgb requires an RGB tensor"));
    }
    let n = img.width * img.height;
    let mut data = Vec::with_capacity(n * 3);
    for i in 0..n {
        for c in 0..3 {
            let v = img.values[c * n + i].clamp(0.0, 1.0);
            data.push((v * 255.0).round() as u8);
        }
    }
    encode_png(img.width, img.height, png::ColorType::Rgb, &data)
}

/// Encode a mask as an 8-bit grayscale PNG.
pub fn encode_png_mask(mask: &MaskImage) -> Result<Vec<u8>> {
    encode_png(mask.width, mask.height, png::ColorType::Grayscale, &mask.values)
}

fn encode_png(width: usize, height: usize, color: png::ColorType, data: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, width as u32, height as u32);
        encoder.set_color(color);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| Error::validation(format!("png encode: {e}")))?;
        writer
            .write_image_data(data)
            .map_err(|e| Error::validation(format!("png encode: {e}")))?;
    }
    Ok(out)
}

pub fn load_image(path: &Path) -> Result<ImageTensor> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes)
}

pub fn load_mask(path: &Path) -> Result<MaskImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_mask(&bytes)
}

pub fn save_mask(path: &Path, mask: &MaskImage) -> Result<()> {
    let bytes = encode_png_mask(mask)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Color conversion
// ---------------------------------------------------------------------------

/// Hexcone RGB -> HSV. H is stored in [0,1); achromatic pixels get H = 0.
pub fn rgb_to_hsv(img: &ImageTensor) -> Result<ImageTensor> {
    if img.colorspace != ColorSpace::Rgb {
        return Err(Error::contract("rgb_to_hsv requires a 3-channel RGB tensor"));
    }
    let n = img.width * img.height;
    let mut values = vec![0.0; n * 3];
    for i in 0..n {
        let (h, s, v) = pixel_rgb_to_hsv(img.values[i], img.values[n + i], img.values[2 * n + i]);
        values[i] = h;
        values[n + i] = s;
        values[2 * n + i] = v;
    }
    ImageTensor::new(img.width, img.height, ColorSpace::Hsv, values)
}

pub(crate) fn pixel_rgb_to_hsv(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v = max;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta <= 0.0 {
        0.0
    } else {
        let sector = if max == r {
            ((g - b) / delta).rem_euclid(6.0)
        } else if max == g {
            (b - r) / delta + 2.0
        } else {
            (r - g) / delta + 4.0
        };
        let h = sector / 6.0;
        if h >= 1.0 {
            h - 1.0
        } else {
            h
        }
    };
    (h, s, v)
}

/// Concatenate RGB planes with their HSV conversion, ordered R,G,B,H,S,V.
pub fn six_channel(img: &ImageTensor) -> Result<ImageTensor> {
    if img.colorspace != ColorSpace::Rgb {
        return Err(Error::contract("six_channel requires a 3-channel RGB tensor"));
    }
    let hsv = rgb_to_hsv(img)?;
    let mut values = Vec::with_capacity(img.values.len() * 2);
    values.extend_from_slice(&img.values);
    values.extend_from_slice(&hsv.values);
    ImageTensor::new(img.width, img.height, ColorSpace::RgbHsv6, values)
}

/// Rec. 601 luminance plane.
pub fn luminance(img: &ImageTensor) -> Result<ImageTensor> {
    let n = img.width * img.height;
    let values = match img.colorspace {
        ColorSpace::Gray => img.values.clone(),
        ColorSpace::Rgb | ColorSpace::RgbHsv6 => (0..n)
            .map(|i| {
                0.299 * img.values[i] + 0.587 * img.values[n + i] + 0.114 * img.values[2 * n + i]
            })
            .collect(),
        ColorSpace::Hsv => {
            return Err(Error::contract("luminance is undefined on HSV tensors"));
        }
    };
    ImageTensor::new(img.width, img.height, ColorSpace::Gray, values)
}

// ---------------------------------------------------------------------------
// Resampling and normalization
// ---------------------------------------------------------------------------

/// Bilinear resize with half-pixel-center sampling and edge clamping.
pub fn resize_bilinear(img: &ImageTensor, w: usize, h: usize) -> Result<ImageTensor> {
    if w == 0 || h == 0 {
        return Err(Error::contract("resize target dimensions must be >= 1"));
    }
    let channels = img.channels();
    let (sw, sh) = (img.width, img.height);
    let x_scale = sw as f64 / w as f64;
    let y_scale = sh as f64 / h as f64;
    let mut values = vec![0.0; w * h * channels];
    for c in 0..channels {
        let src = img.plane(c);
        let dst = &mut values[c * w * h..(c + 1) * w * h];
        for y in 0..h {
            let sy = ((y as f64 + 0.5) * y_scale - 0.5).clamp(0.0, (sh - 1) as f64);
            let y0 = sy.floor() as usize;
            let ty = sy - y0 as f64;
            let y1 = (y0 + 1).min(sh - 1);
            for x in 0..w {
                let sx = ((x as f64 + 0.5) * x_scale - 0.5).clamp(0.0, (sw - 1) as f64);
                let x0 = sx.floor() as usize;
                let tx = sx - x0 as f64;
                let x1 = (x0 + 1).min(sw - 1);
                let top = src[y0 * sw + x0] * (1.0 - tx) + src[y0 * sw + x1] * tx;
                let bot = src[y1 * sw + x0] * (1.0 - tx) + src[y1 * sw + x1] * tx;
                dst[y * w + x] = top * (1.0 - ty) + bot * ty;
            }
        }
    }
    ImageTensor::new(w, h, img.colorspace, values)
}

/// Resize so the longer side equals `long_side`, preserving aspect ratio.
pub fn resize_long_side(img: &ImageTensor, long_side: usize) -> Result<ImageTensor> {
    if long_side == 0 {
        return Err(Error::contract("long side must be >= 1"));
    }
    let (w, h) = if img.width >= img.height {
        let h = ((img.height * long_side + img.width / 2) / img.width).max(1);
        (long_side, h)
    } else {
        let w = ((img.width * long_side + img.height / 2) / img.height).max(1);
        (w, long_side)
    };
    resize_bilinear(img, w, h)
}

/// Per-channel standardization to zero mean and unit population std.
/// Channels with std below 1e-12 divide by 1 instead, so constants map to zero.
pub fn standardize(img: &ImageTensor) -> Result<ImageTensor> {
    let n = img.width * img.height;
    if n < 2 {
        return Err(Error::contract("standardize requires at least 2 pixels per channel"));
    }
    let mut values = img.values.clone();
    for c in 0..img.channels() {
        let plane = &mut values[c * n..(c + 1) * n];
        let mean = plane.iter().sum::<f64>() / n as f64;
        let var = plane.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        let denom = if std < 1e-12 { 1.0 } else { std };
        for v in plane.iter_mut() {
            *v = (*v - mean) / denom;
        }
    }
    ImageTensor::new(img.width, img.height, img.colorspace, values)
}

// ---------------------------------------------------------------------------
// Masks, boxes, crops
// ---------------------------------------------------------------------------

/// Binarization threshold shared by bounding boxes and mask fusion.
pub const MASK_THRESHOLD: u8 = 128;

/// Smallest box containing all pixels `>= threshold`.
pub fn mask_bbox(mask: &MaskImage, threshold: u8) -> Result<BoundingBox> {
    let mut x0 = usize::MAX;
    let mut y0 = usize::MAX;
    let mut x1 = 0usize;
    let mut y1 = 0usize;
    for y in 0..mask.height {
        for x in 0..mask.width {
            if mask.get(x, y) >= threshold {
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x + 1);
                y1 = y1.max(y + 1);
            }
        }
    }
    if x0 == usize::MAX {
        return Err(Error::EmptyMask { threshold });
    }
    Ok(BoundingBox { x0, y0, x1, y1 })
}

/// Extract the subimage covered by `bx` (all channels).
pub fn crop(img: &ImageTensor, bx: BoundingBox) -> Result<ImageTensor> {
    if bx.x0 >= bx.x1 || bx.y0 >= bx.y1 || bx.x1 > img.width || bx.y1 > img.height {
        return Err(Error::contract(format!(
            "crop box ({},{})-({},{}) out of bounds for {}x{}",
            bx.x0, bx.y0, bx.x1, bx.y1, img.width, img.height
        )));
    }
    let (cw, ch) = (bx.width(), bx.height());
    let n = img.width * img.height;
    let m = cw * ch;
    let mut values = vec![0.0; m * img.channels()];
    for c in 0..img.channels() {
        for y in 0..ch {
            let src = c * n + (bx.y0 + y) * img.width + bx.x0;
            let dst = c * m + y * cw;
            values[dst..dst + cw].copy_from_slice(&img.values[src..src + cw]);
        }
    }
    ImageTensor::new(cw, ch, img.colorspace, values)
}

/// Map mask intensities to the training range: v -> (v/255 - 0.5) * 1.9.
pub fn normalize_mask(mask: &MaskImage) -> Vec<f64> {
    mask.values
        .iter()
        .map(|&v| (f64::from(v) / 255.0 - 0.5) * 1.9)
        .collect()
}

/// Exact inverse of [`normalize_mask`], clamped to [0,255] and rounded.
pub fn denormalize_mask(width: usize, height: usize, grid: &[f64]) -> Result<MaskImage> {
    let values = grid
        .iter()
        .map(|&x| ((x / 1.9 + 0.5) * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    MaskImage::new(width, height, values)
}
