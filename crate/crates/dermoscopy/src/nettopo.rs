//! Topology model of the fully convolutional encoder/decoder used for lesion
//! segmentation: shape inference, parameter counting, training schedules,
//! early stopping, and confidence-mask ensemble fusion. No forward or backward
//! execution happens here.
//!
//! The network is three encoder stages (3 same-padded convolutions + one pool
//! each, filter counts doubling per stage), a dense bottleneck, and a mirrored
//! decoder (unpool, skip concatenation, 3 deconvolutions per stage, filter
//! counts halving). The bottleneck is modeled as flatten -> fc_dim -> dense
//! expansion back to the bottleneck grid. The first deconvolution of each
//! decoder stage uses a doubled-and-incremented kernel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{MaskImage, MASK_THRESHOLD};

pub const STAGES: usize = 3;
pub const INPUT_CHANNELS: usize = 6;
pub const OUTPUT_CHANNELS: usize = 1;
pub const FINAL_LEARN_RATE: f64 = 0.001;
pub const FINAL_MOMENTUM: f64 = 0.99;
pub const EARLY_STOP_PATIENCE: usize = 100;

/// Tunable parameters of one network, one row of the ensemble roster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UNetConfig {
    pub input_size: usize,
    pub kernel_size: usize,
    pub pool_size: usize,
    pub n_filters_stage1: usize,
    pub fc_dim: usize,
    pub dropout_a: f64,
    pub dropout_b: f64,
    pub dropout_c: f64,
    pub noise_sigma: f64,
    pub learn_rate0: f64,
    pub momentum0: f64,
    pub max_epochs: usize,
}

impl Default for UNetConfig {
    /// The optimized single-network configuration (ensemble roster row 1).
    fn default() -> Self {
        UNetConfig {
            input_size: 128,
            kernel_size: 5,
            pool_size: 2,
            n_filters_stage1: 32,
            fc_dim: 8192,
            dropout_a: 0.5,
            dropout_b: 0.5,
            dropout_c: 0.5,
            noise_sigma: 0.025,
            learn_rate0: 0.01,
            momentum0: 0.95,
            max_epochs: 2000,
        }
    }
}

impl UNetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_size == 0
            || self.kernel_size == 0
            || self.pool_size == 0
            || self.n_filters_stage1 == 0
            || self.fc_dim == 0
            || self.max_epochs == 0
        {
            return Err(Error::contract("all topology parameters must be positive"));
        }
        for d in [self.dropout_a, self.dropout_b, self.dropout_c] {
            if !(0.0..1.0).contains(&d) {
                return Err(Error::contract("dropout ratios must lie in [0, 1)"));
            }
        }
        let divisor = self.pool_size.pow(STAGES as u32);
        if self.input_size % divisor != 0 {
            return Err(Error::contract(format!(
                "input size {} not divisible by pool_size^{STAGES} = {divisor}",
                self.input_size
            )));
        }
        Ok(())
    }

    /// Kernel of the first deconvolution in each decoder stage.
    pub fn decoder_first_kernel(&self) -> usize {
        2 * self.kernel_size + 1
    }
}

/// One layer's output shape and parameter count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub name: String,
    pub out_channels: usize,
    pub height: usize,
    pub width: usize,
    pub params: u64,
}

fn conv_params(kernel: usize, in_ch: usize, out_ch: usize) -> u64 {
    (kernel * kernel * in_ch * out_ch + out_ch) as u64
}

fn dense_params(in_dim: usize, out_dim: usize) -> u64 {
    (in_dim * out_dim + out_dim) as u64
}

/// Full layer roster: encoder, bottleneck, mirrored decoder, output map.
pub fn infer_shapes(c: &UNetConfig) -> Result<Vec<LayerShape>> {
    c.validate()?;
    let mut layers = Vec::new();
    let mut size = c.input_size;
    let mut channels = INPUT_CHANNELS;
    layers.push(LayerShape {
        name: "input".into(),
        out_channels: channels,
        height: size,
        width: size,
        params: 0,
    });

    // encoder: filter counts n, 2n, 4n; spatial size divides by pool each stage
    let mut skip_channels = Vec::with_capacity(STAGES);
    for stage in 0..STAGES {
        let filters = c.n_filters_stage1 << stage;
        for conv in 0..3 {
            layers.push(LayerShape {
                name: format!("conv{}_{}", stage + 1, conv + 1),
                out_channels: filters,
                height: size,
                width: size,
                params: conv_params(c.kernel_size, channels, filters),
            });
            channels = filters;
        }
        skip_channels.push(channels);
        size /= c.pool_size;
        layers.push(LayerShape {
            name: format!("pool{}", stage + 1),
            out_channels: channels,
            height: size,
            width: size,
            params: 0,
        });
    }

    // dense bottleneck: flatten -> fc_dim -> expand back to the spatial grid
    let bottleneck = channels * size * size;
    layers.push(LayerShape {
        name: "fc".into(),
        out_channels: c.fc_dim,
        height: 1,
        width: 1,
        params: dense_params(bottleneck, c.fc_dim),
    });
    layers.push(LayerShape {
        name: "expand".into(),
        out_channels: channels,
        height: size,
        width: size,
        params: dense_params(c.fc_dim, bottleneck),
    });

    // decoder: unpool, concatenate the skip source, then 3 deconvolutions;
    // filter counts halve across stages back down to n
    for stage in (0..STAGES).rev() {
        let filters = c.n_filters_stage1 << stage;
        size *= c.pool_size;
        layers.push(LayerShape {
            name: format!("unpool{}", stage + 1),
            out_channels: channels,
            height: size,
            width: size,
            params: 0,
        });
        channels += skip_channels[stage];
        layers.push(LayerShape {
            name: format!("concat{}", stage + 1),
            out_channels: channels,
            height: size,
            width: size,
            params: 0,
        });
        for conv in 0..3 {
            let kernel = if conv == 0 { c.decoder_first_kernel() } else { c.kernel_size };
            layers.push(LayerShape {
                name: format!("deconv{}_{}", stage + 1, conv + 1),
                out_channels: filters,
                height: size,
                width: size,
                params: conv_params(kernel, channels, filters),
            });
            channels = filters;
        }
    }

    layers.push(LayerShape {
        name: "output".into(),
        out_channels: OUTPUT_CHANNELS,
        height: size,
        width: size,
        params: conv_params(1, channels, OUTPUT_CHANNELS),
    });
    Ok(layers)
}

/// Total learnable parameters under this topology interpretation.
pub fn param_count(c: &UNetConfig) -> Result<u64> {
    Ok(infer_shapes(c)?.iter().map(|l| l.params).sum())
}

/// Linear learning-rate / momentum schedule from the configured starting
/// values at epoch 1 to (0.001, 0.99) at the final epoch.
pub fn schedule(epoch: usize, c: &UNetConfig) -> Result<(f64, f64)> {
    c.validate()?;
    if epoch < 1 || epoch > c.max_epochs {
        return Err(Error::contract(format!(
            "epoch {epoch} outside [1, {}]",
            c.max_epochs
        )));
    }
    if c.max_epochs == 1 {
        return Ok((c.learn_rate0, c.momentum0));
    }
    let t = (epoch - 1) as f64 / (c.max_epochs - 1) as f64;
    let lr = c.learn_rate0 + (FINAL_LEARN_RATE - c.learn_rate0) * t;
    let mo = c.momentum0 + (FINAL_MOMENTUM - c.momentum0) * t;
    Ok((lr, mo))
}

/// Average confidence masks pixel-wise in real arithmetic, then binarize at
/// an inclusive threshold of 128.
pub fn fuse_masks(masks: &[MaskImage]) -> Result<MaskImage> {
    let first = masks
        .first()
        .ok_or_else(|| Error::contract("fuse_masks requires at least one mask"))?;
    let (w, h) = (first.width, first.height);
    for (i, m) in masks.iter().enumerate() {
        if m.width != w || m.height != h {
            return Err(Error::contract(format!(
                "mask {i} is {}x{}, expected {w}x{h}",
                m.width, m.height
            )));
        }
    }
    let inv = 1.0 / masks.len() as f64;
    let values = (0..w * h)
        .map(|i| {
            let mean: f64 = masks.iter().map(|m| f64::from(m.values[i])).sum::<f64>() * inv;
            if mean >= f64::from(MASK_THRESHOLD) {
                255
            } else {
                0
            }
        })
        .collect();
    MaskImage::new(w, h, values)
}

/// Early stopping: stop once the best (minimum) validation loss lies at least
/// `patience` epochs in the past. Returns (stop, best_epoch), earliest index
/// winning ties.
pub fn early_stop_check(history: &[f64], patience: usize) -> Result<(bool, usize)> {
    if history.is_empty() {
        return Err(Error::contract("early_stop_check requires a nonempty history"));
    }
    let mut best_epoch = 0;
    let mut best = history[0];
    for (i, &v) in history.iter().enumerate() {
        if v < best {
            best = v;
            best_epoch = i;
        }
    }
    let elapsed = history.len() - 1 - best_epoch;
    Ok((elapsed >= patience, best_epoch))
}
