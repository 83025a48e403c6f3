//! Skin lesion recognition ensemble.
//!
//! The pipeline mirrors a two-stage clinical workflow:
//!
//! 1. **Segmentation support** — mask normalization, confidence-mask ensemble
//!    fusion, seedable augmentation (affine + sinusoidal warp), and a topology
//!    calculator for the fully convolutional encoder/decoder used upstream.
//! 2. **Classification** — hand-coded descriptors (HSV color histogram, Sobel
//!    edge histogram, multiscale color LBP) and sparse-coding features over two
//!    image contexts (whole image / lesion crop), histogram-intersection-kernel
//!    SVMs with sigmoid feature normalization and logistic calibration, score
//!    fusion (average / vote), greedy and forward ensemble selection, and the
//!    full metric suite (AP, AUC/ROC, SP95, pixel-wise Jaccard).
//!
//! Deep-network descriptors (CNN FC6, residual-net concepts, encoder shape
//! codes) are ingested as precomputed vectors; no network inference runs here.
//!
//! See the `examples/` directory for one runnable program per capability and
//! the `dermoscopy` binary for the batch CLI.

pub mod augment;
pub mod classify;
pub mod cv;
pub mod ensemble;
pub mod error;
pub mod features;
pub mod imaging;
pub mod metrics;
pub mod nettopo;
pub mod pipeline;
pub mod sparse;

pub use error::{Error, Result};
