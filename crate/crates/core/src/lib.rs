//! Single-image super-resolution with multi-path adaptive modulation blocks.
//!
//! Each residual block gates its residual features with
//! `σ(M_csi + M_icd + M_csd)`: a standardized per-channel variance (CSI), two
//! fully-connected layers over that statistic (ICD), and a 3×3 depth-wise
//! convolution (CSD). All forward and backward passes are hand-written over a
//! small NCHW [`Tensor`] type, generic over `f32` and `f64` so the same code is
//! verified against finite differences in double precision.

pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod image_io;
pub mod model;
pub mod synth;
pub mod ops;
pub mod tensor;
pub mod train;

pub use error::{CheckpointError, Error, ImageError, Result};
pub use image_io::Image;
pub use model::{Model, ModelParams, NetworkConfig, Paths};
pub use ops::PoolStatistic;
pub use tensor::{Scalar, Shape, Tensor};

/// Configures the global worker pool from `MAMSR_THREADS`, if set.
/// Later calls are no-ops.
pub fn init_thread_pool() {
    if let Some(n) = std::env::var("MAMSR_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}
