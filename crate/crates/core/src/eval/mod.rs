//! Luma-channel PSNR/SSIM and the dataset evaluation protocol.

pub mod metrics;
pub mod report;

pub use metrics::{psnr, rgb_tensor_to_y, rgb_to_y, ssim, YImage};
pub use report::{evaluate, evaluate_pair, evaluate_pairs, pair_from_hr, EvalReport, EvalRow, Predictor};
