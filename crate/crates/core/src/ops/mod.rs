//! Differentiable primitives. Every forward op has a hand-written backward
//! counterpart; there is no autodiff graph.

mod activation;
mod conv;
mod dense;
mod pool;
mod shuffle;

pub use activation::{activation, relu, relu_backward, sigmoid, sigmoid_backward, sigmoid_scalar, Activation};
pub use conv::{
    conv2d, conv2d_backward, depthwise_conv2d, depthwise_conv2d_backward, ConvParams,
    DepthwiseParams,
};
pub use dense::{dense, dense_backward, DenseParams};
pub use pool::{
    global_pool, global_pool_backward, standardize_backward, standardize_channels, PoolStatistic,
};
pub use shuffle::{pixel_shuffle, space_to_depth};
