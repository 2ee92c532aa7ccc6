//! Benchmark fixtures shared by the criterion targets in `benches/`.

use mamsr::{Shape, Tensor};

/// Deterministic non-trivial activations of the given shape.
pub fn activations(shape: Shape) -> Tensor<f32> {
    Tensor::from_fn(shape, |n, c, y, x| (((n * 31 + c * 7 + y * 3 + x) as f32) * 0.173).sin())
}
