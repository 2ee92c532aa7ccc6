use crate::error::Result;
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
}

pub fn activation<T: Scalar>(x: &Tensor<T>, kind: Activation) -> Tensor<T> {
    match kind {
        Activation::Relu => relu(x),
        Activation::Sigmoid => sigmoid(x),
    }
}

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Subgradient at 0 is taken as 0.
pub fn relu_backward<T: Scalar>(pre: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    pre.zip_map(grad_out, |x, g| if x > T::zero() { g } else { T::zero() })
}

#[inline]
pub fn sigmoid_scalar<T: Scalar>(v: T) -> T {
    // Split by sign so neither branch overflows `exp`.
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

pub fn sigmoid<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(sigmoid_scalar)
}

/// Takes the forward *output* `s = σ(x)`.
pub fn sigmoid_backward<T: Scalar>(out: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    out.zip_map(grad_out, |s, g| g * s * (T::one() - s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;

    #[test]
    fn relu_values() {
        let x = Tensor::from_vec(Shape::new(1, 1, 1, 3), vec![-1.0f32, 0.0, 2.0]).unwrap();
        assert_eq!(activation(&x, Activation::Relu).data(), &[0.0, 0.0, 2.0]);
        let g = Tensor::full(x.shape(), 1.0);
        assert_eq!(relu_backward(&x, &g).unwrap().data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid_scalar(0.0f32), 0.5);
        let big = sigmoid_scalar(40.0f32);
        assert!(big > 1.0 - 1e-6 && big <= 1.0);
        let small = sigmoid_scalar(-100.0f64);
        assert!(small > 0.0 && small < 1e-40);
    }
}
