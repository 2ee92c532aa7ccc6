//! Fully-connected layer applied to per-channel statistic vectors, which are
//! carried as `(N, C, 1, 1)` tensors.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Shape, Tensor};

/// Row-major `rows × cols` weight matrix plus a bias per row.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseParams<T> {
    pub rows: usize,
    pub cols: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> DenseParams<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, weight: vec![T::zero(); rows * cols], bias: vec![T::zero(); rows] }
    }

    pub fn num_params(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    fn check(&self, x: Shape) -> Result<()> {
        if self.weight.len() != self.rows * self.cols || self.bias.len() != self.rows {
            return Err(Error::Shape(format!(
                "dense params inconsistent with {}x{}",
                self.rows, self.cols
            )));
        }
        if x.c * x.h * x.w != self.cols {
            return Err(Error::Shape(format!(
                "dense layer expects {} inputs, got {}",
                self.cols,
                x.c * x.h * x.w
            )));
        }
        Ok(())
    }
}

/// `weight · x + bias` for every batch item.
pub fn dense<T: Scalar>(x: &Tensor<T>, p: &DenseParams<T>) -> Result<Tensor<T>> {
    let s = x.shape();
    p.check(s)?;
    let mut out = Tensor::zeros(Shape::new(s.n, p.rows, 1, 1));
    for n in 0..s.n {
        let xi = x.item(n);
        let o = out.item_mut(n);
        for (r, o) in o.iter_mut().enumerate() {
            let row = &p.weight[r * p.cols..(r + 1) * p.cols];
            *o = row.iter().zip(xi).fold(p.bias[r], |acc, (&w, &v)| acc + w * v);
        }
    }
    Ok(out)
}

pub fn dense_backward<T: Scalar>(
    x: &Tensor<T>,
    p: &DenseParams<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, DenseParams<T>)> {
    let s = x.shape();
    p.check(s)?;
    grad_out.expect_shape(Shape::new(s.n, p.rows, 1, 1), "dense_backward grad_out")?;
    let mut gx = Tensor::zeros(s);
    let mut gp = DenseParams::zeros(p.rows, p.cols);
    for n in 0..s.n {
        let xi = x.item(n);
        let go = grad_out.item(n);
        let gxi = gx.item_mut(n);
        for r in 0..p.rows {
            let g = go[r];
            gp.bias[r] = gp.bias[r] + g;
            let row = &p.weight[r * p.cols..(r + 1) * p.cols];
            let grow = &mut gp.weight[r * p.cols..(r + 1) * p.cols];
            for j in 0..p.cols {
                grow[j] = grow[j] + g * xi[j];
                gxi[j] = gxi[j] + g * row[j];
            }
        }
    }
    Ok((gx, gp))
}
