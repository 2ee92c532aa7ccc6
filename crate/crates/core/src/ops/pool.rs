//! Global per-channel pooling statistics and channel standardization.
//!
//! Pooled statistics are returned as `(N, C, 1, 1)` tensors so they broadcast
//! naturally against `(N, C, H, W)` feature maps.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Shape, Tensor};

/// Per-channel statistic computed over the spatial extent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PoolStatistic {
    Max,
    Avg,
    /// Population variance (divisor `H·W`).
    Var,
    /// Population variance followed by [`standardize_channels`].
    StdVar,
    /// Mean of squared responses.
    Power,
}

impl PoolStatistic {
    pub const ALL: [PoolStatistic; 5] = [
        PoolStatistic::Max,
        PoolStatistic::Avg,
        PoolStatistic::Var,
        PoolStatistic::StdVar,
        PoolStatistic::Power,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PoolStatistic::Max => "max",
            PoolStatistic::Avg => "avg",
            PoolStatistic::Var => "var",
            PoolStatistic::StdVar => "stdvar",
            PoolStatistic::Power => "power",
        }
    }
}

impl fmt::Display for PoolStatistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PoolStatistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PoolStatistic::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown pooling statistic {s:?}")))
    }
}

fn mean<T: Scalar>(v: &[T]) -> T {
    v.iter().copied().sum::<T>() / T::from_usize(v.len()).unwrap()
}

fn variance<T: Scalar>(v: &[T]) -> T {
    let mu = mean(v);
    v.iter().map(|&x| (x - mu) * (x - mu)).sum::<T>() / T::from_usize(v.len()).unwrap()
}

fn pool_raw<T: Scalar>(x: &Tensor<T>, stat: PoolStatistic) -> Result<Tensor<T>> {
    let s = x.shape();
    if s.plane() == 0 {
        return Err(Error::Shape("global pooling over an empty spatial extent".into()));
    }
    let mut out = Tensor::zeros(Shape::new(s.n, s.c, 1, 1));
    for n in 0..s.n {
        for c in 0..s.c {
            let p = x.plane(n, c);
            let v = match stat {
                PoolStatistic::Max => p.iter().copied().fold(T::neg_infinity(), T::max),
                PoolStatistic::Avg => mean(p),
                PoolStatistic::Var | PoolStatistic::StdVar => variance(p),
                PoolStatistic::Power => {
                    p.iter().map(|&v| v * v).sum::<T>() / T::from_usize(p.len()).unwrap()
                }
            };
            out.set(n, c, 0, 0, v);
        }
    }
    Ok(out)
}

/// Pools every channel of `x` to one scalar. `eps` is only used by
/// [`PoolStatistic::StdVar`].
pub fn global_pool<T: Scalar>(x: &Tensor<T>, stat: PoolStatistic, eps: T) -> Result<Tensor<T>> {
    let raw = pool_raw(x, stat)?;
    if stat == PoolStatistic::StdVar {
        Ok(standardize_channels(&raw, eps))
    } else {
        Ok(raw)
    }
}

pub fn global_pool_backward<T: Scalar>(
    x: &Tensor<T>,
    stat: PoolStatistic,
    eps: T,
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>> {
    let s = x.shape();
    grad_out.expect_shape(Shape::new(s.n, s.c, 1, 1), "global_pool_backward grad_out")?;
    let g = if stat == PoolStatistic::StdVar {
        let raw = pool_raw(x, PoolStatistic::Var)?;
        standardize_backward(&raw, eps, grad_out)?
    } else {
        grad_out.clone()
    };
    let hw = T::from_usize(s.plane()).unwrap();
    let two = T::from_f64_lossy(2.0);
    let mut gx = Tensor::zeros(s);
    for n in 0..s.n {
        for c in 0..s.c {
            let gv = g.get(n, c, 0, 0);
            let p = x.plane(n, c);
            let dst = gx.plane_mut(n, c);
            match stat {
                PoolStatistic::Max => {
                    // First occurrence of the maximum receives the gradient.
                    let mut best = 0;
                    for (i, &v) in p.iter().enumerate() {
                        if v > p[best] {
                            best = i;
                        }
                    }
                    dst[best] = gv;
                }
                PoolStatistic::Avg => dst.fill(gv / hw),
                PoolStatistic::Var | PoolStatistic::StdVar => {
                    let mu = mean(p);
                    for (d, &v) in dst.iter_mut().zip(p) {
                        *d = gv * two * (v - mu) / hw;
                    }
                }
                PoolStatistic::Power => {
                    for (d, &v) in dst.iter_mut().zip(p) {
                        *d = gv * two * v / hw;
                    }
                }
            }
        }
    }
    Ok(gx)
}

/// Z-scores the `C` channel statistics of each batch item:
/// `(v_c - mean) / (std + eps)` with population standard deviation.
pub fn standardize_channels<T: Scalar>(v: &Tensor<T>, eps: T) -> Tensor<T> {
    let s = v.shape();
    let mut out = v.clone();
    for n in 0..s.n {
        let item = out.item_mut(n);
        let mu = mean(item);
        let sd = variance(item).sqrt();
        for x in item.iter_mut() {
            *x = (*x - mu) / (sd + eps);
        }
    }
    out
}

pub fn standardize_backward<T: Scalar>(v: &Tensor<T>, eps: T, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    grad_out.expect_shape(v.shape(), "standardize_backward grad_out")?;
    let s = v.shape();
    let len = T::from_usize(s.c * s.plane()).unwrap();
    let mut gv = Tensor::zeros(s);
    for n in 0..s.n {
        let vi = v.item(n);
        let gi = grad_out.item(n);
        let mu = mean(vi);
        let sd = variance(vi).sqrt();
        let denom = sd + eps;
        // d(out_i)/d(dev_j) = δ_ij/denom − dev_i·dev_j/(len·sd·denom²)
        let dot: T = vi.iter().zip(gi).map(|(&x, &g)| g * (x - mu)).sum();
        let coef = if sd > T::zero() { dot / (len * sd * denom * denom) } else { T::zero() };
        let gdev: Vec<T> = vi.iter().zip(gi).map(|(&x, &g)| g / denom - (x - mu) * coef).collect();
        let gmean = mean(&gdev);
        for (o, d) in gv.item_mut(n).iter_mut().zip(gdev) {
            *o = d - gmean;
        }
    }
    Ok(gv)
}
