//! Sub-pixel rearrangement. Channel `c·r² + di·r + dj` of the input lands at
//! sub-pixel offset `(di, dj)` of output channel `c`.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Shape, Tensor};

pub fn pixel_shuffle<T: Scalar>(x: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    let s = x.shape();
    let rr = r * r;
    if r == 0 || s.c % rr != 0 {
        return Err(Error::Shape(format!(
            "pixel_shuffle: {} channels not divisible by {r}²",
            s.c
        )));
    }
    let oc = s.c / rr;
    let (oh, ow) = (s.h * r, s.w * r);
    let mut out = Tensor::zeros(Shape::new(s.n, oc, oh, ow));
    for n in 0..s.n {
        for c in 0..oc {
            let dst = out.plane_mut(n, c);
            for di in 0..r {
                for dj in 0..r {
                    let src = x.plane(n, c * rr + di * r + dj);
                    for i in 0..s.h {
                        let row = &mut dst[(r * i + di) * ow..(r * i + di + 1) * ow];
                        for j in 0..s.w {
                            row[r * j + dj] = src[i * s.w + j];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Inverse of [`pixel_shuffle`]; also its backward pass, since the shuffle is
/// a permutation.
pub fn space_to_depth<T: Scalar>(x: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    let s = x.shape();
    if r == 0 || s.h % r != 0 || s.w % r != 0 {
        return Err(Error::Shape(format!(
            "space_to_depth: {}x{} not divisible by {r}",
            s.h, s.w
        )));
    }
    let rr = r * r;
    let (ih, iw) = (s.h / r, s.w / r);
    let mut out = Tensor::zeros(Shape::new(s.n, s.c * rr, ih, iw));
    for n in 0..s.n {
        for c in 0..s.c {
            let src = x.plane(n, c);
            for di in 0..r {
                for dj in 0..r {
                    let dst = out.plane_mut(n, c * rr + di * r + dj);
                    for i in 0..ih {
                        for j in 0..iw {
                            dst[i * iw + j] = src[(r * i + di) * s.w + r * j + dj];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}
