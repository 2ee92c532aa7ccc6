//! Stride-1 zero-padded 2-D convolution (im2col + GEMM) and the 3×3
//! depth-wise convolution used by the spatial modulation path.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Shape, Tensor};

/// Kernel `(C_out, C_in, kH, kW)` and per-output-channel bias.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams<T> {
    pub weight: Tensor<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> ConvParams<T> {
    pub fn zeros(c_out: usize, c_in: usize, k: usize) -> Self {
        Self { weight: Tensor::zeros(Shape::new(c_out, c_in, k, k)), bias: vec![T::zero(); c_out] }
    }

    pub fn c_out(&self) -> usize {
        self.weight.shape().n
    }

    pub fn c_in(&self) -> usize {
        self.weight.shape().c
    }

    pub fn num_params(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    fn check(&self) -> Result<()> {
        if self.bias.len() != self.c_out() {
            return Err(Error::Shape(format!(
                "conv bias has {} entries for {} output channels",
                self.bias.len(),
                self.c_out()
            )));
        }
        Ok(())
    }
}

struct Geometry {
    c_in: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    pad: usize,
    oh: usize,
    ow: usize,
}

impl Geometry {
    fn new<T: Scalar>(x: Shape, p: &ConvParams<T>, pad: usize) -> Result<Self> {
        p.check()?;
        let ks = p.weight.shape();
        if ks.c != x.c {
            return Err(Error::Shape(format!(
                "conv2d expects {} input channels, got {}",
                ks.c, x.c
            )));
        }
        let oh = (x.h + 2 * pad + 1).checked_sub(ks.h).unwrap_or(0);
        let ow = (x.w + 2 * pad + 1).checked_sub(ks.w).unwrap_or(0);
        if oh == 0 || ow == 0 {
            return Err(Error::Shape(format!(
                "conv2d with {}x{} kernel and pad {pad} yields empty output for {}x{} input",
                ks.h, ks.w, x.h, x.w
            )));
        }
        Ok(Self { c_in: x.c, h: x.h, w: x.w, kh: ks.h, kw: ks.w, pad, oh, ow })
    }

    fn k(&self) -> usize {
        self.c_in * self.kh * self.kw
    }

    fn out_plane(&self) -> usize {
        self.oh * self.ow
    }

    /// Valid output-column range `[lo, hi)` for kernel column `kx`.
    #[inline]
    fn col_range(&self, kx: usize) -> (usize, usize) {
        let lo = self.pad.saturating_sub(kx);
        let hi = (self.w + self.pad).saturating_sub(kx).min(self.ow);
        (lo, hi.max(lo))
    }

    fn im2col<T: Scalar>(&self, x: &[T], cols: &mut [T]) {
        let op = self.out_plane();
        for ci in 0..self.c_in {
            let src = &x[ci * self.h * self.w..(ci + 1) * self.h * self.w];
            for ky in 0..self.kh {
                for kx in 0..self.kw {
                    let row = (ci * self.kh + ky) * self.kw + kx;
                    let dst = &mut cols[row * op..(row + 1) * op];
                    let (lo, hi) = self.col_range(kx);
                    for oy in 0..self.oh {
                        let line = &mut dst[oy * self.ow..(oy + 1) * self.ow];
                        let iy = (oy + ky) as isize - self.pad as isize;
                        if iy < 0 || iy >= self.h as isize {
                            line.fill(T::zero());
                            continue;
                        }
                        let srow = &src[iy as usize * self.w..(iy as usize + 1) * self.w];
                        line[..lo].fill(T::zero());
                        line[hi..].fill(T::zero());
                        let shift = kx as isize - self.pad as isize;
                        for ox in lo..hi {
                            line[ox] = srow[(ox as isize + shift) as usize];
                        }
                    }
                }
            }
        }
    }

    fn col2im<T: Scalar>(&self, cols: &[T], gx: &mut [T]) {
        let op = self.out_plane();
        for ci in 0..self.c_in {
            let dst = &mut gx[ci * self.h * self.w..(ci + 1) * self.h * self.w];
            for ky in 0..self.kh {
                for kx in 0..self.kw {
                    let row = (ci * self.kh + ky) * self.kw + kx;
                    let src = &cols[row * op..(row + 1) * op];
                    let (lo, hi) = self.col_range(kx);
                    let shift = kx as isize - self.pad as isize;
                    for oy in 0..self.oh {
                        let iy = (oy + ky) as isize - self.pad as isize;
                        if iy < 0 || iy >= self.h as isize {
                            continue;
                        }
                        let line = &src[oy * self.ow..(oy + 1) * self.ow];
                        let drow = &mut dst[iy as usize * self.w..(iy as usize + 1) * self.w];
                        for ox in lo..hi {
                            let ix = (ox as isize + shift) as usize;
                            drow[ix] = drow[ix] + line[ox];
                        }
                    }
                }
            }
        }
    }
}

/// Cross-correlation with zero padding `pad` and stride 1.
pub fn conv2d<T: Scalar>(x: &Tensor<T>, p: &ConvParams<T>, pad: usize) -> Result<Tensor<T>> {
    let xs = x.shape();
    let g = Geometry::new(xs, p, pad)?;
    let c_out = p.c_out();
    let out_shape = Shape::new(xs.n, c_out, g.oh, g.ow);
    let mut out = Tensor::zeros(out_shape);
    let op = g.out_plane();
    let k = g.k();
    out.data_mut()
        .par_chunks_mut(c_out * op)
        .zip(x.data().par_chunks(xs.c * xs.plane()))
        .for_each(|(o, xi)| {
            for (co, plane) in o.chunks_mut(op).enumerate() {
                plane.fill(p.bias[co]);
            }
            let mut cols = vec![T::zero(); k * op];
            g.im2col(xi, &mut cols);
            T::gemm(c_out, k, op, p.weight.data(), false, &cols, false, T::one(), o);
        });
    Ok(out)
}

/// Gradients of [`conv2d`] with respect to its input and parameters.
pub fn conv2d_backward<T: Scalar>(
    x: &Tensor<T>,
    p: &ConvParams<T>,
    pad: usize,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, ConvParams<T>)> {
    let xs = x.shape();
    let g = Geometry::new(xs, p, pad)?;
    let c_out = p.c_out();
    grad_out.expect_shape(Shape::new(xs.n, c_out, g.oh, g.ow), "conv2d_backward grad_out")?;
    let op = g.out_plane();
    let k = g.k();
    let mut gx = Tensor::zeros(xs);

    let partials: Vec<(Vec<T>, Vec<T>)> = gx
        .data_mut()
        .par_chunks_mut(xs.c * xs.plane())
        .zip(x.data().par_chunks(xs.c * xs.plane()))
        .zip(grad_out.data().par_chunks(c_out * op))
        .map(|((gxi, xi), go)| {
            let mut cols = vec![T::zero(); k * op];
            g.im2col(xi, &mut cols);
            let mut gw = vec![T::zero(); c_out * k];
            T::gemm(c_out, op, k, go, false, &cols, true, T::zero(), &mut gw);
            let gb: Vec<T> = go.chunks(op).map(|pl| pl.iter().copied().sum()).collect();
            T::gemm(k, c_out, op, p.weight.data(), true, go, false, T::zero(), &mut cols);
            g.col2im(&cols, gxi);
            (gw, gb)
        })
        .collect();

    // Reduce in batch order so results do not depend on thread scheduling.
    let mut gp = ConvParams { weight: Tensor::zeros(p.weight.shape()), bias: vec![T::zero(); c_out] };
    for (gw, gb) in partials {
        for (a, b) in gp.weight.data_mut().iter_mut().zip(gw) {
            *a = *a + b;
        }
        for (a, b) in gp.bias.iter_mut().zip(gb) {
            *a = *a + b;
        }
    }
    Ok((gx, gp))
}

/// Per-channel 3×3 kernels `(C, 1, 3, 3)` and biases for [`depthwise_conv2d`].
#[derive(Clone, Debug, PartialEq)]
pub struct DepthwiseParams<T> {
    pub weight: Tensor<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> DepthwiseParams<T> {
    pub fn zeros(channels: usize) -> Self {
        Self { weight: Tensor::zeros(Shape::new(channels, 1, 3, 3)), bias: vec![T::zero(); channels] }
    }

    pub fn channels(&self) -> usize {
        self.weight.shape().n
    }

    pub fn num_params(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    fn check(&self, x: Shape) -> Result<()> {
        let ws = self.weight.shape();
        if ws.c != 1 || ws.h != 3 || ws.w != 3 || self.bias.len() != ws.n {
            return Err(Error::Shape(format!("depth-wise params must be (C,1,3,3), got {ws}")));
        }
        if ws.n != x.c {
            return Err(Error::Shape(format!(
                "depth-wise conv has {} kernels for {} channels",
                ws.n, x.c
            )));
        }
        Ok(())
    }
}

/// 3×3 depth-wise convolution, pad 1, stride 1: channel `c` of the output is
/// a function of channel `c` of the input only.
pub fn depthwise_conv2d<T: Scalar>(x: &Tensor<T>, p: &DepthwiseParams<T>) -> Result<Tensor<T>> {
    let s = x.shape();
    p.check(s)?;
    let mut out = Tensor::zeros(s);
    let (h, w) = (s.h as isize, s.w as isize);
    for n in 0..s.n {
        for c in 0..s.c {
            let k = &p.weight.data()[c * 9..c * 9 + 9];
            let src = x.plane(n, c);
            let dst = out.plane_mut(n, c);
            for y in 0..h {
                for xx in 0..w {
                    // Bias last, matching the summation order of `conv2d`.
                    let mut acc = T::zero();
                    for ky in 0..3isize {
                        let iy = y + ky - 1;
                        if iy < 0 || iy >= h {
                            continue;
                        }
                        for kx in 0..3isize {
                            let ix = xx + kx - 1;
                            if ix < 0 || ix >= w {
                                continue;
                            }
                            acc = acc + k[(ky * 3 + kx) as usize] * src[(iy * w + ix) as usize];
                        }
                    }
                    dst[(y * w + xx) as usize] = acc + p.bias[c];
                }
            }
        }
    }
    Ok(out)
}

pub fn depthwise_conv2d_backward<T: Scalar>(
    x: &Tensor<T>,
    p: &DepthwiseParams<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, DepthwiseParams<T>)> {
    let s = x.shape();
    p.check(s)?;
    grad_out.expect_shape(s, "depthwise_conv2d_backward grad_out")?;
    let mut gx = Tensor::zeros(s);
    let mut gp = DepthwiseParams::zeros(s.c);
    let (h, w) = (s.h as isize, s.w as isize);
    for n in 0..s.n {
        for c in 0..s.c {
            let k = &p.weight.data()[c * 9..c * 9 + 9];
            let src = x.plane(n, c);
            let go = grad_out.plane(n, c);
            let mut gk = [T::zero(); 9];
            let mut gb = T::zero();
            let gxp = gx.plane_mut(n, c);
            for y in 0..h {
                for xx in 0..w {
                    let g = go[(y * w + xx) as usize];
                    gb = gb + g;
                    for ky in 0..3isize {
                        let iy = y + ky - 1;
                        if iy < 0 || iy >= h {
                            continue;
                        }
                        for kx in 0..3isize {
                            let ix = xx + kx - 1;
                            if ix < 0 || ix >= w {
                                continue;
                            }
                            let t = (ky * 3 + kx) as usize;
                            let i = (iy * w + ix) as usize;
                            gk[t] = gk[t] + g * src[i];
                            gxp[i] = gxp[i] + g * k[t];
                        }
                    }
                }
            }
            let dst = &mut gp.weight.data_mut()[c * 9..c * 9 + 9];
            for (d, v) in dst.iter_mut().zip(gk) {
                *d = *d + v;
            }
            gp.bias[c] = gp.bias[c] + gb;
        }
    }
    Ok((gx, gp))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_kernel(c: usize) -> ConvParams<f32> {
        let mut p = ConvParams::zeros(c, c, 3);
        for i in 0..c {
            p.weight.set(i, i, 1, 1, 1.0);
        }
        p
    }

    #[test]
    fn identity_kernel_reproduces_input() {
        let x = Tensor::from_fn(Shape::new(1, 1, 3, 3), |_, _, y, x| (y * 3 + x) as f32);
        let out = conv2d(&x, &identity_kernel(1), 1).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn all_ones_receptive_field_counts() {
        let x = Tensor::full(Shape::new(1, 1, 3, 3), 1.0f32);
        let mut p = ConvParams::zeros(1, 1, 3);
        p.weight.data_mut().fill(1.0);
        let out = conv2d(&x, &p, 1).unwrap();
        assert_eq!(out.data(), &[4.0, 6.0, 4.0, 6.0, 9.0, 6.0, 4.0, 6.0, 4.0]);
    }

    #[test]
    fn zero_kernel_outputs_bias() {
        let x = Tensor::from_fn(Shape::new(2, 2, 4, 5), |n, c, y, x| (n + c + y * x) as f32);
        let mut p = ConvParams::zeros(3, 2, 3);
        p.bias = vec![0.5, -1.0, 2.0];
        let out = conv2d(&x, &p, 1).unwrap();
        for c in 0..3 {
            assert!(out.plane(1, c).iter().all(|&v| v == p.bias[c]));
        }
    }

    #[test]
    fn output_shape_law() {
        let x = Tensor::<f32>::zeros(Shape::new(1, 2, 5, 7));
        let p = ConvParams::zeros(4, 2, 3);
        assert_eq!(conv2d(&x, &p, 0).unwrap().shape(), Shape::new(1, 4, 3, 5));
        assert_eq!(conv2d(&x, &p, 2).unwrap().shape(), Shape::new(1, 4, 7, 9));
    }

    #[test]
    fn shape_errors() {
        let x = Tensor::<f32>::zeros(Shape::new(1, 2, 2, 2));
        assert!(matches!(conv2d(&x, &ConvParams::zeros(1, 3, 3), 1), Err(Error::Shape(_))));
        assert!(matches!(conv2d(&x, &ConvParams::zeros(1, 2, 3), 0), Err(Error::Shape(_))));
        let bad = Tensor::<f32>::zeros(Shape::new(1, 1, 3, 3));
        assert!(conv2d_backward(&x, &ConvParams::zeros(1, 2, 3), 1, &bad).is_err());
    }

    #[test]
    fn identity_backward_passes_gradient_through() {
        let x = Tensor::from_fn(Shape::new(1, 2, 4, 4), |_, c, y, x| (c + y + x) as f32);
        let g = Tensor::from_fn(Shape::new(1, 2, 4, 4), |_, c, y, x| (c * 16 + y * 4 + x) as f32);
        let (gx, _) = conv2d_backward(&x, &identity_kernel(2), 1, &g).unwrap();
        assert_eq!(gx, g);
    }

    #[test]
    fn zero_input_gradient_is_bias_only() {
        let x = Tensor::<f32>::zeros(Shape::new(2, 2, 3, 3));
        let mut p = ConvParams::zeros(2, 2, 3);
        p.weight.data_mut().fill(0.3);
        let g = Tensor::from_fn(Shape::new(2, 2, 3, 3), |n, c, y, x| (n + c * 2 + y + x) as f32);
        let (_, gp) = conv2d_backward(&x, &p, 1, &g).unwrap();
        assert!(gp.weight.data().iter().all(|&v| v == 0.0));
        for c in 0..2 {
            let expected: f32 = (0..2).map(|n| g.plane(n, c).iter().sum::<f32>()).sum();
            assert_eq!(gp.bias[c], expected);
        }
    }

    #[test]
    fn depthwise_identity_and_linearity() {
        let mut p = DepthwiseParams::<f32>::zeros(2);
        p.weight.data_mut()[4] = 1.0;
        p.weight.data_mut()[13] = 1.0;
        let x = Tensor::from_fn(Shape::new(1, 2, 3, 4), |_, c, y, x| (c + 1) as f32 * (y * 4 + x) as f32);
        assert_eq!(depthwise_conv2d(&x, &p).unwrap(), x);

        let mut q = DepthwiseParams::<f32>::zeros(2);
        let k = [0.1, -0.2, 0.3, 0.4, 0.5, -0.6, 0.7, 0.8, -0.9];
        q.weight.data_mut()[..9].copy_from_slice(&k);
        q.weight.data_mut()[9..].copy_from_slice(&k);
        let out = depthwise_conv2d(&x, &q).unwrap();
        for (a, b) in out.plane(0, 0).iter().zip(out.plane(0, 1)) {
            assert!((2.0 * a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn depthwise_channel_mismatch() {
        let x = Tensor::<f32>::zeros(Shape::new(1, 3, 3, 3));
        assert!(matches!(depthwise_conv2d(&x, &DepthwiseParams::zeros(2)), Err(Error::Shape(_))));
    }
}
