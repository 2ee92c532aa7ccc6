//! Luma conversion and full-reference quality metrics on the 0–255 scale.

use crate::error::{Error, Result};
use crate::image_io::Image;
use crate::tensor::{Scalar, Tensor};

/// Single-channel image, values on the 0–255 scale.
#[derive(Clone, Debug, PartialEq)]
pub struct YImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl YImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Shape(format!("{} values for a {width}x{height} plane", data.len())));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, v: f64) -> Self {
        Self { width, height, data: vec![v; width * height] }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    fn shaved(&self, shave: usize) -> Result<(usize, usize, Vec<f64>)> {
        if 2 * shave >= self.width || 2 * shave >= self.height {
            return Err(Error::Shape(format!(
                "shaving {shave} pixels leaves nothing of a {}x{} image",
                self.width, self.height
            )));
        }
        let (w, h) = (self.width - 2 * shave, self.height - 2 * shave);
        let mut out = Vec::with_capacity(w * h);
        for y in shave..shave + h {
            out.extend_from_slice(&self.data[y * self.width + shave..y * self.width + shave + w]);
        }
        Ok((w, h, out))
    }
}

/// BT.601 studio-swing luma coefficients for RGB in `[0, 1]`.
pub const Y_COEFFS: [f64; 3] = [65.481, 128.553, 24.966];
pub const Y_OFFSET: f64 = 16.0;

#[inline]
pub fn y_of(r: f64, g: f64, b: f64) -> f64 {
    Y_OFFSET + Y_COEFFS[0] * r + Y_COEFFS[1] * g + Y_COEFFS[2] * b
}

pub fn rgb_to_y(img: &Image) -> YImage {
    let data = img
        .channel(0)
        .iter()
        .zip(img.channel(1))
        .zip(img.channel(2))
        .map(|((&r, &g), &b)| y_of(r as f64, g as f64, b as f64))
        .collect();
    YImage { width: img.width(), height: img.height(), data }
}

/// Luma of batch item `n` of an RGB tensor.
pub fn rgb_tensor_to_y<T: Scalar>(t: &Tensor<T>, n: usize) -> Result<YImage> {
    let s = t.shape();
    if s.c != 3 {
        return Err(Error::Shape(format!("luma conversion needs 3 channels, got {}", s.c)));
    }
    let f = |c: usize| t.plane(n, c).iter().map(|v| v.to_f64().unwrap());
    let data = f(0).zip(f(1)).zip(f(2)).map(|((r, g), b)| y_of(r, g, b)).collect();
    YImage::new(s.w, s.h, data)
}

fn check_pair(a: &YImage, b: &YImage) -> Result<()> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::Shape(format!(
            "metric inputs differ in size: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    Ok(())
}

/// `10·log10(255² / MSE)` over the region left after removing `shave` pixels
/// from every side. Identical inputs give `f64::INFINITY`.
pub fn psnr(a: &YImage, b: &YImage, shave: usize) -> Result<f64> {
    check_pair(a, b)?;
    let (_, _, pa) = a.shaved(shave)?;
    let (_, _, pb) = b.shaved(shave)?;
    let mse = pa.iter().zip(&pb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / pa.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (255.0 * 255.0 / mse).log10())
}

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
pub const SSIM_L: f64 = 255.0;

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
pub fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let mut g = [0.0; SSIM_WINDOW];
    let r = (SSIM_WINDOW / 2) as f64;
    for (i, v) in g.iter_mut().enumerate() {
        let d = i as f64 - r;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = g.iter().sum();
    g.map(|v| v / s)
}

/// Valid-region separable filtering.
fn filter_valid(w: usize, h: usize, src: &[f64], g: &[f64; SSIM_WINDOW]) -> (usize, usize, Vec<f64>) {
    let k = SSIM_WINDOW;
    let (ow, oh) = (w + 1 - k, h + 1 - k);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..k).map(|i| g[i] * src[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..k).map(|i| g[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    (ow, oh, out)
}

/// Mean structural similarity with an 11×11 Gaussian window (σ = 1.5),
/// `K1 = 0.01`, `K2 = 0.03`, `L = 255`, evaluated on windows fully inside the
/// shaved region.
pub fn ssim(a: &YImage, b: &YImage, shave: usize) -> Result<f64> {
    check_pair(a, b)?;
    let (w, h, pa) = a.shaved(shave)?;
    let (_, _, pb) = b.shaved(shave)?;
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::Shape(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels after shaving, got {w}x{h}"
        )));
    }
    let g = gaussian_taps();
    let c1 = (SSIM_K1 * SSIM_L).powi(2);
    let c2 = (SSIM_K2 * SSIM_L).powi(2);
    let aa: Vec<f64> = pa.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = pb.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x * y).collect();
    let (_, _, mu1) = filter_valid(w, h, &pa, &g);
    let (_, _, mu2) = filter_valid(w, h, &pb, &g);
    let (_, _, e11) = filter_valid(w, h, &aa, &g);
    let (_, _, e22) = filter_valid(w, h, &bb, &g);
    let (_, _, e12) = filter_valid(w, h, &ab, &g);
    let mut total = 0.0;
    for i in 0..mu1.len() {
        let (m1, m2) = (mu1[i], mu2[i]);
        let s11 = e11[i] - m1 * m1;
        let s22 = e22[i] - m2 * m2;
        let s12 = e12[i] - m1 * m2;
        total += ((2.0 * m1 * m2 + c1) * (2.0 * s12 + c2)) / ((m1 * m1 + m2 * m2 + c1) * (s11 + s22 + c2));
    }
    Ok(total / mu1.len() as f64)
}
