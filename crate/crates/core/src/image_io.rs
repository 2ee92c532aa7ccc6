//! RGB images in `[0, 1]`, PNG I/O and anti-aliased bicubic resampling.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageReader, Luma, Rgb};
use log::warn;

use crate::error::{Error, ImageError, Result};
use crate::tensor::{Scalar, Shape, Tensor};

/// Planar RGB image: `data[c·H·W + y·W + x]`, values nominally in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != 3 * width * height {
            return Err(Error::Shape(format!(
                "image data has {} values for {width}x{height}x3",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Self {
        let plane = width * height;
        let mut data = vec![0.0; 3 * plane];
        for c in 0..3 {
            data[c * plane..(c + 1) * plane].fill(rgb[c]);
        }
        Self { width, height, data }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> [f32; 3]) -> Self {
        let mut img = Self::filled(width, height, [0.0; 3]);
        for y in 0..height {
            for x in 0..width {
                let px = f(x, y);
                for c in 0..3 {
                    img.set(c, x, y, px[c]);
                }
            }
        }
        img
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let p = self.width * self.height;
        &self.data[c * p..(c + 1) * p]
    }

    #[inline]
    pub fn get(&self, c: usize, x: usize, y: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, x: usize, y: usize, v: f32) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    pub fn clamped(&self) -> Self {
        Self { width: self.width, height: self.height, data: self.data.iter().map(|v| v.clamp(0.0, 1.0)).collect() }
    }

    /// Sub-image `[x0, x0+w) × [y0, y0+h)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(Error::Shape(format!(
                "crop {w}x{h}+{x0}+{y0} exceeds {}x{}",
                self.width, self.height
            )));
        }
        let mut out = Self::filled(w, h, [0.0; 3]);
        for c in 0..3 {
            for y in 0..h {
                for x in 0..w {
                    out.set(c, x, y, self.get(c, x0 + x, y0 + y));
                }
            }
        }
        Ok(out)
    }

    /// Crops so both dimensions are multiples of `scale`.
    pub fn mod_crop(&self, scale: usize) -> Self {
        let w = self.width - self.width % scale;
        let h = self.height - self.height % scale;
        self.crop(0, 0, w, h).expect("mod-crop stays in bounds")
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::filled(self.height, self.width, [0.0; 3]);
        for c in 0..3 {
            for y in 0..self.height {
                for x in 0..self.width {
                    out.set(c, y, x, self.get(c, x, y));
                }
            }
        }
        out
    }

    /// `(1, 3, H, W)` tensor with `mean` subtracted per channel.
    pub fn to_tensor<T: Scalar>(&self, mean: [f32; 3]) -> Tensor<T> {
        let plane = self.width * self.height;
        Tensor::from_fn(Shape::new(1, 3, self.height, self.width), |_, c, y, x| {
            T::from_f64_lossy((self.data[c * plane + y * self.width + x] - mean[c]) as f64)
        })
    }

    /// Inverse of [`to_tensor`](Self::to_tensor) for batch item `n`.
    pub fn from_tensor<T: Scalar>(t: &Tensor<T>, n: usize, mean: [f32; 3]) -> Result<Self> {
        let s = t.shape();
        if s.c != 3 || n >= s.n {
            return Err(Error::Shape(format!("cannot read image {n} from tensor {s}")));
        }
        let plane = s.plane();
        let item = t.item(n);
        let data = (0..3 * plane).map(|i| item[i].to_f32().unwrap() + mean[i / plane]).collect();
        Self::new(s.w, s.h, data)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f32 {
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

pub fn load_png(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(ImageError::NotFound(path.to_path_buf()).into());
    }
    let malformed = |reason: String| ImageError::Malformed { path: path.to_path_buf(), reason };
    let reader = ImageReader::open(path)
        .map_err(|e| malformed(e.to_string()))?
        .with_guessed_format()
        .map_err(|e| malformed(e.to_string()))?;
    if reader.format() != Some(image::ImageFormat::Png) {
        return Err(malformed("not a PNG file".into()).into());
    }
    let decoded = reader.decode().map_err(|e| malformed(e.to_string()))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let (raw, max, has_alpha): (Vec<f32>, f32, bool) = match &decoded {
        DynamicImage::ImageLuma8(_) | DynamicImage::ImageLumaA8(_) | DynamicImage::ImageRgb8(_) | DynamicImage::ImageRgba8(_) => (
            decoded.to_rgb8().into_raw().into_iter().map(f32::from).collect(),
            255.0,
            decoded.color().has_alpha(),
        ),
        DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA16(_) | DynamicImage::ImageRgb16(_) | DynamicImage::ImageRgba16(_) => (
            decoded.to_rgb16().into_raw().into_iter().map(f32::from).collect(),
            65535.0,
            decoded.color().has_alpha(),
        ),
        other => {
            return Err(ImageError::UnsupportedColor {
                path: path.to_path_buf(),
                color: format!("{:?}", other.color()),
            }
            .into())
        }
    };
    if has_alpha {
        warn!("{}: alpha channel dropped", path.display());
    }
    let plane = w * h;
    let mut data = vec![0.0f32; 3 * plane];
    for (i, px) in raw.chunks_exact(3).enumerate() {
        for c in 0..3 {
            data[c * plane + i] = px[c] / max;
        }
    }
    Image::new(w, h, data)
}

#[inline]
fn to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes an 8-bit RGB PNG; values are clamped to `[0, 1]`.
pub fn save_png(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = ImageBuffer::<Rgb<u8>, Vec<u8>>::new(img.width as u32, img.height as u32);
    for (x, y, px) in buf.enumerate_pixels_mut() {
        let (x, y) = (x as usize, y as usize);
        *px = Rgb([to_u8(img.get(0, x, y)), to_u8(img.get(1, x, y)), to_u8(img.get(2, x, y))]);
    }
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| ImageError::Write { path: path.to_path_buf(), reason: e.to_string() }.into())
}

/// Writes a single-channel map (values in `[0, 1]`) as an 8-bit grayscale PNG.
pub fn save_gray_png(width: usize, height: usize, values: &[f32], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if values.len() != width * height {
        return Err(Error::Shape(format!("{} values for a {width}x{height} map", values.len())));
    }
    let buf = ImageBuffer::<Luma<u8>, Vec<u8>>::from_fn(width as u32, height as u32, |x, y| {
        Luma([to_u8(values[y as usize * width + x as usize])])
    });
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| ImageError::Write { path: path.to_path_buf(), reason: e.to_string() }.into())
}

/// Cubic convolution parameter.
pub const CUBIC_A: f64 = -0.5;

fn cubic(x: f64) -> f64 {
    let a = CUBIC_A;
    let x = x.abs();
    if x <= 1.0 {
        ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
    } else {
        0.0
    }
}

/// Source taps and normalized weights for one output sample.
#[derive(Clone, Debug)]
pub struct Taps {
    pub index: Vec<usize>,
    pub weight: Vec<f64>,
}

/// Per-output-sample taps for resampling `in_len` samples to `out_len`.
///
/// Pixel centers are aligned (`src = (dst + 0.5)·in/out − 0.5`); when
/// shrinking, the kernel is stretched by the scale factor to band-limit the
/// input. Out-of-range taps are clamped to the border sample.
pub fn resample_taps(in_len: usize, out_len: usize) -> Vec<Taps> {
    let scale = in_len as f64 / out_len as f64;
    let support = scale.max(1.0);
    (0..out_len)
        .map(|i| {
            let center = (i as f64 + 0.5) * scale - 0.5;
            let lo = (center - 2.0 * support).floor() as isize + 1;
            let hi = (center + 2.0 * support).ceil() as isize;
            let mut index = Vec::new();
            let mut weight = Vec::new();
            for j in lo..hi {
                let w = cubic((j as f64 - center) / support);
                if w != 0.0 {
                    index.push(j.clamp(0, in_len as isize - 1) as usize);
                    weight.push(w);
                }
            }
            let total: f64 = weight.iter().sum();
            for w in &mut weight {
                *w /= total;
            }
            Taps { index, weight }
        })
        .collect()
}

/// Separable bicubic resampling to `out_w × out_h`.
pub fn bicubic_resize(img: &Image, out_w: usize, out_h: usize) -> Image {
    assert!(out_w >= 1 && out_h >= 1, "output dimensions must be positive");
    if out_w == img.width && out_h == img.height {
        return img.clone();
    }
    let tx = resample_taps(img.width, out_w);
    let ty = resample_taps(img.height, out_h);
    let mut out = Image::filled(out_w, out_h, [0.0; 3]);
    let mut rows = vec![0.0f64; img.height * out_w];
    for c in 0..3 {
        let src = img.channel(c);
        for y in 0..img.height {
            let line = &src[y * img.width..(y + 1) * img.width];
            for (x, t) in tx.iter().enumerate() {
                rows[y * out_w + x] = t.index.iter().zip(&t.weight).map(|(&i, &w)| w * line[i] as f64).sum();
            }
        }
        for (y, t) in ty.iter().enumerate() {
            for x in 0..out_w {
                let v: f64 = t.index.iter().zip(&t.weight).map(|(&i, &w)| w * rows[i * out_w + x]).sum();
                out.set(c, x, y, v as f32);
            }
        }
    }
    out
}

/// Bicubic downscale by an integer factor (dimensions must already be multiples).
pub fn downscale(img: &Image, scale: usize) -> Image {
    bicubic_resize(img, img.width / scale, img.height / scale)
}

pub fn upscale(img: &Image, scale: usize) -> Image {
    bicubic_resize(img, img.width * scale, img.height * scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, |x, y| {
            let (fx, fy) = (x as f32, y as f32);
            [(fx * 0.3).sin() * 0.5 + 0.5, (fy * 0.2 + fx * 0.1).cos() * 0.5 + 0.5, ((fx - fy) * 0.05).abs().min(1.0)]
        })
    }

    #[test]
    fn weights_sum_to_one() {
        for (i, o) in [(10, 5), (7, 21), (64, 32), (33, 11), (5, 5), (9, 4)] {
            for t in resample_taps(i, o) {
                assert!((t.weight.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn identity_and_constant() {
        let img = pattern(9, 7);
        assert!(bicubic_resize(&img, 9, 7).max_abs_diff(&img) < 1e-6);
        let flat = Image::filled(13, 11, [0.2, 0.5, 0.9]);
        for (w, h) in [(4, 3), (26, 22), (13, 5), (39, 33)] {
            let r = bicubic_resize(&flat, w, h);
            assert!(r.max_abs_diff(&Image::filled(w, h, [0.2, 0.5, 0.9])) < 1e-6);
        }
    }

    #[test]
    fn downscaled_ramp_stays_linear() {
        let ramp = Image::from_fn(64, 8, |x, _| [x as f32 / 63.0; 3]);
        let small = bicubic_resize(&ramp, 32, 8);
        // Interior samples away from the clamped borders.
        for x in 4..28 {
            let expected = (2.0 * x as f32 + 0.5) / 63.0;
            assert!((small.get(0, x, 3) - expected).abs() < 1e-3, "x={x}");
        }
    }

    #[test]
    fn transpose_commutes() {
        let img = pattern(17, 12);
        for (w, h) in [(8, 6), (34, 36), (5, 23)] {
            let a = bicubic_resize(&img, w, h).transpose();
            let b = bicubic_resize(&img.transpose(), h, w);
            assert!(a.max_abs_diff(&b) < 1e-6);
        }
    }

    #[test]
    fn png_round_trip_8bit() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.png");
        let img = Image::from_fn(5, 4, |x, y| [(x * 40) as f32 / 255.0, (y * 50) as f32 / 255.0, 17.0 / 255.0]);
        save_png(&img, &path).unwrap();
        let back = load_png(&path).unwrap();
        assert_eq!(back, img);
        let path2 = dir.path().join("b.png");
        save_png(&back, &path2).unwrap();
        assert_eq!(load_png(&path2).unwrap(), img);
    }

    #[test]
    fn grayscale_and_16bit_sources() {
        let dir = tempfile::tempdir().unwrap();
        let gray = dir.path().join("g.png");
        ImageBuffer::<Luma<u8>, _>::from_fn(3, 2, |x, _| Luma([x as u8 * 100])).save(&gray).unwrap();
        let g = load_png(&gray).unwrap();
        for c in 0..3 {
            assert_eq!(g.get(c, 2, 1), 200.0 / 255.0);
        }

        let deep = dir.path().join("d.png");
        ImageBuffer::<Rgb<u16>, _>::from_fn(2, 2, |_, _| Rgb([65535u16, 32768, 0])).save(&deep).unwrap();
        let d = load_png(&deep).unwrap();
        assert_eq!(d.get(0, 0, 0), 1.0);
        assert!((d.get(1, 1, 1) - 32768.0 / 65535.0).abs() < 1e-7);
    }

    #[test]
    fn load_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_png(dir.path().join("missing.png")), Err(Error::Image(ImageError::NotFound(_)))));
        let junk = dir.path().join("junk.png");
        std::fs::write(&junk, b"\x89PNG\r\n\x1a\nnot really").unwrap();
        assert!(matches!(load_png(&junk), Err(Error::Image(ImageError::Malformed { .. }))));
    }
}
