//! Training pairs, RGB mean, dihedral augmentation and patch batches.

use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::image_io::{downscale, load_png, Image};
use crate::tensor::{Shape, Tensor};

/// An aligned LR/HR pair: `hr` is exactly `scale ×` the size of `lr`.
#[derive(Clone, Debug)]
pub struct TrainPair {
    pub name: String,
    pub lr: Image,
    pub hr: Image,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub scale: usize,
    pub pairs: Vec<TrainPair>,
}

impl Dataset {
    /// Builds pairs by mod-cropping each HR image and bicubic-downscaling it.
    pub fn from_hr(images: Vec<(String, Image)>, scale: usize) -> Result<Self> {
        let pairs = images
            .into_iter()
            .map(|(name, hr)| {
                let hr = hr.mod_crop(scale);
                let lr = downscale(&hr, scale);
                TrainPair { name, lr, hr }
            })
            .collect();
        let ds = Self { scale, pairs };
        ds.check()?;
        Ok(ds)
    }

    pub fn from_pairs(pairs: Vec<TrainPair>, scale: usize) -> Result<Self> {
        let ds = Self { scale, pairs };
        ds.check()?;
        Ok(ds)
    }

    /// Loads every PNG in `hr_dir`. With `lr_dir`, LR images are read from the
    /// file of the same name there instead of being synthesized.
    pub fn load(hr_dir: &Path, lr_dir: Option<&Path>, scale: usize) -> Result<Self> {
        let files = list_pngs(hr_dir)?;
        if files.is_empty() {
            return Err(Error::Data(format!("no PNG images in {}", hr_dir.display())));
        }
        match lr_dir {
            None => {
                let mut images = Vec::new();
                for f in files {
                    images.push((file_name(&f), load_png(&f)?));
                }
                Self::from_hr(images, scale)
            }
            Some(lr_dir) => {
                let mut pairs = Vec::new();
                for f in files {
                    let name = file_name(&f);
                    let lr = load_png(lr_dir.join(&name))?;
                    let hr = load_png(&f)?.crop(0, 0, lr.width() * scale, lr.height() * scale).map_err(|_| {
                        Error::Data(format!("{name}: HR image smaller than {scale}x its LR counterpart"))
                    })?;
                    pairs.push(TrainPair { name, lr, hr });
                }
                Self::from_pairs(pairs, scale)
            }
        }
    }

    fn check(&self) -> Result<()> {
        if self.pairs.is_empty() {
            return Err(Error::Data("dataset is empty".into()));
        }
        for p in &self.pairs {
            if p.hr.width() != p.lr.width() * self.scale || p.hr.height() != p.lr.height() * self.scale {
                return Err(Error::Data(format!(
                    "{}: HR {}x{} is not {}x LR {}x{}",
                    p.name,
                    p.hr.width(),
                    p.hr.height(),
                    self.scale,
                    p.lr.width(),
                    p.lr.height()
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Fails naming the first image whose LR side is smaller than `patch`.
    pub fn check_patch(&self, patch: usize) -> Result<()> {
        for p in &self.pairs {
            if p.lr.width() < patch || p.lr.height() < patch {
                return Err(Error::Data(format!(
                    "{}: LR image {}x{} is smaller than the {patch}x{patch} patch",
                    p.name,
                    p.lr.width(),
                    p.lr.height()
                )));
            }
        }
        Ok(())
    }

    pub fn hr_images(&self) -> Vec<&Image> {
        self.pairs.iter().map(|p| &p.hr).collect()
    }
}

pub fn list_pngs(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
        .collect();
    files.sort();
    Ok(files)
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Per-channel mean over every pixel of every image (pixel-count weighted).
pub fn compute_rgb_mean<'a>(images: impl IntoIterator<Item = &'a Image>) -> Result<[f32; 3]> {
    let mut sum = [0.0f64; 3];
    let mut count = 0usize;
    for img in images {
        for (c, s) in sum.iter_mut().enumerate() {
            *s += img.channel(c).iter().map(|&v| v as f64).sum::<f64>();
        }
        count += img.width() * img.height();
    }
    if count == 0 {
        return Err(Error::Data("cannot compute the RGB mean of an empty image set".into()));
    }
    Ok(sum.map(|s| (s / count as f64) as f32))
}

/// Element of the 8-element dihedral group: `rot` quarter turns
/// counter-clockwise, preceded by a horizontal flip when `flip` is set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dihedral {
    pub rot: u8,
    pub flip: bool,
}

impl Dihedral {
    pub const IDENTITY: Dihedral = Dihedral { rot: 0, flip: false };

    pub fn all() -> [Dihedral; 8] {
        let mut out = [Self::IDENTITY; 8];
        for (i, d) in out.iter_mut().enumerate() {
            *d = Dihedral { rot: (i % 4) as u8, flip: i >= 4 };
        }
        out
    }

    pub fn random(rng: &mut impl Rng) -> Self {
        Self::all()[rng.random_range(0..8)]
    }

    pub fn apply(self, img: &Image) -> Image {
        let (w, h) = (img.width(), img.height());
        let (ow, oh) = if self.rot % 2 == 1 { (h, w) } else { (w, h) };
        let mut out = Image::filled(ow, oh, [0.0; 3]);
        for c in 0..3 {
            for y in 0..h {
                for x in 0..w {
                    let sx = if self.flip { w - 1 - x } else { x };
                    let (dx, dy) = match self.rot % 4 {
                        0 => (sx, y),
                        1 => (y, w - 1 - sx),
                        2 => (w - 1 - sx, h - 1 - y),
                        _ => (h - 1 - y, sx),
                    };
                    out.set(c, dx, dy, img.get(c, x, y));
                }
            }
        }
        out
    }
}

/// Mean-subtracted LR inputs `(B, 3, p, p)` and HR targets `(B, 3, s·p, s·p)`.
#[derive(Clone, Debug)]
pub struct Batch {
    pub lr: Tensor<f32>,
    pub hr: Tensor<f32>,
}

/// Crops one aligned patch pair from `pair` at a random LR origin and applies
/// a random dihedral transform to both.
pub fn sample_patch(pair: &TrainPair, scale: usize, patch: usize, rng: &mut impl Rng) -> Result<(Image, Image)> {
    if pair.lr.width() < patch || pair.lr.height() < patch {
        return Err(Error::Data(format!(
            "{}: LR image {}x{} is smaller than the {patch}x{patch} patch",
            pair.name,
            pair.lr.width(),
            pair.lr.height()
        )));
    }
    let x0 = rng.random_range(0..=pair.lr.width() - patch);
    let y0 = rng.random_range(0..=pair.lr.height() - patch);
    let lr = pair.lr.crop(x0, y0, patch, patch)?;
    let hr = pair.hr.crop(x0 * scale, y0 * scale, patch * scale, patch * scale)?;
    let t = Dihedral::random(rng);
    Ok((t.apply(&lr), t.apply(&hr)))
}

pub fn sample_batch(
    dataset: &Dataset,
    batch: usize,
    patch: usize,
    mean: [f32; 3],
    rng: &mut impl Rng,
) -> Result<Batch> {
    if batch == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    let s = dataset.scale;
    let mut lr = Vec::with_capacity(batch * 3 * patch * patch);
    let mut hr = Vec::with_capacity(batch * 3 * patch * patch * s * s);
    for _ in 0..batch {
        let pair = &dataset.pairs[rng.random_range(0..dataset.pairs.len())];
        let (l, h) = sample_patch(pair, s, patch, rng)?;
        lr.extend_from_slice(l.to_tensor::<f32>(mean).data());
        hr.extend_from_slice(h.to_tensor::<f32>(mean).data());
    }
    Ok(Batch {
        lr: Tensor::from_vec(Shape::new(batch, 3, patch, patch), lr)?,
        hr: Tensor::from_vec(Shape::new(batch, 3, patch * s, patch * s), hr)?,
    })
}
