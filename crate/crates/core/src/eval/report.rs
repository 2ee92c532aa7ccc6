//! Dataset evaluation and report formatting.

use std::fmt::Write as _;
use std::path::Path;

use log::warn;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::metrics::{psnr, rgb_to_y, ssim};
use crate::image_io::{downscale, load_png, upscale, Image};
use crate::model::Model;
use crate::train::data::{list_pngs, TrainPair};

/// What produces the super-resolved image for a pair.
#[derive(Clone, Copy, Debug)]
pub enum Predictor<'a> {
    Model(&'a Model),
    /// Bicubic upscaling of the LR input.
    Bicubic,
    /// Returns the ground truth itself; checks the metric pipeline.
    GroundTruth,
}

impl Predictor<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Predictor::Model(_) => "model",
            Predictor::Bicubic => "bicubic",
            Predictor::GroundTruth => "ground-truth",
        }
    }

    /// Super-resolved output clamped to `[0, 1]`.
    pub fn predict(&self, pair: &TrainPair, scale: usize) -> Result<Image> {
        let out = match self {
            Predictor::Model(m) => m.super_resolve(&pair.lr)?,
            Predictor::Bicubic => upscale(&pair.lr, scale),
            Predictor::GroundTruth => pair.hr.clone(),
        };
        Ok(out.clamped())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub name: String,
    /// `f64::INFINITY` when prediction and ground truth are identical.
    pub psnr_db: f64,
    pub ssim: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub dataset: String,
    pub scale: usize,
    /// Border pixels removed per side before the metrics.
    pub shave: usize,
    pub predictor: String,
    pub rows: Vec<EvalRow>,
    /// Images that could not be evaluated, with the reason.
    pub skipped: Vec<(String, String)>,
}

impl EvalReport {
    pub fn mean_psnr(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.psnr_db))
    }

    pub fn mean_ssim(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.ssim))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("name,psnr_db,ssim\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{:.6}", r.name, fmt_psnr(r.psnr_db, 4), r.ssim);
        }
        let _ = writeln!(s, "mean,{},{:.6}", fmt_psnr(self.mean_psnr(), 4), self.mean_ssim());
        s
    }

    pub fn to_table(&self) -> String {
        let width = self.rows.iter().map(|r| r.name.len()).chain([4]).max().unwrap_or(4);
        let mut s = String::new();
        let _ = writeln!(
            s,
            "dataset={} scale=x{} shave={} predictor={}",
            self.dataset, self.scale, self.shave, self.predictor
        );
        let _ = writeln!(s, "{:<width$}  {:>9}  {:>7}", "name", "psnr_db", "ssim");
        for r in &self.rows {
            let _ = writeln!(s, "{:<width$}  {:>9}  {:>7.4}", r.name, fmt_psnr(r.psnr_db, 2), r.ssim);
        }
        let _ = writeln!(s, "{:<width$}  {:>9}  {:>7.4}", "mean", fmt_psnr(self.mean_psnr(), 2), self.mean_ssim());
        for (name, why) in &self.skipped {
            let _ = writeln!(s, "skipped {name}: {why}");
        }
        s
    }
}

fn fmt_psnr(v: f64, digits: usize) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.digits$}")
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Scores one pair: clamp, convert both images to luma, shave `scale`
/// pixels and compute PSNR/SSIM.
pub fn evaluate_pair(predictor: Predictor<'_>, pair: &TrainPair, scale: usize) -> Result<EvalRow> {
    let sr = predictor.predict(pair, scale)?;
    let y_sr = rgb_to_y(&sr);
    let y_hr = rgb_to_y(&pair.hr.clamped());
    Ok(EvalRow { name: pair.name.clone(), psnr_db: psnr(&y_sr, &y_hr, scale)?, ssim: ssim(&y_sr, &y_hr, scale)? })
}

/// Evaluates in-memory pairs; rows keep input order.
pub fn evaluate_pairs(predictor: Predictor<'_>, pairs: &[TrainPair], scale: usize, dataset: &str) -> EvalReport {
    let results: Vec<_> = pairs.par_iter().map(|p| (p.name.clone(), evaluate_pair(predictor, p, scale))).collect();
    let mut report = EvalReport {
        dataset: dataset.to_string(),
        scale,
        shave: scale,
        predictor: predictor.name().to_string(),
        rows: Vec::new(),
        skipped: Vec::new(),
    };
    for (name, r) in results {
        match r {
            Ok(row) => report.rows.push(row),
            Err(e) => {
                warn!("skipping {name}: {e}");
                report.skipped.push((name, e.to_string()));
            }
        }
    }
    report
}

/// Builds an evaluation pair from an HR image: mod-crop, then bicubic downscale.
pub fn pair_from_hr(name: String, hr: &Image, scale: usize) -> TrainPair {
    let hr = hr.mod_crop(scale);
    TrainPair { name, lr: downscale(&hr, scale), hr }
}

/// Evaluates every PNG in `hr_dir`. LR inputs come from `lr_dir` when given,
/// otherwise from the bicubic downscaler. Unreadable images are skipped and
/// listed in the report.
pub fn evaluate(predictor: Predictor<'_>, hr_dir: &Path, lr_dir: Option<&Path>, scale: usize) -> Result<EvalReport> {
    let files = list_pngs(hr_dir)?;
    if files.is_empty() {
        return Err(Error::Data(format!("no PNG images in {}", hr_dir.display())));
    }
    let mut pairs = Vec::new();
    let mut skipped = Vec::new();
    for f in files {
        let name = f.file_name().unwrap().to_string_lossy().into_owned();
        let loaded = load_png(&f).and_then(|hr| match lr_dir {
            None => Ok(pair_from_hr(name.clone(), &hr, scale)),
            Some(d) => {
                let lr = load_png(d.join(&name))?;
                let hr = hr.crop(0, 0, lr.width() * scale, lr.height() * scale)?;
                Ok(TrainPair { name: name.clone(), lr, hr })
            }
        });
        match loaded {
            Ok(p) => pairs.push(p),
            Err(e) => {
                warn!("skipping {name}: {e}");
                skipped.push((name, e.to_string()));
            }
        }
    }
    let dataset = hr_dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let mut report = evaluate_pairs(predictor, &pairs, scale, &dataset);
    skipped.extend(report.skipped);
    report.skipped = skipped;
    Ok(report)
}
