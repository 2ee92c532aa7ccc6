use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::Context;
use log::{info, warn};
use mamsr::eval::{evaluate_pairs, pair_from_hr, Predictor};
use mamsr::image_io::load_png;
use mamsr::model::save_checkpoint;
use mamsr::train::data::{list_pngs, TrainPair};
use mamsr::train::{compute_rgb_mean, train, Dataset, LogRecord, TrainConfig, TrainHooks};
use mamsr::{Model, Result};

use crate::args::TrainArgs;
use crate::commands::{announce, create_dir};
use crate::error::CliError;

struct CliHooks {
    out: PathBuf,
    numbered: bool,
    log: BufWriter<File>,
    val: Vec<TrainPair>,
}

impl TrainHooks for CliHooks {
    fn on_log(&mut self, r: &LogRecord) {
        let val = r.val_psnr.map(|p| format!("{p:.4}")).unwrap_or_default();
        let line = format!("{},{:e},{:.6},{val}", r.iter, r.lr, r.loss);
        if let Err(e) = writeln!(self.log, "{line}").and_then(|_| self.log.flush()) {
            warn!("cannot append to training log: {e}");
        }
    }

    fn validate(&mut self, model: &Model) -> Option<f64> {
        if self.val.is_empty() {
            return None;
        }
        let report = evaluate_pairs(Predictor::Model(model), &self.val, model.cfg.scale, "val");
        (!report.rows.is_empty()).then(|| report.mean_psnr())
    }

    fn on_checkpoint(&mut self, iter: u64, model: &Model) -> Result<()> {
        if self.numbered {
            save_checkpoint(model, self.out.join(format!("ckpt_{iter}.mamn")))?;
        }
        Ok(save_checkpoint(model, self.out.join("latest.mamn"))?)
    }
}

pub fn run(args: TrainArgs) -> Result<(), CliError> {
    let cfg = args.net.resolve()?;
    announce(&cfg);
    let dataset = Dataset::load(&args.hr_dir, args.lr_dir.as_deref(), cfg.scale)?;
    info!("{} training images from {}", dataset.len(), args.hr_dir.display());

    let mut val = Vec::new();
    if let Some(dir) = &args.val_hr_dir {
        for f in list_pngs(dir)? {
            let name = f.file_name().unwrap_or_default().to_string_lossy().into_owned();
            val.push(pair_from_hr(name, &load_png(&f)?, cfg.scale));
        }
        if val.is_empty() {
            return Err(CliError::Data(format!("no PNG images in {}", dir.display())));
        }
        info!("{} validation images from {}", val.len(), dir.display());
    }

    let mean = compute_rgb_mean(dataset.hr_images())?;
    info!("rgb mean {:.4} {:.4} {:.4}", mean[0], mean[1], mean[2]);
    let mut model = Model::new(cfg, args.seed, mean)?;

    let tcfg = TrainConfig {
        batch: args.batch,
        patch: args.patch,
        lr0: args.lr,
        halve_every: args.halve_every,
        max_iters: args.iters,
        seed: args.seed,
        log_every: args.log_every,
        val_every: (!val.is_empty() && args.val_every > 0).then_some(args.val_every),
        checkpoint_every: args.ckpt_every,
        ..Default::default()
    };
    tcfg.validate()?;

    create_dir(&args.out)?;
    let log_path = args.out.join("train_log.csv");
    let mut log = BufWriter::new(File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?);
    writeln!(log, "iter,lr,l1_loss,val_psnr")?;
    let mut hooks = CliHooks { out: args.out.clone(), numbered: args.ckpt_every.is_some(), log, val };

    train(&mut model, &dataset, &tcfg, &mut hooks)?;
    let final_path = args.out.join("final.mamn");
    save_checkpoint(&model, &final_path)?;
    info!("wrote {}", final_path.display());
    Ok(())
}
