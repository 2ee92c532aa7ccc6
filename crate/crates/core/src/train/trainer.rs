//! Training loop: sample → forward → L1 → backward → Adam.

use std::sync::mpsc::sync_channel;
use std::thread;

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{network_backward, network_forward_cached, Model};
use crate::train::data::{sample_batch, Batch, Dataset};
use crate::train::optim::{l1_loss, lr_at, AdamConfig, AdamState};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch: usize,
    /// LR patch side; HR patches are `scale ×` larger.
    pub patch: usize,
    pub lr0: f64,
    pub halve_every: u64,
    pub adam: AdamConfig,
    pub max_iters: u64,
    pub seed: u64,
    pub log_every: u64,
    /// `None` disables validation.
    pub val_every: Option<u64>,
    pub checkpoint_every: Option<u64>,
    /// Assemble batches on a producer thread (bounded queue of four).
    pub prefetch: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch: 16,
            patch: 48,
            lr0: 1e-4,
            halve_every: 200_000,
            adam: AdamConfig::default(),
            max_iters: 1000,
            seed: 0,
            log_every: 100,
            val_every: Some(10_000),
            checkpoint_every: None,
            prefetch: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 || self.patch == 0 {
            return Err(Error::Config("batch and patch size must be positive".into()));
        }
        if !(self.lr0 > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr0)));
        }
        if self.log_every == 0 {
            return Err(Error::Config("log interval must be positive".into()));
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRecord {
    pub iter: u64,
    pub lr: f64,
    /// Mean L1 loss over the logging interval.
    pub loss: f64,
    pub val_psnr: Option<f64>,
}

impl LogRecord {
    /// `iter,lr,l1_loss[,val_psnr]`
    pub fn csv_line(&self) -> String {
        let mut s = format!("{},{:e},{:.6}", self.iter, self.lr, self.loss);
        if let Some(p) = self.val_psnr {
            s.push_str(&format!(",{p:.4}"));
        }
        s
    }
}

/// Callbacks invoked by [`train`]. All methods have no-op defaults.
pub trait TrainHooks {
    fn on_log(&mut self, _record: &LogRecord) {}

    /// Validation PSNR of the current model, if a validation set exists.
    fn validate(&mut self, _model: &Model) -> Option<f64> {
        None
    }

    fn on_checkpoint(&mut self, _iter: u64, _model: &Model) -> Result<()> {
        Ok(())
    }
}

pub struct NoHooks;

impl TrainHooks for NoHooks {}

#[derive(Clone, Debug, Default)]
pub struct TrainLog {
    pub records: Vec<LogRecord>,
    /// Loss of every iteration, in order.
    pub losses: Vec<f32>,
}

/// Forward, backward and one Adam update on `batch`; returns the pre-update loss.
pub fn train_step(model: &mut Model, adam: &mut AdamState, batch: &Batch, lr: f64) -> Result<f32> {
    let (pred, cache) = network_forward_cached(&batch.lr, &model.params, &model.cfg)?;
    let (loss, grad) = l1_loss(&pred, &batch.hr)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("L1 loss at step {}", adam.t + 1)));
    }
    let (grads, _) = network_backward(&model.params, &model.cfg, &cache, &grad)?;
    adam.step(&mut model.params, &grads, lr)?;
    Ok(loss)
}

/// Runs `cfg.max_iters` training steps on `model`.
///
/// On a non-finite loss or gradient the run stops with an error; the model
/// keeps the last parameters that produced a finite step, and no further
/// checkpoint is written.
pub fn train(model: &mut Model, dataset: &Dataset, cfg: &TrainConfig, hooks: &mut dyn TrainHooks) -> Result<TrainLog> {
    cfg.validate()?;
    model.cfg.validate()?;
    if dataset.scale != model.cfg.scale {
        return Err(Error::Config(format!(
            "dataset scale {} does not match model scale {}",
            dataset.scale, model.cfg.scale
        )));
    }
    dataset.check_patch(cfg.patch)?;

    let mut adam = AdamState::new(&model.params, cfg.adam);
    let mut log = TrainLog::default();
    let mean = model.rgb_mean;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut run = |next: &mut dyn FnMut() -> Result<Batch>| -> Result<()> {
        let mut interval = (0.0f64, 0u64);
        for iter in 0..cfg.max_iters {
            let batch = next()?;
            let lr = lr_at(iter, cfg.lr0, cfg.halve_every);
            let loss = train_step(model, &mut adam, &batch, lr)?;
            log.losses.push(loss);
            interval.0 += loss as f64;
            interval.1 += 1;

            let done = iter + 1;
            let validate = cfg.val_every.is_some_and(|v| v > 0 && done % v == 0);
            if done % cfg.log_every == 0 || validate || done == cfg.max_iters {
                let val_psnr = if validate || done == cfg.max_iters { hooks.validate(model) } else { None };
                let rec = LogRecord { iter: done, lr, loss: interval.0 / interval.1 as f64, val_psnr };
                info!("{}", rec.csv_line());
                hooks.on_log(&rec);
                log.records.push(rec);
                interval = (0.0, 0);
            }
            if cfg.checkpoint_every.is_some_and(|c| c > 0 && done % c == 0) || done == cfg.max_iters {
                hooks.on_checkpoint(done, model)?;
            }
        }
        Ok(())
    };

    if cfg.prefetch {
        thread::scope(|s| {
            let (tx, rx) = sync_channel::<Result<Batch>>(4);
            let producer = s.spawn(move || {
                for _ in 0..cfg.max_iters {
                    let b = sample_batch(dataset, cfg.batch, cfg.patch, mean, &mut rng);
                    let failed = b.is_err();
                    if tx.send(b).is_err() || failed {
                        break;
                    }
                }
            });
            let result = run(&mut || rx.recv().map_err(|_| Error::Data("batch producer stopped".into()))?);
            drop(rx);
            producer.join().expect("batch producer panicked");
            result
        })?;
    } else {
        run(&mut || sample_batch(dataset, cfg.batch, cfg.patch, mean, &mut rng))?;
    }
    Ok(log)
}
