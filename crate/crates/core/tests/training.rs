//! End-to-end behaviour of the training pipeline on tiny synthetic data.

use mamsr::image_io::downscale;
use mamsr::model::checkpoint::encode;
use mamsr::model::network_forward;
use mamsr::synth::test_pattern;
use mamsr::train::*;
use mamsr::{Error, Image, Model, NetworkConfig, Paths, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tiny_dataset() -> Dataset {
    Dataset::from_hr(vec![("a".into(), test_pattern(64, 64, 1, 0.3))], 2).unwrap()
}

fn tiny_model(ds: &Dataset) -> Model {
    let mean = compute_rgb_mean(ds.hr_images()).unwrap();
    Model::new(NetworkConfig::new(2, 16, 2, Paths::ALL), 0, mean).unwrap()
}

fn short_cfg(iters: u64) -> TrainConfig {
    TrainConfig { batch: 4, patch: 24, max_iters: iters, log_every: 10, val_every: None, ..Default::default() }
}

#[test]
fn steps_reduce_loss_on_their_batch() {
    let ds = tiny_dataset();
    let mut model = tiny_model(&ds);
    let mut adam = AdamState::new(&model.params, AdamConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut reduced = 0;
    for _ in 0..100 {
        let batch = sample_batch(&ds, 4, 24, model.rgb_mean, &mut rng).unwrap();
        let before = train_step(&mut model, &mut adam, &batch, 1e-4).unwrap();
        let pred = network_forward(&batch.lr, &model.params, &model.cfg).unwrap();
        let after = l1_loss(&pred, &batch.hr).unwrap().0;
        if after < before {
            reduced += 1;
        }
    }
    assert!(reduced >= 90, "only {reduced}/100 steps reduced their batch loss");
}

#[test]
fn fixed_seed_runs_are_bit_identical() {
    let ds = tiny_dataset();
    let run = |prefetch: bool| {
        let mut m = tiny_model(&ds);
        let log = train(&mut m, &ds, &TrainConfig { prefetch, ..short_cfg(30) }, &mut NoHooks).unwrap();
        (encode(&m), log.losses)
    };
    let (a, la) = run(true);
    let (b, lb) = run(true);
    let (c, lc) = run(false);
    assert_eq!(a, b);
    assert_eq!(la, lb);
    // Prefetching must not change the sampled batches.
    assert_eq!(a, c);
    assert_eq!(la, lc);
    assert!(la.last().unwrap() < &la[0]);
}

#[derive(Default)]
struct Recorder {
    logs: Vec<LogRecord>,
    validations: usize,
    checkpoints: Vec<u64>,
}

impl TrainHooks for Recorder {
    fn on_log(&mut self, record: &LogRecord) {
        self.logs.push(record.clone());
    }

    fn validate(&mut self, _model: &Model) -> Option<f64> {
        self.validations += 1;
        Some(30.0)
    }

    fn on_checkpoint(&mut self, iter: u64, _model: &Model) -> Result<()> {
        self.checkpoints.push(iter);
        Ok(())
    }
}

#[test]
fn hooks_follow_their_schedules() {
    let ds = tiny_dataset();
    let mut m = tiny_model(&ds);
    let mut rec = Recorder::default();
    let cfg = TrainConfig { val_every: Some(20), checkpoint_every: Some(15), ..short_cfg(50) };
    let log = train(&mut m, &ds, &cfg, &mut rec).unwrap();
    assert_eq!(log.losses.len(), 50);
    assert_eq!(rec.logs.iter().map(|r| r.iter).collect::<Vec<_>>(), vec![10, 20, 30, 40, 50]);
    // Validation at 20, 40 and the final iteration.
    assert_eq!(rec.validations, 3);
    assert_eq!(rec.logs[1].val_psnr, Some(30.0));
    assert_eq!(rec.logs[0].val_psnr, None);
    assert_eq!(rec.checkpoints, vec![15, 30, 45, 50]);
    assert!(rec.logs[1].csv_line().starts_with("20,1e-4,"));
}

#[test]
fn non_finite_loss_aborts_without_touching_the_model() {
    let mut hr = test_pattern(64, 64, 2, 0.3);
    for x in 0..64 {
        for y in 0..64 {
            hr.set(0, x, y, f32::NAN);
        }
    }
    let ds = Dataset::from_hr(vec![("nan.png".into(), hr)], 2).unwrap();
    let mut m = Model::new(NetworkConfig::new(1, 16, 2, Paths::ALL), 0, [0.5; 3]).unwrap();
    let before = m.clone();
    let mut rec = Recorder::default();
    let err = train(&mut m, &ds, &short_cfg(5), &mut rec).unwrap_err();
    assert!(matches!(err, Error::NonFinite(_)), "{err}");
    assert_eq!(m, before);
    assert!(rec.checkpoints.is_empty());
}

#[test]
fn scale_and_patch_mismatches_are_rejected() {
    let ds = tiny_dataset();
    let mut m = Model::new(NetworkConfig::new(1, 16, 3, Paths::ALL), 0, [0.5; 3]).unwrap();
    assert!(matches!(train(&mut m, &ds, &short_cfg(1), &mut NoHooks), Err(Error::Config(_))));
    let mut m = tiny_model(&ds);
    let err = train(&mut m, &ds, &TrainConfig { patch: 40, ..short_cfg(1) }, &mut NoHooks).unwrap_err();
    assert!(matches!(&err, Error::Data(m) if m.starts_with("a: ")), "{err}");
}

#[test]
fn adam_state_mirrors_parameters() {
    let ds = tiny_dataset();
    let mut m = tiny_model(&ds);
    let mut adam = AdamState::new(&m.params, AdamConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..3 {
        let b = sample_batch(&ds, 2, 16, m.rgb_mean, &mut rng).unwrap();
        train_step(&mut m, &mut adam, &b, 1e-4).unwrap();
    }
    assert_eq!(adam.m.specs(), m.params.specs());
    assert_eq!(adam.v.specs(), m.params.specs());
    assert!(adam.v.flatten().iter().all(|&v| v >= 0.0));
    assert_eq!(adam.t, 3);
}

fn interior_diff(a: &Image, b: &Image, border: usize) -> f32 {
    let (w, h) = (a.width() - 2 * border, a.height() - 2 * border);
    a.crop(border, border, w, h).unwrap().max_abs_diff(&b.crop(border, border, w, h).unwrap())
}

/// Downscaling an augmented HR patch reproduces the augmented LR patch away
/// from the patch border, where the resampling kernel would reach outside the
/// crop.
#[test]
fn augmented_patches_stay_aligned() {
    for scale in [2, 3, 4] {
        let hr = test_pattern(48 * scale, 48 * scale, 3, 0.1);
        let ds = Dataset::from_hr(vec![("s".into(), hr)], scale).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(scale as u64);
        for _ in 0..16 {
            let (lr, hr) = sample_patch(&ds.pairs[0], scale, 24, &mut rng).unwrap();
            let d = interior_diff(&downscale(&hr, scale), &lr, 2);
            assert!(d < 2.0 / 255.0, "x{scale}: {d}");
        }
        // A one-pixel HR offset is detected.
        let pair = &ds.pairs[0];
        let lr = pair.lr.crop(8, 8, 24, 24).unwrap();
        let shifted = pair.hr.crop(8 * scale + 1, 8 * scale, 24 * scale, 24 * scale).unwrap();
        assert!(interior_diff(&downscale(&shifted, scale), &lr, 2) > 2.0 / 255.0);
    }
}

#[test]
fn dihedral_commutes_with_downscale() {
    let img = test_pattern(40, 32, 4, 0.3);
    for d in Dihedral::all() {
        let a = downscale(&d.apply(&img), 2);
        let b = d.apply(&downscale(&img, 2));
        assert!(a.max_abs_diff(&b) < 1e-6, "{d:?}");
    }
}

#[test]
fn rgb_mean_of_synthetic_corpus() {
    let imgs: Vec<Image> = (0..3).map(|s| test_pattern(16, 16, s, 0.2)).collect();
    let mean = compute_rgb_mean(imgs.iter()).unwrap();
    for (c, m) in mean.iter().enumerate() {
        let want = imgs.iter().flat_map(|i| i.channel(c)).map(|&v| v as f64).sum::<f64>() / (3.0 * 256.0);
        assert!((*m as f64 - want).abs() < 1e-6);
    }
}
