//! Randomized invariants across the tensor ops, model, metrics and resampler.

use mamsr::eval::{psnr, rgb_to_y, ssim, YImage};
use mamsr::image_io::{bicubic_resize, load_png, resample_taps, save_png};
use mamsr::model::checkpoint::encode;
use mamsr::model::{count_params, mamb_forward, network_forward, BlockParams, ModelParams};
use mamsr::ops::*;
use mamsr::train::lr_at;
use mamsr::{Image, Model, NetworkConfig, Paths, Shape, Tensor};
use proptest::prelude::*;

fn tensor_strategy(shape: Shape) -> impl Strategy<Value = Tensor<f32>> {
    prop::collection::vec(-2.0f32..2.0, shape.numel()).prop_map(move |v| Tensor::from_vec(shape, v).unwrap())
}

fn image_strategy(w: usize, h: usize) -> impl Strategy<Value = Image> {
    prop::collection::vec(0.0f32..1.0, 3 * w * h).prop_map(move |v| Image::new(w, h, v).unwrap())
}

fn paths_strategy() -> impl Strategy<Value = Paths> {
    (any::<bool>(), any::<bool>(), any::<bool>()).prop_map(|(csi, icd, csd)| Paths { csi, icd, csd })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conv_pad1_preserves_spatial_shape(h in 1usize..9, w in 1usize..9, cin in 1usize..4, cout in 1usize..4) {
        let x = Tensor::<f32>::full(Shape::new(1, cin, h, w), 0.5);
        let y = conv2d(&x, &ConvParams::zeros(cout, cin, 3), 1).unwrap();
        prop_assert_eq!(y.shape(), Shape::new(1, cout, h, w));
    }

    #[test]
    fn depthwise_equals_block_diagonal_conv(
        x in tensor_strategy(Shape::new(2, 3, 5, 6)),
        // He-normal scale for a 3×3 depth-wise kernel is about 0.47.
        k in prop::collection::vec(-0.5f32..0.5, 27),
        b in prop::collection::vec(-0.5f32..0.5, 3),
    ) {
        let dw = DepthwiseParams { weight: Tensor::from_vec(Shape::new(3, 1, 3, 3), k.clone()).unwrap(), bias: b.clone() };
        let mut full = ConvParams::zeros(3, 3, 3);
        for c in 0..3 {
            for i in 0..9 {
                full.weight.data_mut()[(c * 3 + c) * 9 + i] = k[c * 9 + i];
            }
        }
        full.bias = b;
        let a = depthwise_conv2d(&x, &dw).unwrap();
        let c = conv2d(&x, &full, 1).unwrap();
        let d = a.max_abs_diff(&c);
        prop_assert!(d < 1e-6, "diff {d}");
    }

    #[test]
    fn shuffle_round_trip_is_bit_exact(r in 2usize..4, c in 1usize..3, h in 1usize..5, w in 1usize..5, seed in any::<u32>()) {
        let shape = Shape::new(2, c * r * r, h, w);
        let x = Tensor::<f32>::from_fn(shape, |n, c, y, x| ((seed as usize + n * 7 + c * 13 + y * 17 + x * 19) % 101) as f32 * 0.37 - 11.0);
        let up = pixel_shuffle(&x, r).unwrap();
        prop_assert_eq!(up.shape(), Shape::new(2, c, r * h, r * w));
        prop_assert_eq!(space_to_depth(&up, r).unwrap(), x);
    }

    #[test]
    fn activation_ranges(x in tensor_strategy(Shape::new(1, 2, 4, 4))) {
        // Within ±10 the f32 sigmoid does not round to 0 or 1.
        let wide = x.scale(5.0);
        prop_assert!(sigmoid(&wide).data().iter().all(|&v| v > 0.0 && v < 1.0));
        prop_assert!(relu(&wide).data().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn standardized_statistics_have_zero_mean(v in prop::collection::vec(-5.0f64..5.0, 16)) {
        let t = Tensor::from_vec(Shape::new(2, 8, 1, 1), v).unwrap();
        let z = standardize_channels(&t, 1e-5);
        for n in 0..2 {
            let item = t.item(n);
            let mu = item.iter().sum::<f64>() / 8.0;
            let sd = (item.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / 8.0).sqrt();
            prop_assume!(sd > 1e-2);
            let m = z.item(n).iter().sum::<f64>() / 8.0;
            prop_assert!(m.abs() < 1e-6);
        }
    }

    #[test]
    fn count_params_matches_manifest(blocks in 1usize..4, c4 in 1usize..5, scale in 2usize..5, paths in paths_strategy()) {
        let channels = 4 * c4;
        let cfg = NetworkConfig::new(blocks, channels, scale, paths).with_reduction(4);
        let model = Model::new(cfg.clone(), 0, [0.5; 3]).unwrap();
        let bytes = encode(&model);
        let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let manifest = std::str::from_utf8(&bytes[16..16 + len]).unwrap();
        let brute: usize = manifest
            .lines()
            .filter_map(|l| l.strip_prefix("tensor "))
            .map(|l| l.split_whitespace().skip(1).map(|d| d.parse::<usize>().unwrap()).product::<usize>())
            .sum();
        prop_assert_eq!(count_params(&cfg), brute);
        prop_assert_eq!(bytes.len() - 16 - len, 4 * brute);
        let with_csi = NetworkConfig { paths: Paths { csi: true, ..paths }, ..cfg.clone() };
        let without_csi = NetworkConfig { paths: Paths { csi: false, ..paths }, ..cfg };
        prop_assert_eq!(count_params(&with_csi), count_params(&without_csi));
    }

    #[test]
    fn gated_residual_is_bounded_by_x(seed in 0u64..1000, paths in paths_strategy()) {
        let cfg = NetworkConfig::new(1, 16, 2, paths);
        let p: BlockParams<f64> = ModelParams::init(&cfg, seed).blocks.remove(0);
        let x = Tensor::from_fn(Shape::new(1, 16, 5, 5), |_, c, y, x| (((seed as usize + c * 31 + y * 7 + x * 3) % 23) as f64 - 11.0) / 7.0);
        let (out, cache) = mamb_forward(&x, &p, &cfg).unwrap();
        if let Some(g) = cache.maps().gate {
            prop_assert!(g.data().iter().all(|&v| v > 0.0 && v < 1.0));
        }
        let xr = cache.residual();
        for i in 0..out.len() {
            prop_assert!((out.data()[i] - x.data()[i]).abs() <= xr.data()[i].abs() + 1e-12);
        }
    }

    #[test]
    fn lr_schedule_halves_once_per_period(iter in 0u64..2_000_000) {
        let k = iter / 200_000;
        prop_assert_eq!(lr_at(iter, 1e-4, 200_000), 1e-4 * 0.5f64.powi(k as i32));
        let start = k * 200_000;
        prop_assert_eq!(lr_at(iter, 1e-4, 200_000), lr_at(start, 1e-4, 200_000));
        prop_assert_eq!(lr_at(start + 200_000, 1e-4, 200_000) * 2.0, lr_at(start, 1e-4, 200_000));
    }

    #[test]
    fn metrics_are_symmetric(a in image_strategy(16, 16), b in image_strategy(16, 16)) {
        let (ya, yb) = (rgb_to_y(&a), rgb_to_y(&b));
        prop_assert_eq!(psnr(&ya, &yb, 2).unwrap(), psnr(&yb, &ya, 2).unwrap());
        prop_assert!((ssim(&ya, &yb, 2).unwrap() - ssim(&yb, &ya, 2).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn luma_linear_part_is_linear(a in image_strategy(4, 3), b in image_strategy(4, 3)) {
        let mid = Image::new(4, 3, a.data().iter().zip(b.data()).map(|(x, y)| 0.5 * x + 0.5 * y).collect()).unwrap();
        let (ya, yb, ym) = (rgb_to_y(&a), rgb_to_y(&b), rgb_to_y(&mid));
        for i in 0..12 {
            let lin = 0.5 * (ya.data[i] - 16.0) + 0.5 * (yb.data[i] - 16.0);
            prop_assert!((ym.data[i] - 16.0 - lin).abs() < 1e-4);
        }
    }

    #[test]
    fn resample_weights_sum_to_one(n_in in 1usize..64, n_out in 1usize..64) {
        for t in resample_taps(n_in, n_out) {
            prop_assert!((t.weight.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(t.index.iter().all(|&i| i < n_in));
        }
    }

    #[test]
    fn resize_commutes_with_transpose(img in image_strategy(9, 7), ow in 1usize..20, oh in 1usize..20) {
        let a = bicubic_resize(&img, ow, oh).transpose();
        let b = bicubic_resize(&img.transpose(), oh, ow);
        prop_assert!(a.max_abs_diff(&b) < 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn png_round_trip_within_one_level(img in image_strategy(7, 5)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.png");
        save_png(&img, &path).unwrap();
        let back = load_png(&path).unwrap();
        prop_assert!(back.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!(back.max_abs_diff(&img) <= 1.0 / 255.0 + 1e-6);
        // Quantized images survive a second trip exactly.
        save_png(&back, &path).unwrap();
        prop_assert_eq!(load_png(&path).unwrap(), back);
    }
}

#[test]
fn psnr_decreases_with_noise_amplitude() {
    let base = YImage::new(32, 32, (0..1024).map(|i| 60.0 + ((i * 37) % 97) as f64).collect()).unwrap();
    // Fixed zero-mean pattern scaled by each amplitude.
    let pattern: Vec<f64> = (0..1024).map(|i| (((i * 7919) % 1013) as f64 / 1013.0) - 0.5).collect();
    let mut last = f64::INFINITY;
    for amp in [1.0, 2.0, 4.0, 8.0, 16.0] {
        let noisy = YImage::new(32, 32, base.data.iter().zip(&pattern).map(|(b, p)| b + amp * p).collect()).unwrap();
        let v = psnr(&base, &noisy, 2).unwrap();
        assert!(v < last, "amplitude {amp}: {v} !< {last}");
        last = v;
    }
}

#[test]
fn network_forward_is_bit_deterministic() {
    for scale in [2, 3, 4] {
        let cfg = NetworkConfig::new(2, 16, scale, Paths::ALL);
        let p = ModelParams::<f32>::init(&cfg, 11);
        let x = Tensor::from_fn(Shape::new(2, 3, 7, 6), |n, c, y, x| ((n + c * 3 + y * 5 + x * 7) % 11) as f32 / 11.0 - 0.5);
        let a = network_forward(&x, &p, &cfg).unwrap();
        let b = network_forward(&x, &p, &cfg).unwrap();
        assert_eq!(a.shape(), Shape::new(2, 3, 7 * scale, 6 * scale));
        assert_eq!(a, b);
    }
}
