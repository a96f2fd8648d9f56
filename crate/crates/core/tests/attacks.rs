mod common;

use dftmark::attacks::{
    gaussian_filter, gaussian_kernel, gaussian_noise, hist_eq, jpeg_compress, salt_pepper,
    FILTER_WINDOWS,
};
use dftmark::{apply_attack, embed, psnr, AttackSpec, EmbedParams, GrayImage, SecretKey};
use proptest::prelude::*;

#[test]
fn kernel_center_weight() {
    let k = gaussian_kernel(3, 0.5).unwrap();
    let e = (-2.0f64).exp();
    let center = 1.0 / (1.0 + 2.0 * e);
    assert!((k[1] - center).abs() < 1e-15);
    assert!((k[1] - 0.7870).abs() < 1e-4, "{}", k[1]);
    // Centre tap of the separable 3x3 kernel.
    assert!((k[1] * k[1] - 0.6193).abs() < 1e-4);
    assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
}

#[test]
fn kernel_tail_beyond_two_pixels_is_negligible() {
    let k = gaussian_kernel(9, 0.5).unwrap();
    let tail: f64 = k[..2].iter().chain(&k[7..]).sum();
    assert!(tail < 1e-4, "{tail}");
}

#[test]
fn wide_windows_agree_at_half_pixel_sigma() {
    let img = common::random_image(&mut common::rng(21), 64, 64);
    let out5 = gaussian_filter(&img, 5, 0.5).unwrap();
    for w in [7, 9] {
        let out = gaussian_filter(&img, w, 0.5).unwrap();
        let differing = out
            .pixels()
            .iter()
            .zip(out5.pixels())
            .filter(|(a, b)| a != b)
            .count();
        assert!(
            differing <= img.pixels().len() / 1000,
            "window {w}: {differing} pixels"
        );
    }
}

#[test]
fn salt_pepper_count_matches_binomial() {
    let n = 512 * 512;
    let img = GrayImage::filled(512, 512, 128).unwrap();
    let d = 0.01;
    let (mean, sd) = (n as f64 * d, (n as f64 * d * (1.0 - d)).sqrt());
    for seed in 0..5 {
        let out = salt_pepper(&img, d, seed).unwrap();
        let hit = out.pixels().iter().filter(|&&p| p != 128).count() as f64;
        assert!(
            (hit - mean).abs() <= 3.0 * sd,
            "seed {seed}: {hit} vs {mean}"
        );
        let salt = out.pixels().iter().filter(|&&p| p == 255).count() as f64;
        assert!((salt / hit - 0.5).abs() < 0.05);
    }
    assert!((mean - 2621.44).abs() < 1e-9);
}

#[test]
fn gaussian_noise_psnr_near_closed_form() {
    let expected = 10.0 * (1.0f64 / 0.001).log10();
    let mid = GrayImage::filled(512, 512, 128).unwrap();
    let p = psnr(&mid, &gaussian_noise(&mid, 0.0, 0.001, 5).unwrap()).unwrap();
    assert!((p - expected).abs() < 0.3, "{p}");
    for name in common::HOSTS {
        let Some(host) = common::host(name) else {
            continue;
        };
        let p = psnr(&host, &gaussian_noise(&host, 0.0, 0.001, 5).unwrap()).unwrap();
        assert!((p - expected).abs() <= 2.0, "{name}: {p}");
    }
}

#[test]
fn noise_mean_shifts_intensity() {
    let mid = GrayImage::filled(64, 64, 100).unwrap();
    let out = gaussian_noise(&mid, 0.1, 0.0, 0).unwrap();
    assert!(out.pixels().iter().all(|&p| p == 126));
}

#[test]
fn jpeg_near_lossless_at_quality_100() {
    let mut targets = vec![common::random_image(&mut common::rng(9), 64, 64)];
    targets.extend(common::HOSTS.iter().filter_map(|n| common::host(n)));
    for img in targets {
        let p = psnr(&img, &jpeg_compress(&img, 100).unwrap()).unwrap();
        assert!(p > 40.0, "{p}");
    }
}

#[test]
fn jpeg_quality_90_on_watermarked_mandrill() {
    let Some(host) = common::host("mandrill") else {
        return;
    };
    let key = SecretKey::from_passphrase("k1").unwrap();
    let marked = embed(
        &host,
        &common::logo(),
        &key,
        &EmbedParams::new(950.0).unwrap(),
    )
    .unwrap()
    .image;
    let p = psnr(&marked, &jpeg_compress(&marked, 90).unwrap()).unwrap();
    assert!((p - 35.63).abs() <= 1.5, "{p}");
}

#[test]
fn jpeg_quality_orders_distortion() {
    let Some(host) = common::host("lena") else {
        return;
    };
    let mut last = f64::INFINITY;
    for q in [100, 90, 75, 60, 30, 10] {
        let p = psnr(&host, &jpeg_compress(&host, q).unwrap()).unwrap();
        assert!(p < last, "q={q}");
        last = p;
    }
}

#[test]
fn hist_eq_two_levels() {
    let px = (0..256).map(|i| if i % 2 == 0 { 0 } else { 255 }).collect();
    let img = GrayImage::new(16, 16, px).unwrap();
    assert_eq!(hist_eq(&img), img);
    let px: Vec<u8> = (0..256).map(|i| if i < 128 { 60 } else { 90 }).collect();
    let out = hist_eq(&GrayImage::new(16, 16, px).unwrap());
    assert!(out.pixels()[..128].iter().all(|&p| p == 0));
    assert!(out.pixels()[128..].iter().all(|&p| p == 255));
}

#[test]
fn hist_eq_keeps_a_uniform_ramp_uniform() {
    // Every level appears four times.
    let px: Vec<u8> = (0..1024).map(|i| (i / 4) as u8).collect();
    let out = hist_eq(&GrayImage::new(32, 32, px).unwrap());
    let mut hist = [0usize; 256];
    for &p in out.pixels() {
        hist[p as usize] += 1;
    }
    assert!(hist.iter().all(|&h| h == 4), "{hist:?}");
}

#[test]
fn hist_eq_spreads_a_narrow_histogram() {
    let px: Vec<u8> = (0..1024).map(|i| 100 + (i % 16) as u8).collect();
    let out = hist_eq(&GrayImage::new(32, 32, px).unwrap());
    assert_eq!(*out.pixels().iter().min().unwrap(), 0);
    assert_eq!(*out.pixels().iter().max().unwrap(), 255);
    let levels: std::collections::BTreeSet<u8> = out.pixels().iter().copied().collect();
    assert_eq!(levels.len(), 16);
}

#[test]
fn text_form_drives_composites() {
    let img = common::random_image(&mut common::rng(4), 32, 32);
    let spec: AttackSpec = "histeq+gauss-noise:var=0.001,seed=7".parse().unwrap();
    let by_hand = gaussian_noise(&hist_eq(&img), 0.0, 0.001, 7).unwrap();
    assert_eq!(apply_attack(&img, &spec).unwrap(), by_hand);
    let reversed: AttackSpec = "gauss-noise:var=0.001,seed=7+histeq".parse().unwrap();
    assert_ne!(apply_attack(&img, &reversed).unwrap(), by_hand);
}

fn simple_spec() -> impl Strategy<Value = AttackSpec> {
    prop_oneof![
        (1u8..=100).prop_map(|quality| AttackSpec::Jpeg { quality }),
        (0.0f64..0.02, any::<u64>()).prop_map(|(variance, seed)| AttackSpec::GaussianNoise {
            mean: 0.0,
            variance,
            seed
        }),
        (0.0f64..=1.0, any::<u64>())
            .prop_map(|(density, seed)| AttackSpec::SaltPepper { density, seed }),
        (prop::sample::select(FILTER_WINDOWS.to_vec()), 0.1f64..3.0)
            .prop_map(|(window, sigma)| AttackSpec::GaussianFilter { window, sigma }),
        Just(AttackSpec::HistEq),
    ]
}

fn image_strategy() -> impl Strategy<Value = GrayImage> {
    (8usize..33, 8usize..33).prop_flat_map(|(w, h)| {
        prop::collection::vec(any::<u8>(), w * h)
            .prop_map(move |px| GrayImage::new(w, h, px).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn attacks_keep_shape_and_are_pure(img in image_strategy(), spec in simple_spec()) {
        let a = apply_attack(&img, &spec).unwrap();
        prop_assert_eq!((a.width(), a.height()), (img.width(), img.height()));
        prop_assert_eq!(&apply_attack(&img, &spec).unwrap(), &a);
    }

    #[test]
    fn composite_applies_in_order(img in image_strategy(), a in simple_spec(), b in simple_spec()) {
        let single = apply_attack(&img, &AttackSpec::Composite(vec![a.clone()])).unwrap();
        prop_assert_eq!(&single, &apply_attack(&img, &a).unwrap());
        let pair = apply_attack(&img, &AttackSpec::Composite(vec![a.clone(), b.clone()])).unwrap();
        let chained = apply_attack(&apply_attack(&img, &a).unwrap(), &b).unwrap();
        prop_assert_eq!(pair, chained);
    }

    #[test]
    fn text_form_round_trips(a in simple_spec(), b in simple_spec()) {
        for spec in [a.clone(), AttackSpec::Composite(vec![a, b])] {
            let text = spec.to_string();
            prop_assert_eq!(text.parse::<AttackSpec>().unwrap(), spec, "{}", text);
        }
    }

    #[test]
    fn filters_preserve_constants(v in any::<u8>(), w in prop::sample::select(FILTER_WINDOWS.to_vec()), sigma in 0.1f64..5.0) {
        let flat = GrayImage::filled(16, 12, v).unwrap();
        prop_assert_eq!(gaussian_filter(&flat, w, sigma).unwrap(), flat);
    }
}
