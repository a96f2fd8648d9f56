#![allow(dead_code)]

use std::path::PathBuf;

use dftmark::{load_image, load_watermark, GrayImage, RealPlane, WatermarkBits};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const HOSTS: [&str; 5] = ["lena", "mandrill", "cameraman", "astronaut", "barbara"];

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Host images are not checked in; tests that need one skip when it is absent.
pub fn host(name: &str) -> Option<GrayImage> {
    let path = fixtures().join("hosts").join(format!("{name}.pgm"));
    if !path.exists() {
        eprintln!(
            "skipping: {} missing (run `dftmark fetch-fixtures`)",
            path.display()
        );
        return None;
    }
    Some(load_image(path).unwrap())
}

pub fn logo() -> WatermarkBits {
    load_watermark(fixtures().join("payloads/logo_19x52.pbm")).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_plane(rng: &mut impl Rng, width: usize, height: usize) -> RealPlane {
    let values = (0..width * height)
        .map(|_| rng.random_range(0.0..255.0))
        .collect();
    RealPlane::new(width, height, values).unwrap()
}

pub fn random_image(rng: &mut impl Rng, width: usize, height: usize) -> GrayImage {
    let px = (0..width * height).map(|_| rng.random()).collect();
    GrayImage::new(width, height, px).unwrap()
}

pub fn random_bits(rng: &mut impl Rng, width: usize, height: usize) -> WatermarkBits {
    let bits = (0..width * height)
        .map(|_| rng.random_range(0..=1u8))
        .collect();
    WatermarkBits::new(width, height, bits).unwrap()
}

/// Textbook 2-D DFT, `O(N^4)`. Returns (re, im), row-major.
/// `sign` is -1 for the forward transform, +1 for the (unscaled) inverse.
pub fn naive_dft(
    re: &[f64],
    im: &[f64],
    width: usize,
    height: usize,
    sign: f64,
) -> (Vec<f64>, Vec<f64>) {
    let tau = std::f64::consts::TAU;
    let mut out_re = vec![0.0; width * height];
    let mut out_im = vec![0.0; width * height];
    for u in 0..height {
        for v in 0..width {
            let (mut sr, mut si) = (0.0, 0.0);
            for y in 0..height {
                for x in 0..width {
                    let theta = sign
                        * tau
                        * ((u * y) as f64 / height as f64 + (v * x) as f64 / width as f64);
                    let (s, c) = theta.sin_cos();
                    let (a, b) = (re[y * width + x], im[y * width + x]);
                    sr += a * c - b * s;
                    si += a * s + b * c;
                }
            }
            out_re[u * width + v] = sr;
            out_im[u * width + v] = si;
        }
    }
    (out_re, out_im)
}

/// Orthonormal DCT-II straight from the double-sum definition.
pub fn textbook_dct(block: &[[f64; 8]; 8]) -> [[f64; 8]; 8] {
    let alpha = |k: usize| {
        if k == 0 {
            (1.0f64 / 8.0).sqrt()
        } else {
            (2.0f64 / 8.0).sqrt()
        }
    };
    let pi = std::f64::consts::PI;
    let mut out = [[0.0; 8]; 8];
    for (u, row) in out.iter_mut().enumerate() {
        for (v, cell) in row.iter_mut().enumerate() {
            let mut s = 0.0;
            for (x, brow) in block.iter().enumerate() {
                for (y, &b) in brow.iter().enumerate() {
                    s += b
                        * ((2 * x + 1) as f64 * u as f64 * pi / 16.0).cos()
                        * ((2 * y + 1) as f64 * v as f64 * pi / 16.0).cos();
                }
            }
            *cell = alpha(u) * alpha(v) * s;
        }
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
