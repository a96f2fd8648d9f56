//! Seedable attacks used by the robustness benchmark.
//!
//! Noise parameters are on the normalized `[0, 1]` intensity scale: a
//! variance of 0.001 means a pixel standard deviation of `sqrt(0.001) * 255`.
//!
//! Text form, also used by the CLI and configs:
//!
//! ```text
//! jpeg:q=75
//! gauss-noise:var=0.001,seed=7        (mean=... optional)
//! sp:d=0.01,seed=7
//! gauss-filter:w=3,sigma=0.5
//! histeq
//! histeq+gauss-noise:var=0.001,seed=7 (applied left to right)
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::io::Cursor;
use std::str::FromStr;

use image::codecs::jpeg::JpegEncoder;
use image::{ExtendedColorType, ImageFormat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image_model::{quantize, GrayImage};

pub const FILTER_WINDOWS: [usize; 4] = [3, 5, 7, 9];
pub const MAX_COMPOSITE_DEPTH: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub enum AttackSpec {
    Jpeg { quality: u8 },
    GaussianNoise { mean: f64, variance: f64, seed: u64 },
    SaltPepper { density: f64, seed: u64 },
    GaussianFilter { window: usize, sigma: f64 },
    HistEq,
    Composite(Vec<AttackSpec>),
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidSpec(msg.into())
}

impl AttackSpec {
    pub fn validate(&self) -> Result<()> {
        self.validate_at(1)
    }

    fn validate_at(&self, depth: usize) -> Result<()> {
        match *self {
            Self::Jpeg { quality } => {
                if !(1..=100).contains(&quality) {
                    return Err(invalid(format!("JPEG quality {quality} outside 1..=100")));
                }
            }
            Self::GaussianNoise { mean, variance, .. } => {
                if !mean.is_finite() {
                    return Err(invalid(format!("noise mean {mean}")));
                }
                if !(variance.is_finite() && variance >= 0.0) {
                    return Err(invalid(format!("noise variance {variance} must be >= 0")));
                }
            }
            Self::SaltPepper { density, .. } => {
                if !(0.0..=1.0).contains(&density) {
                    return Err(invalid(format!("density {density} outside [0, 1]")));
                }
            }
            Self::GaussianFilter { window, sigma } => {
                if !FILTER_WINDOWS.contains(&window) {
                    return Err(invalid(format!("filter window {window} (3, 5, 7 or 9)")));
                }
                if !(sigma.is_finite() && sigma > 0.0) {
                    return Err(invalid(format!("filter sigma {sigma} must be > 0")));
                }
            }
            Self::HistEq => {}
            Self::Composite(ref members) => {
                if members.is_empty() {
                    return Err(invalid("empty composite"));
                }
                if depth > MAX_COMPOSITE_DEPTH {
                    return Err(invalid(format!(
                        "composite nested deeper than {MAX_COMPOSITE_DEPTH}"
                    )));
                }
                for m in members {
                    m.validate_at(depth + 1)?;
                }
            }
        }
        Ok(())
    }
}

fn write_float(f: &mut fmt::Formatter<'_>, v: f64) -> fmt::Result {
    // Shortest round-trip form; 1e-5 stays 0.00001 rather than 1e-5.
    write!(f, "{v}")
}

impl fmt::Display for AttackSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Jpeg { quality } => write!(f, "jpeg:q={quality}"),
            Self::GaussianNoise {
                mean,
                variance,
                seed,
            } => {
                f.write_str("gauss-noise:")?;
                if *mean != 0.0 {
                    f.write_str("mean=")?;
                    write_float(f, *mean)?;
                    f.write_str(",")?;
                }
                f.write_str("var=")?;
                write_float(f, *variance)?;
                write!(f, ",seed={seed}")
            }
            Self::SaltPepper { density, seed } => {
                f.write_str("sp:d=")?;
                write_float(f, *density)?;
                write!(f, ",seed={seed}")
            }
            Self::GaussianFilter { window, sigma } => {
                write!(f, "gauss-filter:w={window},sigma=")?;
                write_float(f, *sigma)
            }
            Self::HistEq => f.write_str("histeq"),
            Self::Composite(members) => {
                for (i, m) in members.iter().enumerate() {
                    if i > 0 {
                        f.write_str("+")?;
                    }
                    write!(f, "{m}")?;
                }
                Ok(())
            }
        }
    }
}

struct Params<'a> {
    name: &'a str,
    values: BTreeMap<&'a str, &'a str>,
}

impl<'a> Params<'a> {
    fn parse(text: &'a str) -> Result<Self> {
        let (name, rest) = text.split_once(':').unwrap_or((text, ""));
        let mut values = BTreeMap::new();
        for pair in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| invalid(format!("expected key=value, got {pair:?}")))?;
            if values.insert(k.trim(), v.trim()).is_some() {
                return Err(invalid(format!("{name}: {k} given twice")));
            }
        }
        Ok(Self {
            name: name.trim(),
            values,
        })
    }

    fn take<T: FromStr>(&mut self, keys: &[&'a str]) -> Result<Option<T>> {
        let mut found = None;
        for k in keys {
            if let Some(v) = self.values.remove(k) {
                if found.is_some() {
                    return Err(invalid(format!("{}: {} given twice", self.name, keys[0])));
                }
                found = Some(
                    v.parse()
                        .map_err(|_| invalid(format!("{}: bad value {k}={v}", self.name)))?,
                );
            }
        }
        Ok(found)
    }

    fn require<T: FromStr>(&mut self, keys: &[&'a str]) -> Result<T> {
        self.take(keys)?
            .ok_or_else(|| invalid(format!("{}: missing {}", self.name, keys[0])))
    }

    fn finish(self, spec: AttackSpec) -> Result<AttackSpec> {
        if let Some(k) = self.values.keys().next() {
            return Err(invalid(format!("{}: unknown parameter {k}", self.name)));
        }
        Ok(spec)
    }
}

fn parse_single(text: &str, default_seed: u64) -> Result<AttackSpec> {
    let mut p = Params::parse(text)?;
    let spec = match p.name {
        "jpeg" => {
            let quality: u32 = p.require(&["q", "quality"])?;
            AttackSpec::Jpeg {
                quality: u8::try_from(quality).unwrap_or(0),
            }
        }
        "gauss-noise" => AttackSpec::GaussianNoise {
            mean: p.take(&["mean"])?.unwrap_or(0.0),
            variance: p.require(&["var", "variance"])?,
            seed: p.take(&["seed"])?.unwrap_or(default_seed),
        },
        "sp" => AttackSpec::SaltPepper {
            density: p.require(&["d", "density"])?,
            seed: p.take(&["seed"])?.unwrap_or(default_seed),
        },
        "gauss-filter" => AttackSpec::GaussianFilter {
            window: p.require(&["w", "window"])?,
            sigma: p.take(&["sigma"])?.unwrap_or(0.5),
        },
        "histeq" => AttackSpec::HistEq,
        "" => return Err(invalid("empty attack")),
        other => return Err(invalid(format!("unknown attack {other:?}"))),
    };
    p.finish(spec)
}

impl AttackSpec {
    /// Parses the text form; stochastic members without `seed=` get `default_seed`.
    pub fn parse_seeded(text: &str, default_seed: u64) -> Result<Self> {
        let mut parts = text
            .split('+')
            .map(|p| parse_single(p.trim(), default_seed))
            .collect::<Result<Vec<_>>>()?;
        let spec = if parts.len() == 1 {
            parts.pop().expect("one element")
        } else {
            AttackSpec::Composite(parts)
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl FromStr for AttackSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse_seeded(s, 0)
    }
}

pub fn apply_attack(img: &GrayImage, spec: &AttackSpec) -> Result<GrayImage> {
    spec.validate()?;
    apply_valid(img, spec)
}

fn apply_valid(img: &GrayImage, spec: &AttackSpec) -> Result<GrayImage> {
    match *spec {
        AttackSpec::Jpeg { quality } => jpeg_compress(img, quality),
        AttackSpec::GaussianNoise {
            mean,
            variance,
            seed,
        } => gaussian_noise(img, mean, variance, seed),
        AttackSpec::SaltPepper { density, seed } => salt_pepper(img, density, seed),
        AttackSpec::GaussianFilter { window, sigma } => gaussian_filter(img, window, sigma),
        AttackSpec::HistEq => Ok(hist_eq(img)),
        AttackSpec::Composite(ref members) => {
            let mut out = img.clone();
            for m in members {
                out = apply_valid(&out, m)?;
            }
            Ok(out)
        }
    }
}

/// Baseline JPEG round trip with the IJG-scaled Annex K luminance table.
pub fn jpeg_compress(img: &GrayImage, quality: u8) -> Result<GrayImage> {
    AttackSpec::Jpeg { quality }.validate()?;
    let codec = |e: image::ImageError| Error::CodecFailure(e.to_string());
    let mut buf = Vec::new();
    JpegEncoder::new_with_quality(&mut buf, quality)
        .encode(
            img.pixels(),
            img.width() as u32,
            img.height() as u32,
            ExtendedColorType::L8,
        )
        .map_err(codec)?;
    let decoded = image::load(Cursor::new(buf), ImageFormat::Jpeg)
        .map_err(codec)?
        .into_luma8();
    if (decoded.width() as usize, decoded.height() as usize) != (img.width(), img.height()) {
        return Err(Error::CodecFailure(
            "JPEG decode changed the dimensions".into(),
        ));
    }
    Ok(img.with_pixels(decoded.into_raw()))
}

/// One independent ChaCha stream per row so rows can be processed in parallel.
fn row_rng(seed: u64, row: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(row as u64);
    rng
}

fn map_rows<F>(img: &GrayImage, f: F) -> GrayImage
where
    F: Fn(usize, &mut [u8]) + Sync,
{
    let mut px = img.pixels().to_vec();
    px.par_chunks_mut(img.width())
        .enumerate()
        .for_each(|(row, line)| f(row, line));
    img.with_pixels(px)
}

/// Adds `N(mean * 255, variance * 255^2)` to every pixel, then rounds and clips.
pub fn gaussian_noise(img: &GrayImage, mean: f64, variance: f64, seed: u64) -> Result<GrayImage> {
    AttackSpec::GaussianNoise {
        mean,
        variance,
        seed,
    }
    .validate()?;
    let normal =
        Normal::new(mean * 255.0, variance.sqrt() * 255.0).map_err(|e| invalid(e.to_string()))?;
    Ok(map_rows(img, |row, line| {
        let mut rng = row_rng(seed, row);
        for p in line {
            *p = quantize(f64::from(*p) + normal.sample(&mut rng));
        }
    }))
}

/// Each pixel is hit with probability `density`; hits become 0 or 255 evenly.
pub fn salt_pepper(img: &GrayImage, density: f64, seed: u64) -> Result<GrayImage> {
    AttackSpec::SaltPepper { density, seed }.validate()?;
    Ok(map_rows(img, |row, line| {
        let mut rng = row_rng(seed, row);
        for p in line {
            let hit = rng.random::<f64>() < density;
            let salt = rng.random::<bool>();
            if hit {
                *p = if salt { 255 } else { 0 };
            }
        }
    }))
}

/// Normalized 1-D Gaussian taps for offsets `-window/2 ..= window/2`.
pub fn gaussian_kernel(window: usize, sigma: f64) -> Result<Vec<f64>> {
    AttackSpec::GaussianFilter { window, sigma }.validate()?;
    let r = (window / 2) as f64;
    let taps: Vec<f64> = (0..window)
        .map(|i| {
            let x = i as f64 - r;
            (-x * x / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    Ok(taps.into_iter().map(|t| t / sum).collect())
}

/// Mirror with the edge pixel repeated: `d c b a | a b c d`.
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let j = if i < 0 {
        -i - 1
    } else if i >= n {
        2 * n - i - 1
    } else {
        i
    };
    j as usize
}

/// Separable Gaussian blur with symmetric boundary handling.
pub fn gaussian_filter(img: &GrayImage, window: usize, sigma: f64) -> Result<GrayImage> {
    let kernel = gaussian_kernel(window, sigma)?;
    let r = (window / 2) as isize;
    let (w, h) = (img.width(), img.height());
    let src = img.pixels();

    let mut horiz = vec![0.0; w * h];
    horiz.par_chunks_mut(w).enumerate().for_each(|(y, line)| {
        for (x, out) in line.iter_mut().enumerate() {
            *out = kernel
                .iter()
                .enumerate()
                .map(|(k, t)| t * f64::from(src[y * w + reflect(x as isize + k as isize - r, w)]))
                .sum();
        }
    });

    let mut px = vec![0u8; w * h];
    px.par_chunks_mut(w).enumerate().for_each(|(y, line)| {
        for (x, out) in line.iter_mut().enumerate() {
            let v: f64 = kernel
                .iter()
                .enumerate()
                .map(|(k, t)| t * horiz[reflect(y as isize + k as isize - r, h) * w + x])
                .sum();
            *out = quantize(v);
        }
    });
    Ok(img.with_pixels(px))
}

/// Global 256-bin equalization:
/// `round((cdf(p) - cdf_min) / (N - cdf_min) * 255)`.
pub fn hist_eq(img: &GrayImage) -> GrayImage {
    let mut hist = [0usize; 256];
    for &p in img.pixels() {
        hist[p as usize] += 1;
    }
    let total = img.pixels().len();
    let mut cdf = [0usize; 256];
    let mut acc = 0;
    for (c, h) in cdf.iter_mut().zip(hist) {
        acc += h;
        *c = acc;
    }
    let cdf_min = cdf[hist.iter().position(|&h| h > 0).unwrap_or(0)];
    if cdf_min == total {
        return img.clone();
    }
    let span = (total - cdf_min) as f64;
    let lut: Vec<u8> = cdf
        .iter()
        .map(|&c| quantize(c.saturating_sub(cdf_min) as f64 / span * 255.0))
        .collect();
    img.with_pixels(img.pixels().iter().map(|&p| lut[p as usize]).collect())
}
