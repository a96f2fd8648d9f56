//! Embedding and blind extraction.
//!
//! Embedding: DFT of the host, 8x8 DCT of each magnitude tile, add
//! `gain * PN_b` to the masked coefficients of the tile that carries bit `b`,
//! inverse DCT, rebuild with the untouched phase, inverse DFT, quantize.
//!
//! Extraction repeats the analysis on the received image and, per tile,
//! picks the PN sequence with the larger Pearson correlation. It needs only
//! the image, the payload shape, the key and the mask/assignment settings.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image_model::{from_plane, to_plane, GrayImage, RealPlane, WatermarkBits};
use crate::keying::{derive_pn_pair, pearson, permutation, PnPair, SecretKey};
use crate::metrics;
use crate::spectral::{
    dct2_block, decompose, idct2_block, read_block, reconstruct, write_block, MidbandMask, BLOCK,
};

/// How payload bits are mapped onto magnitude tiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BlockAssignment {
    /// Bit `i` goes to tile `i` in raster order from tile (0, 0).
    #[default]
    Raster,
    /// Tiles are visited in a key-derived permutation.
    KeyPermuted,
}

impl FromStr for BlockAssignment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "raster" => Ok(Self::Raster),
            "permuted" | "key-permuted" => Ok(Self::KeyPermuted),
            other => Err(Error::InvalidSpec(format!(
                "unknown block assignment {other:?} (raster | permuted)"
            ))),
        }
    }
}

impl fmt::Display for BlockAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Raster => "raster",
            Self::KeyPermuted => "permuted",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedParams {
    gain: f64,
    mask: MidbandMask,
    assignment: BlockAssignment,
}

impl EmbedParams {
    /// Standard mid-band mask, raster assignment.
    pub fn new(gain: f64) -> Result<Self> {
        Self::with(gain, MidbandMask::standard(), BlockAssignment::Raster)
    }

    pub fn with(gain: f64, mask: MidbandMask, assignment: BlockAssignment) -> Result<Self> {
        if !(gain.is_finite() && gain > 0.0) {
            return Err(Error::InvalidGain(gain));
        }
        Ok(Self {
            gain,
            mask,
            assignment,
        })
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn mask(&self) -> &MidbandMask {
        &self.mask
    }

    pub fn assignment(&self) -> BlockAssignment {
        self.assignment
    }

    pub fn with_gain(&self, gain: f64) -> Result<Self> {
        Self::with(gain, self.mask.clone(), self.assignment)
    }
}

#[derive(Debug, Clone)]
pub struct EmbedOutcome {
    pub image: GrayImage,
    /// PSNR of the quantized output against the host.
    pub psnr_db: f64,
    pub bits_embedded: usize,
}

/// One bit per 8x8 tile.
pub fn capacity(width: usize, height: usize) -> Result<usize> {
    if width == 0 || height == 0 || !width.is_multiple_of(BLOCK) || !height.is_multiple_of(BLOCK) {
        return Err(Error::DimensionNotMultipleOf8 { width, height });
    }
    Ok((width / BLOCK) * (height / BLOCK))
}

fn check_payload(width: usize, height: usize, bits: usize) -> Result<usize> {
    let capacity = capacity(width, height)?;
    if bits > capacity {
        return Err(Error::PayloadTooLarge { bits, capacity });
    }
    Ok(capacity)
}

/// Tile coordinates `(block_row, block_col)` in the order bits are assigned.
pub fn block_order(
    width: usize,
    height: usize,
    key: &SecretKey,
    assignment: BlockAssignment,
) -> Result<Vec<(usize, usize)>> {
    let n = capacity(width, height)?;
    let cols = width / BLOCK;
    let tile = |i: usize| (i / cols, i % cols);
    Ok(match assignment {
        BlockAssignment::Raster => (0..n).map(tile).collect(),
        BlockAssignment::KeyPermuted => permutation(key, n).into_iter().map(tile).collect(),
    })
}

/// Adds the PN pattern for each payload bit to the DCT of its magnitude tile.
/// Tiles past the payload are copied through untouched.
pub fn watermark_magnitude(
    magnitude: &RealPlane,
    wm: &WatermarkBits,
    key: &SecretKey,
    params: &EmbedParams,
) -> Result<RealPlane> {
    let (w, h) = (magnitude.width(), magnitude.height());
    check_payload(w, h, wm.len())?;
    let pn = derive_pn_pair(key, params.mask.len())?;
    let order = block_order(w, h, key, params.assignment)?;

    let mut out = magnitude.clone();
    for (&bit, &(br, bc)) in wm.bits().iter().zip(&order) {
        let mut coeffs = dct2_block(&read_block(magnitude, br, bc));
        for (&(r, c), &chip) in params.mask.positions().iter().zip(pn.for_bit(bit)) {
            coeffs[r][c] += params.gain * chip;
        }
        write_block(&mut out, br, bc, &idct2_block(&coeffs));
    }
    Ok(out)
}

/// The watermarked image before 8-bit quantization.
pub fn embed_unquantized(
    host: &GrayImage,
    wm: &WatermarkBits,
    key: &SecretKey,
    params: &EmbedParams,
) -> Result<RealPlane> {
    check_payload(host.width(), host.height(), wm.len())?;
    let spectrum = decompose(&to_plane(host));
    let marked = watermark_magnitude(spectrum.magnitude(), wm, key, params)?;
    Ok(reconstruct(&spectrum.with_magnitude(marked)?))
}

pub fn embed(
    host: &GrayImage,
    wm: &WatermarkBits,
    key: &SecretKey,
    params: &EmbedParams,
) -> Result<EmbedOutcome> {
    let image = from_plane(&embed_unquantized(host, wm, key, params)?)?;
    let psnr_db = metrics::psnr(host, &image)?;
    Ok(EmbedOutcome {
        image,
        psnr_db,
        bits_embedded: wm.len(),
    })
}

/// Pearson correlation, with a constant coefficient vector scoring 0.
fn score(coeffs: &[f64], seq: &[f64]) -> f64 {
    pearson(coeffs, seq).unwrap_or(0.0)
}

/// `Corr(0)` and `Corr(1)` for one coefficient vector.
pub fn correlations(coeffs: &[f64], pn: &PnPair) -> (f64, f64) {
    (score(coeffs, pn.seq0()), score(coeffs, pn.seq1()))
}

/// 1 only when `Corr(1)` strictly exceeds `Corr(0)`; ties give 0.
pub fn decide(corr0: f64, corr1: f64) -> u8 {
    u8::from(corr1 > corr0)
}

pub fn extract(
    img: &GrayImage,
    wm_width: usize,
    wm_height: usize,
    key: &SecretKey,
    params: &EmbedParams,
) -> Result<WatermarkBits> {
    let n = wm_width * wm_height;
    check_payload(img.width(), img.height(), n)?;
    let pn = derive_pn_pair(key, params.mask.len())?;
    let order = block_order(img.width(), img.height(), key, params.assignment)?;
    let magnitude = decompose(&to_plane(img)).into_parts().0;
    let bits = detect(&magnitude, &order[..n], &pn, params.mask());
    WatermarkBits::new(wm_width, wm_height, bits)
}

fn detect(
    magnitude: &RealPlane,
    tiles: &[(usize, usize)],
    pn: &PnPair,
    mask: &MidbandMask,
) -> Vec<u8> {
    tiles
        .par_iter()
        .map(|&(br, bc)| {
            let coeffs = mask.gather(&dct2_block(&read_block(magnitude, br, bc)));
            let (c0, c1) = correlations(&coeffs, pn);
            decide(c0, c1)
        })
        .collect()
}

/// Search limits for [`calibrate_gain`].
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSettings {
    pub min_gain: f64,
    pub max_gain: f64,
    /// Bisection steps (geometric midpoint).
    pub iterations: usize,
    /// Accepted distance from the PSNR target, dB.
    pub tolerance_db: f64,
    /// Gains probed below the PSNR-limited maximum when extraction fails there.
    pub scan_steps: usize,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self {
            min_gain: 1e-3,
            max_gain: 1e7,
            iterations: 48,
            tolerance_db: 0.5,
            scan_steps: 16,
        }
    }
}

/// Accepted PSNR targets, dB.
pub const CALIBRATION_TARGET_RANGE: std::ops::RangeInclusive<f64> = 30.0..=80.0;

struct Probe<'a> {
    host: &'a GrayImage,
    wm: &'a WatermarkBits,
    key: &'a SecretKey,
    params: &'a EmbedParams,
}

impl Probe<'_> {
    fn embed(&self, gain: f64) -> Result<EmbedOutcome> {
        embed(self.host, self.wm, self.key, &self.params.with_gain(gain)?)
    }

    fn psnr(&self, gain: f64) -> Result<f64> {
        Ok(self.embed(gain)?.psnr_db)
    }

    /// Largest gain in `[lo, hi]` whose PSNR stays at or above `floor_db`,
    /// assuming PSNR falls as gain grows. `None` if even `lo` is below.
    fn largest_gain_above(&self, floor_db: f64, s: &CalibrationSettings) -> Result<Option<f64>> {
        let (mut lo, mut hi) = (s.min_gain, s.max_gain);
        if self.psnr(lo)? < floor_db {
            return Ok(None);
        }
        if self.psnr(hi)? >= floor_db {
            return Ok(Some(hi));
        }
        for _ in 0..s.iterations {
            let mid = (lo * hi).sqrt();
            if self.psnr(mid)? >= floor_db {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(Some(lo))
    }

    fn extracts_perfectly(&self, out: &EmbedOutcome, gain: f64) -> Result<bool> {
        let got = extract(
            &out.image,
            self.wm.width(),
            self.wm.height(),
            self.key,
            &self.params.with_gain(gain)?,
        )?;
        Ok(got == *self.wm)
    }
}

/// Largest gain whose embed PSNR is within `tolerance_db` of `target_db` while
/// unattacked extraction is still exact.
///
/// `params` supplies the mask and assignment; its gain is ignored.
pub fn calibrate_gain(
    host: &GrayImage,
    wm: &WatermarkBits,
    key: &SecretKey,
    target_db: f64,
    params: &EmbedParams,
    settings: &CalibrationSettings,
) -> Result<f64> {
    if !CALIBRATION_TARGET_RANGE.contains(&target_db) {
        return Err(Error::Unsatisfiable(format!(
            "target {target_db} dB is outside {:?} dB",
            CALIBRATION_TARGET_RANGE
        )));
    }
    check_payload(host.width(), host.height(), wm.len())?;
    let probe = Probe {
        host,
        wm,
        key,
        params,
    };
    let window = (target_db - settings.tolerance_db)..=(target_db + settings.tolerance_db);

    let Some(top) = probe.largest_gain_above(*window.start(), settings)? else {
        return Err(Error::Unsatisfiable(format!(
            "PSNR is below {:.2} dB even at gain {}",
            window.start(),
            settings.min_gain
        )));
    };
    // Smallest gain that is still inside the window from above.
    let bottom = probe
        .largest_gain_above(window.end() + f64::EPSILON, settings)?
        .unwrap_or(settings.min_gain);

    let steps = settings.scan_steps.max(1);
    let ratio = (bottom / top).max(f64::MIN_POSITIVE);
    let mut in_window = 0;
    for i in 0..=steps {
        let gain = top * ratio.powf(i as f64 / steps as f64);
        let out = probe.embed(gain)?;
        if !window.contains(&out.psnr_db) {
            continue;
        }
        in_window += 1;
        if probe.extracts_perfectly(&out, gain)? {
            return Ok(gain);
        }
    }
    Err(Error::Unsatisfiable(if in_window > 0 {
        format!(
            "none of {in_window} gains between {bottom:.4} and {top:.4} (PSNR within +-{} dB of {target_db} dB) extracts without errors",
            settings.tolerance_db
        )
    } else {
        format!(
            "PSNR never lands within +-{} dB of {target_db} dB",
            settings.tolerance_db
        )
    }))
}

/// Largest gain keeping embed PSNR at or above `target_db`, with no
/// extraction requirement.
pub fn gain_for_psnr(
    host: &GrayImage,
    wm: &WatermarkBits,
    key: &SecretKey,
    target_db: f64,
    params: &EmbedParams,
    settings: &CalibrationSettings,
) -> Result<f64> {
    check_payload(host.width(), host.height(), wm.len())?;
    let probe = Probe {
        host,
        wm,
        key,
        params,
    };
    probe
        .largest_gain_above(target_db, settings)?
        .ok_or_else(|| {
            Error::Unsatisfiable(format!(
                "PSNR is below {target_db} dB even at gain {}",
                settings.min_gain
            ))
        })
}
