//! Image quality (MSE, PSNR) and payload agreement (NC, BER).

use crate::attacks::AttackSpec;
use crate::error::{Error, Result};
use crate::image_model::{GrayImage, WatermarkBits};

/// Peak value used by [`psnr`].
pub const MAX_PIXEL: f64 = 255.0;

fn same_shape(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.0, a.1, b.0, b.1
        )));
    }
    Ok(())
}

pub fn mse(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    same_shape((a.width(), a.height()), (b.width(), b.height()))?;
    let sum: f64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum();
    Ok(sum / a.pixels().len() as f64)
}

/// `10 log10(255^2 / MSE)`; identical images give `f64::INFINITY`.
pub fn psnr(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (MAX_PIXEL * MAX_PIXEL / m).log10())
}

/// Normalized correlation on `{0, 1}` bits:
/// `sum (w w')^2 / (sqrt(sum w^2) sqrt(sum w'^2))`.
///
/// An all-zero `w2` scores 0. An all-zero reference is an error.
pub fn nc(w: &WatermarkBits, w2: &WatermarkBits) -> Result<f64> {
    same_shape((w.width(), w.height()), (w2.width(), w2.height()))?;
    let (mut num, mut sw, mut sw2) = (0.0, 0.0, 0.0);
    for (&a, &b) in w.bits().iter().zip(w2.bits()) {
        let (a, b) = (f64::from(a), f64::from(b));
        num += (a * b) * (a * b);
        sw += a * a;
        sw2 += b * b;
    }
    if sw == 0.0 {
        return Err(Error::DegenerateReference(
            "reference watermark has no set bits".into(),
        ));
    }
    if sw2 == 0.0 {
        return Ok(0.0);
    }
    // One square root keeps a perfect match at exactly 1.0.
    Ok(num / (sw * sw2).sqrt())
}

pub fn ber(w: &WatermarkBits, w2: &WatermarkBits) -> Result<f64> {
    same_shape((w.width(), w.height()), (w2.width(), w2.height()))?;
    let wrong = w
        .bits()
        .iter()
        .zip(w2.bits())
        .filter(|(a, b)| a != b)
        .count();
    Ok(wrong as f64 / w.len() as f64)
}

/// Measured outcome of one benchmark cell.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub image_id: String,
    pub payload_id: String,
    /// `None` for the unattacked imperceptibility row.
    pub attack: Option<AttackSpec>,
    /// Received image against the original host.
    pub psnr_vs_host_db: f64,
    /// Received image against the watermarked image.
    pub psnr_vs_watermarked_db: f64,
    pub nc: f64,
    pub ber: f64,
}
