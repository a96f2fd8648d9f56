//! Host images, watermark payloads and the real-valued planes the spectral
//! code works on.
//!
//! Pixels stay in their native 0..255 scale everywhere; a [`RealPlane`] made
//! from an image holds the same numbers as `f64`.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageFormat, ImageReader};

use crate::error::{Error, Result};
use crate::pnm;

/// Smallest accepted host edge; one 8x8 block.
pub const MIN_IMAGE_EDGE: usize = 8;

/// 8-bit grayscale raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width < MIN_IMAGE_EDGE || height < MIN_IMAGE_EDGE {
            return Err(Error::InvalidDimensions(format!(
                "{width}x{height}: both edges must be at least {MIN_IMAGE_EDGE}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidDimensions(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    /// Same dimensions, new pixel buffer. Used by attacks that rewrite pixels.
    pub(crate) fn with_pixels(&self, pixels: Vec<u8>) -> Self {
        debug_assert_eq!(pixels.len(), self.pixels.len());
        Self {
            width: self.width,
            height: self.height,
            pixels,
        }
    }
}

/// Row-major plane of finite `f64` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct RealPlane {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl RealPlane {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::InvalidDimensions(format!(
                "{} values for a {width}x{height} plane",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(i));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    /// Skips the finiteness scan; callers guarantee the invariant.
    pub(crate) fn from_raw(width: usize, height: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), width * height);
        Self {
            width,
            height,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Binary payload, row-major, each element 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WatermarkBits {
    width: usize,
    height: usize,
    bits: Vec<u8>,
}

impl WatermarkBits {
    pub fn new(width: usize, height: usize, bits: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions(format!(
                "{width}x{height} watermark"
            )));
        }
        if bits.len() != width * height {
            return Err(Error::InvalidDimensions(format!(
                "{} bits for a {width}x{height} watermark",
                bits.len()
            )));
        }
        if let Some((index, &value)) = bits.iter().enumerate().find(|(_, &b)| b > 1) {
            return Err(Error::InvalidBit { index, value });
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn complement(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| 1 - b).collect(),
        }
    }
}

/// Identity mapping: `values[i] == pixels[i] as f64`.
pub fn to_plane(img: &GrayImage) -> RealPlane {
    RealPlane::from_raw(
        img.width,
        img.height,
        img.pixels.iter().map(|&p| f64::from(p)).collect(),
    )
}

/// Rounds half away from zero, then clips to 0..=255.
pub fn from_plane(plane: &RealPlane) -> Result<GrayImage> {
    let pixels = plane
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v.is_finite() {
                Ok(quantize(v))
            } else {
                Err(Error::NonFiniteValue(i))
            }
        })
        .collect::<Result<Vec<u8>>>()?;
    GrayImage::new(plane.width, plane.height, pixels)
}

#[inline]
pub(crate) fn quantize(v: f64) -> u8 {
    // f64::round is half-away-from-zero.
    v.round().clamp(0.0, 255.0) as u8
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })
}

/// 8-bit single-channel raster from any supported container, before the
/// host/payload distinction is applied.
fn decode_gray(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>, bool)> {
    if pnm::is_pnm(bytes) {
        let r = pnm::decode(bytes)?;
        return Ok((r.width, r.height, r.samples, r.kind == pnm::Kind::Bitmap));
    }
    let reader = ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .map_err(Error::Io)?;
    match reader.format() {
        Some(ImageFormat::Png) => {}
        Some(other) => {
            return Err(Error::UnsupportedFormat(format!(
                "{other:?} (expected PGM, PBM or PNG)"
            )))
        }
        None => {
            return Err(Error::UnsupportedFormat(
                "unrecognized file signature".into(),
            ))
        }
    }
    let decoded = reader
        .decode()
        .map_err(|e| Error::UnsupportedFormat(e.to_string()))?;
    match decoded {
        DynamicImage::ImageLuma8(buf) => {
            let (w, h) = (buf.width() as usize, buf.height() as usize);
            Ok((w, h, buf.into_raw(), false))
        }
        DynamicImage::ImageLuma16(_) => Err(Error::UnsupportedFormat("16-bit grayscale".into())),
        DynamicImage::ImageLumaA8(_) | DynamicImage::ImageLumaA16(_) => Err(
            Error::UnsupportedFormat("grayscale with alpha channel".into()),
        ),
        other => Err(Error::NotGrayscale(format!("{:?}", other.color()))),
    }
}

pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let bytes = read_file(path.as_ref())?;
    let (w, h, pixels, bitmap) = decode_gray(&bytes)?;
    if bitmap {
        return Err(Error::UnsupportedFormat(
            "PBM bitmaps are payloads, not host images".into(),
        ));
    }
    GrayImage::new(w, h, pixels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Container {
    Pgm,
    Pbm,
    Png,
}

fn container_for(path: &Path) -> Result<Container> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("pgm") | None => Ok(Container::Pgm),
        Some("pbm") => Ok(Container::Pbm),
        Some("png") => Ok(Container::Png),
        Some(other) => Err(Error::UnsupportedFormat(format!(
            "cannot write .{other} files (use .pgm, .pbm or .png)"
        ))),
    }
}

fn png_bytes(width: usize, height: usize, pixels: &[u8]) -> Result<Vec<u8>> {
    let buf = image::GrayImage::from_raw(width as u32, height as u32, pixels.to_vec())
        .ok_or_else(|| Error::InvalidDimensions(format!("{width}x{height}")))?;
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png)
        .map_err(|e| Error::CodecFailure(e.to_string()))?;
    Ok(out.into_inner())
}

/// Writes PGM (default) or PNG, chosen by extension. Both are lossless.
pub fn save_image(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = match container_for(path)? {
        Container::Pgm => pnm::encode_pgm(img.width, img.height, &img.pixels),
        Container::Png => png_bytes(img.width, img.height, &img.pixels)?,
        Container::Pbm => {
            return Err(Error::UnsupportedFormat(
                "host images cannot be stored as PBM".into(),
            ))
        }
    };
    fs::write(path, bytes)?;
    Ok(())
}

/// PBM bits are taken as stored; grayscale sources map nonzero to 1.
pub fn load_watermark(path: impl AsRef<Path>) -> Result<WatermarkBits> {
    let bytes = read_file(path.as_ref())?;
    let (w, h, samples, bitmap) = decode_gray(&bytes)?;
    let bits = if bitmap {
        samples
    } else {
        samples.into_iter().map(|s| u8::from(s > 0)).collect()
    };
    WatermarkBits::new(w, h, bits)
}

/// PBM for `.pbm`; `.pgm`/`.png` get 0/255 pixels.
pub fn save_watermark(wm: &WatermarkBits, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = match container_for(path)? {
        Container::Pbm => pnm::encode_pbm(wm.width, wm.height, &wm.bits),
        container => {
            let gray: Vec<u8> = wm.bits.iter().map(|&b| b * 255).collect();
            if container == Container::Png {
                png_bytes(wm.width, wm.height, &gray)?
            } else {
                pnm::encode_pgm(wm.width, wm.height, &gray)
            }
        }
    };
    fs::write(path, bytes)?;
    Ok(())
}
