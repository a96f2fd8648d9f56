//! Minimal binary Netpbm support: PGM (`P5`, maxval 255) and PBM (`P4`).
//!
//! PBM rows are packed MSB-first and padded to a whole byte. Bits are kept
//! as stored: a set bit in the file is a set bit in memory.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Kind {
    Graymap,
    Bitmap,
}

/// Decoded raster: one byte per sample. Bitmap samples are 0 or 1.
#[derive(Debug, Clone)]
pub(crate) struct Raster {
    pub kind: Kind,
    pub width: usize,
    pub height: usize,
    pub samples: Vec<u8>,
}

pub(crate) fn is_pnm(bytes: &[u8]) -> bool {
    bytes.len() >= 2 && bytes[0] == b'P' && (b'1'..=b'7').contains(&bytes[1])
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::UnsupportedFormat(format!("malformed PNM header ({what})")))
    }
}

pub(crate) fn decode(bytes: &[u8]) -> Result<Raster> {
    if !is_pnm(bytes) {
        return Err(Error::UnsupportedFormat("not a PNM file".into()));
    }
    let kind = match bytes[1] {
        b'5' => Kind::Graymap,
        b'4' => Kind::Bitmap,
        b'3' | b'6' => return Err(Error::NotGrayscale("PPM color image".into())),
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "PNM variant P{} (only binary P4/P5 are supported)",
                other as char
            )))
        }
    };
    let mut header = Header { bytes, pos: 2 };
    let width = header.number("width")?;
    let height = header.number("height")?;
    if kind == Kind::Graymap {
        let maxval = header.number("maxval")?;
        if maxval != 255 {
            return Err(Error::UnsupportedFormat(format!(
                "PGM maxval {maxval} (only 8-bit, maxval 255, is supported)"
            )));
        }
    }
    // Exactly one whitespace byte separates the header from the raster.
    if header.pos >= bytes.len() || !bytes[header.pos].is_ascii_whitespace() {
        return Err(Error::UnsupportedFormat("truncated PNM header".into()));
    }
    let data = &bytes[header.pos + 1..];
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimensions(format!("{width}x{height}")));
    }

    let samples = match kind {
        Kind::Graymap => {
            let n = width * height;
            if data.len() < n {
                return Err(Error::UnsupportedFormat("truncated PGM raster".into()));
            }
            data[..n].to_vec()
        }
        Kind::Bitmap => {
            let stride = width.div_ceil(8);
            if data.len() < stride * height {
                return Err(Error::UnsupportedFormat("truncated PBM raster".into()));
            }
            let mut samples = Vec::with_capacity(width * height);
            for row in data.chunks_exact(stride).take(height) {
                for x in 0..width {
                    samples.push((row[x / 8] >> (7 - x % 8)) & 1);
                }
            }
            samples
        }
    };
    Ok(Raster {
        kind,
        width,
        height,
        samples,
    })
}

pub(crate) fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

pub(crate) fn encode_pbm(width: usize, height: usize, bits: &[u8]) -> Vec<u8> {
    let mut out = format!("P4\n{width} {height}\n").into_bytes();
    let stride = width.div_ceil(8);
    for row in bits.chunks_exact(width).take(height) {
        let mut packed = vec![0u8; stride];
        for (x, &b) in row.iter().enumerate() {
            if b != 0 {
                packed[x / 8] |= 0x80 >> (x % 8);
            }
        }
        out.extend_from_slice(&packed);
    }
    out
}
