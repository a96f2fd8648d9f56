//! Frequency-domain machinery: DFT magnitude/phase split and rebuild, the
//! orthonormal 8x8 DCT, and selection of middle-band block coefficients.
//!
//! The forward DFT is unnormalized and the inverse carries `1/(W*H)`. The
//! magnitude plane is tiled in its natural layout, DC at `(0, 0)`.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::image_model::RealPlane;

pub const BLOCK: usize = 8;

/// One 8x8 tile, `block[row][col]`.
pub type Block = [[f64; BLOCK]; BLOCK];

/// Polar form of a 2D DFT.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    magnitude: RealPlane,
    phase: RealPlane,
}

impl Spectrum {
    pub fn new(magnitude: RealPlane, phase: RealPlane) -> Result<Self> {
        if magnitude.width() != phase.width() || magnitude.height() != phase.height() {
            return Err(Error::DimensionMismatch(format!(
                "magnitude {}x{} vs phase {}x{}",
                magnitude.width(),
                magnitude.height(),
                phase.width(),
                phase.height()
            )));
        }
        Ok(Self { magnitude, phase })
    }

    pub fn magnitude(&self) -> &RealPlane {
        &self.magnitude
    }

    pub fn phase(&self) -> &RealPlane {
        &self.phase
    }

    pub fn width(&self) -> usize {
        self.magnitude.width()
    }

    pub fn height(&self) -> usize {
        self.magnitude.height()
    }

    /// Same phase, new magnitude.
    pub fn with_magnitude(&self, magnitude: RealPlane) -> Result<Self> {
        Self::new(magnitude, self.phase.clone())
    }

    pub fn into_parts(self) -> (RealPlane, RealPlane) {
        (self.magnitude, self.phase)
    }
}

#[derive(Clone, Copy)]
enum Direction {
    Forward,
    Inverse,
}

fn transpose(src: &[Complex64], width: usize, height: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); src.len()];
    for r in 0..height {
        for c in 0..width {
            out[c * height + r] = src[r * width + c];
        }
    }
    out
}

/// In-place separable 2D FFT over a row-major buffer. No scaling.
fn fft2(data: &mut Vec<Complex64>, width: usize, height: usize, dir: Direction) {
    let mut planner = FftPlanner::<f64>::new();
    let plan = |planner: &mut FftPlanner<f64>, n| match dir {
        Direction::Forward => planner.plan_fft_forward(n),
        Direction::Inverse => planner.plan_fft_inverse(n),
    };
    plan(&mut planner, width).process(data);
    let mut cols = transpose(data, width, height);
    plan(&mut planner, height).process(&mut cols);
    *data = transpose(&cols, height, width);
}

/// `magnitude = |F|`, `phase = atan2(Im F, Re F)` in `(-pi, pi]`.
pub fn decompose(plane: &RealPlane) -> Spectrum {
    let (w, h) = (plane.width(), plane.height());
    let mut data: Vec<Complex64> = plane
        .values()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    fft2(&mut data, w, h, Direction::Forward);
    let magnitude = data.iter().map(|z| z.norm()).collect();
    let phase = data
        .iter()
        .map(|z| {
            let p = z.im.atan2(z.re);
            if p <= -std::f64::consts::PI {
                std::f64::consts::PI
            } else {
                p
            }
        })
        .collect();
    Spectrum {
        magnitude: RealPlane::from_raw(w, h, magnitude),
        phase: RealPlane::from_raw(w, h, phase),
    }
}

/// Rebuilds `M * e^{j phi}`, inverts the DFT and keeps the real part.
///
/// A magnitude edited without its Hermitian mirror gives a complex inverse;
/// the imaginary residue is dropped. Negative magnitudes act as a phase flip.
pub fn reconstruct(spec: &Spectrum) -> RealPlane {
    let (w, h) = (spec.width(), spec.height());
    let mut data: Vec<Complex64> = spec
        .magnitude
        .values()
        .iter()
        .zip(spec.phase.values())
        .map(|(&m, &p)| Complex64::from_polar(m, p))
        .collect();
    fft2(&mut data, w, h, Direction::Inverse);
    let scale = 1.0 / (w * h) as f64;
    RealPlane::from_raw(w, h, data.iter().map(|z| z.re * scale).collect())
}

fn dct_basis() -> &'static (Block, Block) {
    static BASIS: OnceLock<(Block, Block)> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut c = [[0.0; BLOCK]; BLOCK];
        let n = BLOCK as f64;
        for (k, row) in c.iter_mut().enumerate() {
            let alpha = if k == 0 {
                (1.0 / n).sqrt()
            } else {
                (2.0 / n).sqrt()
            };
            for (x, v) in row.iter_mut().enumerate() {
                *v = alpha
                    * ((2 * x + 1) as f64 * k as f64 * std::f64::consts::PI / (2.0 * n)).cos();
            }
        }
        let mut ct = [[0.0; BLOCK]; BLOCK];
        for (i, row) in c.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                ct[j][i] = *v;
            }
        }
        (c, ct)
    })
}

fn mul(a: &Block, b: &Block) -> Block {
    let mut out = [[0.0; BLOCK]; BLOCK];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..BLOCK).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// Orthonormal 2D DCT-II: `C * B * C^T`.
pub fn dct2_block(block: &Block) -> Block {
    let (c, ct) = dct_basis();
    mul(&mul(c, block), ct)
}

/// Inverse of [`dct2_block`]: `C^T * X * C`.
pub fn idct2_block(coeffs: &Block) -> Block {
    let (c, ct) = dct_basis();
    mul(&mul(ct, coeffs), c)
}

fn check_tiling(plane: &RealPlane) -> Result<()> {
    let (w, h) = (plane.width(), plane.height());
    if w == 0 || h == 0 || w % BLOCK != 0 || h % BLOCK != 0 {
        return Err(Error::DimensionNotMultipleOf8 {
            width: w,
            height: h,
        });
    }
    Ok(())
}

pub fn read_block(plane: &RealPlane, block_row: usize, block_col: usize) -> Block {
    let mut b = [[0.0; BLOCK]; BLOCK];
    let w = plane.width();
    let v = plane.values();
    for (r, row) in b.iter_mut().enumerate() {
        let start = (block_row * BLOCK + r) * w + block_col * BLOCK;
        row.copy_from_slice(&v[start..start + BLOCK]);
    }
    b
}

pub fn write_block(plane: &mut RealPlane, block_row: usize, block_col: usize, b: &Block) {
    let w = plane.width();
    let v = plane.values_mut();
    for (r, row) in b.iter().enumerate() {
        let start = (block_row * BLOCK + r) * w + block_col * BLOCK;
        v[start..start + BLOCK].copy_from_slice(row);
    }
}

fn blockwise(plane: &RealPlane, f: fn(&Block) -> Block) -> Result<RealPlane> {
    check_tiling(plane)?;
    let mut out = RealPlane::zeros(plane.width(), plane.height());
    for br in 0..plane.height() / BLOCK {
        for bc in 0..plane.width() / BLOCK {
            write_block(&mut out, br, bc, &f(&read_block(plane, br, bc)));
        }
    }
    Ok(out)
}

/// Applies [`dct2_block`] to every disjoint 8x8 tile.
pub fn blockwise_dct(plane: &RealPlane) -> Result<RealPlane> {
    blockwise(plane, dct2_block)
}

pub fn blockwise_idct(plane: &RealPlane) -> Result<RealPlane> {
    blockwise(plane, idct2_block)
}

/// Standard JPEG zig-zag scan of an 8x8 block as `(row, col)` pairs.
pub fn zigzag_order() -> [(usize, usize); 64] {
    let mut out = [(0, 0); 64];
    let mut i = 0;
    for s in 0..(2 * BLOCK - 1) {
        let lo = s.saturating_sub(BLOCK - 1);
        let hi = s.min(BLOCK - 1);
        let rows: Box<dyn Iterator<Item = usize>> = if s % 2 == 1 {
            Box::new(lo..=hi)
        } else {
            Box::new((lo..=hi).rev())
        };
        for r in rows {
            out[i] = (r, s - r);
            i += 1;
        }
    }
    out
}

/// Zig-zag indices (inclusive) of the default middle band.
pub const DEFAULT_BAND: std::ops::RangeInclusive<usize> = 9..=30;

/// Ordered coefficient positions inside an 8x8 DCT block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MidbandMask {
    positions: Vec<(usize, usize)>,
}

impl MidbandMask {
    pub fn from_positions(positions: Vec<(usize, usize)>) -> Result<Self> {
        if positions.len() < 2 || positions.len() > 62 {
            return Err(Error::InvalidMask(format!(
                "{} positions (need 2..=62)",
                positions.len()
            )));
        }
        let mut seen = [[false; BLOCK]; BLOCK];
        for &(r, c) in &positions {
            if r >= BLOCK || c >= BLOCK {
                return Err(Error::InvalidMask(format!(
                    "({r},{c}) is outside the block"
                )));
            }
            if (r, c) == (0, 0) {
                return Err(Error::InvalidMask("includes the DC coefficient".into()));
            }
            if seen[r][c] {
                return Err(Error::InvalidMask(format!("({r},{c}) listed twice")));
            }
            seen[r][c] = true;
        }
        Ok(Self { positions })
    }

    /// Zig-zag positions 9 through 30.
    pub fn standard() -> Self {
        let zz = zigzag_order();
        Self {
            positions: zz[DEFAULT_BAND].to_vec(),
        }
    }

    pub fn positions(&self) -> &[(usize, usize)] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn gather(&self, block: &Block) -> Vec<f64> {
        self.positions.iter().map(|&(r, c)| block[r][c]).collect()
    }
}

impl Default for MidbandMask {
    fn default() -> Self {
        Self::standard()
    }
}

/// Named preset or explicit coefficient list.
///
/// Text form: `midband`, or `r:c` pairs joined by commas (`3:3,4:2`).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum BandProfile {
    #[default]
    Midband,
    Explicit(Vec<(usize, usize)>),
}

pub fn midband_mask(profile: &BandProfile) -> Result<MidbandMask> {
    match profile {
        BandProfile::Midband => Ok(MidbandMask::standard()),
        BandProfile::Explicit(positions) => MidbandMask::from_positions(positions.clone()),
    }
}

impl FromStr for BandProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("midband") {
            return Ok(Self::Midband);
        }
        s.split(',')
            .map(|pair| {
                let (r, c) = pair
                    .trim()
                    .split_once(':')
                    .ok_or_else(|| Error::InvalidMask(format!("expected row:col, got {pair:?}")))?;
                let parse = |t: &str| {
                    t.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::InvalidMask(format!("bad coordinate {t:?}")))
                };
                Ok((parse(r)?, parse(c)?))
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::Explicit)
    }
}

impl fmt::Display for BandProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Midband => f.write_str("midband"),
            Self::Explicit(ps) => {
                for (i, (r, c)) in ps.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{r}:{c}")?;
                }
                Ok(())
            }
        }
    }
}
