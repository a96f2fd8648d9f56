//! Blind spread-spectrum watermarking of grayscale images in the DCT mid-band
//! of 8x8 tiles of the DFT magnitude.
//!
//! ```no_run
//! use dftmark::{embed, extract, load_image, load_watermark, EmbedParams, SecretKey};
//!
//! let host = load_image("lena.pgm")?;
//! let logo = load_watermark("logo.pbm")?;
//! let key = SecretKey::from_passphrase("k1")?;
//! let params = EmbedParams::new(950.0)?;
//! let marked = embed(&host, &logo, &key, &params)?;
//! let bits = extract(&marked.image, logo.width(), logo.height(), &key, &params)?;
//! # Ok::<(), dftmark::Error>(())
//! ```

pub mod attacks;
pub mod codec;
mod error;
pub mod image_model;
pub mod keying;
pub mod metrics;
mod pnm;
pub mod spectral;

pub use attacks::{apply_attack, AttackSpec};
pub use codec::{
    calibrate_gain, capacity, embed, extract, gain_for_psnr, BlockAssignment, CalibrationSettings,
    EmbedOutcome, EmbedParams,
};
pub use error::{Error, Result};
pub use image_model::{
    from_plane, load_image, load_watermark, save_image, save_watermark, to_plane, GrayImage,
    RealPlane, WatermarkBits,
};
pub use keying::{derive_pn_pair, pearson, PnPair, SecretKey};
pub use metrics::{ber, mse, nc, psnr, EvalReport};
pub use spectral::{
    blockwise_dct, blockwise_idct, dct2_block, decompose, idct2_block, reconstruct, BandProfile,
    MidbandMask, Spectrum,
};
