//! Secret keys, the two bipolar PN sequences derived from them, and the
//! correlation used both to vet the pair and to detect bits.
//!
//! Each candidate pair is drawn from a ChaCha20 stream seeded with
//! `SHA-256(domain || length || counter || key)`. Candidates are rejected
//! until `|pearson(seq0, seq1)| < 0.3`. The outputs are frozen by golden
//! tests; changing any of this breaks extraction of existing images.

use std::fmt;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Upper bound on `|pearson(seq0, seq1)|` for an accepted pair.
pub const MAX_PAIR_CORRELATION: f64 = 0.3;

/// Shortest length for which a bipolar pair can meet [`MAX_PAIR_CORRELATION`].
/// Non-constant bipolar vectors of length 2 or 3 correlate at +-1 or +-0.5.
pub const MIN_PN_LENGTH: usize = 4;

const MAX_DRAWS: u64 = 100_000;
const PN_DOMAIN: &[u8] = b"dftmark/pn-pair/v1";
const PERMUTATION_DOMAIN: &[u8] = b"dftmark/block-permutation/v1";

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SecretKey(Vec<u8>);

impl SecretKey {
    pub fn new(bytes: impl Into<Vec<u8>>) -> Result<Self> {
        let bytes = bytes.into();
        if bytes.is_empty() {
            return Err(Error::EmptyKey);
        }
        Ok(Self(bytes))
    }

    pub fn from_passphrase(passphrase: &str) -> Result<Self> {
        Self::new(passphrase.as_bytes())
    }

    pub fn from_hex(text: &str) -> Result<Self> {
        let text = text.trim();
        let text = text.strip_prefix("0x").unwrap_or(text);
        let bytes = hex::decode(text).map_err(|e| Error::InvalidKey(e.to_string()))?;
        Self::new(bytes)
    }

    /// A 64-bit seed rendered big-endian.
    pub fn from_seed(seed: u64) -> Self {
        Self(seed.to_be_bytes().to_vec())
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    /// First 8 hex digits of `SHA-256(salt || key)`.
    pub fn fingerprint(&self, salt: &[u8]) -> String {
        let digest = Sha256::new()
            .chain_update(salt)
            .chain_update(&self.0)
            .finalize();
        hex::encode(&digest[..4])
    }

    pub(crate) fn stream(&self, domain: &[u8], parts: &[u64]) -> ChaCha20Rng {
        let mut hasher = Sha256::new().chain_update(domain);
        for p in parts {
            hasher.update(p.to_le_bytes());
        }
        hasher.update(&self.0);
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&hasher.finalize());
        ChaCha20Rng::from_seed(seed)
    }
}

// Keys never show up in logs.
impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SecretKey({} bytes)", self.0.len())
    }
}

/// The sequence pair: `seq0` signals bit 0, `seq1` signals bit 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PnPair {
    seq0: Vec<f64>,
    seq1: Vec<f64>,
}

impl PnPair {
    pub fn seq0(&self) -> &[f64] {
        &self.seq0
    }

    pub fn seq1(&self) -> &[f64] {
        &self.seq1
    }

    pub fn for_bit(&self, bit: u8) -> &[f64] {
        if bit == 0 {
            &self.seq0
        } else {
            &self.seq1
        }
    }

    pub fn len(&self) -> usize {
        self.seq0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seq0.is_empty()
    }
}

fn bipolar(rng: &mut ChaCha20Rng, length: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(length);
    while out.len() < length {
        let word = rng.next_u32();
        for i in 0..32 {
            if out.len() == length {
                break;
            }
            out.push(if (word >> i) & 1 == 1 { 1.0 } else { -1.0 });
        }
    }
    out
}

pub fn derive_pn_pair(key: &SecretKey, length: usize) -> Result<PnPair> {
    if length < MIN_PN_LENGTH {
        return Err(Error::LengthTooSmall(length));
    }
    for counter in 0..MAX_DRAWS {
        let mut rng = key.stream(PN_DOMAIN, &[length as u64, counter]);
        let seq0 = bipolar(&mut rng, length);
        let seq1 = bipolar(&mut rng, length);
        // Constant candidates have no defined correlation; draw again.
        if let Ok(r) = pearson(&seq0, &seq1) {
            if r.abs() < MAX_PAIR_CORRELATION {
                return Ok(PnPair { seq0, seq1 });
            }
        }
    }
    Err(Error::Unsatisfiable(format!(
        "no uncorrelated PN pair of length {length} in {MAX_DRAWS} draws"
    )))
}

/// Key-driven Fisher-Yates shuffle of `0..n`.
pub(crate) fn permutation(key: &SecretKey, n: usize) -> Vec<usize> {
    let mut rng = key.stream(PERMUTATION_DOMAIN, &[n as u64]);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        // Multiply-shift maps a 64-bit draw onto 0..=i.
        let j = ((u128::from(rng.next_u64()) * (i as u128 + 1)) >> 64) as usize;
        order.swap(i, j);
    }
    order
}

/// Sample Pearson correlation coefficient, clamped to `[-1, 1]`.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DegenerateInput(format!(
            "length mismatch {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::DegenerateInput("fewer than two samples".into()));
    }
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - mean_a, y - mean_b);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::DegenerateInput("zero variance".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}
