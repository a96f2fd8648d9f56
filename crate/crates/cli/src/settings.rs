//! Codec defaults shared by all subcommands.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use dftmark::spectral::midband_mask;
use dftmark::{BandProfile, BlockAssignment, CalibrationSettings, EmbedParams};
use serde::{Deserialize, Serialize};

pub const DEFAULT_TOML: &str = include_str!("../config/default.toml");

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub gain: f64,
    pub mask: String,
    pub assignment: String,
    pub calibration: Calibration,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibration {
    pub min_gain: f64,
    pub max_gain: f64,
    pub iterations: usize,
    pub tolerance_db: f64,
    pub scan_steps: usize,
}

impl From<&Calibration> for CalibrationSettings {
    fn from(c: &Calibration) -> Self {
        Self {
            min_gain: c.min_gain,
            max_gain: c.max_gain,
            iterations: c.iterations,
            tolerance_db: c.tolerance_db,
            scan_steps: c.scan_steps,
        }
    }
}

impl Settings {
    pub fn builtin() -> Self {
        toml::from_str(DEFAULT_TOML).expect("bundled default.toml parses")
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::builtin());
        };
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Mask and assignment from the settings, with optional overrides.
    pub fn params(
        &self,
        gain: Option<f64>,
        mask: Option<&str>,
        assignment: Option<&str>,
    ) -> Result<EmbedParams> {
        let profile: BandProfile = mask.unwrap_or(&self.mask).parse()?;
        let assignment: BlockAssignment = assignment.unwrap_or(&self.assignment).parse()?;
        Ok(EmbedParams::with(
            gain.unwrap_or(self.gain),
            midband_mask(&profile)?,
            assignment,
        )?)
    }

    /// Stores `gain` in `path`, creating it from these settings if absent.
    /// Comments in an existing file are not preserved.
    pub fn write_gain(&self, path: &Path, gain: f64) -> Result<()> {
        let mut base = if path.exists() {
            Self::load(Some(path))?
        } else {
            self.clone()
        };
        base.gain = gain;
        fs::write(path, toml::to_string(&base)?)
            .with_context(|| format!("writing {}", path.display()))
    }
}
