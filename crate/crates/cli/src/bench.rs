//! Benchmark harness: embed once per (image, payload), then attack, extract
//! and score every configured attack.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use dftmark::codec::gain_for_psnr;
use dftmark::{
    apply_attack, ber, calibrate_gain, embed, extract, load_image, load_watermark, nc, psnr,
    AttackSpec, CalibrationSettings, EmbedParams, EvalReport, GrayImage, SecretKey, WatermarkBits,
};
use rayon::prelude::*;
use serde::Deserialize;

use crate::fixtures::{Manifest, STANDARD_SET};
use crate::report::{Format, Row};
use crate::UsageError;

/// Label used in place of an attack for the imperceptibility row.
pub const NO_ATTACK: &str = "none";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GainSetting {
    Fixed(f64),
    /// Per-image `calibrate_gain` to this PSNR (exact extraction required).
    Calibrate(f64),
    /// Per-image largest gain keeping PSNR at or above this value.
    CalibratePsnr(f64),
}

impl FromStr for GainSetting {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let num = |t: &str| -> Result<f64> {
            t.trim()
                .parse()
                .with_context(|| format!("bad gain setting {s:?}"))
        };
        if let Some(t) = s.strip_prefix("calibrate-psnr:") {
            Ok(Self::CalibratePsnr(num(t)?))
        } else if let Some(t) = s.strip_prefix("calibrate:") {
            Ok(Self::Calibrate(num(t)?))
        } else {
            Ok(Self::Fixed(num(s)?))
        }
    }
}

impl fmt::Display for GainSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Fixed(g) => write!(f, "{g}"),
            Self::Calibrate(t) => write!(f, "calibrate:{t}"),
            Self::CalibratePsnr(t) => write!(f, "calibrate-psnr:{t}"),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum GainField {
    Number(f64),
    Text(String),
}

/// Bench config file. Every field can also be given on the command line.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchFile {
    images: Option<Vec<String>>,
    payloads: Option<Vec<String>>,
    key: Option<String>,
    key_hex: Option<String>,
    gain: Option<GainField>,
    attacks: Option<Vec<String>>,
    seed: Option<u64>,
    output: Option<PathBuf>,
    format: Option<String>,
}

impl BenchFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Command-line values; `None` falls back to the config file, then the preset.
#[derive(Debug, Default)]
pub struct BenchOverrides {
    pub preset: Option<String>,
    pub images: Vec<String>,
    pub payloads: Vec<String>,
    pub key: Option<String>,
    pub key_hex: Option<String>,
    pub gain: Option<String>,
    pub attacks: Vec<String>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub format: Option<String>,
}

#[derive(Debug)]
pub struct BenchConfig {
    pub images: Vec<PathBuf>,
    pub payloads: Vec<PathBuf>,
    pub key: SecretKey,
    pub gain: GainSetting,
    pub attacks: Vec<AttackSpec>,
    pub seed: u64,
    pub output: PathBuf,
    pub format: Format,
}

/// The full robustness attack grid behind `--preset paper`.
/// The filter sweep is listed twice, as two separate groups in the grid.
pub fn paper_attacks() -> Vec<String> {
    let mut out: Vec<String> = (60..=90)
        .step_by(5)
        .map(|q| format!("jpeg:q={q}"))
        .collect();
    out.push("gauss-noise:var=0.001".into());
    for d in ["0.01", "0.02", "0.04", "0.06"] {
        out.push(format!("sp:d={d}"));
    }
    for _ in 0..2 {
        for w in [3, 5, 7, 9] {
            out.push(format!("gauss-filter:w={w},sigma=0.5"));
        }
    }
    out.push("histeq".into());
    out.push("histeq+gauss-noise:var=0.001".into());
    out
}

const PAPER_PAYLOAD: &str = "payloads/logo_19x52.pbm";

fn expand_images(entries: &[String], fixtures: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for e in entries {
        if e == STANDARD_SET {
            out.extend(Manifest::load(fixtures)?.host_paths(fixtures));
        } else {
            out.push(PathBuf::from(e));
        }
    }
    Ok(out)
}

pub fn resolve(
    file: BenchFile,
    cli: BenchOverrides,
    fixtures: &Path,
    default_gain: f64,
) -> Result<BenchConfig> {
    let paper = match cli.preset.as_deref() {
        None => false,
        Some("paper") => true,
        Some(other) => bail!(UsageError(format!("unknown preset {other:?} (paper)"))),
    };
    let pick = |cli: Vec<String>, file: Option<Vec<String>>, preset: Vec<String>| {
        if !cli.is_empty() {
            cli
        } else {
            file.filter(|v| !v.is_empty()).unwrap_or(preset)
        }
    };

    let images = pick(
        cli.images,
        file.images,
        if paper {
            vec![STANDARD_SET.into()]
        } else {
            Vec::new()
        },
    );
    let payloads = pick(
        cli.payloads,
        file.payloads,
        if paper {
            vec![fixtures.join(PAPER_PAYLOAD).display().to_string()]
        } else {
            Vec::new()
        },
    );
    let attack_text = pick(
        cli.attacks,
        file.attacks,
        if paper { paper_attacks() } else { Vec::new() },
    );
    if images.is_empty() {
        bail!(UsageError(
            "no images given (--images or `images` in the config)".into()
        ));
    }
    if payloads.is_empty() {
        bail!(UsageError(
            "no payloads given (--payloads or `payloads` in the config)".into()
        ));
    }
    if attack_text.is_empty() {
        bail!(UsageError(
            "no attacks given (--attack, --preset or `attacks` in the config)".into()
        ));
    }

    let key = match (cli.key.or(file.key), cli.key_hex.or(file.key_hex)) {
        (Some(k), None) => SecretKey::from_passphrase(&k)?,
        (None, Some(h)) => SecretKey::from_hex(&h)?,
        (None, None) => bail!(UsageError("a key is required (--key or --key-hex)".into())),
        (Some(_), Some(_)) => bail!(UsageError(
            "give either a passphrase or a hex key, not both".into()
        )),
    };
    let gain = match (cli.gain, file.gain) {
        (Some(g), _) => g.parse()?,
        (None, Some(GainField::Number(g))) => GainSetting::Fixed(g),
        (None, Some(GainField::Text(t))) => t.parse()?,
        (None, None) => GainSetting::Fixed(default_gain),
    };
    let seed = cli.seed.or(file.seed).unwrap_or(0);
    let attacks = attack_text
        .iter()
        .map(|t| AttackSpec::parse_seeded(t, seed))
        .collect::<dftmark::Result<Vec<_>>>()?;
    let Some(output) = cli.output.or(file.output) else {
        bail!(UsageError(
            "no output path (--out or `output` in the config)".into()
        ));
    };
    let format = match cli.format.or(file.format) {
        Some(f) => f.parse()?,
        None => Format::from_path(&output),
    };
    Ok(BenchConfig {
        images: expand_images(&images, fixtures)?,
        payloads: payloads.into_iter().map(PathBuf::from).collect(),
        key,
        gain,
        attacks,
        seed,
        output,
        format,
    })
}

fn label(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

struct Cell<'a> {
    image_id: String,
    payload_id: String,
    host: &'a GrayImage,
    wm: &'a WatermarkBits,
}

pub struct BenchRun<'a> {
    pub config: &'a BenchConfig,
    pub base: &'a EmbedParams,
    pub calibration: &'a CalibrationSettings,
    pub fingerprint: String,
}

impl BenchRun<'_> {
    fn row(&self, image_id: &str, payload_id: &str, attack: &str) -> Row {
        Row {
            image_id: image_id.to_owned(),
            payload_id: payload_id.to_owned(),
            attack_spec: attack.to_owned(),
            key_fingerprint: self.fingerprint.clone(),
            seed: self.config.seed,
            ..Row::default()
        }
    }

    fn failed_rows(&self, image_id: &str, payload_id: &str, err: &str) -> Vec<Row> {
        std::iter::once(NO_ATTACK.to_owned())
            .chain(self.config.attacks.iter().map(|a| a.to_string()))
            .map(|a| Row {
                error: Some(err.to_owned()),
                ..self.row(image_id, payload_id, &a)
            })
            .collect()
    }

    fn gain_for(&self, cell: &Cell) -> dftmark::Result<f64> {
        let key = &self.config.key;
        match self.config.gain {
            GainSetting::Fixed(g) => Ok(g),
            GainSetting::Calibrate(t) => {
                calibrate_gain(cell.host, cell.wm, key, t, self.base, self.calibration)
            }
            GainSetting::CalibratePsnr(t) => {
                gain_for_psnr(cell.host, cell.wm, key, t, self.base, self.calibration)
            }
        }
    }

    fn score(
        &self,
        cell: &Cell,
        params: &EmbedParams,
        marked: &GrayImage,
        attack: Option<&AttackSpec>,
    ) -> dftmark::Result<EvalReport> {
        let received = match attack {
            Some(a) => apply_attack(marked, a)?,
            None => marked.clone(),
        };
        let got = extract(
            &received,
            cell.wm.width(),
            cell.wm.height(),
            &self.config.key,
            params,
        )?;
        Ok(EvalReport {
            image_id: cell.image_id.clone(),
            payload_id: cell.payload_id.clone(),
            attack: attack.cloned(),
            psnr_vs_host_db: psnr(cell.host, &received)?,
            psnr_vs_watermarked_db: psnr(marked, &received)?,
            nc: nc(cell.wm, &got)?,
            ber: ber(cell.wm, &got)?,
        })
    }

    fn run_cell(&self, cell: &Cell) -> Vec<Row> {
        let gain = match self.gain_for(cell) {
            Ok(g) => g,
            Err(e) => return self.failed_rows(&cell.image_id, &cell.payload_id, &e.to_string()),
        };
        let prepared = self.base.with_gain(gain).and_then(|p| {
            let out = embed(cell.host, cell.wm, &self.config.key, &p)?;
            Ok((p, out.image))
        });
        let (params, marked) = match prepared {
            Ok(v) => v,
            Err(e) => return self.failed_rows(&cell.image_id, &cell.payload_id, &e.to_string()),
        };
        let attacks: Vec<Option<&AttackSpec>> = std::iter::once(None)
            .chain(self.config.attacks.iter().map(Some))
            .collect();
        attacks
            .par_iter()
            .map(|attack| {
                let name = attack.map_or(NO_ATTACK.to_owned(), |a| a.to_string());
                let base = Row {
                    gain: Some(gain),
                    ..self.row(&cell.image_id, &cell.payload_id, &name)
                };
                match self.score(cell, &params, &marked, *attack) {
                    Ok(r) => Row::from_report(&r, base),
                    Err(e) => Row {
                        error: Some(e.to_string()),
                        ..base
                    },
                }
            })
            .collect()
    }

    pub fn run(&self) -> Vec<Row> {
        let load = |p: &PathBuf| (label(p), p.clone());
        let images: Vec<_> = self.config.images.iter().map(load).collect();
        let payloads: Vec<_> = self.config.payloads.iter().map(load).collect();
        let hosts: Vec<_> = images
            .par_iter()
            .map(|(id, p)| (id.clone(), load_image(p).map_err(|e| e.to_string())))
            .collect();
        let marks: Vec<_> = payloads
            .iter()
            .map(|(id, p)| (id.clone(), load_watermark(p).map_err(|e| e.to_string())))
            .collect();

        let pairs: Vec<_> = hosts
            .iter()
            .flat_map(|h| marks.iter().map(move |m| (h, m)))
            .collect();
        let mut rows: Vec<Row> = pairs
            .par_iter()
            .flat_map_iter(|((image_id, host), (payload_id, wm))| match (host, wm) {
                (Ok(host), Ok(wm)) => self.run_cell(&Cell {
                    image_id: image_id.clone(),
                    payload_id: payload_id.clone(),
                    host,
                    wm,
                }),
                (Err(e), _) | (_, Err(e)) => self.failed_rows(image_id, payload_id, e),
            })
            .collect();
        rows.sort_by(|a, b| {
            (&a.image_id, &a.payload_id, &a.attack_spec).cmp(&(
                &b.image_id,
                &b.payload_id,
                &b.attack_spec,
            ))
        });
        rows
    }
}

/// Mean of each metric per (payload, attack) over the images that succeeded.
pub struct Average {
    pub payload_id: String,
    pub attack_spec: String,
    pub images: usize,
    pub psnr_host_db: f64,
    pub psnr_watermarked_db: f64,
    pub nc: f64,
    pub ber: f64,
}

pub fn averages(rows: &[Row]) -> Vec<Average> {
    // Duplicate attack rows (the repeated filter sweep) collapse here.
    let mut groups: BTreeMap<(&str, &str), BTreeMap<&str, &Row>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.error.is_none()) {
        groups
            .entry((&r.payload_id, &r.attack_spec))
            .or_default()
            .insert(&r.image_id, r);
    }
    groups
        .into_iter()
        .map(|((payload_id, attack_spec), by_image)| {
            let n = by_image.len() as f64;
            let mean = |f: &dyn Fn(&Row) -> f64| by_image.values().map(|r| f(r)).sum::<f64>() / n;
            Average {
                payload_id: payload_id.to_owned(),
                attack_spec: attack_spec.to_owned(),
                images: by_image.len(),
                psnr_host_db: mean(&|r| r.psnr_host_db.unwrap_or(f64::NAN)),
                psnr_watermarked_db: mean(&|r| r.psnr_watermarked_db.unwrap_or(f64::NAN)),
                nc: mean(&|r| r.nc.unwrap_or(f64::NAN)),
                ber: mean(&|r| r.ber.unwrap_or(f64::NAN)),
            }
        })
        .collect()
}
