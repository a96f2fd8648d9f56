//! Benchmark report rows and their CSV / JSON encodings.
//!
//! Infinite PSNR is written as `inf` in CSV. JSON has no infinity, so the
//! value is `null` and a sibling `*_inf` flag is set.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use dftmark::EvalReport;
use serde_json::{json, Map, Value};

use crate::bench::NO_ATTACK;

pub const COLUMNS: [&str; 11] = [
    "image_id",
    "payload_id",
    "attack_spec",
    "psnr_host_db",
    "psnr_watermarked_db",
    "nc",
    "ber",
    "gain",
    "key_fingerprint",
    "seed",
    "error",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Self::Json,
            _ => Self::Csv,
        }
    }
}

impl FromStr for Format {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => bail!(crate::UsageError(format!(
                "unknown format {other:?} (csv | json)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Row {
    pub image_id: String,
    pub payload_id: String,
    pub attack_spec: String,
    pub psnr_host_db: Option<f64>,
    pub psnr_watermarked_db: Option<f64>,
    pub nc: Option<f64>,
    pub ber: Option<f64>,
    pub gain: Option<f64>,
    pub key_fingerprint: String,
    pub seed: u64,
    pub error: Option<String>,
}

impl Row {
    /// Metric columns from `report`, identity columns from `base`.
    pub fn from_report(report: &EvalReport, base: Row) -> Self {
        Row {
            image_id: report.image_id.clone(),
            payload_id: report.payload_id.clone(),
            attack_spec: report
                .attack
                .as_ref()
                .map_or(NO_ATTACK.to_owned(), |a| a.to_string()),
            psnr_host_db: Some(report.psnr_vs_host_db),
            psnr_watermarked_db: Some(report.psnr_vs_watermarked_db),
            nc: Some(report.nc),
            ber: Some(report.ber),
            ..base
        }
    }
}

fn csv_number(v: Option<f64>) -> String {
    match v {
        None => String::new(),
        Some(x) if x == f64::INFINITY => "inf".into(),
        Some(x) => x.to_string(),
    }
}

pub fn to_csv(rows: &[Row]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COLUMNS)?;
    for r in rows {
        w.write_record([
            r.image_id.clone(),
            r.payload_id.clone(),
            r.attack_spec.clone(),
            csv_number(r.psnr_host_db),
            csv_number(r.psnr_watermarked_db),
            csv_number(r.nc),
            csv_number(r.ber),
            csv_number(r.gain),
            r.key_fingerprint.clone(),
            r.seed.to_string(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.into_inner().context("flushing CSV")
}

fn json_psnr(obj: &mut Map<String, Value>, name: &str, v: Option<f64>) {
    let inf = v == Some(f64::INFINITY);
    obj.insert(name.into(), if inf { Value::Null } else { json!(v) });
    obj.insert(format!("{name}_inf"), json!(inf));
}

pub fn to_json(rows: &[Row]) -> Result<Vec<u8>> {
    let list: Vec<Value> = rows
        .iter()
        .map(|r| {
            let mut o = Map::new();
            o.insert("image_id".into(), json!(r.image_id));
            o.insert("payload_id".into(), json!(r.payload_id));
            o.insert("attack_spec".into(), json!(r.attack_spec));
            json_psnr(&mut o, "psnr_host_db", r.psnr_host_db);
            json_psnr(&mut o, "psnr_watermarked_db", r.psnr_watermarked_db);
            o.insert("nc".into(), json!(r.nc));
            o.insert("ber".into(), json!(r.ber));
            o.insert("gain".into(), json!(r.gain));
            o.insert("key_fingerprint".into(), json!(r.key_fingerprint));
            o.insert("seed".into(), json!(r.seed));
            o.insert("error".into(), json!(r.error));
            Value::Object(o)
        })
        .collect();
    let mut out = serde_json::to_vec_pretty(&list)?;
    out.push(b'\n');
    Ok(out)
}

pub fn write(rows: &[Row], path: &Path, format: Format) -> Result<()> {
    let bytes = match format {
        Format::Csv => to_csv(rows)?,
        Format::Json => to_json(rows)?,
    };
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}
