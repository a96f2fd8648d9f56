//! `dftmark`: embed, extract, attack and benchmark DFT/DCT watermarks.

mod bench;
mod fixtures;
mod report;
mod settings;

use std::env;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dftmark::codec::gain_for_psnr;
use dftmark::{
    apply_attack, ber, calibrate_gain, embed, extract, load_image, load_watermark, mse, nc, psnr,
    save_image, save_watermark, AttackSpec, CalibrationSettings, SecretKey,
};

use crate::bench::{BenchFile, BenchOverrides, BenchRun};
use crate::fixtures::{Manifest, Status};
use crate::settings::Settings;

/// Salt mixed into key fingerprints in reports.
const FINGERPRINT_SALT_ENV: &str = "DFTMARK_FINGERPRINT_SALT";

/// Bad flags or config; exits with status 2 like clap's own usage errors.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(
    name = "dftmark",
    version,
    about = "Blind DFT-magnitude / DCT mid-band image watermarking"
)]
struct Cli {
    /// Codec defaults (gain, mask, assignment, calibration bounds) in TOML.
    /// Defaults to the bundled config/default.toml.
    #[arg(long, global = true, value_name = "FILE")]
    settings: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct KeyArgs {
    /// Secret key as a UTF-8 passphrase.
    #[arg(long)]
    key: Option<String>,
    /// Secret key as hex bytes (optional 0x prefix).
    #[arg(long)]
    key_hex: Option<String>,
}

impl KeyArgs {
    fn key(&self) -> Result<SecretKey> {
        Ok(match (&self.key, &self.key_hex) {
            (Some(k), _) => SecretKey::from_passphrase(k)?,
            (None, Some(h)) => SecretKey::from_hex(h)?,
            (None, None) => unreachable!("clap enforces the group"),
        })
    }
}

#[derive(Args)]
struct CodecArgs {
    /// Mid-band mask: `midband` or explicit `row:col,row:col,...`.
    #[arg(long)]
    mask: Option<String>,
    /// Bit-to-tile assignment: raster | permuted.
    #[arg(long)]
    assignment: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Embed a binary payload into a grayscale host.
    Embed {
        #[arg(long)]
        host: PathBuf,
        /// Payload bitmap (PBM, or a grayscale image where nonzero means 1).
        #[arg(long)]
        wm: PathBuf,
        #[command(flatten)]
        key: KeyArgs,
        /// Gain factor; defaults to the settings value.
        #[arg(long)]
        gain: Option<f64>,
        #[command(flatten)]
        codec: CodecArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Read a payload back from a watermarked image.
    Extract {
        #[arg(long = "in")]
        input: PathBuf,
        /// Payload width in bits.
        #[arg(long)]
        width: usize,
        /// Payload height in bits.
        #[arg(long)]
        height: usize,
        #[command(flatten)]
        key: KeyArgs,
        #[command(flatten)]
        codec: CodecArgs,
        /// Where to write the extracted payload (.pbm, .pgm or .png).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Original payload; prints NC and BER against it.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Apply an attack (or a `+`-joined chain) to an image.
    ///
    /// Noise parameters use the normalized [0, 1] intensity scale:
    /// `gauss-noise:var=0.001` adds noise with standard deviation
    /// sqrt(0.001) * 255 pixel levels.
    Attack {
        #[arg(long = "in")]
        input: PathBuf,
        /// e.g. `jpeg:q=75`, `sp:d=0.01,seed=7`, `histeq+gauss-noise:var=0.001`.
        #[arg(long)]
        spec: String,
        /// Seed for noise attacks that do not name one in --spec.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare two images (MSE, PSNR) or, with --bits, two payloads (NC, BER).
    Metrics {
        a: PathBuf,
        b: PathBuf,
        /// Treat both files as payload bitmaps; the first is the reference.
        #[arg(long)]
        bits: bool,
    },
    /// Run an attack grid over images and payloads and write a report.
    ///
    /// Unattacked imperceptibility rows use the attack label `none`. Per-attack
    /// averages over images are printed to stdout.
    Bench {
        /// Bench config in TOML (images, payloads, key, gain, attacks, seed,
        /// output, format). Flags override it.
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        /// Named grid; `paper` is the full robustness suite.
        #[arg(long)]
        preset: Option<String>,
        /// Host images; `5std` expands to the fixture manifest hosts.
        #[arg(long, num_args = 1..)]
        images: Vec<String>,
        #[arg(long, num_args = 1..)]
        payloads: Vec<String>,
        #[arg(long)]
        key: Option<String>,
        #[arg(long)]
        key_hex: Option<String>,
        /// Number, `calibrate:<dB>` or `calibrate-psnr:<dB>` (per image).
        #[arg(long)]
        gain: Option<String>,
        /// Attack spec; repeat for several.
        #[arg(long = "attack")]
        attacks: Vec<String>,
        /// Seed for noise attacks that do not name one.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// csv | json (default: from the output extension).
        #[arg(long)]
        format: Option<String>,
        /// Fixture directory holding manifest.toml.
        #[arg(long, default_value = "fixtures")]
        fixtures: PathBuf,
    },
    /// Find a gain for a target PSNR.
    ///
    /// Without --psnr-only the gain must also extract the payload exactly.
    Calibrate {
        #[arg(long)]
        host: PathBuf,
        #[arg(long)]
        wm: PathBuf,
        #[command(flatten)]
        key: KeyArgs,
        /// Target PSNR in dB.
        #[arg(long)]
        target: f64,
        /// Largest gain with PSNR >= target, ignoring extraction.
        #[arg(long)]
        psnr_only: bool,
        #[command(flatten)]
        codec: CodecArgs,
        /// Store the gain in this settings file.
        #[arg(long, value_name = "FILE")]
        write_config: Option<PathBuf>,
    },
    /// Check the fixture files against their manifest hashes and list sources.
    FetchFixtures {
        #[arg(long, default_value = "fixtures")]
        dir: PathBuf,
    },
}

fn fmt_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.4}")
    }
}

fn fingerprint(key: &SecretKey) -> String {
    key.fingerprint(
        env::var(FINGERPRINT_SALT_ENV)
            .unwrap_or_default()
            .as_bytes(),
    )
}

fn run(cli: Cli) -> Result<()> {
    let settings = Settings::load(cli.settings.as_deref())?;
    match cli.command {
        Command::Embed {
            host,
            wm,
            key,
            gain,
            codec,
            out,
        } => {
            let params =
                settings.params(gain, codec.mask.as_deref(), codec.assignment.as_deref())?;
            let outcome = embed(
                &load_image(&host)?,
                &load_watermark(&wm)?,
                &key.key()?,
                &params,
            )?;
            save_image(&outcome.image, &out)?;
            println!(
                "psnr_db={} bits_embedded={}",
                fmt_db(outcome.psnr_db),
                outcome.bits_embedded
            );
        }
        Command::Extract {
            input,
            width,
            height,
            key,
            codec,
            out,
            reference,
        } => {
            let params =
                settings.params(None, codec.mask.as_deref(), codec.assignment.as_deref())?;
            let got = extract(&load_image(&input)?, width, height, &key.key()?, &params)?;
            if let Some(out) = &out {
                save_watermark(&got, out)?;
            }
            match reference {
                Some(r) => {
                    let want = load_watermark(&r)?;
                    println!("nc={:.6} ber={:.6}", nc(&want, &got)?, ber(&want, &got)?);
                }
                None if out.is_none() => {
                    let text: String = got.bits().iter().map(|b| char::from(b'0' + b)).collect();
                    for row in text.as_bytes().chunks(width) {
                        println!("{}", std::str::from_utf8(row).expect("ascii"));
                    }
                }
                None => {}
            }
        }
        Command::Attack {
            input,
            spec,
            seed,
            out,
        } => {
            let spec = AttackSpec::parse_seeded(&spec, seed)?;
            let img = load_image(&input)?;
            let attacked = apply_attack(&img, &spec)?;
            save_image(&attacked, &out)?;
            println!("psnr_db={} spec={spec}", fmt_db(psnr(&img, &attacked)?));
        }
        Command::Metrics { a, b, bits } => {
            if bits {
                let (w, w2) = (load_watermark(&a)?, load_watermark(&b)?);
                println!("nc={:.6} ber={:.6}", nc(&w, &w2)?, ber(&w, &w2)?);
            } else {
                let (x, y) = (load_image(&a)?, load_image(&b)?);
                println!("mse={:.6} psnr_db={}", mse(&x, &y)?, fmt_db(psnr(&x, &y)?));
            }
        }
        Command::Bench {
            config,
            preset,
            images,
            payloads,
            key,
            key_hex,
            gain,
            attacks,
            seed,
            out,
            format,
            fixtures,
        } => {
            let file = match &config {
                Some(p) => BenchFile::load(p)?,
                None => BenchFile::default(),
            };
            let overrides = BenchOverrides {
                preset,
                images,
                payloads,
                key,
                key_hex,
                gain,
                attacks,
                seed,
                output: out,
                format,
            };
            let config = bench::resolve(file, overrides, &fixtures, settings.gain)?;
            let base = settings.params(None, None, None)?;
            let calibration = CalibrationSettings::from(&settings.calibration);
            let run = BenchRun {
                config: &config,
                base: &base,
                calibration: &calibration,
                fingerprint: fingerprint(&config.key),
            };
            let rows = run.run();
            report::write(&rows, &config.output, config.format)?;
            print_averages(&rows);
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            println!(
                "rows={} failed={} report={}",
                rows.len(),
                failed,
                config.output.display()
            );
        }
        Command::Calibrate {
            host,
            wm,
            key,
            target,
            psnr_only,
            codec,
            write_config,
        } => {
            let params =
                settings.params(None, codec.mask.as_deref(), codec.assignment.as_deref())?;
            let (host, wm, key) = (load_image(&host)?, load_watermark(&wm)?, key.key()?);
            let limits = CalibrationSettings::from(&settings.calibration);
            let gain = if psnr_only {
                gain_for_psnr(&host, &wm, &key, target, &params, &limits)?
            } else {
                calibrate_gain(&host, &wm, &key, target, &params, &limits)?
            };
            let params = params.with_gain(gain)?;
            let out = embed(&host, &wm, &key, &params)?;
            let got = extract(&out.image, wm.width(), wm.height(), &key, &params)?;
            println!(
                "gain={gain} psnr_db={} ber={:.6}",
                fmt_db(out.psnr_db),
                ber(&wm, &got)?
            );
            if let Some(path) = write_config {
                settings.write_gain(&path, gain)?;
            }
        }
        Command::FetchFixtures { dir } => fetch_fixtures(&dir)?,
    }
    Ok(())
}

fn print_averages(rows: &[report::Row]) {
    let avg = bench::averages(rows);
    if avg.is_empty() {
        return;
    }
    println!(
        "{:<14} {:<40} {:>3} {:>10} {:>10} {:>8} {:>8}",
        "payload", "attack (mean over images)", "n", "psnr_host", "psnr_wm", "nc", "ber"
    );
    for a in avg {
        println!(
            "{:<14} {:<40} {:>3} {:>10} {:>10} {:>8.4} {:>8.4}",
            a.payload_id,
            a.attack_spec,
            a.images,
            fmt_db(a.psnr_host_db),
            fmt_db(a.psnr_watermarked_db),
            a.nc,
            a.ber
        );
    }
}

fn fetch_fixtures(dir: &Path) -> Result<()> {
    let manifest = Manifest::load(dir)?;
    let mut bad = 0;
    for (kind, entry) in manifest
        .host
        .iter()
        .map(|e| ("host", e))
        .chain(manifest.payload.iter().map(|e| ("payload", e)))
    {
        let status = entry
            .check(dir)
            .with_context(|| format!("checking {}", entry.id))?;
        let tag = match &status {
            Status::Verified => "ok".to_owned(),
            Status::Missing => "missing".to_owned(),
            Status::Mismatch(actual) => format!("hash mismatch (got {actual})"),
        };
        println!(
            "{kind} {:<10} {:<9} {}",
            entry.id,
            tag,
            dir.join(&entry.file).display()
        );
        if status != Status::Verified {
            bad += 1;
            println!("    source: {}", entry.source);
            if let Some(note) = &entry.note {
                println!("    note:   {note}");
            }
            println!("    expect: sha256 {}", entry.sha256);
        }
    }
    if bad > 0 {
        bail!("{bad} fixture(s) missing or altered; obtain them from the sources above");
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<dftmark::Error>() {
        Some(dftmark::Error::InvalidSpec(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
