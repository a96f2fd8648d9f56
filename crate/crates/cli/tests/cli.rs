use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dftmark::{
    extract, load_image, load_watermark, nc, save_image, EmbedParams, GrayImage, SecretKey,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn logo() -> PathBuf {
    root().join("fixtures/payloads/logo_19x52.pbm")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dftmark"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn field(text: &str, name: &str) -> f64 {
    text.split_whitespace()
        .find_map(|t| t.strip_prefix(&format!("{name}=")))
        .unwrap_or_else(|| panic!("no {name}= in {text:?}"))
        .parse()
        .unwrap()
}

/// Square textured host, written as PGM.
fn host(dir: &TempDir, size: usize, seed: u64) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pixels = (0..size * size)
        .map(|i| {
            let (r, c) = (i / size, i % size);
            let base = 128.0 + 60.0 * ((r as f64 / 9.0).sin() * (c as f64 / 13.0).cos());
            (base + rng.random_range(-20.0..20.0)).clamp(0.0, 255.0) as u8
        })
        .collect();
    let path = dir.path().join(format!("host{seed}_{size}.pgm"));
    save_image(&GrayImage::new(size, size, pixels).unwrap(), &path).unwrap();
    path
}

fn embed_into(dir: &TempDir, host: &Path, key: &str, gain: &str) -> PathBuf {
    let out = dir.path().join(format!("marked_{key}.pgm"));
    let o = run(&[
        "embed",
        "--host",
        s(host),
        "--wm",
        s(&logo()),
        "--key",
        key,
        "--gain",
        gain,
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn embed_reports_psnr() {
    let dir = TempDir::new().unwrap();
    let h = host(&dir, 256, 1);
    let out = dir.path().join("m.pgm");
    let o = run(&[
        "embed",
        "--host",
        s(&h),
        "--wm",
        s(&logo()),
        "--key",
        "k1",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(field(&text, "psnr_db") > 40.0);
    assert_eq!(field(&text, "bits_embedded"), 19.0 * 52.0);
    assert!(out.exists());
}

#[test]
fn embed_without_key_is_usage_error() {
    let dir = TempDir::new().unwrap();
    let h = host(&dir, 256, 1);
    let o = run(&[
        "embed",
        "--host",
        s(&h),
        "--wm",
        s(&logo()),
        "--out",
        "x.pgm",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oversized_payload_fails() {
    let dir = TempDir::new().unwrap();
    let h = host(&dir, 64, 1);
    let out = dir.path().join("m.pgm");
    let o = run(&[
        "embed",
        "--host",
        s(&h),
        "--wm",
        s(&logo()),
        "--key",
        "k",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn extract_matches_library() {
    let dir = TempDir::new().unwrap();
    let h = host(&dir, 256, 2);
    let marked = embed_into(&dir, &h, "k1", "5000");
    let o = run(&[
        "extract",
        "--in",
        s(&marked),
        "--width",
        "52",
        "--height",
        "19",
        "--key",
        "k1",
        "--reference",
        s(&logo()),
    ]);
    assert!(o.status.success());
    let text = stdout(&o);

    let wm = load_watermark(logo()).unwrap();
    let got = extract(
        &load_image(&marked).unwrap(),
        52,
        19,
        &SecretKey::from_passphrase("k1").unwrap(),
        &EmbedParams::new(5000.0).unwrap(),
    )
    .unwrap();
    let expected = nc(&wm, &got).unwrap();
    assert!((field(&text, "nc") - expected).abs() < 1e-6);
}

#[test]
fn extract_writes_payload_file() {
    let dir = TempDir::new().unwrap();
    let h = host(&dir, 256, 2);
    let marked = embed_into(&dir, &h, "k1", "5000");
    let out = dir.path().join("bits.pbm");
    let o = run(&[
        "extract",
        "--in",
        s(&marked),
        "--width",
        "52",
        "--height",
        "19",
        "--key",
        "k1",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success());
    let bits = load_watermark(&out).unwrap();
    assert_eq!((bits.width(), bits.height()), (52, 19));
}

#[test]
fn wrong_key_reads_at_chance() {
    let dir = TempDir::new().unwrap();
    let h = host(&dir, 256, 3);
    let marked = embed_into(&dir, &h, "right", "5000");
    let mut total = 0.0;
    let keys = ["w1", "w2", "w3", "w4", "w5", "w6"];
    for k in keys {
        let o = run(&[
            "extract",
            "--in",
            s(&marked),
            "--width",
            "52",
            "--height",
            "19",
            "--key",
            k,
            "--reference",
            s(&logo()),
        ]);
        total += field(&stdout(&o), "ber");
    }
    let mean = total / keys.len() as f64;
    assert!((0.4..=0.6).contains(&mean), "{mean}");
}

#[test]
fn extract_without_width_is_usage_error() {
    let o = run(&["extract", "--in", "a.pgm", "--height", "52", "--key", "k"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn attack_specs() {
    let dir = TempDir::new().unwrap();
    let h = host(&dir, 64, 4);
    let out = dir.path().join("a.pgm");
    for spec in [
        "jpeg:q=75",
        "histeq+gauss-noise:var=0.001",
        "gauss-filter:w=5,sigma=0.5",
    ] {
        let o = run(&[
            "attack",
            "--in",
            s(&h),
            "--spec",
            spec,
            "--seed",
            "3",
            "--out",
            s(&out),
        ]);
        assert!(
            o.status.success(),
            "{spec}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(field(&stdout(&o), "psnr_db") > 10.0);
    }
    let o = run(&[
        "attack",
        "--in",
        s(&h),
        "--spec",
        "sp:d=1.5",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn metrics_images_and_bits() {
    let dir = TempDir::new().unwrap();
    let h = host(&dir, 64, 5);
    let o = run(&["metrics", s(&h), s(&h)]);
    assert!(o.status.success());
    assert_eq!(field(&stdout(&o), "mse"), 0.0);
    let o = run(&["metrics", "--bits", s(&logo()), s(&logo())]);
    let text = stdout(&o);
    assert_eq!(field(&text, "nc"), 1.0);
    assert_eq!(field(&text, "ber"), 0.0);
}

fn bench_config(dir: &TempDir, out: &str) -> PathBuf {
    let a = host(dir, 256, 6);
    let b = host(dir, 256, 7);
    let text = format!(
        "images = [{:?}, {:?}]\npayloads = [{:?}]\nkey = \"bench\"\ngain = 3000.0\n\
         attacks = [\"jpeg:q=80\", \"gauss-noise:var=0.001\", \"sp:d=0.02\"]\nseed = 11\n\
         output = {:?}\n",
        s(&a),
        s(&b),
        s(&logo()),
        s(&dir.path().join(out)),
    );
    let path = dir.path().join("bench.toml");
    fs::write(&path, text).unwrap();
    path
}

fn bench(config: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["bench", "--config", s(config)];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn bench_without_images_is_usage_error() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("r.csv");
    let o = run(&[
        "bench",
        "--key",
        "k",
        "--attack",
        "histeq",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bench_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let config = bench_config(&dir, "r.csv");
    let first = dir.path().join("first.csv");
    let second = dir.path().join("second.csv");
    assert!(bench(&config, &["--out", s(&first)]).status.success());
    assert!(bench(&config, &["--out", s(&second)]).status.success());
    let a = fs::read(&first).unwrap();
    assert_eq!(a, fs::read(&second).unwrap());
    // header + 2 images x (none + 3 attacks)
    assert_eq!(a.iter().filter(|&&c| c == b'\n').count(), 1 + 2 * 4);
}

#[test]
fn bench_csv_and_json_agree() {
    let dir = TempDir::new().unwrap();
    let config = bench_config(&dir, "r.csv");
    let csv_path = dir.path().join("r.csv");
    let json_path = dir.path().join("r.json");
    assert!(bench(&config, &[]).status.success());
    assert!(bench(&config, &["--out", s(&json_path)]).status.success());

    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    let json: serde_json::Value = serde_json::from_slice(&fs::read(&json_path).unwrap()).unwrap();
    let list = json.as_array().unwrap();
    assert_eq!(rows.len(), list.len());
    for (r, j) in rows.iter().zip(list) {
        assert_eq!(&r[10], "", "error row");
        assert_eq!(&r[0], j["image_id"].as_str().unwrap());
        assert_eq!(&r[2], j["attack_spec"].as_str().unwrap());
        assert_eq!(r[5].parse::<f64>().unwrap(), j["nc"].as_f64().unwrap());
        assert_eq!(r[6].parse::<f64>().unwrap(), j["ber"].as_f64().unwrap());
    }
}

#[test]
fn bench_rows_do_not_depend_on_other_attacks() {
    let dir = TempDir::new().unwrap();
    let config = bench_config(&dir, "r.csv");
    let full = dir.path().join("full.csv");
    let subset = dir.path().join("subset.csv");
    assert!(bench(&config, &["--out", s(&full)]).status.success());
    assert!(
        bench(&config, &["--attack", "sp:d=0.02", "--out", s(&subset)])
            .status
            .success()
    );
    let full = fs::read_to_string(full).unwrap();
    for line in fs::read_to_string(subset).unwrap().lines() {
        assert!(full.lines().any(|l| l == line), "{line}");
    }
}

#[test]
fn calibrate_rejects_unreachable_target() {
    let dir = TempDir::new().unwrap();
    let h = host(&dir, 256, 8);
    let o = run(&[
        "calibrate",
        "--host",
        s(&h),
        "--wm",
        s(&logo()),
        "--key",
        "k",
        "--target",
        "200",
    ]);
    assert!(!o.status.success());
}

#[test]
fn calibrate_is_repeatable_and_writes_config() {
    let dir = TempDir::new().unwrap();
    let h = host(&dir, 256, 8);
    let cfg = dir.path().join("settings.toml");
    let wm = logo();
    let args = [
        "calibrate",
        "--host",
        s(&h),
        "--wm",
        s(&wm),
        "--key",
        "k",
        "--target",
        "45",
        "--psnr-only",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(stdout(&a), stdout(&b));
    let psnr = field(&stdout(&a), "psnr_db");
    assert!(psnr >= 45.0 - 0.5, "{psnr}");

    let mut write = args.to_vec();
    write.extend(["--write-config", s(&cfg)]);
    assert!(run(&write).status.success());
    let stored: toml::Value = toml::from_str(&fs::read_to_string(&cfg).unwrap()).unwrap();
    assert_eq!(
        stored["gain"].as_float().unwrap(),
        field(&stdout(&a), "gain")
    );
}

#[test]
fn fetch_fixtures_verifies_and_flags_missing() {
    let o = run(&["fetch-fixtures", "--dir", s(&root().join("fixtures"))]);
    assert!(o.status.success(), "{}", stdout(&o));

    let dir = TempDir::new().unwrap();
    fs::copy(
        root().join("fixtures/manifest.toml"),
        dir.path().join("manifest.toml"),
    )
    .unwrap();
    let o = run(&["fetch-fixtures", "--dir", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
}
