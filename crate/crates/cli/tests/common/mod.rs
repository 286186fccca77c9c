#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use storewatch_core::nn::demographics::{wrn_manifest, WrnConfig};
use storewatch_core::nn::expression::{xception_manifest, XceptionConfig};
use storewatch_core::nn::synthetic::random_archive;
use storewatch_core::weights::Manifest;

pub const WRN_SEED: u64 = 11;
pub const XCEPTION_SEED: u64 = 12;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn write_once(path: &Path, manifest: &Manifest, seed: u64) {
    if path.exists() {
        return;
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    random_archive(manifest, seed).unwrap().save(&tmp).unwrap();
    std::fs::rename(&tmp, path).unwrap();
}

/// Seeded random-weight archives for both networks, written once per target dir.
pub fn weights() -> &'static (PathBuf, PathBuf) {
    static WEIGHTS: OnceLock<(PathBuf, PathBuf)> = OnceLock::new();
    WEIGHTS.get_or_init(|| {
        let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("storewatch-weights");
        std::fs::create_dir_all(&dir).unwrap();
        let wrn = dir.join(format!("wrn16_8_seed{WRN_SEED}.nnwa"));
        let xc = dir.join(format!("mini_xception_seed{XCEPTION_SEED}.nnwa"));
        write_once(&wrn, &wrn_manifest(&WrnConfig::default()).unwrap(), WRN_SEED);
        write_once(&xc, &xception_manifest(&XceptionConfig::default()).unwrap(), XCEPTION_SEED);
        (wrn, xc)
    })
}

pub fn storewatch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_storewatch"))
        .args(args)
        .env("STOREWATCH_LOG", "warn")
        .output()
        .unwrap()
}

/// Runs the bundled frames through the CLI with the contrast cascade.
pub fn fixture_run(out: &Path, threads: u32, extra: &[&str]) -> Output {
    let (wrn, xc) = weights();
    let fx = fixtures();
    let threads = threads.to_string();
    let mut args = vec![
        "--input",
        fx.join("frames").to_str().unwrap(),
        "--cascade",
        fx.join("contrast_cascade.xml").to_str().unwrap(),
        "--age-gender-weights",
        wrn.to_str().unwrap(),
        "--expression-weights",
        xc.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--min-neighbors",
        "0",
        "--min-face-size",
        "24",
        "--threads",
        &threads,
    ]
    .into_iter()
    .map(str::to_owned)
    .collect::<Vec<_>>();
    args.extend(extra.iter().map(|s| s.to_string()));
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    storewatch(&refs)
}
