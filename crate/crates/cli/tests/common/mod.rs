#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ninegrid"));
    cmd.env_remove("NINEGRID_DATA_DIR")
        .env_remove("NINEGRID_BIND");
    cmd
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/table1")
}

/// `n` noisy images of assorted shapes, named `img<i>.png`.
pub fn write_images(dir: &Path, n: usize, seed: u64) {
    fs::create_dir_all(dir).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..n {
        let (w, h) = (rng.random_range(20..80), rng.random_range(20..80));
        let base: [u8; 3] = rng.random();
        let spread = rng.random_range(1..120u8);
        let img = RgbImage::from_fn(w, h, |_, _| {
            let mut px = base;
            for c in &mut px {
                *c = c.wrapping_add(rng.random_range(0..spread));
            }
            Rgb(px)
        });
        img.save(dir.join(format!("img{i}.png"))).unwrap();
    }
}

/// Shell command that answers the scorer protocol from a fixed list of scores.
/// It reads every request line, then prints `{"id", "score"}` for the first
/// `scores.len()` of them.
pub fn stub_scorer(scores: &[&str]) -> String {
    let list = scores.join(" ");
    format!(
        r#"set -- {list}; while IFS= read -r line; do [ $# -gt 0 ] || continue; id=$(printf '%s' "$line" | sed 's/.*"id":"\([^"]*\)".*/\1/'); printf '{{"id":"%s","score":%s}}\n' "$id" "$1"; shift; done"#
    )
}

/// Preprocesses nine images into `<root>/set` and returns that directory.
pub fn prepared_set(root: &Path, seed: u64) -> PathBuf {
    let src = root.join("src");
    write_images(&src, 9, seed);
    let set = root.join("set");
    let out = run(&[
        "preprocess",
        src.to_str().unwrap(),
        "--set-id",
        "s",
        "--out",
        set.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    set
}
