#![allow(dead_code)]

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde::Deserialize;

pub const FIXTURE_FILES: [&str; 5] = [
    "corpus.jsonl",
    "face_script.json",
    "ocr_script.json",
    "gifsent.toml",
    "oracle.csv",
];

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mini")
}

#[derive(Deserialize)]
struct MediaSpec {
    width: u16,
    height: u16,
    gifs: BTreeMap<String, Vec<(u8, u16)>>,
}

/// Gray GIF where frame `i` is filled with `frames[i].0` and shown for
/// `frames[i].1` centiseconds. The palette maps index v to (v, v, v).
pub fn write_gray_gif(path: &Path, width: u16, height: u16, frames: &[(u8, u16)]) {
    let palette: Vec<u8> = (0..=255u8).flat_map(|v| [v, v, v]).collect();
    let mut enc = gif::Encoder::new(File::create(path).unwrap(), width, height, &palette).unwrap();
    for &(level, delay) in frames {
        let f = gif::Frame {
            width,
            height,
            delay,
            buffer: Cow::Owned(vec![level; width as usize * height as usize]),
            ..Default::default()
        };
        enc.write_frame(&f).unwrap();
    }
}

/// Copies the committed fixture into `dir` and renders its GIFs into
/// `dir/cache`. Returns the config path.
pub fn materialize(dir: &Path) -> PathBuf {
    let src = fixture_dir();
    for f in FIXTURE_FILES {
        fs::copy(src.join(f), dir.join(f)).unwrap();
    }
    let spec: MediaSpec =
        serde_json::from_slice(&fs::read(src.join("media_spec.json")).unwrap()).unwrap();
    let cache = dir.join("cache");
    fs::create_dir_all(&cache).unwrap();
    for (gif_id, frames) in &spec.gifs {
        write_gray_gif(&cache.join(format!("{gif_id}.gif")), spec.width, spec.height, frames);
    }
    dir.join("gifsent.toml")
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub gif_id: String,
    pub fused_score: f64,
    pub label: u8,
    pub attribute_class: String,
}

pub fn oracle() -> Vec<OracleRow> {
    let mut r = csv::Reader::from_path(fixture_dir().join("oracle.csv")).unwrap();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            OracleRow {
                gif_id: rec[0].to_string(),
                fused_score: rec[1].parse().unwrap(),
                label: rec[2].parse().unwrap(),
                attribute_class: rec[3].to_string(),
            }
        })
        .collect()
}

pub fn gifsent(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gifsent")).args(args).output().unwrap()
}

pub fn run_ok(args: &[&str]) -> String {
    let out = gifsent(args);
    assert!(
        out.status.success(),
        "gifsent {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn read_jsonl(path: &Path) -> Vec<serde_json::Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}
