//! Copies the 12-record fixture into a directory and renders its GIFs.
//!
//! ```text
//! cargo run -p gifsent --example materialize_fixture -- /tmp/mini
//! cargo run -p gifsent -- --config /tmp/mini/gifsent.toml ingest
//! ```

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use serde::Deserialize;

#[derive(Deserialize)]
struct MediaSpec {
    width: u16,
    height: u16,
    gifs: BTreeMap<String, Vec<(u8, u16)>>,
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dest = PathBuf::from(std::env::args().nth(1).ok_or("usage: materialize_fixture <dir>")?);
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mini");
    fs::create_dir_all(dest.join("cache"))?;
    for entry in fs::read_dir(&src)? {
        let path = entry?.path();
        if path.file_name().is_some_and(|n| n != "media_spec.json") {
            fs::copy(&path, dest.join(path.file_name().unwrap_or_default()))?;
        }
    }
    let spec: MediaSpec = serde_json::from_slice(&fs::read(src.join("media_spec.json"))?)?;
    let palette: Vec<u8> = (0..=255u8).flat_map(|v| [v, v, v]).collect();
    for (gif_id, frames) in &spec.gifs {
        let out = File::create(dest.join("cache").join(format!("{gif_id}.gif")))?;
        let mut enc = gif::Encoder::new(out, spec.width, spec.height, &palette)?;
        for &(level, delay) in frames {
            enc.write_frame(&gif::Frame {
                width: spec.width,
                height: spec.height,
                delay,
                buffer: Cow::Owned(vec![level; spec.width as usize * spec.height as usize]),
                ..Default::default()
            })?;
        }
    }
    println!("{}", dest.join("gifsent.toml").display());
    Ok(())
}
