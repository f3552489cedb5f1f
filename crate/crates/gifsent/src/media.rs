//! Media decoding: GIF files natively, MP4 through an `ffmpeg` subprocess.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::Command;

use gifsent_core::frames::{FrameError, FrameSet, TimedRaster};
use gifsent_core::raster::Raster;
use image::codecs::gif::GifDecoder;
use image::codecs::jpeg::JpegEncoder;
use image::AnimationDecoder;
use serde::Serialize;

use crate::error::{Error, Result};

/// Frame delays below this many milliseconds are shown as 100 ms, matching
/// how browsers play GIFs with a zero or near-zero delay.
pub const MIN_FRAME_DELAY_MS: f64 = 20.0;
const FALLBACK_FRAME_DELAY_MS: f64 = 100.0;

pub const DUMP_JPEG_QUALITY: u8 = 95;

/// A decoded animation: frames with start times, plus total play time.
#[derive(Debug, Clone)]
pub struct Timeline {
    pub frames: Vec<TimedRaster>,
    pub duration: f64,
}

fn decode_err(path: &Path, detail: impl std::fmt::Display) -> FrameError {
    FrameError::Decode(format!("{}: {detail}", path.display()))
}

/// Decodes a GIF into composited RGB frames. Transparent pixels are
/// blended over black.
pub fn decode_gif(path: &Path) -> std::result::Result<Timeline, FrameError> {
    let file = File::open(path).map_err(|e| decode_err(path, e))?;
    let decoder = GifDecoder::new(BufReader::new(file)).map_err(|e| decode_err(path, e))?;
    let mut frames = Vec::new();
    let mut t_ms = 0.0;
    for frame in decoder.into_frames() {
        let frame = frame.map_err(|e| decode_err(path, e))?;
        let (num, den) = frame.delay().numer_denom_ms();
        let mut delay = num as f64 / den.max(1) as f64;
        if delay < MIN_FRAME_DELAY_MS {
            delay = FALLBACK_FRAME_DELAY_MS;
        }
        let rgba = frame.into_buffer();
        let (w, h) = rgba.dimensions();
        let mut rgb = Vec::with_capacity(w as usize * h as usize * 3);
        for px in rgba.pixels() {
            let a = px[3] as u32;
            for c in &px.0[..3] {
                rgb.push(((*c as u32 * a + 127) / 255) as u8);
            }
        }
        let image = Raster::rgb(w, h, rgb).map_err(|e| decode_err(path, e))?;
        frames.push(TimedRaster {
            start: t_ms / 1000.0,
            image,
        });
        t_ms += delay;
    }
    if frames.is_empty() {
        return Err(FrameError::EmptyMedia);
    }
    Ok(Timeline {
        frames,
        duration: t_ms / 1000.0,
    })
}

fn run(cmd: &mut Command, path: &Path) -> std::result::Result<Vec<u8>, FrameError> {
    let out = cmd.output().map_err(|e| {
        decode_err(path, format!("cannot run {:?} ({e}); install ffmpeg to decode MP4", cmd.get_program()))
    })?;
    if !out.status.success() {
        return Err(decode_err(path, String::from_utf8_lossy(&out.stderr).trim()));
    }
    Ok(out.stdout)
}

/// Decodes an MP4 with `ffprobe` + `ffmpeg`; frames start at `i / fps`.
pub fn decode_video(path: &Path) -> std::result::Result<Timeline, FrameError> {
    let probe = run(
        Command::new("ffprobe").args([
            "-v",
            "error",
            "-select_streams",
            "v:0",
            "-show_entries",
            "stream=width,height,avg_frame_rate:format=duration",
            "-of",
            "default=noprint_wrappers=1",
        ])
        .arg(path),
        path,
    )?;
    let probe = String::from_utf8_lossy(&probe);
    let get = |key: &str| {
        probe
            .lines()
            .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
            .map(str::trim)
            .ok_or_else(|| decode_err(path, format!("ffprobe did not report {key}")))
    };
    let width: u32 = get("width")?.parse().map_err(|e| decode_err(path, e))?;
    let height: u32 = get("height")?.parse().map_err(|e| decode_err(path, e))?;
    let fps = match get("avg_frame_rate")?.split_once('/') {
        Some((n, d)) => n.parse::<f64>().unwrap_or(0.0) / d.parse::<f64>().unwrap_or(1.0),
        None => 0.0,
    };
    if !(fps.is_finite() && fps > 0.0) {
        return Err(decode_err(path, "unknown frame rate"));
    }
    let raw = run(
        Command::new("ffmpeg")
            .args(["-v", "error", "-i"])
            .arg(path)
            .args(["-f", "rawvideo", "-pix_fmt", "rgb24", "pipe:1"]),
        path,
    )?;
    let frame_len = width as usize * height as usize * 3;
    if frame_len == 0 || raw.is_empty() {
        return Err(FrameError::EmptyMedia);
    }
    let frames: Vec<TimedRaster> = raw
        .chunks_exact(frame_len)
        .enumerate()
        .map(|(i, chunk)| {
            Raster::rgb(width, height, chunk.to_vec())
                .map(|image| TimedRaster {
                    start: i as f64 / fps,
                    image,
                })
                .map_err(|e| decode_err(path, e))
        })
        .collect::<std::result::Result<_, _>>()?;
    let by_count = frames.len() as f64 / fps;
    let duration = get("duration")
        .ok()
        .and_then(|d| d.parse::<f64>().ok())
        .filter(|d| d.is_finite() && *d > 0.0)
        .unwrap_or(by_count);
    Ok(Timeline { frames, duration })
}

/// Decodes by extension: `.mp4` through ffmpeg, everything else as GIF.
pub fn decode_media(path: &Path) -> std::result::Result<Timeline, FrameError> {
    match fs::metadata(path) {
        Ok(m) if m.len() == 0 => return Err(FrameError::EmptyMedia),
        Err(e) => return Err(decode_err(path, e)),
        Ok(_) => {}
    }
    let is_video = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("mp4"));
    if is_video {
        decode_video(path)
    } else {
        decode_gif(path)
    }
}

/// Decodes `path` and samples it every `period` seconds.
pub fn extract_frames(path: &Path, gif_id: &str, period: f64) -> std::result::Result<FrameSet, FrameError> {
    let timeline = decode_media(path)?;
    FrameSet::sample(gif_id, &timeline.frames, timeline.duration, period)
}

#[derive(Serialize)]
struct DumpIndex<'a> {
    timestamps: &'a [f64],
    period: f64,
    duration: f64,
}

/// Writes `cache_dir/<gif_id>/frame_%04d.jpg` and an `index.json`.
pub fn dump_frames(frames: &FrameSet, cache_dir: &Path) -> Result<PathBuf> {
    let dir = cache_dir.join(frames.gif_id());
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    for frame in frames.frames() {
        let path = dir.join(format!("frame_{:04}.jpg", frame.index));
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut writer = std::io::BufWriter::new(file);
        let img = &frame.image;
        let color = match img.channels() {
            1 => image::ExtendedColorType::L8,
            _ => image::ExtendedColorType::Rgb8,
        };
        JpegEncoder::new_with_quality(&mut writer, DUMP_JPEG_QUALITY)
            .encode(img.data(), img.width(), img.height(), color)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    }
    let timestamps = frames.timestamps();
    let index = DumpIndex {
        timestamps: &timestamps,
        period: frames.period(),
        duration: frames.duration(),
    };
    let path = dir.join("index.json");
    let body = serde_json::to_vec_pretty(&index).map_err(|e| Error::Data(e.to_string()))?;
    fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    Ok(dir)
}

/// Loads a still image (first frame for animations) as RGB.
pub fn load_still(path: &Path) -> Result<Raster> {
    let img = image::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let rgb = img.to_rgb8();
    let (w, h) = rgb.dimensions();
    Raster::rgb(w, h, rgb.into_raw()).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}
