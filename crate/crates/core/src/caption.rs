//! Burned-in caption recovery and scoring.

use alloc::string::String;
use alloc::vec::Vec;

use serde::Serialize;

use crate::backends::{FrameRef, OcrBackend, TextSentimentBackend};
use crate::frames::FrameSet;
use crate::raster::to_grayscale;
use crate::text::{classify_text, preprocess_tweet};
use crate::{Modality, ModuleScore};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FrameText {
    pub frame_index: usize,
    pub text: String,
}

/// Caption text recovered from a GIF's frames.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GifCaption {
    pub text: String,
    pub per_frame: Vec<FrameText>,
    pub present: bool,
}

impl GifCaption {
    pub fn absent() -> Self {
        Self {
            text: String::new(),
            per_frame: Vec::new(),
            present: false,
        }
    }
}

fn normalize_ws(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for w in s.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(w);
    }
    out
}

/// OCRs every frame (grayscale) and joins the readings in timestamp order.
///
/// Only *consecutive* identical readings collapse: a caption that stays on
/// screen for ten frames counts once, but the same caption shown again
/// after a blank frame counts twice. Frames where the backend errors are
/// skipped without breaking a run.
pub fn extract_caption(frames: &FrameSet, backend: &dyn OcrBackend) -> GifCaption {
    let mut per_frame = Vec::new();
    let mut kept: Vec<String> = Vec::new();
    let mut previous: Option<String> = None;
    for frame in frames.frames() {
        let at = FrameRef {
            gif_id: frames.gif_id(),
            index: frame.index,
            timestamp: frame.timestamp,
        };
        let read = to_grayscale(&frame.image)
            .map_err(|e| alloc::format!("{e}"))
            .and_then(|gray| backend.read_text(at, &gray).map_err(|e| alloc::format!("{e}")));
        let text = match read {
            Ok(t) => normalize_ws(&t),
            Err(e) => {
                log::warn!("{}: OCR failed on frame {}: {e}", frames.gif_id(), frame.index);
                continue;
            }
        };
        if !text.is_empty() {
            per_frame.push(FrameText {
                frame_index: frame.index,
                text: text.clone(),
            });
            if previous.as_deref() != Some(text.as_str()) {
                kept.push(text.clone());
            }
        }
        previous = Some(text);
    }
    let text = normalize_ws(&kept.join(" "));
    GifCaption {
        present: !text.is_empty(),
        text,
        per_frame,
    }
}

/// Scores a caption with the same cleaning and text backend used for tweets.
/// Evidence is the character count of the cleaned caption.
pub fn score_caption(caption: &GifCaption, text_backend: &dyn TextSentimentBackend) -> ModuleScore {
    if !caption.present {
        return ModuleScore::unavailable(Modality::Ocr);
    }
    let clean = preprocess_tweet(&caption.text);
    match classify_text(&clean, text_backend) {
        Ok(p) => ModuleScore::available(Modality::Ocr, p, clean.text.chars().count())
            .unwrap_or(ModuleScore::unavailable(Modality::Ocr)),
        Err(e) => {
            log::debug!("caption {:?} not scored: {e}", caption.text);
            ModuleScore::unavailable(Modality::Ocr)
        }
    }
}
