//! Inference backend contracts and the deterministic mock implementations.
//!
//! Every model the pipeline calls sits behind one of four traits. A backend
//! declares whether overlapping calls are allowed through
//! `concurrent_safe`; callers that fan out work must serialize calls into
//! backends that return `false`.
//!
//! The [`Validated`] wrapper checks outputs against the contract (scores in
//! `[0, 1]`, boxes inside the frame, finite non-negative emotion scores) and
//! turns violations into errors.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::Raster;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("channel mismatch: expected {expected}, got {actual}")]
    ChannelMismatch { expected: u8, actual: u8 },
    #[error("backend `{backend}` violated its contract: {detail}")]
    ContractViolation { backend: String, detail: String },
    #[error("backend `{backend}` failed: {detail}")]
    Failed { backend: String, detail: String },
}

impl BackendError {
    pub fn failed(backend: &str, detail: impl Into<String>) -> Self {
        Self::Failed {
            backend: backend.to_owned(),
            detail: detail.into(),
        }
    }

    pub fn violation(backend: &str, detail: impl Into<String>) -> Self {
        Self::ContractViolation {
            backend: backend.to_owned(),
            detail: detail.into(),
        }
    }

    pub(crate) fn out_of_range(backend: &str, value: f64) -> Self {
        Self::violation(backend, format!("score {value} outside [0, 1]"))
    }
}

/// Where a frame came from; passed to backends alongside the pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameRef<'a> {
    pub gif_id: &'a str,
    pub index: usize,
    pub timestamp: f64,
}

/// Axis-aligned face box in original-frame pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaceBox {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

impl FaceBox {
    pub fn fits_within(&self, width: u32, height: u32) -> bool {
        self.width > 0
            && self.height > 0
            && self.x.checked_add(self.width).is_some_and(|r| r <= width)
            && self.y.checked_add(self.height).is_some_and(|b| b <= height)
    }
}

/// Raw per-label emotion scores as a backend reports them. Labels outside
/// the six basic emotions (e.g. `neutral`) are allowed here.
pub type RawEmotions = Vec<(String, f64)>;

pub trait TextSentimentBackend: Send + Sync {
    fn name(&self) -> &str;
    /// P(positive) for already-cleaned text.
    fn classify(&self, text: &str) -> Result<f64, BackendError>;
    fn concurrent_safe(&self) -> bool {
        true
    }
}

pub trait ImageSentimentBackend: Send + Sync {
    fn name(&self) -> &str;
    /// P(positive) for one RGB frame, already resized to the model input.
    fn score_frame(&self, frame: &Raster) -> Result<f64, BackendError>;
    fn concurrent_safe(&self) -> bool {
        true
    }
}

pub trait FaceBackend: Send + Sync {
    fn name(&self) -> &str;
    fn detect(&self, frame: FrameRef<'_>, image: &Raster) -> Result<Vec<FaceBox>, BackendError>;
    /// Emotion scores for the `face_index`-th detection of `frame`.
    fn emotions(
        &self,
        frame: FrameRef<'_>,
        face_index: usize,
        crop: &Raster,
    ) -> Result<RawEmotions, BackendError>;
    fn concurrent_safe(&self) -> bool {
        true
    }
}

pub trait OcrBackend: Send + Sync {
    fn name(&self) -> &str;
    /// Recognized text from a grayscale frame; empty when nothing is read.
    fn read_text(&self, frame: FrameRef<'_>, gray: &Raster) -> Result<String, BackendError>;
    fn concurrent_safe(&self) -> bool {
        true
    }
}

const POSITIVE_WORDS: [&str; 5] = ["good", "love", "happy", "great", "best"];
const NEGATIVE_WORDS: [&str; 5] = ["bad", "hate", "sad", "awful", "worst"];

/// Keyword classifier: 0.9 with only positive cue words, 0.1 with only
/// negative ones, 0.5 otherwise.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockText;

impl TextSentimentBackend for MockText {
    fn name(&self) -> &str {
        "mock"
    }

    fn classify(&self, text: &str) -> Result<f64, BackendError> {
        let pos = text.split_whitespace().any(|t| POSITIVE_WORDS.contains(&t));
        let neg = text.split_whitespace().any(|t| NEGATIVE_WORDS.contains(&t));
        Ok(match (pos, neg) {
            (true, false) => 0.9,
            (false, true) => 0.1,
            _ => 0.5,
        })
    }
}

/// Mean pixel intensity over all channels, scaled to `[0, 1]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockImage;

impl ImageSentimentBackend for MockImage {
    fn name(&self) -> &str {
        "mock"
    }

    fn score_frame(&self, frame: &Raster) -> Result<f64, BackendError> {
        if frame.channels() != 3 {
            return Err(BackendError::ChannelMismatch {
                expected: 3,
                actual: frame.channels(),
            });
        }
        if frame.is_empty() {
            return Err(BackendError::failed("mock", "empty frame"));
        }
        let sum: u64 = frame.data().iter().map(|&v| v as u64).sum();
        Ok(sum as f64 / (frame.data().len() as u64 * 255) as f64)
    }
}

/// Wildcard key matching any GIF in a script.
pub const ANY_GIF: &str = "*";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedFace {
    #[serde(rename = "box")]
    pub bbox: FaceBox,
    pub emotions: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FaceFrameScript {
    Faces(Vec<ScriptedFace>),
    Fail { error: String },
}

/// `gif_id` (or `"*"`) -> frame index -> what the detector sees.
pub type FaceScript = BTreeMap<String, BTreeMap<usize, FaceFrameScript>>;

/// Face backend that replays a fixed script. Frames missing from the
/// script have no faces.
#[derive(Debug, Clone, Default)]
pub struct ScriptedFaces {
    script: FaceScript,
}

impl ScriptedFaces {
    pub fn new(script: FaceScript) -> Self {
        Self { script }
    }

    fn frame(&self, frame: FrameRef<'_>) -> Option<&FaceFrameScript> {
        self.script
            .get(frame.gif_id)
            .or_else(|| self.script.get(ANY_GIF))
            .and_then(|frames| frames.get(&frame.index))
    }
}

impl FaceBackend for ScriptedFaces {
    fn name(&self) -> &str {
        "mock"
    }

    fn detect(&self, frame: FrameRef<'_>, _image: &Raster) -> Result<Vec<FaceBox>, BackendError> {
        match self.frame(frame) {
            None => Ok(Vec::new()),
            Some(FaceFrameScript::Faces(faces)) => Ok(faces.iter().map(|f| f.bbox).collect()),
            Some(FaceFrameScript::Fail { error }) => Err(BackendError::failed("mock", error.clone())),
        }
    }

    fn emotions(
        &self,
        frame: FrameRef<'_>,
        face_index: usize,
        _crop: &Raster,
    ) -> Result<RawEmotions, BackendError> {
        match self.frame(frame) {
            Some(FaceFrameScript::Faces(faces)) => faces
                .get(face_index)
                .map(|f| f.emotions.iter().map(|(k, v)| (k.clone(), *v)).collect())
                .ok_or_else(|| {
                    BackendError::failed("mock", format!("no scripted face {face_index}"))
                }),
            _ => Err(BackendError::failed(
                "mock",
                format!("no scripted faces for frame {}", frame.index),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OcrFrameScript {
    Text(String),
    Fail { error: String },
}

/// `gif_id` (or `"*"`) -> frame index -> recognized string.
pub type OcrScript = BTreeMap<String, BTreeMap<usize, OcrFrameScript>>;

/// OCR backend that replays a fixed script. Unscripted frames read as "".
#[derive(Debug, Clone, Default)]
pub struct ScriptedOcr {
    script: OcrScript,
}

impl ScriptedOcr {
    pub fn new(script: OcrScript) -> Self {
        Self { script }
    }

    /// Script for a single GIF given as a frame-ordered list of strings.
    pub fn from_frames<S: Into<String>>(gif_id: &str, texts: impl IntoIterator<Item = S>) -> Self {
        let frames = texts
            .into_iter()
            .enumerate()
            .map(|(i, t)| (i, OcrFrameScript::Text(t.into())))
            .collect();
        let mut script = BTreeMap::new();
        script.insert(gif_id.to_owned(), frames);
        Self { script }
    }
}

impl OcrBackend for ScriptedOcr {
    fn name(&self) -> &str {
        "mock"
    }

    fn read_text(&self, frame: FrameRef<'_>, _gray: &Raster) -> Result<String, BackendError> {
        let entry = self
            .script
            .get(frame.gif_id)
            .or_else(|| self.script.get(ANY_GIF))
            .and_then(|frames| frames.get(&frame.index));
        match entry {
            None => Ok(String::new()),
            Some(OcrFrameScript::Text(t)) => Ok(t.clone()),
            Some(OcrFrameScript::Fail { error }) => Err(BackendError::failed("mock", error.clone())),
        }
    }
}

/// Contract-checking wrapper placed around every backend the registry hands out.
#[derive(Debug, Clone)]
pub struct Validated<B>(pub B);

fn check_probability(backend: &str, p: f64) -> Result<f64, BackendError> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(BackendError::out_of_range(backend, p))
    }
}

impl<B: TextSentimentBackend> TextSentimentBackend for Validated<B> {
    fn name(&self) -> &str {
        self.0.name()
    }

    fn classify(&self, text: &str) -> Result<f64, BackendError> {
        check_probability(self.0.name(), self.0.classify(text)?)
    }

    fn concurrent_safe(&self) -> bool {
        self.0.concurrent_safe()
    }
}

impl<B: ImageSentimentBackend> ImageSentimentBackend for Validated<B> {
    fn name(&self) -> &str {
        self.0.name()
    }

    fn score_frame(&self, frame: &Raster) -> Result<f64, BackendError> {
        check_probability(self.0.name(), self.0.score_frame(frame)?)
    }

    fn concurrent_safe(&self) -> bool {
        self.0.concurrent_safe()
    }
}

impl<B: FaceBackend> FaceBackend for Validated<B> {
    fn name(&self) -> &str {
        self.0.name()
    }

    fn detect(&self, frame: FrameRef<'_>, image: &Raster) -> Result<Vec<FaceBox>, BackendError> {
        let boxes = self.0.detect(frame, image)?;
        if let Some(b) = boxes
            .iter()
            .find(|b| !b.fits_within(image.width(), image.height()))
        {
            return Err(BackendError::violation(
                self.0.name(),
                format!(
                    "face box {:?} outside {}x{} frame",
                    b,
                    image.width(),
                    image.height()
                ),
            ));
        }
        Ok(boxes)
    }

    fn emotions(
        &self,
        frame: FrameRef<'_>,
        face_index: usize,
        crop: &Raster,
    ) -> Result<RawEmotions, BackendError> {
        let raw = self.0.emotions(frame, face_index, crop)?;
        if let Some((label, v)) = raw.iter().find(|(_, v)| !(v.is_finite() && *v >= 0.0)) {
            return Err(BackendError::violation(
                self.0.name(),
                format!("emotion `{label}` has invalid score {v}"),
            ));
        }
        Ok(raw)
    }

    fn concurrent_safe(&self) -> bool {
        self.0.concurrent_safe()
    }
}

impl<B: OcrBackend> OcrBackend for Validated<B> {
    fn name(&self) -> &str {
        self.0.name()
    }

    fn read_text(&self, frame: FrameRef<'_>, gray: &Raster) -> Result<String, BackendError> {
        self.0.read_text(frame, gray)
    }

    fn concurrent_safe(&self) -> bool {
        self.0.concurrent_safe()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn at(index: usize) -> FrameRef<'static> {
        FrameRef {
            gif_id: "g",
            index,
            timestamp: index as f64 * 0.1,
        }
    }

    #[test]
    fn mock_text_rule() {
        let b = MockText;
        assert_eq!(b.classify("i love this").unwrap(), 0.9);
        assert_eq!(b.classify("worst day").unwrap(), 0.1);
        assert_eq!(b.classify("the sky").unwrap(), 0.5);
        assert_eq!(b.classify("love and hate").unwrap(), 0.5);
        // whole tokens only
        assert_eq!(b.classify("goodness").unwrap(), 0.5);
    }

    #[test]
    fn mock_image_rule() {
        let b = MockImage;
        assert_eq!(b.score_frame(&Raster::filled_rgb(48, 48, [255; 3])).unwrap(), 1.0);
        assert_eq!(b.score_frame(&Raster::filled_rgb(48, 48, [0; 3])).unwrap(), 0.0);
        let mut data = vec![255u8; 48 * 24 * 3];
        data.extend(vec![0u8; 48 * 24 * 3]);
        let half = Raster::rgb(48, 48, data).unwrap();
        assert_eq!(b.score_frame(&half).unwrap(), 0.5);
        let gray = Raster::gray(2, 2, vec![0; 4]).unwrap();
        let err = b.score_frame(&gray).unwrap_err();
        assert!(alloc::format!("{err}").contains("channel mismatch"));
    }

    #[test]
    fn scripted_faces_replay() {
        let mut frames = BTreeMap::new();
        let face = ScriptedFace {
            bbox: FaceBox { x: 0, y: 0, width: 20, height: 20 },
            emotions: [("happy".into(), 1.0)].into_iter().collect(),
        };
        frames.insert(1, FaceFrameScript::Faces(vec![face]));
        frames.insert(2, FaceFrameScript::Fail { error: "boom".into() });
        let mut script = BTreeMap::new();
        script.insert(ANY_GIF.into(), frames);
        let b = ScriptedFaces::new(script);
        let img = Raster::filled_rgb(32, 32, [0; 3]);
        assert!(b.detect(at(0), &img).unwrap().is_empty());
        assert_eq!(b.detect(at(1), &img).unwrap().len(), 1);
        assert!(b.detect(at(2), &img).is_err());
        assert_eq!(b.emotions(at(1), 0, &img).unwrap(), vec![("happy".into(), 1.0)]);
    }

    #[test]
    fn scripted_faces_parse_from_json_shape() {
        // the same structure the std side reads from disk
        let script: FaceScript = [(
            "g".into(),
            [(0usize, FaceFrameScript::Fail { error: "x".into() })].into_iter().collect(),
        )]
        .into_iter()
        .collect();
        assert!(ScriptedFaces::new(script).detect(at(0), &Raster::filled_rgb(1, 1, [0; 3])).is_err());
    }

    #[test]
    fn scripted_ocr_defaults_to_empty() {
        let b = ScriptedOcr::from_frames("g", ["OH NO"]);
        let img = Raster::gray(1, 1, vec![0]).unwrap();
        assert_eq!(b.read_text(at(0), &img).unwrap(), "OH NO");
        assert_eq!(b.read_text(at(5), &img).unwrap(), "");
    }

    struct Broken;
    impl TextSentimentBackend for Broken {
        fn name(&self) -> &str {
            "broken"
        }
        fn classify(&self, _: &str) -> Result<f64, BackendError> {
            Ok(1.5)
        }
    }
    impl FaceBackend for Broken {
        fn name(&self) -> &str {
            "broken"
        }
        fn detect(&self, _: FrameRef<'_>, _: &Raster) -> Result<Vec<FaceBox>, BackendError> {
            Ok(vec![FaceBox { x: 30, y: 0, width: 10, height: 10 }])
        }
        fn emotions(&self, _: FrameRef<'_>, _: usize, _: &Raster) -> Result<RawEmotions, BackendError> {
            Ok(vec![("sad".into(), f64::NAN)])
        }
    }

    #[test]
    fn validation_raises_on_contract_violations() {
        let v = Validated(Broken);
        assert!(matches!(
            TextSentimentBackend::classify(&v, "x"),
            Err(BackendError::ContractViolation { .. })
        ));
        let img = Raster::filled_rgb(32, 32, [0; 3]);
        assert!(v.detect(at(0), &img).is_err());
        assert!(v.emotions(at(0), 0, &img).is_err());
    }
}
