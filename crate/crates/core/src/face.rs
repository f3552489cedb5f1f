//! Facial emotion scoring.
//!
//! Each detected face gets a six-emotion distribution; its polarity is the
//! probability mass on {happy, surprise}. The GIF's face score is the flat
//! mean of that mass over every face in every sampled frame.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{FaceBackend, FaceBox, FrameRef};
use crate::frames::FrameSet;
use crate::image_sentiment::mean;
use crate::{Modality, ModuleScore};

/// Smallest face box side (original-resolution pixels) that gets classified.
pub const DEFAULT_MIN_FACE_SIZE: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Happy,
    Surprise,
    Sad,
    Angry,
    Fear,
    Disgust,
}

impl Emotion {
    pub const ALL: [Emotion; 6] = [
        Emotion::Happy,
        Emotion::Surprise,
        Emotion::Sad,
        Emotion::Angry,
        Emotion::Fear,
        Emotion::Disgust,
    ];

    pub fn is_positive(self) -> bool {
        matches!(self, Emotion::Happy | Emotion::Surprise)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Emotion::Happy => "happy",
            Emotion::Surprise => "surprise",
            Emotion::Sad => "sad",
            Emotion::Angry => "angry",
            Emotion::Fear => "fear",
            Emotion::Disgust => "disgust",
        }
    }

    /// Accepts the usual spellings emotion models emit (`surprised`,
    /// `Fearful`, `anger`, ...). Anything else, including `neutral`, is `None`.
    pub fn parse(label: &str) -> Option<Emotion> {
        let l = label.trim().to_ascii_lowercase();
        Some(match l.as_str() {
            "happy" | "happiness" | "joy" => Emotion::Happy,
            "surprise" | "surprised" => Emotion::Surprise,
            "sad" | "sadness" => Emotion::Sad,
            "angry" | "anger" => Emotion::Angry,
            "fear" | "fearful" | "scared" => Emotion::Fear,
            "disgust" | "disgusted" => Emotion::Disgust,
            _ => return None,
        })
    }

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmotionError {
    #[error("no emotion signal")]
    NoEmotionSignal,
    #[error("emotion `{label}` has invalid score {value}")]
    InvalidScore { label: String, value: f64 },
}

/// Probabilities over the six basic emotions, summing to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmotionDistribution([f64; 6]);

impl EmotionDistribution {
    pub fn get(&self, e: Emotion) -> f64 {
        self.0[e.slot()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Emotion, f64)> + '_ {
        Emotion::ALL.iter().map(|&e| (e, self.get(e)))
    }

    /// P(happy) + P(surprise).
    pub fn positive_mass(&self) -> f64 {
        (self.get(Emotion::Happy) + self.get(Emotion::Surprise)).clamp(0.0, 1.0)
    }

    pub fn negative_mass(&self) -> f64 {
        1.0 - self.positive_mass()
    }
}

impl Serialize for EmotionDistribution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut m = s.serialize_map(Some(6))?;
        for (e, p) in self.iter() {
            m.serialize_entry(e.as_str(), &p)?;
        }
        m.end()
    }
}

/// Keeps the six basic emotions from a backend's raw scores (extra labels
/// such as `neutral` are dropped) and rescales them to sum to one.
pub fn normalize_emotions<S: AsRef<str>>(
    raw: &[(S, f64)],
) -> Result<EmotionDistribution, EmotionError> {
    let mut mass = [0.0f64; 6];
    for (label, value) in raw {
        let label = label.as_ref();
        if !(value.is_finite() && *value >= 0.0) {
            return Err(EmotionError::InvalidScore {
                label: String::from(label),
                value: *value,
            });
        }
        if let Some(e) = Emotion::parse(label) {
            mass[e.slot()] += value;
        }
    }
    let total: f64 = mass.iter().sum();
    if !total.is_finite() || total <= 0.0 {
        return Err(EmotionError::NoEmotionSignal);
    }
    for m in &mut mass {
        *m /= total;
    }
    Ok(EmotionDistribution(mass))
}

/// Free-function form of [`EmotionDistribution::positive_mass`].
pub fn positive_mass(dist: &EmotionDistribution) -> f64 {
    dist.positive_mass()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceOptions {
    pub min_face_size: u32,
}

impl Default for FaceOptions {
    fn default() -> Self {
        Self {
            min_face_size: DEFAULT_MIN_FACE_SIZE,
        }
    }
}

/// One classified face, kept for the debug dump.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FaceObservation {
    pub frame_index: usize,
    #[serde(rename = "box")]
    pub bbox: FaceBox,
    pub emotion_distribution: EmotionDistribution,
    pub positive_mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaceScoring {
    pub score: ModuleScore,
    pub observations: Vec<FaceObservation>,
    pub skipped_frames: usize,
    pub discarded_faces: usize,
}

/// Face-module score for a GIF.
///
/// Crops come from the original-resolution frame. Boxes smaller than
/// `min_face_size` on either side are discarded, as are faces whose
/// classification fails or carries no emotion signal. A frame whose
/// detection fails is skipped. No faces at all makes the module unavailable.
pub fn score_gif_faces(
    frames: &FrameSet,
    backend: &dyn FaceBackend,
    options: FaceOptions,
) -> FaceScoring {
    let mut observations = Vec::new();
    let mut skipped_frames = 0;
    let mut discarded_faces = 0;
    for frame in frames.frames() {
        let at = FrameRef {
            gif_id: frames.gif_id(),
            index: frame.index,
            timestamp: frame.timestamp,
        };
        let boxes = match backend.detect(at, &frame.image) {
            Ok(b) => b,
            Err(e) => {
                log::warn!("{}: face detection failed on frame {}: {e}", frames.gif_id(), frame.index);
                skipped_frames += 1;
                continue;
            }
        };
        for (face_index, bbox) in boxes.into_iter().enumerate() {
            if bbox.width < options.min_face_size || bbox.height < options.min_face_size {
                discarded_faces += 1;
                continue;
            }
            let crop = match frame.image.crop(bbox.x, bbox.y, bbox.width, bbox.height) {
                Ok(c) => c,
                Err(e) => {
                    log::warn!("{}: frame {} face {face_index}: {e}", frames.gif_id(), frame.index);
                    discarded_faces += 1;
                    continue;
                }
            };
            let dist = backend
                .emotions(at, face_index, &crop)
                .map_err(|e| alloc::format!("{e}"))
                .and_then(|raw| normalize_emotions(&raw).map_err(|e| alloc::format!("{e}")));
            match dist {
                Ok(d) => observations.push(FaceObservation {
                    frame_index: frame.index,
                    bbox,
                    emotion_distribution: d,
                    positive_mass: d.positive_mass(),
                }),
                Err(e) => {
                    log::warn!("{}: frame {} face {face_index} dropped: {e}", frames.gif_id(), frame.index);
                    discarded_faces += 1;
                }
            }
        }
    }
    let mut masses: Vec<f64> = observations.iter().map(|o| o.positive_mass).collect();
    let score = mean(&mut masses)
        .and_then(|m| ModuleScore::available(Modality::Face, m, observations.len()))
        .unwrap_or(ModuleScore::unavailable(Modality::Face));
    FaceScoring {
        score,
        observations,
        skipped_frames,
        discarded_faces,
    }
}
