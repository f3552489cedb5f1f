//! Frame-level image sentiment averaged over a GIF.

use serde::{Deserialize, Serialize};

use crate::backends::ImageSentimentBackend;
use crate::frames::FrameSet;
use crate::raster::{resize_for_model, MODEL_INPUT_SIDE};
use crate::text::{ConfigError, Optimizer};
use crate::{Modality, ModuleScore};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageScoring {
    pub score: ModuleScore,
    pub skipped_frames: usize,
}

/// Mean backend score over every frame, each resized to the model input.
///
/// A frame the backend fails on is skipped and counted; if every frame
/// fails, the module is unavailable. `evidence + skipped == frames.len()`.
pub fn score_gif_images(frames: &FrameSet, backend: &dyn ImageSentimentBackend) -> ImageScoring {
    let mut scores = alloc::vec::Vec::with_capacity(frames.len());
    let mut skipped = 0;
    for frame in frames.frames() {
        let result = resize_for_model(&frame.image, MODEL_INPUT_SIDE)
            .map_err(|e| alloc::format!("{e}"))
            .and_then(|input| backend.score_frame(&input).map_err(|e| alloc::format!("{e}")));
        match result {
            Ok(p) if (0.0..=1.0).contains(&p) => scores.push(p),
            Ok(p) => {
                log::warn!("{}: frame {} score {p} outside [0, 1], skipped", frames.gif_id(), frame.index);
                skipped += 1;
            }
            Err(e) => {
                log::warn!("{}: frame {} skipped: {e}", frames.gif_id(), frame.index);
                skipped += 1;
            }
        }
    }
    let score = mean(&mut scores)
        .and_then(|m| ModuleScore::available(Modality::Image, m, scores.len()))
        .unwrap_or(ModuleScore::unavailable(Modality::Image));
    ImageScoring {
        score,
        skipped_frames: skipped,
    }
}

/// Order-independent arithmetic mean, clamped to the sample range.
///
/// Values are summed in sorted order so any permutation of the input gives
/// a bitwise-identical result.
pub(crate) fn mean(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let sum: f64 = values.iter().sum();
    let lo = values[0];
    let hi = values[values.len() - 1];
    Some((sum / values.len() as f64).clamp(lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageLoss {
    CategoricalCrossEntropy,
}

/// Transfer-learning setup for the frame classifier: frozen convolutional
/// base, global-average-pooling + softmax head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImageFineTuneConfig {
    pub freeze_backbone: bool,
    pub loss: ImageLoss,
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub input_side: u32,
    pub validation_split: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ImageFineTuneConfig {
    fn default() -> Self {
        Self {
            freeze_backbone: true,
            loss: ImageLoss::CategoricalCrossEntropy,
            optimizer: Optimizer::Adam,
            learning_rate: 1e-4,
            input_side: MODEL_INPUT_SIDE,
            validation_split: 0.2,
            epochs: 3,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl ImageFineTuneConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.validation_split > 0.0 && self.validation_split < 1.0) {
            return Err(ConfigError {
                field: "validation_split",
            });
        }
        if self.epochs == 0 {
            return Err(ConfigError { field: "epochs" });
        }
        if self.batch_size == 0 {
            return Err(ConfigError { field: "batch_size" });
        }
        if self.input_side == 0 {
            return Err(ConfigError { field: "input_side" });
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ConfigError {
                field: "learning_rate",
            });
        }
        Ok(())
    }
}
