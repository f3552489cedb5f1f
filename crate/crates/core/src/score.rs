use core::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Image,
    Face,
    Ocr,
    Text,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::Image => "image",
            Modality::Face => "face",
            Modality::Ocr => "ocr",
            Modality::Text => "text",
        })
    }
}

/// One module's probability of positive sentiment for a GIF.
///
/// `evidence_count` is what contributed: frames for the image module, faces
/// for the face module, characters of cleaned caption for OCR. An
/// unavailable score carries no probability at all.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModuleScore {
    module: Modality,
    score: Option<f64>,
    evidence_count: usize,
}

impl ModuleScore {
    /// `None` unless `score` is within `[0, 1]` and `evidence_count >= 1`.
    pub fn available(module: Modality, score: f64, evidence_count: usize) -> Option<Self> {
        ((0.0..=1.0).contains(&score) && evidence_count >= 1).then_some(Self {
            module,
            score: Some(score),
            evidence_count,
        })
    }

    pub fn unavailable(module: Modality) -> Self {
        Self {
            module,
            score: None,
            evidence_count: 0,
        }
    }

    pub fn module(&self) -> Modality {
        self.module
    }

    pub fn score(&self) -> Option<f64> {
        self.score
    }

    pub fn is_available(&self) -> bool {
        self.score.is_some()
    }

    pub fn evidence_count(&self) -> usize {
        self.evidence_count
    }
}
