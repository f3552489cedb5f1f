//! Late fusion of the image, face and OCR module scores.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image_sentiment::mean;
use crate::{Modality, ModuleScore};

/// Fused scores at or above this are positive. A tie is positive.
pub const POSITIVE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sentiment {
    Negative,
    Positive,
}

impl Sentiment {
    /// Thresholds a probability of positive; exactly 0.5 is positive.
    pub fn from_probability(p: f64) -> Self {
        if p >= POSITIVE_THRESHOLD {
            Sentiment::Positive
        } else {
            Sentiment::Negative
        }
    }

    pub fn from_label(label: u8) -> Option<Self> {
        match label {
            0 => Some(Sentiment::Negative),
            1 => Some(Sentiment::Positive),
            _ => None,
        }
    }

    pub fn label(self) -> u8 {
        match self {
            Sentiment::Negative => 0,
            Sentiment::Positive => 1,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Sentiment::Negative => Sentiment::Positive,
            Sentiment::Positive => Sentiment::Negative,
        }
    }
}

impl Serialize for Sentiment {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.label())
    }
}

impl<'de> Deserialize<'de> for Sentiment {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = u8::deserialize(d)?;
        Sentiment::from_label(v)
            .ok_or_else(|| serde::de::Error::custom(alloc::format!("label must be 0 or 1, got {v}")))
    }
}

/// Which optional modalities a GIF had.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AttributeClass {
    #[serde(rename = "FaceYes_OcrYes")]
    FaceYesOcrYes,
    #[serde(rename = "FaceYes_OcrNo")]
    FaceYesOcrNo,
    #[serde(rename = "FaceNo_OcrYes")]
    FaceNoOcrYes,
    #[serde(rename = "FaceNo_OcrNo")]
    FaceNoOcrNo,
}

impl AttributeClass {
    pub const ALL: [AttributeClass; 4] = [
        AttributeClass::FaceYesOcrYes,
        AttributeClass::FaceYesOcrNo,
        AttributeClass::FaceNoOcrYes,
        AttributeClass::FaceNoOcrNo,
    ];

    pub fn from_flags(face: bool, ocr: bool) -> Self {
        match (face, ocr) {
            (true, true) => AttributeClass::FaceYesOcrYes,
            (true, false) => AttributeClass::FaceYesOcrNo,
            (false, true) => AttributeClass::FaceNoOcrYes,
            (false, false) => AttributeClass::FaceNoOcrNo,
        }
    }

    pub fn has_face(self) -> bool {
        matches!(self, AttributeClass::FaceYesOcrYes | AttributeClass::FaceYesOcrNo)
    }

    pub fn has_ocr(self) -> bool {
        matches!(self, AttributeClass::FaceYesOcrYes | AttributeClass::FaceNoOcrYes)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AttributeClass::FaceYesOcrYes => "FaceYes_OcrYes",
            AttributeClass::FaceYesOcrNo => "FaceYes_OcrNo",
            AttributeClass::FaceNoOcrYes => "FaceNo_OcrYes",
            AttributeClass::FaceNoOcrNo => "FaceNo_OcrNo",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        AttributeClass::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for AttributeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FusionError {
    #[error("no scorable modality")]
    NoScorableModality,
    #[error("{slot} slot holds a {actual} score")]
    WrongModule { slot: Modality, actual: Modality },
    #[error("empty input")]
    Empty,
}

/// Per-module breakdown. The text slot is always unavailable for GIFs:
/// tweet text feeds the perceived-sentiment analytics, not fusion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModuleScores {
    pub image: ModuleScore,
    pub face: ModuleScore,
    pub ocr: ModuleScore,
    pub text: ModuleScore,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedSentiment {
    pub gif_id: String,
    pub fused_score: f64,
    pub label: Sentiment,
    pub modules: ModuleScores,
    pub attribute_class: AttributeClass,
}

/// Mean of the available scores; `None` when nothing is available.
/// Independent of argument order and bounded by the min and max input.
pub fn fused_mean(scores: &[ModuleScore]) -> Option<f64> {
    let mut available: Vec<f64> = scores.iter().filter_map(ModuleScore::score).collect();
    mean(&mut available)
}

/// Averages whichever of the three modules are available.
///
/// The image module must be available; face and OCR availability decide
/// the attribute class and are otherwise simply left out of the mean (no
/// neutral imputation).
pub fn fuse(
    gif_id: impl Into<String>,
    image: ModuleScore,
    face: ModuleScore,
    ocr: ModuleScore,
) -> Result<FusedSentiment, FusionError> {
    for (slot, score) in [(Modality::Image, &image), (Modality::Face, &face), (Modality::Ocr, &ocr)] {
        if score.module() != slot {
            return Err(FusionError::WrongModule {
                slot,
                actual: score.module(),
            });
        }
    }
    if !image.is_available() {
        return Err(FusionError::NoScorableModality);
    }
    let fused_score = fused_mean(&[image, face, ocr]).ok_or(FusionError::NoScorableModality)?;
    Ok(FusedSentiment {
        gif_id: gif_id.into(),
        fused_score,
        label: Sentiment::from_probability(fused_score),
        attribute_class: AttributeClass::from_flags(face.is_available(), ocr.is_available()),
        modules: ModuleScores {
            image,
            face,
            ocr,
            text: ModuleScore::unavailable(Modality::Text),
        },
    })
}

/// Share of results in each attribute cell; all four cells are present.
pub fn attribute_partition(
    results: &[FusedSentiment],
) -> Result<BTreeMap<AttributeClass, f64>, FusionError> {
    if results.is_empty() {
        return Err(FusionError::Empty);
    }
    let mut counts: BTreeMap<AttributeClass, usize> =
        AttributeClass::ALL.iter().map(|&c| (c, 0)).collect();
    for r in results {
        *counts.entry(r.attribute_class).or_default() += 1;
    }
    let n = results.len() as f64;
    Ok(counts.into_iter().map(|(c, k)| (c, k as f64 / n)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn s(m: Modality, p: Option<f64>) -> ModuleScore {
        match p {
            Some(p) => ModuleScore::available(m, p, 1).unwrap(),
            None => ModuleScore::unavailable(m),
        }
    }

    fn fuse3(i: Option<f64>, f: Option<f64>, o: Option<f64>) -> Result<FusedSentiment, FusionError> {
        fuse("g", s(Modality::Image, i), s(Modality::Face, f), s(Modality::Ocr, o))
    }

    #[test]
    fn fuse_examples() {
        let r = fuse3(Some(0.9), Some(0.8), Some(0.7)).unwrap();
        assert!((r.fused_score - 0.8).abs() < 1e-12);
        assert_eq!((r.label, r.attribute_class), (Sentiment::Positive, AttributeClass::FaceYesOcrYes));

        let r = fuse3(Some(0.2), None, None).unwrap();
        assert_eq!(r.fused_score, 0.2);
        assert_eq!((r.label, r.attribute_class), (Sentiment::Negative, AttributeClass::FaceNoOcrNo));

        let r = fuse3(Some(0.4), Some(0.6), None).unwrap();
        assert_eq!(r.fused_score, 0.5);
        assert_eq!((r.label, r.attribute_class), (Sentiment::Positive, AttributeClass::FaceYesOcrNo));
        assert!(!r.modules.text.is_available());
    }

    #[test]
    fn image_is_required() {
        assert_eq!(fuse3(None, Some(0.9), Some(0.9)), Err(FusionError::NoScorableModality));
        let swapped = fuse("g", s(Modality::Face, Some(0.1)), s(Modality::Face, None), s(Modality::Ocr, None));
        assert!(matches!(swapped, Err(FusionError::WrongModule { .. })));
    }

    fn fused_with_class(c: AttributeClass) -> FusedSentiment {
        let f = if c.has_face() { Some(0.5) } else { None };
        let o = if c.has_ocr() { Some(0.5) } else { None };
        fuse3(Some(0.5), f, o).unwrap()
    }

    #[test]
    fn partition_examples() {
        let one_each: Vec<_> = AttributeClass::ALL.iter().map(|&c| fused_with_class(c)).collect();
        assert!(attribute_partition(&one_each).unwrap().values().all(|&f| f == 0.25));

        let mut ten = Vec::new();
        for (c, k) in AttributeClass::ALL.iter().zip([5, 3, 1, 1]) {
            ten.extend((0..k).map(|_| fused_with_class(*c)));
        }
        let p = attribute_partition(&ten).unwrap();
        let got: Vec<f64> = AttributeClass::ALL.iter().map(|c| p[c]).collect();
        assert_eq!(got, vec![0.5, 0.3, 0.1, 0.1]);

        assert_eq!(attribute_partition(&[]), Err(FusionError::Empty));
    }

    #[test]
    fn attribute_class_names_round_trip() {
        for c in AttributeClass::ALL {
            assert_eq!(AttributeClass::parse(c.as_str()), Some(c));
        }
    }

    proptest! {
        #[test]
        fn unavailable_modules_are_ignored(i in 0.0f64..=1.0, f in 0.0f64..=1.0, o in 0.0f64..=1.0) {
            let without_face = fuse3(Some(i), None, Some(o)).unwrap();
            let pair = fused_mean(&[s(Modality::Image, Some(i)), s(Modality::Ocr, Some(o))]).unwrap();
            prop_assert_eq!(without_face.fused_score.to_bits(), pair.to_bits());
            let all = fuse3(Some(i), Some(f), Some(o)).unwrap();
            prop_assert!(all.fused_score >= i.min(f).min(o) && all.fused_score <= i.max(f).max(o));
            prop_assert_eq!(all.label == Sentiment::Positive, all.fused_score >= 0.5);
        }
    }
}
