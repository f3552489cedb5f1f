//! Perceived vs induced sentiment statistics and per-attribute accuracy.
//!
//! *Perceived* sentiment is what the text classifier reads in the root
//! tweet; *induced* sentiment is the dataset label of the reaction GIF sent
//! in reply.

use alloc::collections::BTreeMap;
use alloc::string::String;

use serde::Serialize;
use thiserror::Error;

use crate::backends::TextSentimentBackend;
use crate::corpus::CorpusStats;
use crate::fusion::{AttributeClass, FusedSentiment, Sentiment};
use crate::text::{classify_text, preprocess_tweet, TextError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalyticsError {
    #[error("empty corpus")]
    Empty,
    #[error("no truth label for gif `{0}`")]
    MissingTruth(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SentimentPair {
    pub record_id: String,
    pub perceived: Sentiment,
    pub induced: Sentiment,
}

/// Perceived sentiment of a tweet: positive iff the cleaned text scores
/// at least 0.5. Fails with [`TextError::NoClassifiableText`] when cleaning
/// leaves nothing; callers count those as exclusions.
pub fn perceived_sentiment(
    tweet_text: &str,
    backend: &dyn TextSentimentBackend,
) -> Result<Sentiment, TextError> {
    let p = classify_text(&preprocess_tweet(tweet_text), backend)?;
    Ok(Sentiment::from_probability(p))
}

/// Counts over (perceived, induced).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct CombinationMatrix {
    pub perceived_pos_induced_pos: usize,
    pub perceived_pos_induced_neg: usize,
    pub perceived_neg_induced_pos: usize,
    pub perceived_neg_induced_neg: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AgreementRatio {
    Finite(f64),
    /// No opposing pairs at all.
    Infinite,
}

impl AgreementRatio {
    pub fn value(self) -> f64 {
        match self {
            AgreementRatio::Finite(v) => v,
            AgreementRatio::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, AgreementRatio::Infinite)
    }
}

impl CombinationMatrix {
    pub fn add(&mut self, perceived: Sentiment, induced: Sentiment) {
        use Sentiment::*;
        match (perceived, induced) {
            (Positive, Positive) => self.perceived_pos_induced_pos += 1,
            (Positive, Negative) => self.perceived_pos_induced_neg += 1,
            (Negative, Positive) => self.perceived_neg_induced_pos += 1,
            (Negative, Negative) => self.perceived_neg_induced_neg += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.same() + self.opposing()
    }

    pub fn same(&self) -> usize {
        self.perceived_pos_induced_pos + self.perceived_neg_induced_neg
    }

    pub fn opposing(&self) -> usize {
        self.perceived_pos_induced_neg + self.perceived_neg_induced_pos
    }

    /// (same-sentiment pairs) / (opposing-sentiment pairs).
    pub fn same_to_opposing_ratio(&self) -> AgreementRatio {
        match self.opposing() {
            0 => AgreementRatio::Infinite,
            o => AgreementRatio::Finite(self.same() as f64 / o as f64),
        }
    }
}

pub fn combination_matrix(pairs: &[SentimentPair]) -> Result<CombinationMatrix, AnalyticsError> {
    if pairs.is_empty() {
        return Err(AnalyticsError::Empty);
    }
    let mut m = CombinationMatrix::default();
    for p in pairs {
        m.add(p.perceived, p.induced);
    }
    Ok(m)
}

/// Shares of positive/negative labels on each side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SentimentDistribution {
    pub perceived_positive: f64,
    pub perceived_negative: f64,
    pub induced_positive: f64,
    pub induced_negative: f64,
}

impl SentimentDistribution {
    pub fn from_matrix(m: &CombinationMatrix) -> Option<Self> {
        let n = m.total();
        if n == 0 {
            return None;
        }
        let n = n as f64;
        let pp = (m.perceived_pos_induced_pos + m.perceived_pos_induced_neg) as f64;
        let ip = (m.perceived_pos_induced_pos + m.perceived_neg_induced_pos) as f64;
        Some(Self {
            perceived_positive: pp / n,
            perceived_negative: 1.0 - pp / n,
            induced_positive: ip / n,
            induced_negative: 1.0 - ip / n,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellAccuracy {
    pub count: usize,
    pub correct: usize,
    pub fraction: f64,
    /// `None` for an empty cell.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributeAccuracy {
    pub cells: BTreeMap<AttributeClass, CellAccuracy>,
    pub total: usize,
    pub correct: usize,
    pub overall_accuracy: f64,
}

/// Fraction of GIFs and fused-label accuracy per attribute cell.
pub fn attribute_accuracy(
    results: &[FusedSentiment],
    truth: &BTreeMap<String, Sentiment>,
) -> Result<AttributeAccuracy, AnalyticsError> {
    if results.is_empty() {
        return Err(AnalyticsError::Empty);
    }
    let mut tally: BTreeMap<AttributeClass, (usize, usize)> =
        AttributeClass::ALL.iter().map(|&c| (c, (0, 0))).collect();
    for r in results {
        let expected = truth
            .get(&r.gif_id)
            .ok_or_else(|| AnalyticsError::MissingTruth(r.gif_id.clone()))?;
        let cell = tally.entry(r.attribute_class).or_default();
        cell.0 += 1;
        if r.label == *expected {
            cell.1 += 1;
        }
    }
    let total = results.len();
    let correct = tally.values().map(|c| c.1).sum();
    let cells = tally
        .into_iter()
        .map(|(class, (count, correct))| {
            let cell = CellAccuracy {
                count,
                correct,
                fraction: count as f64 / total as f64,
                accuracy: (count > 0).then(|| correct as f64 / count as f64),
            };
            (class, cell)
        })
        .collect();
    Ok(AttributeAccuracy {
        cells,
        total,
        correct,
        overall_accuracy: correct as f64 / total as f64,
    })
}

/// Everything the analyze stage reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub sentiment_distribution: Option<SentimentDistribution>,
    pub combination_matrix: CombinationMatrix,
    /// `None` when the ratio is infinite (see `ratio_infinite`).
    pub same_to_opposing_ratio: Option<f64>,
    pub ratio_infinite: bool,
    pub attribute_accuracy: Option<AttributeAccuracy>,
    pub corpus_stats: Option<CorpusStats>,
    /// Reason -> number of records or GIFs left out of some statistic.
    pub exclusions: BTreeMap<String, usize>,
}

impl AnalysisReport {
    pub fn new(
        matrix: CombinationMatrix,
        attribute_accuracy: Option<AttributeAccuracy>,
        corpus_stats: Option<CorpusStats>,
        exclusions: BTreeMap<String, usize>,
    ) -> Self {
        let ratio = matrix.same_to_opposing_ratio();
        Self {
            sentiment_distribution: SentimentDistribution::from_matrix(&matrix),
            combination_matrix: matrix,
            same_to_opposing_ratio: match ratio {
                AgreementRatio::Finite(v) => Some(v),
                AgreementRatio::Infinite => None,
            },
            ratio_infinite: ratio.is_infinite(),
            attribute_accuracy,
            corpus_stats,
            exclusions,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::MockText;
    use crate::fusion::fuse;
    use crate::{Modality, ModuleScore};
    use alloc::format;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn pair(i: usize, p: u8, d: u8) -> SentimentPair {
        SentimentPair {
            record_id: format!("r{i}"),
            perceived: Sentiment::from_label(p).unwrap(),
            induced: Sentiment::from_label(d).unwrap(),
        }
    }

    fn pairs_from(cells: &[((u8, u8), usize)]) -> Vec<SentimentPair> {
        let mut out = Vec::new();
        for &((p, d), n) in cells {
            for _ in 0..n {
                out.push(pair(out.len(), p, d));
            }
        }
        out
    }

    #[test]
    fn perceived_examples() {
        assert_eq!(perceived_sentiment("i love mondays", &MockText), Ok(Sentiment::Positive));
        assert_eq!(perceived_sentiment("hate this", &MockText), Ok(Sentiment::Negative));
        assert_eq!(perceived_sentiment("the sky", &MockText), Ok(Sentiment::Positive));
        assert_eq!(
            perceived_sentiment("@someone https://t.co/x", &MockText),
            Err(TextError::NoClassifiableText)
        );
    }

    #[test]
    fn ratio_on_hand_counted_fixture() {
        let pairs = pairs_from(&[((1, 1), 3), ((0, 0), 3), ((1, 0), 2), ((0, 1), 3)]);
        let m = combination_matrix(&pairs).unwrap();
        assert_eq!(m.same(), 6);
        assert_eq!(m.opposing(), 5);
        assert_eq!(m.same_to_opposing_ratio(), AgreementRatio::Finite(1.2));
    }

    #[test]
    fn all_agreeing_is_infinite() {
        let m = combination_matrix(&pairs_from(&[((1, 1), 4)])).unwrap();
        assert!(m.same_to_opposing_ratio().is_infinite());
        let r = AnalysisReport::new(m, None, None, BTreeMap::new());
        assert!(r.ratio_infinite && r.same_to_opposing_ratio.is_none());
        assert_eq!(combination_matrix(&[]), Err(AnalyticsError::Empty));
    }

    fn fused(gif: &str, image: f64, face: bool, ocr: bool) -> FusedSentiment {
        let opt = |m, on: bool| if on { ModuleScore::available(m, image, 1).unwrap() } else { ModuleScore::unavailable(m) };
        fuse(gif, ModuleScore::available(Modality::Image, image, 1).unwrap(), opt(Modality::Face, face), opt(Modality::Ocr, ocr)).unwrap()
    }

    #[test]
    fn perfect_predictor_scores_one_everywhere() {
        let results: Vec<_> = (0..6)
            .map(|i| fused(&format!("g{i}"), if i % 2 == 0 { 0.9 } else { 0.1 }, i % 3 == 0, i < 3))
            .collect();
        let truth = results.iter().map(|r| (r.gif_id.clone(), r.label)).collect();
        let acc = attribute_accuracy(&results, &truth).unwrap();
        assert_eq!(acc.overall_accuracy, 1.0);
        for cell in acc.cells.values().filter(|c| c.count > 0) {
            assert_eq!(cell.accuracy, Some(1.0));
        }
    }

    #[test]
    fn missing_truth_names_gif() {
        let results = [fused("gx", 0.9, false, false)];
        assert_eq!(
            attribute_accuracy(&results, &BTreeMap::new()),
            Err(AnalyticsError::MissingTruth("gx".into()))
        );
    }

    fn sentiment() -> impl Strategy<Value = Sentiment> {
        prop_oneof![Just(Sentiment::Negative), Just(Sentiment::Positive)]
    }

    proptest! {
        #[test]
        fn flipping_both_sides_keeps_ratio(pairs in prop::collection::vec((sentiment(), sentiment()), 1..50)) {
            let ps: Vec<_> = pairs.iter().enumerate().map(|(i, &(p, d))| SentimentPair { record_id: format!("{i}"), perceived: p, induced: d }).collect();
            let flipped: Vec<_> = ps.iter().map(|p| SentimentPair { perceived: p.perceived.flipped(), induced: p.induced.flipped(), ..p.clone() }).collect();
            let a = combination_matrix(&ps).unwrap();
            let b = combination_matrix(&flipped).unwrap();
            prop_assert_eq!(a.total(), ps.len());
            prop_assert_eq!(a.same_to_opposing_ratio(), b.same_to_opposing_ratio());
        }

        #[test]
        fn cell_fractions_sum_to_one(spec in prop::collection::vec((0.0f64..=1.0, any::<bool>(), any::<bool>(), sentiment()), 1..40)) {
            let results: Vec<_> = spec.iter().enumerate().map(|(i, &(p, f, o, _))| fused(&format!("g{i}"), p, f, o)).collect();
            let truth = spec.iter().enumerate().map(|(i, s)| (format!("g{i}"), s.3)).collect();
            let acc = attribute_accuracy(&results, &truth).unwrap();
            let sum: f64 = acc.cells.values().map(|c| c.fraction).sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9);
            for c in acc.cells.values() {
                if let Some(a) = c.accuracy { prop_assert!((0.0..=1.0).contains(&a)); }
            }
        }
    }
}
