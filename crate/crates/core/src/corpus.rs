//! Corpus records and the counts derived from them.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fusion::Sentiment;

/// One tweet paired with the reaction GIF someone replied with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub record_id: String,
    pub tweet_id: String,
    pub tweet_text: String,
    pub gif_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media_path: Option<String>,
    /// Dataset label of the reaction GIF: the sentiment induced in the replier.
    pub induced_label: Sentiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reaction_category: Option<String>,
    /// Why media could not be resolved, when it could not.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media_missing: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorpusError {
    #[error("empty corpus")]
    Empty,
    #[error("duplicate record_id `{0}`")]
    DuplicateRecordId(String),
}

/// Loaded corpus plus its tweet/GIF counts. Read-only after construction.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorpusIndex {
    records: Vec<TweetRecord>,
    distinct_tweet_count: usize,
    unique_gif_count: usize,
    reactions_per_tweet: BTreeMap<String, usize>,
}

impl CorpusIndex {
    pub fn new(records: Vec<TweetRecord>) -> Result<Self, CorpusError> {
        let mut ids = BTreeSet::new();
        for r in &records {
            if !ids.insert(r.record_id.as_str()) {
                return Err(CorpusError::DuplicateRecordId(r.record_id.clone()));
            }
        }
        let mut reactions_per_tweet = BTreeMap::new();
        let mut gifs = BTreeSet::new();
        for r in &records {
            *reactions_per_tweet.entry(r.tweet_id.clone()).or_insert(0) += 1;
            gifs.insert(r.gif_id.as_str());
        }
        let unique_gif_count = gifs.len();
        Ok(Self {
            distinct_tweet_count: reactions_per_tweet.len(),
            unique_gif_count,
            reactions_per_tweet,
            records,
        })
    }

    pub fn records(&self) -> &[TweetRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<TweetRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn distinct_tweet_count(&self) -> usize {
        self.distinct_tweet_count
    }

    pub fn unique_gif_count(&self) -> usize {
        self.unique_gif_count
    }

    pub fn reactions_per_tweet(&self) -> &BTreeMap<String, usize> {
        &self.reactions_per_tweet
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub records: usize,
    pub distinct_tweets: usize,
    pub unique_gifs: usize,
    pub single_reaction_tweets: usize,
    pub single_reaction_fraction: f64,
    pub max_reactions: usize,
}

/// How skewed the corpus is towards tweets with a single reaction GIF.
pub fn corpus_stats(index: &CorpusIndex) -> Result<CorpusStats, CorpusError> {
    if index.is_empty() {
        return Err(CorpusError::Empty);
    }
    let counts = index.reactions_per_tweet.values();
    let single = counts.clone().filter(|&&c| c == 1).count();
    let max_reactions = counts.copied().max().unwrap_or(0);
    Ok(CorpusStats {
        records: index.len(),
        distinct_tweets: index.distinct_tweet_count,
        unique_gifs: index.unique_gif_count,
        single_reaction_tweets: single,
        single_reaction_fraction: single as f64 / index.distinct_tweet_count as f64,
        max_reactions,
    })
}
