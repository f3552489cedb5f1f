//! Pipeline stages. Each stage reads its inputs from files and writes its
//! outputs to files under `out_dir`, so stages can be rerun independently.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use gifsent_core::analytics::{
    attribute_accuracy, combination_matrix, perceived_sentiment, AnalysisReport, SentimentPair,
};
use gifsent_core::caption::{extract_caption, score_caption, FrameText};
use gifsent_core::corpus::{corpus_stats, CorpusIndex, TweetRecord};
use gifsent_core::face::{score_gif_faces, FaceObservation, FaceOptions};
use gifsent_core::fusion::{fuse, AttributeClass, FusedSentiment, ModuleScores, Sentiment};
use gifsent_core::image_sentiment::score_gif_images;
use gifsent_core::text::TextError;
use gifsent_core::{Modality, ModuleScore};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::corpus_io::{
    load_corpus, resolve_media, write_corpus, write_jsonl, write_rejects, CorpusFormat, HttpFetcher,
    MediaFetcher,
};
use crate::error::{Error, Result};
use crate::media::{dump_frames, extract_frames};
use crate::registry::{text_backend, Backends};
use crate::report::emit_report;

pub const EXCLUDED_EMPTY_TEXT: &str = "empty_tweet_text";
pub const EXCLUDED_MISSING_MEDIA: &str = "missing_media";
pub const EXCLUDED_CONFLICTING_LABELS: &str = "gif_conflicting_labels";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModuleRow {
    pub score: f64,
    pub evidence: usize,
}

impl ModuleRow {
    fn from_score(s: &ModuleScore) -> Option<Self> {
        s.score().map(|score| Self {
            score,
            evidence: s.evidence_count(),
        })
    }

    fn to_score(row: Option<Self>, m: Modality) -> Result<ModuleScore> {
        match row {
            None => Ok(ModuleScore::unavailable(m)),
            Some(r) => ModuleScore::available(m, r.score, r.evidence).ok_or_else(|| {
                Error::Data(format!("{m:?} score {} / evidence {} is invalid", r.score, r.evidence))
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModuleRows {
    pub image: Option<ModuleRow>,
    pub face: Option<ModuleRow>,
    pub ocr: Option<ModuleRow>,
}

/// One line of `scores.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub gif_id: String,
    pub fused_score: f64,
    pub label: Sentiment,
    pub attribute_class: AttributeClass,
    pub modules: ModuleRows,
}

impl ScoreRow {
    pub fn from_fused(f: &FusedSentiment) -> Self {
        Self {
            gif_id: f.gif_id.clone(),
            fused_score: f.fused_score,
            label: f.label,
            attribute_class: f.attribute_class,
            modules: ModuleRows {
                image: ModuleRow::from_score(&f.modules.image),
                face: ModuleRow::from_score(&f.modules.face),
                ocr: ModuleRow::from_score(&f.modules.ocr),
            },
        }
    }

    pub fn to_fused(&self) -> Result<FusedSentiment> {
        Ok(FusedSentiment {
            gif_id: self.gif_id.clone(),
            fused_score: self.fused_score,
            label: self.label,
            attribute_class: self.attribute_class,
            modules: ModuleScores {
                image: ModuleRow::to_score(self.modules.image, Modality::Image)?,
                face: ModuleRow::to_score(self.modules.face, Modality::Face)?,
                ocr: ModuleRow::to_score(self.modules.ocr, Modality::Ocr)?,
                text: ModuleScore::unavailable(Modality::Text),
            },
        })
    }
}

/// One line of `scores.skipped.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipRow {
    pub gif_id: String,
    pub reason: String,
}

#[derive(Serialize)]
struct CaptionDump<'a> {
    gif_id: &'a str,
    per_frame: &'a [FrameText],
    aggregated_text: &'a str,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestSummary {
    pub records: usize,
    pub rejects: usize,
    pub corpus: PathBuf,
    pub rejects_file: PathBuf,
}

/// Validates the raw corpus and writes the canonical copy plus rejects.
pub fn cmd_ingest(config: &PipelineConfig) -> Result<IngestSummary> {
    let src = &config.pipeline.corpus_path;
    let loaded = load_corpus(src, CorpusFormat::from_path(src))?;
    let corpus = config.ingested_corpus();
    write_corpus(&corpus, loaded.index.records())?;
    let rejects_file = write_rejects(&corpus, &loaded.rejects)?;
    for r in &loaded.rejects {
        log::warn!("{}: row {} rejected: {}", src.display(), r.row, r.reason);
    }
    Ok(IngestSummary {
        records: loaded.index.len(),
        rejects: loaded.rejects.len(),
        corpus,
        rejects_file,
    })
}

fn load_ingested(config: &PipelineConfig) -> Result<CorpusIndex> {
    let path = config.ingested_corpus();
    if !path.is_file() {
        return Err(Error::Config(format!(
            "{} not found; run `gifsent ingest` first",
            path.display()
        )));
    }
    let loaded = load_corpus(&path, CorpusFormat::Jsonl)?;
    if let Some(r) = loaded.rejects.first() {
        return Err(Error::Data(format!("{}: row {}: {}", path.display(), r.row, r.reason)));
    }
    Ok(loaded.index)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchSummary {
    pub resolved: usize,
    pub missing: usize,
}

/// Points each record at its cached media, downloading first when
/// `network_fetch` is on, and rewrites the canonical corpus.
pub fn cmd_fetch_media(config: &PipelineConfig) -> Result<FetchSummary> {
    let index = load_ingested(config)?;
    let cache = &config.pipeline.cache_dir;
    fs::create_dir_all(cache).map_err(|e| Error::io(cache, e))?;
    let http;
    let fetcher: Option<&dyn MediaFetcher> = if config.pipeline.network_fetch {
        let template = config.pipeline.fetch_url_template.clone().ok_or_else(|| {
            Error::Config("network_fetch needs pipeline.fetch_url_template".into())
        })?;
        http = HttpFetcher { url_template: template };
        Some(&http)
    } else {
        None
    };
    let mut out = Vec::with_capacity(index.len());
    let mut summary = FetchSummary { resolved: 0, missing: 0 };
    for rec in index.records() {
        let r = resolve_media(rec, cache, fetcher)?;
        match &r.media_missing {
            Some(cause) => {
                log::warn!("{}: media for gif {} missing ({cause})", r.record_id, r.gif_id);
                summary.missing += 1;
            }
            None => summary.resolved += 1,
        }
        out.push(r);
    }
    write_corpus(&config.ingested_corpus(), &out)?;
    Ok(summary)
}

/// Media path for a GIF, or the reason it has none. Records already
/// resolved by `fetch-media` are trusted; others are looked up in the cache.
fn media_for(records: &[&TweetRecord], cache: &Path) -> Result<std::result::Result<PathBuf, String>> {
    if let Some(p) = records.iter().find_map(|r| r.media_path.as_ref()) {
        return Ok(Ok(PathBuf::from(p)));
    }
    if let Some(cause) = records.iter().find_map(|r| r.media_missing.as_ref()) {
        return Ok(Err(format!("missing media: {cause}")));
    }
    if !cache.is_dir() {
        return Ok(Err("missing media: not cached".into()));
    }
    let r = resolve_media(records[0], cache, None)?;
    Ok(match (r.media_path, r.media_missing) {
        (Some(p), _) => Ok(PathBuf::from(p)),
        (None, cause) => Err(format!("missing media: {}", cause.unwrap_or_default())),
    })
}

/// GIF ids in sorted order with their records.
fn gifs_of(index: &CorpusIndex) -> BTreeMap<&str, Vec<&TweetRecord>> {
    let mut gifs: BTreeMap<&str, Vec<&TweetRecord>> = BTreeMap::new();
    for r in index.records() {
        gifs.entry(r.gif_id.as_str()).or_default().push(r);
    }
    gifs
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractSummary {
    pub gifs: usize,
    pub frames: usize,
    pub failed: usize,
}

/// Samples every available GIF and dumps its frames into the cache.
pub fn cmd_extract_frames(config: &PipelineConfig) -> Result<ExtractSummary> {
    let index = load_ingested(config)?;
    let cache = &config.pipeline.cache_dir;
    let mut summary = ExtractSummary { gifs: 0, frames: 0, failed: 0 };
    for (gif_id, records) in gifs_of(&index) {
        let path = match media_for(&records, cache)? {
            Ok(p) => p,
            Err(reason) => {
                log::warn!("{gif_id}: {reason}");
                summary.failed += 1;
                continue;
            }
        };
        match extract_frames(&path, gif_id, config.pipeline.frame_period) {
            Ok(frames) => {
                dump_frames(&frames, cache)?;
                summary.gifs += 1;
                summary.frames += frames.len();
            }
            Err(e) => {
                log::warn!("{gif_id}: {e}");
                summary.failed += 1;
            }
        }
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreSummary {
    pub scored: usize,
    pub skipped: usize,
    pub scores: PathBuf,
    pub skips: PathBuf,
}

struct GifOutcome {
    result: std::result::Result<ScoreRow, SkipRow>,
    faces: Vec<FaceObservation>,
    caption: Option<(Vec<FrameText>, String)>,
}

fn score_one(gif_id: &str, media: std::result::Result<PathBuf, String>, config: &PipelineConfig, b: &Backends) -> GifOutcome {
    let skip = |reason: String| GifOutcome {
        result: Err(SkipRow {
            gif_id: gif_id.to_owned(),
            reason,
        }),
        faces: Vec::new(),
        caption: None,
    };
    let path = match media {
        Ok(p) => p,
        Err(reason) => return skip(reason),
    };
    let frames = match extract_frames(&path, gif_id, config.pipeline.frame_period) {
        Ok(f) => f,
        Err(e) => return skip(e.to_string()),
    };
    let image = score_gif_images(&frames, b.image.as_ref());
    let faces = score_gif_faces(
        &frames,
        b.face.as_ref(),
        FaceOptions {
            min_face_size: config.pipeline.min_face_size,
        },
    );
    let caption = extract_caption(&frames, b.ocr.as_ref());
    let ocr = score_caption(&caption, b.text.as_ref());
    log::debug!(
        "{gif_id}: {} frames, image skipped {}, face skipped {} discarded {}",
        frames.len(),
        image.skipped_frames,
        faces.skipped_frames,
        faces.discarded_faces
    );
    match fuse(gif_id, image.score, faces.score, ocr) {
        Ok(f) => GifOutcome {
            result: Ok(ScoreRow::from_fused(&f)),
            faces: faces.observations,
            caption: Some((caption.per_frame, caption.text)),
        },
        Err(e) => skip(e.to_string()),
    }
}

/// Scores every GIF in the canonical corpus and writes `scores.jsonl`
/// (sorted by gif_id) and `scores.skipped.jsonl`.
pub fn cmd_score(config: &PipelineConfig) -> Result<ScoreSummary> {
    let backends = Backends::from_config(config)?;
    let index = load_ingested(config)?;
    let cache = &config.pipeline.cache_dir;
    let mut jobs = Vec::new();
    for (gif_id, records) in gifs_of(&index) {
        jobs.push((gif_id, media_for(&records, cache)?));
    }

    let slots: Vec<Mutex<Option<GifOutcome>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = config.pipeline.parallelism.min(jobs.len()).max(1);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((gif_id, media)) = jobs.get(i) else { break };
                let outcome = score_one(gif_id, media.clone(), config, &backends);
                *slots[i].lock().unwrap_or_else(|p| p.into_inner()) = Some(outcome);
            });
        }
    });

    let mut rows = Vec::new();
    let mut skips = Vec::new();
    let mut captions = Vec::new();
    let faces_dir = config.pipeline.out_dir.join("faces");
    for slot in slots {
        let outcome = slot
            .into_inner()
            .unwrap_or_else(|p| p.into_inner())
            .expect("every job produces an outcome");
        match outcome.result {
            Ok(row) => {
                if config.pipeline.dump_faces {
                    write_jsonl(&faces_dir.join(format!("{}.jsonl", row.gif_id)), &outcome.faces)?;
                }
                if let Some(c) = outcome.caption {
                    captions.push((row.gif_id.clone(), c));
                }
                rows.push(row);
            }
            Err(skip) => {
                log::warn!("{}: skipped: {}", skip.gif_id, skip.reason);
                skips.push(skip);
            }
        }
    }
    if config.pipeline.dump_captions {
        let dump: Vec<CaptionDump> = captions
            .iter()
            .map(|(g, (per_frame, text))| CaptionDump {
                gif_id: g,
                per_frame,
                aggregated_text: text,
            })
            .collect();
        write_jsonl(&config.pipeline.out_dir.join("captions.jsonl"), &dump)?;
    }
    let summary = ScoreSummary {
        scored: rows.len(),
        skipped: skips.len(),
        scores: config.scores_path(),
        skips: config.skips_path(),
    };
    write_jsonl(&summary.scores, &rows)?;
    write_jsonl(&summary.skips, &skips)?;
    Ok(summary)
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoreRow>> {
    let file = fs::File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::Config(format!("{} not found; run `gifsent score` first", path.display()))
        } else {
            Error::io(path, e)
        }
    })?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: ScoreRow = serde_json::from_str(&line)
            .map_err(|e| Error::Data(format!("{}: line {}: {e}", path.display(), i + 1)))?;
        rows.push(row);
    }
    Ok(rows)
}

/// Builds the analysis report from the canonical corpus and the scores.
pub fn analyze(config: &PipelineConfig) -> Result<AnalysisReport> {
    let text = text_backend(&config.text_backend)?;
    let index = load_ingested(config)?;
    let scores = read_scores(&config.scores_path())?;
    if index.is_empty() || scores.is_empty() {
        return Err(Error::Data("empty corpus".into()));
    }
    let gifs = gifs_of(&index);
    if let Some(orphan) = scores.iter().find(|r| !gifs.contains_key(r.gif_id.as_str())) {
        return Err(Error::Data(format!(
            "scores mention gif_id `{}` which is not in the corpus",
            orphan.gif_id
        )));
    }

    let mut exclusions: BTreeMap<String, usize> = [EXCLUDED_EMPTY_TEXT, EXCLUDED_MISSING_MEDIA, EXCLUDED_CONFLICTING_LABELS]
        .into_iter()
        .map(|k| (k.to_string(), 0))
        .collect();
    let mut pairs = Vec::new();
    for r in index.records() {
        match perceived_sentiment(&r.tweet_text, text.as_ref()) {
            Ok(perceived) => pairs.push(SentimentPair {
                record_id: r.record_id.clone(),
                perceived,
                induced: r.induced_label,
            }),
            Err(TextError::NoClassifiableText) => {
                *exclusions.entry(EXCLUDED_EMPTY_TEXT.into()).or_default() += 1;
            }
            Err(e) => return Err(Error::Backend(format!("{}: {e}", r.record_id))),
        }
    }
    let matrix = combination_matrix(&pairs).map_err(|e| Error::Data(e.to_string()))?;

    let scored: BTreeSet<&str> = scores.iter().map(|r| r.gif_id.as_str()).collect();
    let unscored_records = index
        .records()
        .iter()
        .filter(|r| !scored.contains(r.gif_id.as_str()))
        .count();
    exclusions.insert(EXCLUDED_MISSING_MEDIA.into(), unscored_records);

    let mut truth = BTreeMap::new();
    let mut results = Vec::new();
    let mut conflicting = 0;
    for row in &scores {
        let labels: BTreeSet<Sentiment> = gifs[row.gif_id.as_str()].iter().map(|r| r.induced_label).collect();
        if labels.len() > 1 {
            conflicting += 1;
            continue;
        }
        truth.insert(row.gif_id.clone(), *labels.first().expect("gif has records"));
        results.push(row.to_fused()?);
    }
    exclusions.insert(EXCLUDED_CONFLICTING_LABELS.into(), conflicting);
    let accuracy = if results.is_empty() {
        None
    } else {
        Some(attribute_accuracy(&results, &truth).map_err(|e| Error::Data(e.to_string()))?)
    };
    let stats = corpus_stats(&index).map_err(|e| Error::Data(e.to_string()))?;
    Ok(AnalysisReport::new(matrix, accuracy, Some(stats), exclusions))
}

/// Runs [`analyze`] and writes `report.json` plus charts; returns the manifest.
pub fn cmd_analyze(config: &PipelineConfig) -> Result<Vec<PathBuf>> {
    let report = analyze(config)?;
    emit_report(&report, &config.pipeline.out_dir)
}
