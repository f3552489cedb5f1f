//! Corpus loading, persistence and media-cache resolution.
//!
//! The canonical on-disk form is JSONL, one [`TweetRecord`] per line. CSV
//! with the same column names is accepted on import. Rows that fail
//! validation are kept as rejects (row number + reason) instead of being
//! dropped.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use gifsent_core::corpus::{CorpusIndex, TweetRecord};
use gifsent_core::fusion::Sentiment;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl CorpusFormat {
    /// `.csv` is CSV, anything else is treated as JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub index: CorpusIndex,
    pub rejects: Vec<Reject>,
}

impl LoadedCorpus {
    /// Rows seen, accepted or not.
    pub fn rows(&self) -> usize {
        self.index.len() + self.rejects.len()
    }
}

/// Loads a corpus file. Only an unreadable file is an error; bad rows end
/// up in [`LoadedCorpus::rejects`].
///
/// Row numbers are 1-based line numbers for JSONL and 1-based data-row
/// numbers (header excluded) for CSV. Blank JSONL lines are not rows.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<LoadedCorpus> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<(usize, std::result::Result<Value, String>)> = Vec::new();
    match format {
        CorpusFormat::Jsonl => {
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                rows.push((i + 1, serde_json::from_str(&line).map_err(|e| format!("invalid JSON: {e}"))));
            }
        }
        CorpusFormat::Csv => {
            let mut reader = csv::ReaderBuilder::new().flexible(false).from_reader(file);
            let headers = reader
                .headers()
                .map_err(|e| Error::Data(format!("{}: unreadable CSV header: {e}", path.display())))?
                .clone();
            for (i, rec) in reader.records().enumerate() {
                let row = match rec {
                    Ok(rec) => Ok(Value::Object(
                        headers
                            .iter()
                            .zip(rec.iter())
                            .filter(|(_, v)| !v.is_empty())
                            .map(|(h, v)| (h.trim().to_owned(), Value::String(v.to_owned())))
                            .collect(),
                    )),
                    Err(e) => Err(format!("invalid CSV row: {e}")),
                };
                rows.push((i + 1, row));
            }
        }
    }

    let mut seen = HashSet::new();
    let mut records = Vec::new();
    let mut rejects = Vec::new();
    for (row, value) in rows {
        match value.and_then(|v| parse_record(&v)) {
            Ok(rec) if !seen.insert(rec.record_id.clone()) => rejects.push(Reject {
                row,
                reason: format!("duplicate record_id `{}`", rec.record_id),
            }),
            Ok(rec) => records.push(rec),
            Err(reason) => rejects.push(Reject { row, reason }),
        }
    }
    let index = CorpusIndex::new(records).map_err(|e| Error::Data(e.to_string()))?;
    Ok(LoadedCorpus { index, rejects })
}

fn field<'a>(v: &'a Value, key: &str) -> Option<&'a Value> {
    v.get(key).filter(|x| !x.is_null())
}

fn required_string(v: &Value, key: &str) -> std::result::Result<String, String> {
    match field(v, key) {
        Some(Value::String(s)) if !s.trim().is_empty() || key == "tweet_text" => Ok(s.clone()),
        Some(Value::String(_)) => Err(format!("empty `{key}`")),
        Some(Value::Number(n)) if key != "tweet_text" => Ok(n.to_string()),
        Some(_) => Err(format!("`{key}` must be a string")),
        None => Err(format!("missing `{key}`")),
    }
}

fn optional_string(v: &Value, key: &str) -> std::result::Result<Option<String>, String> {
    match field(v, key) {
        None => Ok(None),
        Some(Value::String(s)) if s.is_empty() => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(format!("`{key}` must be a string")),
    }
}

fn parse_label(v: &Value) -> std::result::Result<Sentiment, String> {
    let raw = field(v, "induced_label").ok_or("missing `induced_label`")?;
    let n = match raw {
        Value::Number(n) => n.as_u64(),
        Value::String(s) => s.trim().parse::<u64>().ok(),
        Value::Bool(b) => Some(*b as u64),
        _ => None,
    };
    n.and_then(|n| u8::try_from(n).ok())
        .and_then(Sentiment::from_label)
        .ok_or_else(|| format!("induced_label must be 0 or 1, got {raw}"))
}

fn parse_record(v: &Value) -> std::result::Result<TweetRecord, String> {
    if !v.is_object() {
        return Err("row is not an object".into());
    }
    Ok(TweetRecord {
        record_id: required_string(v, "record_id")?,
        tweet_id: required_string(v, "tweet_id")?,
        tweet_text: required_string(v, "tweet_text")?.nfc().collect(),
        gif_id: required_string(v, "gif_id")?,
        media_path: optional_string(v, "media_path")?,
        induced_label: parse_label(v)?,
        reaction_category: optional_string(v, "reaction_category")?,
        media_missing: optional_string(v, "media_missing")?,
    })
}

/// Writes records as canonical JSONL.
pub fn write_corpus(path: &Path, records: &[TweetRecord]) -> Result<()> {
    write_jsonl(path, records)
}

/// `<corpus path>.rejects.jsonl`
pub fn rejects_path(corpus_path: &Path) -> PathBuf {
    let mut s = corpus_path.as_os_str().to_owned();
    s.push(".rejects.jsonl");
    PathBuf::from(s)
}

pub fn write_rejects(corpus_path: &Path, rejects: &[Reject]) -> Result<PathBuf> {
    let path = rejects_path(corpus_path);
    write_jsonl(&path, rejects)?;
    Ok(path)
}

pub(crate) fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut w, row).map_err(|e| Error::Data(e.to_string()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// File extensions looked up in the media cache, in order.
pub const MEDIA_EXTENSIONS: [&str; 2] = ["gif", "mp4"];

/// Downloads one GIF into the cache. Only used when network fetching is on.
pub trait MediaFetcher: Send + Sync {
    fn fetch(&self, gif_id: &str, cache_dir: &Path) -> std::result::Result<PathBuf, String>;
}

/// Points `media_path` at the cached file for the record's GIF, or records
/// why there is none (`not cached`, `corrupt`, or the fetch failure).
///
/// Media that cannot be resolved is never an error: the record stays in the
/// corpus for text analytics and is skipped by GIF scoring.
pub fn resolve_media(
    record: &TweetRecord,
    cache_dir: &Path,
    fetcher: Option<&dyn MediaFetcher>,
) -> Result<TweetRecord> {
    if !cache_dir.is_dir() {
        return Err(Error::Config(format!(
            "media cache directory {} does not exist",
            cache_dir.display()
        )));
    }
    let mut out = record.clone();
    out.media_path = None;
    out.media_missing = None;

    let mut candidates: Vec<PathBuf> = MEDIA_EXTENSIONS
        .iter()
        .map(|ext| cache_dir.join(format!("{}.{ext}", record.gif_id)))
        .collect();
    if let Some(p) = &record.media_path {
        candidates.insert(0, PathBuf::from(p));
    }
    let mut corrupt = false;
    for c in &candidates {
        match fs::metadata(c) {
            Ok(m) if m.is_file() && m.len() > 0 => {
                out.media_path = Some(c.to_string_lossy().into_owned());
                return Ok(out);
            }
            Ok(m) if m.is_file() => corrupt = true,
            _ => {}
        }
    }
    if corrupt {
        out.media_missing = Some("corrupt".into());
        return Ok(out);
    }
    match fetcher {
        None => out.media_missing = Some("not cached".into()),
        Some(f) => match f.fetch(&record.gif_id, cache_dir) {
            Ok(p) if fs::metadata(&p).map(|m| m.len() > 0).unwrap_or(false) => {
                out.media_path = Some(p.to_string_lossy().into_owned());
            }
            Ok(_) => out.media_missing = Some("corrupt".into()),
            Err(e) => out.media_missing = Some(format!("fetch failed: {e}")),
        },
    }
    Ok(out)
}

/// Fetches `<url_template with {gif_id} substituted>` into the cache.
#[derive(Debug, Clone)]
pub struct HttpFetcher {
    pub url_template: String,
}

impl MediaFetcher for HttpFetcher {
    #[cfg(feature = "network")]
    fn fetch(&self, gif_id: &str, cache_dir: &Path) -> std::result::Result<PathBuf, String> {
        let url = self.url_template.replace("{gif_id}", gif_id);
        let ext = if url.ends_with(".mp4") { "mp4" } else { "gif" };
        let mut resp = ureq::get(&url).call().map_err(|e| e.to_string())?;
        let bytes = resp.body_mut().read_to_vec().map_err(|e| e.to_string())?;
        let dest = cache_dir.join(format!("{gif_id}.{ext}"));
        fs::write(&dest, bytes).map_err(|e| e.to_string())?;
        Ok(dest)
    }

    #[cfg(not(feature = "network"))]
    fn fetch(&self, _gif_id: &str, _cache_dir: &Path) -> std::result::Result<PathBuf, String> {
        Err("network support not compiled in (enable the `network` feature)".into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    const HEADER: &str = "record_id,tweet_id,tweet_text,gif_id,induced_label,reaction_category";

    #[test]
    fn jsonl_rows_and_rejects() {
        let dir = tempfile::tempdir().unwrap();
        let body = concat!(
            r#"{"record_id":"a","tweet_id":"t1","tweet_text":"hi","gif_id":"g1","induced_label":1}"#, "\n",
            "\n",
            r#"{"record_id":"b","tweet_id":"t1","tweet_text":"yo","gif_id":"g2","induced_label":2}"#, "\n",
            "not json\n",
            r#"{"record_id":"a","tweet_id":"t2","tweet_text":"x","gif_id":"g3","induced_label":0}"#, "\n",
            r#"{"record_id":"c","tweet_id":"t3","gif_id":"g3","induced_label":"0","reaction_category":"applause"}"#, "\n",
        );
        let p = write(dir.path(), "c.jsonl", body);
        let loaded = load_corpus(&p, CorpusFormat::Jsonl).unwrap();
        assert_eq!(loaded.index.len(), 1);
        let rows: Vec<usize> = loaded.rejects.iter().map(|r| r.row).collect();
        assert_eq!(rows, vec![3, 4, 5, 6]);
        assert!(loaded.rejects[0].reason.contains("induced_label"));
        assert!(loaded.rejects[2].reason.contains("duplicate"));
        assert!(loaded.rejects[3].reason.contains("tweet_text"));
        assert_eq!(loaded.rows(), 5);
    }

    #[test]
    fn csv_import() {
        let dir = tempfile::tempdir().unwrap();
        let body = format!("{HEADER}\nr1,t1,\"hello, world\",g1,1,applause\nr2,t2,bye,g2,yes,\nr3,t3,ok,g1,0,\n");
        let p = write(dir.path(), "c.csv", &body);
        assert_eq!(CorpusFormat::from_path(&p), CorpusFormat::Csv);
        let loaded = load_corpus(&p, CorpusFormat::Csv).unwrap();
        assert_eq!(loaded.index.len(), 2);
        assert_eq!(loaded.rejects, vec![Reject { row: 2, reason: "induced_label must be 0 or 1, got \"yes\"".into() }]);
        let r1 = &loaded.index.records()[0];
        assert_eq!(r1.tweet_text, "hello, world");
        assert_eq!(r1.reaction_category.as_deref(), Some("applause"));
        assert_eq!(loaded.index.records()[1].reaction_category, None);
        assert_eq!(loaded.index.unique_gif_count(), 1);
    }

    #[test]
    fn empty_file_gives_empty_index() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "e.jsonl", "");
        let loaded = load_corpus(&p, CorpusFormat::Jsonl).unwrap();
        assert_eq!((loaded.index.len(), loaded.index.distinct_tweet_count()), (0, 0));
    }

    #[test]
    fn unreadable_file_is_fatal() {
        let err = load_corpus(Path::new("/no/such/corpus.jsonl"), CorpusFormat::Jsonl).unwrap_err();
        assert!(err.to_string().contains("/no/such/corpus.jsonl"));
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn text_is_nfc_normalized() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "n.jsonl",
            "{\"record_id\":\"a\",\"tweet_id\":\"t\",\"tweet_text\":\"cafe\u{301}\",\"gif_id\":\"g\",\"induced_label\":1}\n",
        );
        let loaded = load_corpus(&p, CorpusFormat::Jsonl).unwrap();
        assert_eq!(loaded.index.records()[0].tweet_text, "caf\u{e9}");
    }

    fn record(gif: &str) -> TweetRecord {
        TweetRecord {
            record_id: "r".into(),
            tweet_id: "t".into(),
            tweet_text: "x".into(),
            gif_id: gif.into(),
            media_path: None,
            induced_label: Sentiment::Positive,
            reaction_category: None,
            media_missing: None,
        }
    }

    struct FailingFetch;
    impl MediaFetcher for FailingFetch {
        fn fetch(&self, _: &str, _: &Path) -> std::result::Result<PathBuf, String> {
            Err("HTTP 404".into())
        }
    }

    struct WritingFetch;
    impl MediaFetcher for WritingFetch {
        fn fetch(&self, gif_id: &str, dir: &Path) -> std::result::Result<PathBuf, String> {
            let p = dir.join(format!("{gif_id}.gif"));
            fs::write(&p, b"GIF89a").unwrap();
            Ok(p)
        }
    }

    #[test]
    fn media_resolution() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "hit.gif", "GIF89a");
        write(dir.path(), "empty.mp4", "");

        let hit = resolve_media(&record("hit"), dir.path(), None).unwrap();
        assert!(hit.media_path.unwrap().ends_with("hit.gif"));

        let miss = resolve_media(&record("nope"), dir.path(), None).unwrap();
        assert_eq!((miss.media_path, miss.media_missing.as_deref()), (None, Some("not cached")));

        let corrupt = resolve_media(&record("empty"), dir.path(), None).unwrap();
        assert_eq!(corrupt.media_missing.as_deref(), Some("corrupt"));

        let failed = resolve_media(&record("nope"), dir.path(), Some(&FailingFetch)).unwrap();
        assert_eq!(failed.media_missing.as_deref(), Some("fetch failed: HTTP 404"));

        let fetched = resolve_media(&record("new"), dir.path(), Some(&WritingFetch)).unwrap();
        assert!(fetched.media_path.is_some() && fetched.media_missing.is_none());

        assert!(resolve_media(&record("x"), &dir.path().join("missing"), None).is_err());
    }

    #[cfg(not(feature = "network"))]
    #[test]
    fn http_fetch_without_network_feature_reports_cause() {
        let dir = tempfile::tempdir().unwrap();
        let f = HttpFetcher { url_template: "https://example.invalid/{gif_id}.gif".into() };
        let r = resolve_media(&record("g"), dir.path(), Some(&f)).unwrap();
        assert!(r.media_missing.unwrap().contains("network support not compiled in"));
    }
}
