//! Pipeline configuration: one TOML file with a section per module, plus
//! command-line overrides keyed by the same names.
//!
//! ```toml
//! [pipeline]
//! corpus_path = "corpus.jsonl"
//! cache_dir = "cache"
//! out_dir = "out"
//! frame_period = 0.1
//!
//! [face_backend]
//! name = "mock"
//! script = "face_script.json"
//!
//! [text.finetune]
//! epochs = 3
//! ```
//!
//! Relative paths inside the file are relative to the file's directory;
//! paths given as overrides are relative to the working directory.

use std::fs;
use std::path::{Path, PathBuf};

use gifsent_core::face::DEFAULT_MIN_FACE_SIZE;
use gifsent_core::frames::DEFAULT_PERIOD;
use gifsent_core::image_sentiment::ImageFineTuneConfig;
use gifsent_core::text::TextFineTuneConfig;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};

/// Pipeline keys holding paths.
const PATH_KEYS: [&str; 3] = ["corpus_path", "cache_dir", "out_dir"];
/// Backend parameters holding paths.
pub const PATH_PARAMS: [&str; 2] = ["script", "model"];
pub const BACKEND_SECTIONS: [&str; 4] = ["text_backend", "image_backend", "face_backend", "ocr_backend"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendSpec {
    #[serde(default = "mock_name")]
    pub name: String,
    /// Everything else in the section, passed to the backend as-is.
    #[serde(flatten)]
    pub params: Table,
}

fn mock_name() -> String {
    "mock".into()
}

impl Default for BackendSpec {
    fn default() -> Self {
        Self {
            name: mock_name(),
            params: Table::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    pub corpus_path: PathBuf,
    pub cache_dir: PathBuf,
    pub out_dir: PathBuf,
    pub frame_period: f64,
    pub parallelism: usize,
    pub network_fetch: bool,
    pub fetch_url_template: Option<String>,
    pub min_face_size: u32,
    pub dump_faces: bool,
    pub dump_captions: bool,
}

impl Default for PipelineSection {
    fn default() -> Self {
        Self {
            corpus_path: "corpus.jsonl".into(),
            cache_dir: "cache".into(),
            out_dir: "out".into(),
            frame_period: DEFAULT_PERIOD,
            parallelism: 4,
            network_fetch: false,
            fetch_url_template: None,
            min_face_size: DEFAULT_MIN_FACE_SIZE,
            dump_faces: false,
            dump_captions: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextSection {
    pub finetune: TextFineTuneConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImageSection {
    pub finetune: ImageFineTuneConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub pipeline: PipelineSection,
    pub text_backend: BackendSpec,
    pub image_backend: BackendSpec,
    pub face_backend: BackendSpec,
    pub ocr_backend: BackendSpec,
    pub text: TextSection,
    pub image: ImageSection,
}

impl PipelineConfig {
    /// Reads `path` (if any), applies `overrides` (`section.key`, raw value)
    /// in order, and validates the result.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let body = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                let mut t: Table = body
                    .parse()
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                let base = p.parent().unwrap_or(Path::new(""));
                rebase_paths(&mut t, base);
                t
            }
            None => Table::new(),
        };
        for (key, raw) in overrides {
            set_dotted(&mut table, key, parse_value(raw))?;
        }
        let config: PipelineConfig = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("invalid config: {}", e.message())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.pipeline;
        if !(p.frame_period.is_finite() && p.frame_period > 0.0) {
            return Err(Error::Config(format!("frame_period must be positive, got {}", p.frame_period)));
        }
        if p.parallelism == 0 {
            return Err(Error::Config("parallelism must be at least 1".into()));
        }
        Ok(())
    }

    /// Canonical corpus written by `ingest`.
    pub fn ingested_corpus(&self) -> PathBuf {
        self.pipeline.out_dir.join("corpus.jsonl")
    }

    pub fn scores_path(&self) -> PathBuf {
        self.pipeline.out_dir.join("scores.jsonl")
    }

    pub fn skips_path(&self) -> PathBuf {
        self.pipeline.out_dir.join("scores.skipped.jsonl")
    }

    pub fn report_path(&self) -> PathBuf {
        self.pipeline.out_dir.join("report.json")
    }
}

fn rebase_paths(t: &mut Table, base: &Path) {
    let rebase = |v: &mut Value| {
        if let Value::String(s) = v {
            if Path::new(s.as_str()).is_relative() {
                *s = base.join(s.as_str()).to_string_lossy().into_owned();
            }
        }
    };
    if let Some(Value::Table(p)) = t.get_mut("pipeline") {
        for k in PATH_KEYS {
            if let Some(v) = p.get_mut(k) {
                rebase(v);
            }
        }
    }
    for section in BACKEND_SECTIONS {
        if let Some(Value::Table(s)) = t.get_mut(section) {
            for k in PATH_PARAMS {
                if let Some(v) = s.get_mut(k) {
                    rebase(v);
                }
            }
        }
    }
}

/// Interprets an override as a TOML value, falling back to a plain string.
fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_owned()))
}

fn set_dotted(table: &mut Table, key: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad config key `{key}`")));
    }
    let (last, sections) = parts.split_last().expect("split yields at least one part");
    let mut cur = table;
    for s in sections {
        let entry = cur.entry(s.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => return Err(Error::Config(format!("`{s}` in `{key}` is not a section"))),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ov(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn defaults() {
        let c = PipelineConfig::load(None, &[]).unwrap();
        assert_eq!(c.pipeline.frame_period, 0.1);
        assert!(!c.pipeline.network_fetch);
        assert_eq!(c.text_backend.name, "mock");
        assert_eq!(c.text.finetune.head_learning_rate, 2e-5);
        assert_eq!(c.image.finetune.validation_split, 0.2);
    }

    #[test]
    fn file_then_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(
            &path,
            "[pipeline]\ncache_dir = \"media\"\nframe_period = 0.2\n\n[face_backend]\nname = \"mock\"\nscript = \"faces.json\"\n\n[text.finetune]\nepochs = 7\n",
        )
        .unwrap();
        let c = PipelineConfig::load(
            Some(&path),
            &ov(&[("pipeline.frame_period", "0.5"), ("ocr_backend.name", "mock"), ("text.finetune.seed", "9")]),
        )
        .unwrap();
        assert_eq!(c.pipeline.cache_dir, dir.path().join("media"));
        assert_eq!(c.pipeline.frame_period, 0.5);
        assert_eq!(c.face_backend.params["script"].as_str().unwrap(), dir.path().join("faces.json").to_str().unwrap());
        assert_eq!((c.text.finetune.epochs, c.text.finetune.seed), (7, 9));
    }

    #[test]
    fn string_fallback_for_overrides() {
        let c = PipelineConfig::load(None, &ov(&[("pipeline.out_dir", "results/run one")])).unwrap();
        assert_eq!(c.pipeline.out_dir, PathBuf::from("results/run one"));
    }

    #[test]
    fn invalid_configs() {
        let bad = |o: &[(&str, &str)]| PipelineConfig::load(None, &ov(o)).unwrap_err();
        assert!(bad(&[("pipeline.frame_period", "0")]).to_string().contains("frame_period"));
        assert!(bad(&[("pipeline.parallelism", "0")]).to_string().contains("parallelism"));
        assert!(bad(&[("pipeline.frobnicate", "1")]).to_string().contains("frobnicate"));
        assert_eq!(bad(&[("pipeline..x", "1")]).exit_code(), 1);
    }

    #[test]
    fn missing_file_names_path() {
        let err = PipelineConfig::load(Some(Path::new("/nope/run.toml")), &[]).unwrap_err();
        assert!(err.to_string().contains("/nope/run.toml"));
    }
}
