//! Fine-tuning entry points for the trainable backends.
//!
//! Text data is JSONL `{"text": ..., "label": 0|1}`. Image data is a
//! directory with `positive/` and `negative/` subdirectories of images.
//! Each run writes a model artifact (JSON, loadable through the registry
//! with `model = "<path>"`) and a JSONL training log next to it.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use gifsent_core::fusion::Sentiment;
use gifsent_core::image_sentiment::ImageFineTuneConfig;
use gifsent_core::raster::Raster;
use gifsent_core::text::TextFineTuneConfig;
use gifsent_core::train::{train_image, train_text, EpochLog};
use serde::{Deserialize, Serialize};

use crate::corpus_io::write_jsonl;
use crate::error::{Error, Result};
use crate::media::load_still;

pub const TRAINABLE_TEXT: &str = "bow-linear";
pub const TRAINABLE_IMAGE: &str = "conv-gap";

#[derive(Debug, Deserialize)]
struct LabeledText {
    text: String,
    label: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainOutput {
    pub model: PathBuf,
    pub log: PathBuf,
}

/// `<model>.log.jsonl`
pub fn log_path(model: &Path) -> PathBuf {
    model.with_extension("log.jsonl")
}

fn require_trainable(kind: &str, name: &str, trainable: &str) -> Result<()> {
    if name == trainable {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "training requires a trainable backend: {kind} backend `{name}` is not trainable (use `{trainable}`)"
        )))
    }
}

fn save<T: Serialize>(model: &T, logs: &[EpochLog], out: &Path) -> Result<TrainOutput> {
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let body = serde_json::to_vec(model).map_err(|e| Error::Data(e.to_string()))?;
    fs::write(out, body).map_err(|e| Error::io(out, e))?;
    let log = log_path(out);
    write_jsonl(&log, logs)?;
    Ok(TrainOutput {
        model: out.to_path_buf(),
        log,
    })
}

pub fn read_labeled_text(path: &Path) -> Result<Vec<(String, Sentiment)>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: LabeledText = serde_json::from_str(&line)
            .map_err(|e| Error::Data(format!("{}: line {}: {e}", path.display(), i + 1)))?;
        let label = Sentiment::from_label(row.label).ok_or_else(|| {
            Error::Data(format!("{}: line {}: label must be 0 or 1", path.display(), i + 1))
        })?;
        out.push((row.text, label));
    }
    Ok(out)
}

pub fn fine_tune_text(
    backend_name: &str,
    config: &TextFineTuneConfig,
    labeled_corpus: &Path,
    out: &Path,
) -> Result<TrainOutput> {
    require_trainable("text", backend_name, TRAINABLE_TEXT)?;
    config.validate().map_err(|e| Error::Config(e.to_string()))?;
    let examples = read_labeled_text(labeled_corpus)?;
    let (model, logs) = train_text(config, &examples).map_err(|e| Error::Data(e.to_string()))?;
    for l in &logs {
        log::info!("text epoch {}: loss {:.6}", l.epoch, l.loss);
    }
    save(&model, &logs, out)
}

/// Images under `dir/positive` and `dir/negative`, in file-name order.
pub fn read_image_corpus(dir: &Path) -> Result<Vec<(Raster, Sentiment)>> {
    let mut out = Vec::new();
    for (sub, label) in [("negative", Sentiment::Negative), ("positive", Sentiment::Positive)] {
        let d = dir.join(sub);
        let entries = fs::read_dir(&d).map_err(|e| Error::io(&d, e))?;
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        paths.sort();
        for p in paths {
            out.push((load_still(&p)?, label));
        }
    }
    Ok(out)
}

pub fn fine_tune_image(
    backend_name: &str,
    config: &ImageFineTuneConfig,
    image_corpus: &Path,
    out: &Path,
) -> Result<TrainOutput> {
    require_trainable("image", backend_name, TRAINABLE_IMAGE)?;
    config.validate().map_err(|e| Error::Config(e.to_string()))?;
    let examples = read_image_corpus(image_corpus)?;
    let (model, logs) = train_image(config, &examples).map_err(|e| Error::Data(e.to_string()))?;
    for l in &logs {
        log::info!("image epoch {}: loss {:.6} val_loss {:?}", l.epoch, l.loss, l.val_loss);
    }
    save(&model, &logs, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::{registry_get, AnyBackend, BackendKind};

    fn text_corpus(dir: &Path) -> PathBuf {
        let p = dir.join("train.jsonl");
        let mut body = String::new();
        for _ in 0..8 {
            body.push_str("{\"text\":\"love it great\",\"label\":1}\n{\"text\":\"hate it awful\",\"label\":0}\n");
        }
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn mock_backends_are_not_trainable() {
        let dir = tempfile::tempdir().unwrap();
        let err = fine_tune_text("mock", &TextFineTuneConfig::default(), &text_corpus(dir.path()), &dir.path().join("m.json"))
            .unwrap_err();
        assert!(err.to_string().contains("training requires a trainable backend"));
        let err = fine_tune_image("mock", &ImageFineTuneConfig::default(), dir.path(), &dir.path().join("m.json"))
            .unwrap_err();
        assert!(err.to_string().contains("training requires a trainable backend"));
    }

    #[test]
    fn bad_config_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = TextFineTuneConfig { epochs: 0, ..Default::default() };
        let err = fine_tune_text("bow-linear", &cfg, &text_corpus(dir.path()), &dir.path().join("m.json")).unwrap_err();
        assert!(err.to_string().contains("all values positive"));
        let cfg = ImageFineTuneConfig { validation_split: 1.5, ..Default::default() };
        assert!(fine_tune_image("conv-gap", &cfg, dir.path(), &dir.path().join("m.json")).is_err());
    }

    #[test]
    fn text_artifact_loads_through_registry() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("models/text.json");
        let cfg = TextFineTuneConfig { epochs: 2, batch_size: 4, ..Default::default() };
        let res = fine_tune_text("bow-linear", &cfg, &text_corpus(dir.path()), &out).unwrap();
        let log = fs::read_to_string(&res.log).unwrap();
        assert_eq!(log.lines().count(), 2);
        assert!(log.lines().all(|l| l.contains("\"epoch\"") && l.contains("\"loss\"")));

        let mut params = toml::Table::new();
        params.insert("model".into(), toml::Value::String(out.to_string_lossy().into_owned()));
        let AnyBackend::Text(t) = registry_get(BackendKind::Text, "bow-linear", &params).unwrap() else {
            panic!("wrong kind")
        };
        let p = t.classify("love it").unwrap();
        assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn image_training_writes_val_loss() {
        let dir = tempfile::tempdir().unwrap();
        for (sub, level) in [("positive", 230u8), ("negative", 20u8)] {
            let d = dir.path().join("imgs").join(sub);
            fs::create_dir_all(&d).unwrap();
            for i in 0..5 {
                let img = image::RgbImage::from_pixel(12, 12, image::Rgb([level, level, level + i]));
                img.save(d.join(format!("{i}.png"))).unwrap();
            }
        }
        let cfg = ImageFineTuneConfig { epochs: 2, batch_size: 4, ..Default::default() };
        let res = fine_tune_image("conv-gap", &cfg, &dir.path().join("imgs"), &dir.path().join("img.json")).unwrap();
        let log = fs::read_to_string(&res.log).unwrap();
        assert!(log.lines().all(|l| l.contains("\"val_loss\"")));
    }
}
