//! Name-based backend construction.
//!
//! Every backend handed out is wrapped in [`Validated`], and backends that
//! are not `concurrent_safe` are additionally wrapped in a mutex so worker
//! threads take turns.

use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::{Arc, Mutex};

use gifsent_core::backends::{
    BackendError, FaceBackend, FaceBox, FaceScript, FrameRef, ImageSentimentBackend, MockImage,
    MockText, OcrBackend, OcrScript, RawEmotions, ScriptedFaces, ScriptedOcr,
    TextSentimentBackend, Validated,
};
use gifsent_core::raster::Raster;
use gifsent_core::train::{BowTextModel, ConvImageModel};
use serde::de::DeserializeOwned;
use toml::Table;

use crate::config::{BackendSpec, PipelineConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Text,
    Image,
    Face,
    Ocr,
}

impl BackendKind {
    pub fn registered(self) -> &'static [&'static str] {
        match self {
            BackendKind::Text => &["bow-linear", "mock"],
            BackendKind::Image => &["conv-gap", "mock"],
            BackendKind::Face => &["mock"],
            BackendKind::Ocr => &["mock"],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::Text => "text",
            BackendKind::Image => "image",
            BackendKind::Face => "face",
            BackendKind::Ocr => "ocr",
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub enum AnyBackend {
    Text(Arc<dyn TextSentimentBackend>),
    Image(Arc<dyn ImageSentimentBackend>),
    Face(Arc<dyn FaceBackend>),
    Ocr(Arc<dyn OcrBackend>),
}

/// Runs calls into the wrapped backend one at a time.
pub struct Serialized<B> {
    inner: B,
    lock: Mutex<()>,
}

impl<B> Serialized<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            lock: Mutex::new(()),
        }
    }

    fn turn(&self) -> std::sync::MutexGuard<'_, ()> {
        self.lock.lock().unwrap_or_else(|p| p.into_inner())
    }
}

impl<B: TextSentimentBackend> TextSentimentBackend for Serialized<B> {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn classify(&self, text: &str) -> Result<f64, BackendError> {
        let _g = self.turn();
        self.inner.classify(text)
    }
}

impl<B: ImageSentimentBackend> ImageSentimentBackend for Serialized<B> {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn score_frame(&self, frame: &Raster) -> Result<f64, BackendError> {
        let _g = self.turn();
        self.inner.score_frame(frame)
    }
}

impl<B: FaceBackend> FaceBackend for Serialized<B> {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn detect(&self, frame: FrameRef<'_>, image: &Raster) -> Result<Vec<FaceBox>, BackendError> {
        let _g = self.turn();
        self.inner.detect(frame, image)
    }
    fn emotions(&self, frame: FrameRef<'_>, face_index: usize, crop: &Raster) -> Result<RawEmotions, BackendError> {
        let _g = self.turn();
        self.inner.emotions(frame, face_index, crop)
    }
}

impl<B: OcrBackend> OcrBackend for Serialized<B> {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn read_text(&self, frame: FrameRef<'_>, gray: &Raster) -> Result<String, BackendError> {
        let _g = self.turn();
        self.inner.read_text(frame, gray)
    }
}

fn text<B: TextSentimentBackend + 'static>(b: B) -> AnyBackend {
    AnyBackend::Text(if b.concurrent_safe() {
        Arc::new(Validated(b))
    } else {
        Arc::new(Serialized::new(Validated(b)))
    })
}

fn image<B: ImageSentimentBackend + 'static>(b: B) -> AnyBackend {
    AnyBackend::Image(if b.concurrent_safe() {
        Arc::new(Validated(b))
    } else {
        Arc::new(Serialized::new(Validated(b)))
    })
}

fn face<B: FaceBackend + 'static>(b: B) -> AnyBackend {
    AnyBackend::Face(if b.concurrent_safe() {
        Arc::new(Validated(b))
    } else {
        Arc::new(Serialized::new(Validated(b)))
    })
}

fn ocr<B: OcrBackend + 'static>(b: B) -> AnyBackend {
    AnyBackend::Ocr(if b.concurrent_safe() {
        Arc::new(Validated(b))
    } else {
        Arc::new(Serialized::new(Validated(b)))
    })
}

fn path_param<'a>(kind: BackendKind, name: &str, params: &'a Table, key: &str) -> Result<Option<&'a Path>> {
    match params.get(key) {
        None => Ok(None),
        Some(toml::Value::String(s)) => Ok(Some(Path::new(s.as_str()))),
        Some(other) => Err(Error::Config(format!(
            "{kind} backend `{name}`: `{key}` must be a path string, got {other}"
        ))),
    }
}

fn read_json<T: DeserializeOwned>(kind: BackendKind, name: &str, path: &Path) -> Result<T> {
    let body = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&body).map_err(|e| {
        Error::Backend(format!("{kind} backend `{name}`: cannot load {}: {e}", path.display()))
    })
}

fn require_model<'a>(kind: BackendKind, name: &str, params: &'a Table) -> Result<&'a Path> {
    path_param(kind, name, params, "model")?.ok_or_else(|| {
        Error::Config(format!("{kind} backend `{name}` needs a `model` parameter (a trained artifact)"))
    })
}

/// Builds the backend registered under `name` for `kind`.
pub fn registry_get(kind: BackendKind, name: &str, params: &Table) -> Result<AnyBackend> {
    let backend = match (kind, name) {
        (BackendKind::Text, "mock") => text(MockText),
        (BackendKind::Text, "bow-linear") => {
            let m: BowTextModel = read_json(kind, name, require_model(kind, name, params)?)?;
            text(m)
        }
        (BackendKind::Image, "mock") => image(MockImage),
        (BackendKind::Image, "conv-gap") => {
            let m: ConvImageModel = read_json(kind, name, require_model(kind, name, params)?)?;
            image(m)
        }
        (BackendKind::Face, "mock") => {
            let script: FaceScript = match path_param(kind, name, params, "script")? {
                Some(p) => read_json(kind, name, p)?,
                None => FaceScript::new(),
            };
            face(ScriptedFaces::new(script))
        }
        (BackendKind::Ocr, "mock") => {
            let script: OcrScript = match path_param(kind, name, params, "script")? {
                Some(p) => read_json(kind, name, p)?,
                None => OcrScript::new(),
            };
            ocr(ScriptedOcr::new(script))
        }
        _ => {
            return Err(Error::Config(format!(
                "unknown {kind} backend `{name}`; registered: {}",
                kind.registered().join(", ")
            )))
        }
    };
    log::debug!("loaded {kind} backend `{name}`");
    Ok(backend)
}

/// The four backends a scoring run needs.
#[derive(Clone)]
pub struct Backends {
    pub text: Arc<dyn TextSentimentBackend>,
    pub image: Arc<dyn ImageSentimentBackend>,
    pub face: Arc<dyn FaceBackend>,
    pub ocr: Arc<dyn OcrBackend>,
}

pub fn text_backend(spec: &BackendSpec) -> Result<Arc<dyn TextSentimentBackend>> {
    match registry_get(BackendKind::Text, &spec.name, &spec.params)? {
        AnyBackend::Text(b) => Ok(b),
        _ => unreachable!("text lookup returns a text backend"),
    }
}

impl Backends {
    pub fn from_config(config: &PipelineConfig) -> Result<Self> {
        let text = text_backend(&config.text_backend)?;
        let AnyBackend::Image(image) =
            registry_get(BackendKind::Image, &config.image_backend.name, &config.image_backend.params)?
        else {
            unreachable!("image lookup returns an image backend")
        };
        let AnyBackend::Face(face) =
            registry_get(BackendKind::Face, &config.face_backend.name, &config.face_backend.params)?
        else {
            unreachable!("face lookup returns a face backend")
        };
        let AnyBackend::Ocr(ocr) =
            registry_get(BackendKind::Ocr, &config.ocr_backend.name, &config.ocr_backend.params)?
        else {
            unreachable!("ocr lookup returns an ocr backend")
        };
        Ok(Self { text, image, face, ocr })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookups() {
        let empty = Table::new();
        let AnyBackend::Text(t) = registry_get(BackendKind::Text, "mock", &empty).unwrap() else {
            panic!("wrong kind")
        };
        assert_eq!(t.classify("i love it").unwrap(), 0.9);

        let err = registry_get(BackendKind::Text, "nonexistent", &empty).err().unwrap();
        assert_eq!(err.to_string(), "unknown text backend `nonexistent`; registered: bow-linear, mock");
        assert_eq!(err.exit_code(), 1);

        let err = registry_get(BackendKind::Image, "conv-gap", &empty).err().unwrap();
        assert!(err.to_string().contains("`model`"));
    }

    #[test]
    fn scripted_face_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("faces.json");
        fs::write(
            &p,
            r#"{"g": {"0": [{"box": {"x": 0, "y": 0, "width": 20, "height": 20}, "emotions": {"happy": 1.0}}]}}"#,
        )
        .unwrap();
        let mut params = Table::new();
        params.insert("script".into(), toml::Value::String(p.to_string_lossy().into_owned()));
        let AnyBackend::Face(f) = registry_get(BackendKind::Face, "mock", &params).unwrap() else {
            panic!("wrong kind")
        };
        let frame = Raster::filled_rgb(32, 32, [0, 0, 0]);
        let at = FrameRef { gif_id: "g", index: 0, timestamp: 0.0 };
        assert_eq!(f.detect(at, &frame).unwrap().len(), 1);

        fs::write(&p, "not json").unwrap();
        let err = registry_get(BackendKind::Face, "mock", &params).err().unwrap();
        assert_eq!(err.exit_code(), 3);
    }

    struct Exclusive;
    impl TextSentimentBackend for Exclusive {
        fn name(&self) -> &str {
            "exclusive"
        }
        fn classify(&self, _: &str) -> Result<f64, BackendError> {
            Ok(2.0)
        }
        fn concurrent_safe(&self) -> bool {
            false
        }
    }

    #[test]
    fn wrappers_validate_and_serialize() {
        let AnyBackend::Text(t) = text(Exclusive) else { panic!("wrong kind") };
        assert!(matches!(t.classify("x"), Err(BackendError::ContractViolation { .. })));
        let t2 = Arc::clone(&t);
        std::thread::scope(|s| {
            s.spawn(|| t2.classify("a").ok());
            s.spawn(|| t.classify("b").ok());
        });
    }
}
