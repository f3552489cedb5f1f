//! File formats, media decoding, backend registry and pipeline stages for
//! reaction-GIF sentiment analysis. The algorithms live in `gifsent-core`;
//! this crate does the IO around them.
//!
//! Stages and their files (all under `out_dir` unless noted):
//!
//! | stage            | reads                          | writes                                   |
//! |------------------|--------------------------------|------------------------------------------|
//! | `ingest`         | `corpus_path` (JSONL or CSV)   | `corpus.jsonl`, `corpus.jsonl.rejects.jsonl` |
//! | `fetch-media`    | `corpus.jsonl`, `cache_dir`    | `corpus.jsonl` with media resolved       |
//! | `extract-frames` | `corpus.jsonl`, media          | `cache_dir/<gif_id>/frame_NNNN.jpg`      |
//! | `score`          | `corpus.jsonl`, media          | `scores.jsonl`, `scores.skipped.jsonl`   |
//! | `analyze`        | `corpus.jsonl`, `scores.jsonl` | `report.json`, two PNG charts            |

pub mod config;
pub mod corpus_io;
pub mod error;
pub mod media;
pub mod pipeline;
pub mod registry;
pub mod report;
pub mod training;

pub use config::PipelineConfig;
pub use error::{Error, Result};
