//! Scoring, late fusion and corpus analytics for reaction-GIF sentiment.
//!
//! This crate is `no_std` (it needs `alloc`). Everything that touches the
//! filesystem, decodes media or talks to a model runtime lives in the
//! `gifsent` crate; here we only deal with in-memory rasters, strings and
//! the backend contracts.
//!
//! The pipeline for one GIF is:
//!
//! 1. sample frames at a constant period ([`frames`]),
//! 2. score every frame with an image backend and average ([`image_sentiment`]),
//! 3. detect faces, map six-emotion distributions to polarity and average ([`face`]),
//! 4. OCR the burned-in caption and score it as text ([`caption`]),
//! 5. average whatever modules are available ([`fusion`]).
//!
//! Tweet text goes through [`text`] and feeds the perceived-vs-induced
//! statistics in [`analytics`].
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analytics;
pub mod backends;
pub mod caption;
pub mod corpus;
pub mod face;
pub mod frames;
pub mod fusion;
pub mod image_sentiment;
pub mod raster;
mod score;
pub mod text;
pub mod train;

pub use score::{Modality, ModuleScore};
