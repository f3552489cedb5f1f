//! Constant-period frame sampling over a decoded GIF timeline.
//!
//! Decoding happens elsewhere; this module receives the decoded frames with
//! their start times and picks, for every sample time `k * period`, the last
//! decoded frame that starts at or before it. No interpolation.

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::raster::Raster;

/// Default sampling period in seconds.
pub const DEFAULT_PERIOD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrameError {
    #[error("sampling period must be positive and finite, got {0}")]
    BadPeriod(f64),
    #[error("empty media")]
    EmptyMedia,
    #[error("decode failure: {0}")]
    Decode(String),
}

/// One decoded animation frame and the time it becomes visible.
#[derive(Debug, Clone)]
pub struct TimedRaster {
    pub start: f64,
    pub image: Raster,
}

#[derive(Debug, Clone)]
pub struct Frame {
    pub index: usize,
    pub timestamp: f64,
    pub image: Raster,
}

/// Frames sampled from one GIF. Immutable once built.
#[derive(Debug, Clone)]
pub struct FrameSet {
    gif_id: String,
    frames: Vec<Frame>,
    period: f64,
    duration: f64,
}

impl FrameSet {
    /// Samples `timeline` at `t = k * period` for every `t < duration`.
    ///
    /// `timeline` must be ordered by start time. A first frame that starts
    /// after zero is treated as visible from zero.
    pub fn sample(
        gif_id: impl Into<String>,
        timeline: &[TimedRaster],
        duration: f64,
        period: f64,
    ) -> Result<Self, FrameError> {
        if timeline.is_empty() {
            return Err(FrameError::EmptyMedia);
        }
        let times = sample_times(duration, period)?;
        let mut frames = Vec::with_capacity(times.len());
        let mut cursor = 0;
        for (index, t) in times.into_iter().enumerate() {
            while cursor + 1 < timeline.len() && at_or_before(timeline[cursor + 1].start, t) {
                cursor += 1;
            }
            frames.push(Frame {
                index,
                timestamp: t,
                image: timeline[cursor].image.clone(),
            });
        }
        Ok(Self {
            gif_id: gif_id.into(),
            frames,
            period,
            duration,
        })
    }

    /// Wraps already-sampled rasters, assigning `timestamp = k * period`.
    pub fn from_rasters(
        gif_id: impl Into<String>,
        rasters: Vec<Raster>,
        period: f64,
    ) -> Result<Self, FrameError> {
        check_period(period)?;
        if rasters.is_empty() {
            return Err(FrameError::EmptyMedia);
        }
        let duration = rasters.len() as f64 * period;
        let frames = rasters
            .into_iter()
            .enumerate()
            .map(|(index, image)| Frame {
                index,
                timestamp: index as f64 * period,
                image,
            })
            .collect();
        Ok(Self {
            gif_id: gif_id.into(),
            frames,
            period,
            duration,
        })
    }

    pub fn gif_id(&self) -> &str {
        &self.gif_id
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn timestamps(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.timestamp).collect()
    }
}

/// Sample times `k * period` for `k = 0, 1, ...` while strictly below
/// `duration`. `k = 0` is always included.
///
/// A product within 1e-9 (relative) of `duration` counts as equal, so
/// `3.0 s / 0.1 s` yields 30 samples despite `30 * 0.1` rounding either way.
pub fn sample_times(duration: f64, period: f64) -> Result<Vec<f64>, FrameError> {
    check_period(period)?;
    if !duration.is_finite() || duration <= 0.0 {
        return Err(FrameError::EmptyMedia);
    }
    let tol = 1e-9 * duration.max(1.0);
    let mut out = Vec::new();
    let mut k: u64 = 0;
    loop {
        let t = k as f64 * period;
        if k > 0 && t >= duration - tol {
            break;
        }
        out.push(t);
        k += 1;
    }
    Ok(out)
}

fn check_period(period: f64) -> Result<(), FrameError> {
    if period > 0.0 && period.is_finite() {
        Ok(())
    } else {
        Err(FrameError::BadPeriod(period))
    }
}

fn at_or_before(start: f64, t: f64) -> bool {
    start <= t + 1e-9 * t.max(1.0)
}
