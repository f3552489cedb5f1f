//! Minimal interleaved 8-bit rasters plus the two pixel transforms the
//! pipeline needs: the model-input resize and BT.601 grayscale.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

/// Side length of the square input the image backends consume.
pub const MODEL_INPUT_SIDE: u32 = 48;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RasterError {
    #[error("channel mismatch: expected {expected}, got {actual}")]
    ChannelMismatch { expected: u8, actual: u8 },
    #[error("buffer length {len} does not match {width}x{height}x{channels}")]
    BadLength {
        width: u32,
        height: u32,
        channels: u8,
        len: usize,
    },
    #[error("empty raster")]
    Empty,
    #[error("target side must be positive")]
    ZeroSide,
    #[error("crop {x},{y} {width}x{height} outside {frame_width}x{frame_height} frame")]
    CropOutOfBounds {
        x: u32,
        y: u32,
        width: u32,
        height: u32,
        frame_width: u32,
        frame_height: u32,
    },
}

/// Row-major, channel-interleaved 8-bit image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    width: u32,
    height: u32,
    channels: u8,
    data: Vec<u8>,
}

impl Raster {
    pub fn new(width: u32, height: u32, channels: u8, data: Vec<u8>) -> Result<Self, RasterError> {
        let expected = width as usize * height as usize * channels as usize;
        if channels == 0 || data.len() != expected {
            return Err(RasterError::BadLength {
                width,
                height,
                channels,
                len: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn rgb(width: u32, height: u32, data: Vec<u8>) -> Result<Self, RasterError> {
        Self::new(width, height, 3, data)
    }

    pub fn gray(width: u32, height: u32, data: Vec<u8>) -> Result<Self, RasterError> {
        Self::new(width, height, 1, data)
    }

    /// A `width`x`height` RGB raster filled with one colour.
    pub fn filled_rgb(width: u32, height: u32, pixel: [u8; 3]) -> Self {
        let n = width as usize * height as usize;
        let mut data = Vec::with_capacity(n * 3);
        for _ in 0..n {
            data.extend_from_slice(&pixel);
        }
        Self {
            width,
            height,
            channels: 3,
            data,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn is_empty(&self) -> bool {
        self.width == 0 || self.height == 0
    }

    pub fn pixel(&self, x: u32, y: u32) -> &[u8] {
        let c = self.channels as usize;
        let i = (y as usize * self.width as usize + x as usize) * c;
        &self.data[i..i + c]
    }

    pub fn crop(&self, x: u32, y: u32, width: u32, height: u32) -> Result<Raster, RasterError> {
        let fits = x.checked_add(width).is_some_and(|r| r <= self.width)
            && y.checked_add(height).is_some_and(|b| b <= self.height);
        if !fits {
            return Err(RasterError::CropOutOfBounds {
                x,
                y,
                width,
                height,
                frame_width: self.width,
                frame_height: self.height,
            });
        }
        let c = self.channels as usize;
        let mut data = Vec::with_capacity(width as usize * height as usize * c);
        for row in y..y + height {
            let start = (row as usize * self.width as usize + x as usize) * c;
            data.extend_from_slice(&self.data[start..start + width as usize * c]);
        }
        Ok(Raster {
            width,
            height,
            channels: self.channels,
            data,
        })
    }
}

/// BT.601 luma, `0.299 R + 0.587 G + 0.114 B`, rounded half up.
///
/// Done in integer arithmetic so the result is exact on every platform.
pub fn to_grayscale(frame: &Raster) -> Result<Raster, RasterError> {
    if frame.channels != 3 {
        return Err(RasterError::ChannelMismatch {
            expected: 3,
            actual: frame.channels,
        });
    }
    let data = frame
        .data
        .chunks_exact(3)
        .map(|p| {
            let weighted = 299 * p[0] as u32 + 587 * p[1] as u32 + 114 * p[2] as u32;
            ((weighted + 500) / 1000) as u8
        })
        .collect();
    Ok(Raster {
        width: frame.width,
        height: frame.height,
        channels: 1,
        data,
    })
}

/// Bilinear resize to `side`x`side`, ignoring aspect ratio.
///
/// Uses half-pixel centres with edge clamping, so a same-size input comes
/// back unchanged and a 1x1 input is extended to a constant raster.
pub fn resize_for_model(frame: &Raster, side: u32) -> Result<Raster, RasterError> {
    if side == 0 {
        return Err(RasterError::ZeroSide);
    }
    if frame.is_empty() {
        return Err(RasterError::Empty);
    }
    if frame.width == side && frame.height == side {
        return Ok(frame.clone());
    }
    let c = frame.channels as usize;
    let xs = axis_weights(frame.width, side);
    let ys = axis_weights(frame.height, side);
    let mut data = vec![0u8; side as usize * side as usize * c];
    for (oy, &(y0, y1, wy)) in ys.iter().enumerate() {
        for (ox, &(x0, x1, wx)) in xs.iter().enumerate() {
            let p00 = frame.pixel(x0, y0);
            let p10 = frame.pixel(x1, y0);
            let p01 = frame.pixel(x0, y1);
            let p11 = frame.pixel(x1, y1);
            let out = (oy * side as usize + ox) * c;
            for ch in 0..c {
                let top = p00[ch] as f64 * (1.0 - wx) + p10[ch] as f64 * wx;
                let bottom = p01[ch] as f64 * (1.0 - wx) + p11[ch] as f64 * wx;
                let v = top * (1.0 - wy) + bottom * wy;
                data[out + ch] = (v.clamp(0.0, 255.0) + 0.5) as u8;
            }
        }
    }
    Ok(Raster {
        width: side,
        height: side,
        channels: frame.channels,
        data,
    })
}

// (lower index, upper index, weight of upper) per output coordinate
fn axis_weights(src: u32, dst: u32) -> Vec<(u32, u32, f64)> {
    let scale = src as f64 / dst as f64;
    let max = (src - 1) as f64;
    (0..dst)
        .map(|o| {
            let pos = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, max);
            let lo = libm::floor(pos);
            let hi = if lo < max { lo + 1.0 } else { lo };
            (lo as u32, hi as u32, pos - lo)
        })
        .collect()
}
