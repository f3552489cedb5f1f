//! `report.json` plus two PNG bar charts.
//!
//! The JSON is the contract: keys are sorted and every float is rounded to
//! nine significant digits, so reruns are byte-identical. Charts are plain
//! bars with no text; read the numbers from the JSON.

use std::fs;
use std::path::{Path, PathBuf};

use gifsent_core::analytics::AnalysisReport;
use image::{Rgb, RgbImage};
use serde_json::{Number, Value};

use crate::error::{Error, Result};

pub const REPORT_FILE: &str = "report.json";
pub const SENTIMENT_CHART: &str = "sentiment_distribution.png";
pub const COMBINATION_CHART: &str = "combination_distribution.png";

const CHART_WIDTH: u32 = 400;
const CHART_HEIGHT: u32 = 240;
const MARGIN: u32 = 20;
const POSITIVE: Rgb<u8> = Rgb([46, 139, 87]);
const NEGATIVE: Rgb<u8> = Rgb([178, 34, 34]);

/// Rounds to nine significant digits.
pub fn round_sig9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig9(n.as_f64().unwrap_or(0.0));
            *v = Number::from_f64(x).map_or(Value::Null, Value::Number);
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

/// Canonical JSON text of a report.
pub fn report_json(report: &AnalysisReport) -> Result<String> {
    let mut v = serde_json::to_value(report).map_err(|e| Error::Data(e.to_string()))?;
    round_floats(&mut v);
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::Data(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Bar heights for the two charts, read back from report JSON.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartData {
    /// perceived +, perceived -, induced +, induced - (fractions).
    pub sentiment: [f64; 4],
    /// (P+,I+), (P+,I-), (P-,I+), (P-,I-) counts.
    pub combinations: [f64; 4],
}

impl ChartData {
    pub fn from_json(v: &Value) -> Result<Self> {
        let num = |section: &str, key: &str| -> Result<f64> {
            match v.get(section) {
                Some(Value::Null) | None if section == "sentiment_distribution" => Ok(0.0),
                Some(s) => s.get(key).and_then(Value::as_f64).ok_or_else(|| {
                    Error::Data(format!("report is missing `{section}.{key}`"))
                }),
                None => Err(Error::Data(format!("report is missing `{section}`"))),
            }
        };
        let sd = "sentiment_distribution";
        let cm = "combination_matrix";
        Ok(Self {
            sentiment: [
                num(sd, "perceived_positive")?,
                num(sd, "perceived_negative")?,
                num(sd, "induced_positive")?,
                num(sd, "induced_negative")?,
            ],
            combinations: [
                num(cm, "perceived_pos_induced_pos")?,
                num(cm, "perceived_pos_induced_neg")?,
                num(cm, "perceived_neg_induced_pos")?,
                num(cm, "perceived_neg_induced_neg")?,
            ],
        })
    }
}

/// Draws bars scaled to the largest value (or to 1 when all are zero).
pub fn render_bars(values: &[f64], colors: &[Rgb<u8>]) -> RgbImage {
    let mut img = RgbImage::from_pixel(CHART_WIDTH, CHART_HEIGHT, Rgb([255, 255, 255]));
    let base = CHART_HEIGHT - MARGIN;
    for x in MARGIN..CHART_WIDTH - MARGIN {
        img.put_pixel(x, base, Rgb([0, 0, 0]));
    }
    if values.is_empty() {
        return img;
    }
    let max = values.iter().cloned().fold(0.0f64, f64::max);
    let scale = if max > 0.0 { max } else { 1.0 };
    let slot = (CHART_WIDTH - 2 * MARGIN) / values.len() as u32;
    let usable = (base - MARGIN) as f64;
    for (i, &v) in values.iter().enumerate() {
        let h = ((v.max(0.0) / scale) * usable).round() as u32;
        let x0 = MARGIN + i as u32 * slot + slot / 5;
        let x1 = MARGIN + (i as u32 + 1) * slot - slot / 5;
        let color = colors[i % colors.len()];
        for x in x0..x1 {
            for y in base - h..base {
                img.put_pixel(x, y, color);
            }
        }
    }
    img
}

fn save_png(img: &RgbImage, path: &Path) -> Result<()> {
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))
}

/// Renders both charts into `out_dir`; returns their paths.
pub fn render_charts(data: &ChartData, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let sentiment = out_dir.join(SENTIMENT_CHART);
    save_png(&render_bars(&data.sentiment, &[POSITIVE, NEGATIVE]), &sentiment)?;
    let combos = out_dir.join(COMBINATION_CHART);
    let agree = Rgb([70, 130, 180]);
    let oppose = Rgb([255, 140, 0]);
    save_png(&render_bars(&data.combinations, &[agree, oppose, oppose, agree]), &combos)?;
    Ok(vec![sentiment, combos])
}

/// Writes `report.json` and both charts; returns the three paths.
pub fn emit_report(report: &AnalysisReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let json = report_json(report)?;
    let path = out_dir.join(REPORT_FILE);
    fs::write(&path, &json).map_err(|e| Error::io(&path, e))?;
    let value: Value = serde_json::from_str(&json).map_err(|e| Error::Data(e.to_string()))?;
    let mut manifest = vec![path];
    manifest.extend(render_charts(&ChartData::from_json(&value)?, out_dir)?);
    Ok(manifest)
}

/// Re-renders the charts from an existing `report.json`.
pub fn rerender(out_dir: &Path) -> Result<Vec<PathBuf>> {
    let path = out_dir.join(REPORT_FILE);
    let body = fs::read(&path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::Config(format!("{} not found; run `gifsent analyze` first", path.display()))
        } else {
            Error::io(&path, e)
        }
    })?;
    let value: Value = serde_json::from_slice(&body)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut manifest = vec![path];
    manifest.extend(render_charts(&ChartData::from_json(&value)?, out_dir)?);
    Ok(manifest)
}
