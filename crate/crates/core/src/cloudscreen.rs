//! Per-tile quality statistics: nodata ratio, QA60 cloud ratio and a
//! brightness/saturation cloud heuristic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tile::{BandRole, Tile};

/// QA60 bit 10: opaque cloud.
pub const QA60_OPAQUE_BIT: u32 = 1 << 10;
/// QA60 bit 11: cirrus.
pub const QA60_CIRRUS_BIT: u32 = 1 << 11;
pub const QA60_CLOUD_BITS: u32 = QA60_OPAQUE_BIT | QA60_CIRRUS_BIT;

const REFLECTANCE_SLACK: f32 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MaskSource {
    Qa60,
    Heuristic,
}

/// Per-pixel cloud flags, row-major `[height, width]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CloudMask {
    pub flags: Vec<bool>,
    pub height: usize,
    pub width: usize,
    pub source: MaskSource,
}

impl CloudMask {
    pub fn new(flags: Vec<bool>, height: usize, width: usize, source: MaskSource) -> Result<Self> {
        if flags.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "{} flags for a {height}x{width} mask",
                flags.len()
            )));
        }
        Ok(CloudMask {
            flags,
            height,
            width,
            source,
        })
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeuristicParams {
    pub score_threshold: f32,
    pub brightness_threshold: f32,
    pub epsilon: f32,
}

impl Default for HeuristicParams {
    fn default() -> Self {
        HeuristicParams {
            score_threshold: 0.65,
            brightness_threshold: 0.35,
            epsilon: 1e-6,
        }
    }
}

impl HeuristicParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.score_threshold > 0.0 && self.score_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "score_threshold {} not in (0, 1]",
                self.score_threshold
            )));
        }
        if !(0.0..=1.0).contains(&self.brightness_threshold) {
            return Err(Error::Config(format!(
                "brightness_threshold {} not in [0, 1]",
                self.brightness_threshold
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon {} must be > 0", self.epsilon)));
        }
        Ok(())
    }

    /// The per-pixel rule: bright and unsaturated means cloud.
    pub fn is_cloudy(&self, r: f32, g: f32, b: f32) -> bool {
        let v = r.max(g).max(b);
        let s = (v - r.min(g).min(b)) / v.max(self.epsilon);
        let score = v - s;
        score > self.score_threshold && v > self.brightness_threshold
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScreenReport {
    pub tile_id: String,
    pub nodata_ratio: f64,
    pub qa60_cloud_ratio: Option<f64>,
    pub heuristic_cloud_ratio: f64,
}

/// Flags pixels whose QA60 word has the opaque-cloud or cirrus bit set.
pub fn decode_qa60(qa60: &Tile) -> Result<CloudMask> {
    qa60.require_roles(&[BandRole::Qa60])?;
    let mut flags = Vec::with_capacity(qa60.pixels());
    for (index, &v) in qa60.data().iter().enumerate() {
        if !(0.0..=65535.0).contains(&v) || v.fract() != 0.0 {
            return Err(Error::OutOfRange {
                value: v as f64,
                index,
                lo: 0.0,
                hi: 65535.0,
            });
        }
        flags.push(v as u32 & QA60_CLOUD_BITS != 0);
    }
    CloudMask::new(flags, qa60.height(), qa60.width(), MaskSource::Qa60)
}

fn nodata_flags(rgb: &Tile) -> Vec<bool> {
    let s = rgb.meta().nodata_sentinel;
    let (r, g, b) = (rgb.band(0), rgb.band(1), rgb.band(2));
    (0..rgb.pixels())
        .map(|i| r[i] == s && g[i] == s && b[i] == s)
        .collect()
}

/// Fraction of pixels whose three bands all equal the nodata sentinel.
pub fn nodata_ratio(rgb: &Tile) -> Result<f64> {
    rgb.require_roles(&BandRole::RGB)?;
    let n = nodata_flags(rgb).into_iter().filter(|&f| f).count();
    Ok(n as f64 / rgb.pixels() as f64)
}

pub fn heuristic_cloud_mask(rgb: &Tile, params: &HeuristicParams) -> Result<CloudMask> {
    rgb.require_roles(&BandRole::RGB)?;
    params.validate()?;
    let lo = -REFLECTANCE_SLACK;
    let hi = 1.0 + REFLECTANCE_SLACK;
    if let Some(index) = rgb.data().iter().position(|v| !(lo..=hi).contains(v)) {
        return Err(Error::OutOfRange {
            value: rgb.data()[index] as f64,
            index,
            lo: lo as f64,
            hi: hi as f64,
        });
    }
    let (r, g, b) = (rgb.band(0), rgb.band(1), rgb.band(2));
    let flags = (0..rgb.pixels())
        .map(|i| params.is_cloudy(r[i], g[i], b[i]))
        .collect();
    CloudMask::new(flags, rgb.height(), rgb.width(), MaskSource::Heuristic)
}

pub fn mask_ratio(mask: &CloudMask) -> f64 {
    if mask.flags.is_empty() {
        return 0.0;
    }
    mask.count() as f64 / mask.flags.len() as f64
}

/// Screens one reflectance-scaled RGB tile and its optional QA60 companion.
///
/// The heuristic ratio is taken over valid (non-nodata) pixels; an entirely
/// nodata tile reports a heuristic ratio of 0.
pub fn screen_tile(
    rgb: &Tile,
    qa60: Option<&Tile>,
    params: &HeuristicParams,
) -> Result<ScreenReport> {
    rgb.require_roles(&BandRole::RGB)?;
    let nodata = nodata_flags(rgb);
    let nodata_count = nodata.iter().filter(|&&f| f).count();
    let pixels = rgb.pixels();

    let qa60_cloud_ratio = match qa60 {
        Some(q) => {
            if q.height() != rgb.height() || q.width() != rgb.width() {
                return Err(Error::ShapeMismatch(format!(
                    "QA60 {}x{} vs RGB {}x{}",
                    q.height(),
                    q.width(),
                    rgb.height(),
                    rgb.width()
                )));
            }
            Some(mask_ratio(&decode_qa60(q)?))
        }
        None => None,
    };

    let mask = heuristic_cloud_mask(rgb, params)?;
    let heuristic_cloud_ratio = if nodata_count == pixels {
        0.0
    } else {
        let cloudy = mask
            .flags
            .iter()
            .zip(&nodata)
            .filter(|&(&c, &nd)| c && !nd)
            .count();
        cloudy as f64 / (pixels - nodata_count) as f64
    };

    Ok(ScreenReport {
        tile_id: rgb.tile_id().to_string(),
        nodata_ratio: nodata_count as f64 / pixels as f64,
        qa60_cloud_ratio,
        heuristic_cloud_ratio,
    })
}
