use sar2rgb_core::curation::{normalize_s1, normalize_s2_reflectance, rgb_to_model, PairRecord};
use sar2rgb_core::{read_tile, Planes, Tile};

use crate::error::Result;

/// One co-registered training pair in model space (`[-1, 1]`).
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub pair_id: String,
    /// `[2, S, S]`, VV then VH.
    pub sar: Planes,
    /// `[3, S, S]`, red, green, blue.
    pub optical: Planes,
}

impl Sample {
    /// Builds a sample from a SAR tile in dB and an optical tile in digital numbers.
    pub fn from_tiles(pair_id: impl Into<String>, s1_db: &Tile, s2_raw: &Tile) -> Result<Self> {
        Ok(Sample {
            pair_id: pair_id.into(),
            sar: normalize_s1(s1_db)?,
            optical: rgb_to_model(&normalize_s2_reflectance(s2_raw)?)?,
        })
    }
}

/// Reads both tiles of every pair: SAR in dB and optical in digital numbers.
pub fn load_samples(pairs: &[PairRecord]) -> Result<Vec<Sample>> {
    pairs
        .iter()
        .map(|p| {
            Sample::from_tiles(
                p.pair_id.clone(),
                &read_tile(&p.s1_path)?,
                &read_tile(&p.s2_path)?,
            )
        })
        .collect()
}
