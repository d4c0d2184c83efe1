use rayon::prelude::*;
use sar2rgb_core::curation::{model_to_rgb, normalize_s1};
use sar2rgb_core::{Planes, Tile};
use sar2rgb_sargen::{Generator, Tensor};

use crate::error::Result;

/// Translates one SAR tile (dB) into an RGB reflectance tile with the same id
/// and date.
pub fn infer_tile(gen: &Generator<f32>, s1: &Tile) -> Result<Tile> {
    let x = normalize_s1(s1)?;
    let [c, h, w] = x.shape();
    let y = gen.generate(&Tensor::from_vec([1, c, h, w], x.into_data())?)?;
    let planes = Planes::new(y.into_data(), 3, h, w)?;
    Ok(model_to_rgb(&planes, s1.meta().clone())?)
}

/// Per-tile inference; tiles are independent, so they run in parallel.
pub fn infer(gen: &Generator<f32>, tiles: &[Tile]) -> Result<Vec<Tile>> {
    tiles.par_iter().map(|t| infer_tile(gen, t)).collect()
}
