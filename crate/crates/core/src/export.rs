use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tile::{BandRole, Tile};

/// Slack allowed on the `[0, 1]` range before a value is rejected.
pub const RANGE_SLACK: f32 = 1e-6;

/// Quantizes a `[0, 1]` value to a byte with round-half-up.
pub fn quantize_u8(v: f32) -> u8 {
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

pub(crate) fn check_unit_range(values: &[f32]) -> Result<()> {
    let lo = -RANGE_SLACK;
    let hi = 1.0 + RANGE_SLACK;
    match values.iter().position(|&v| !(lo..=hi).contains(&v)) {
        Some(index) => Err(Error::OutOfRange {
            value: values[index] as f64,
            index,
            lo: lo as f64,
            hi: hi as f64,
        }),
        None => Ok(()),
    }
}

/// Interleaved 8-bit RGB bytes for an RGB reflectance tile.
pub fn rgb8_bytes(tile: &Tile) -> Result<Vec<u8>> {
    tile.require_roles(&BandRole::RGB)?;
    check_unit_range(tile.data())?;
    let (r, g, b) = (tile.band(0), tile.band(1), tile.band(2));
    let mut out = Vec::with_capacity(tile.pixels() * 3);
    for i in 0..tile.pixels() {
        out.push(quantize_u8(r[i]));
        out.push(quantize_u8(g[i]));
        out.push(quantize_u8(b[i]));
    }
    Ok(out)
}

/// Writes an RGB reflectance tile as an 8-bit PNG.
pub fn export_png(tile: &Tile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = rgb8_bytes(tile)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(
        BufWriter::new(file),
        tile.width() as u32,
        tile.height() as u32,
    );
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    let png_err = |e: png::EncodingError| Error::External {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut writer = encoder.write_header().map_err(png_err)?;
    writer.write_image_data(&bytes).map_err(png_err)?;
    writer.finish().map_err(png_err)
}
