//! Adapter from external rasters (baseline/Geo TIFF) into [`Tile`]s.
//!
//! Stored sample values are copied verbatim into `f32`; unit conversion is a
//! curation concern.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use tiff::decoder::{Decoder, DecodingResult};
use tiff::encoder::colortype::ColorType;
use tiff::encoder::TiffEncoder;
use tiff::tags::{PhotometricInterpretation, SampleFormat};

use crate::error::{Error, Result};
use crate::tile::{roles_to_string, BandRole, Sensor, Tile, TileMeta};

fn external(path: &Path, message: impl ToString) -> Error {
    Error::External {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

fn to_f32(result: DecodingResult) -> Vec<f32> {
    match result {
        DecodingResult::U8(v) => v.into_iter().map(f32::from).collect(),
        DecodingResult::U16(v) => v.into_iter().map(f32::from).collect(),
        DecodingResult::U32(v) => v.into_iter().map(|x| x as f32).collect(),
        DecodingResult::U64(v) => v.into_iter().map(|x| x as f32).collect(),
        DecodingResult::F16(v) => v.into_iter().map(f32::from).collect(),
        DecodingResult::F32(v) => v,
        DecodingResult::F64(v) => v.into_iter().map(|x| x as f32).collect(),
        DecodingResult::I8(v) => v.into_iter().map(f32::from).collect(),
        DecodingResult::I16(v) => v.into_iter().map(f32::from).collect(),
        DecodingResult::I32(v) => v.into_iter().map(|x| x as f32).collect(),
        DecodingResult::I64(v) => v.into_iter().map(|x| x as f32).collect(),
    }
}

/// Reads the first image of a TIFF file into a tile with the given band roles.
///
/// The tile id is the file stem; the sensor is inferred from the band layout.
pub fn ingest_external(path: impl AsRef<Path>, band_spec: &[BandRole]) -> Result<Tile> {
    let path = path.as_ref();
    let sensor = Sensor::for_roles(band_spec).ok_or_else(|| {
        Error::Config(format!(
            "band spec {} is not one of [VV, VH], [RED, GREEN, BLUE], [QA60]",
            roles_to_string(band_spec)
        ))
    })?;
    let tile_id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| external(path, "file name is not valid UTF-8"))?
        .to_string();

    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut decoder = Decoder::new(BufReader::new(file)).map_err(|e| external(path, e))?;
    let (width, height) = decoder.dimensions().map_err(|e| external(path, e))?;
    let colortype = decoder.colortype().map_err(|e| external(path, e))?;
    let samples = colortype.num_samples() as usize;
    if samples != band_spec.len() {
        return Err(Error::BandRoles {
            expected: roles_to_string(band_spec),
            found: format!("{samples} band(s) in source"),
        });
    }
    let interleaved = to_f32(decoder.read_image().map_err(|e| external(path, e))?);
    let (h, w) = (height as usize, width as usize);
    let pixels = h * w;
    if interleaved.len() != pixels * samples {
        return Err(external(
            path,
            format!(
                "expected {} interleaved samples, decoded {} (planar layouts are not supported)",
                pixels * samples,
                interleaved.len()
            ),
        ));
    }
    let mut data = vec![0f32; pixels * samples];
    for (i, px) in interleaved.chunks_exact(samples).enumerate() {
        for (b, &v) in px.iter().enumerate() {
            data[b * pixels + i] = v;
        }
    }
    Tile::new(data, band_spec.to_vec(), h, w, TileMeta::new(tile_id, sensor))
}

struct Float32Bands<const N: usize>;

impl<const N: usize> ColorType for Float32Bands<N> {
    type Inner = f32;
    const TIFF_VALUE: PhotometricInterpretation = PhotometricInterpretation::BlackIsZero;
    const BITS_PER_SAMPLE: &'static [u16] = &[32; N];
    const SAMPLE_FORMAT: &'static [SampleFormat] = &[SampleFormat::IEEEFP; N];

    fn horizontal_predict(row: &[f32], result: &mut Vec<f32>) {
        result.extend_from_slice(row);
    }
}

/// Writes a tile as a chunky float32 TIFF with one sample per band.
///
/// Used to produce ingestion fixtures; supports 1 to 3 bands.
pub fn write_tiff(tile: &Tile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let pixels = tile.pixels();
    let bands = tile.bands();
    let mut interleaved = vec![0f32; pixels * bands];
    for b in 0..bands {
        for (i, &v) in tile.band(b).iter().enumerate() {
            interleaved[i * bands + b] = v;
        }
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = TiffEncoder::new(BufWriter::new(file)).map_err(|e| external(path, e))?;
    let (w, h) = (tile.width() as u32, tile.height() as u32);
    match bands {
        1 => encoder.write_image::<Float32Bands<1>>(w, h, &interleaved),
        2 => encoder.write_image::<Float32Bands<2>>(w, h, &interleaved),
        3 => encoder.write_image::<Float32Bands<3>>(w, h, &interleaved),
        n => return Err(external(path, format!("cannot write {n}-band TIFF"))),
    }
    .map_err(|e| external(path, e))
}
