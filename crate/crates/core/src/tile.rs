//! Tile data model and the portable `S2TL` container.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic "S2TL" | version u8 | sensor u8 | band_count u16 | height u32 | width u32
//! | nodata_sentinel f32 | tile_id_len u16 | tile_id | date_len u16 | date
//! | band_roles [u8; band_count] | payload f32, band-major then row-major
//! ```

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TILE_MAGIC: [u8; 4] = *b"S2TL";
pub const TILE_FORMAT_VERSION: u8 = 1;
/// Extension used for tiles on disk.
pub const TILE_EXTENSION: &str = "s2tl";

/// Largest value a QA60 sample may take (16-bit field).
pub const QA60_MAX: f32 = 65535.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BandRole {
    Vv,
    Vh,
    Red,
    Green,
    Blue,
    Qa60,
}

impl BandRole {
    pub const SAR: [BandRole; 2] = [BandRole::Vv, BandRole::Vh];
    pub const RGB: [BandRole; 3] = [BandRole::Red, BandRole::Green, BandRole::Blue];

    pub fn code(self) -> u8 {
        match self {
            BandRole::Vv => 0,
            BandRole::Vh => 1,
            BandRole::Red => 2,
            BandRole::Green => 3,
            BandRole::Blue => 4,
            BandRole::Qa60 => 5,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => BandRole::Vv,
            1 => BandRole::Vh,
            2 => BandRole::Red,
            3 => BandRole::Green,
            4 => BandRole::Blue,
            5 => BandRole::Qa60,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            BandRole::Vv => "VV",
            BandRole::Vh => "VH",
            BandRole::Red => "RED",
            BandRole::Green => "GREEN",
            BandRole::Blue => "BLUE",
            BandRole::Qa60 => "QA60",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Some(match name.trim().to_ascii_uppercase().as_str() {
            "VV" => BandRole::Vv,
            "VH" => BandRole::Vh,
            "RED" | "R" => BandRole::Red,
            "GREEN" | "G" => BandRole::Green,
            "BLUE" | "B" => BandRole::Blue,
            "QA60" => BandRole::Qa60,
            _ => return None,
        })
    }
}

impl fmt::Display for BandRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub(crate) fn roles_to_string(roles: &[BandRole]) -> String {
    let names: Vec<_> = roles.iter().map(|r| r.name()).collect();
    format!("[{}]", names.join(", "))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Sensor {
    S1,
    S2,
    Qa60,
}

impl Sensor {
    pub fn code(self) -> u8 {
        match self {
            Sensor::S1 => 0,
            Sensor::S2 => 1,
            Sensor::Qa60 => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => Sensor::S1,
            1 => Sensor::S2,
            2 => Sensor::Qa60,
            _ => return None,
        })
    }

    /// Sensor implied by a band layout, if the layout is one of the canonical ones.
    pub fn for_roles(roles: &[BandRole]) -> Option<Self> {
        if roles == BandRole::SAR {
            Some(Sensor::S1)
        } else if roles == BandRole::RGB {
            Some(Sensor::S2)
        } else if roles == [BandRole::Qa60] {
            Some(Sensor::Qa60)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TileMeta {
    pub tile_id: String,
    /// ISO-8601 date (`YYYY-MM-DD`) or empty.
    pub acquired_date: String,
    pub sensor: Sensor,
    pub nodata_sentinel: f32,
}

impl TileMeta {
    pub fn new(tile_id: impl Into<String>, sensor: Sensor) -> Self {
        TileMeta {
            tile_id: tile_id.into(),
            acquired_date: String::new(),
            sensor,
            nodata_sentinel: 0.0,
        }
    }

    pub fn with_date(mut self, date: impl Into<String>) -> Self {
        self.acquired_date = date.into();
        self
    }

    pub fn validate(&self) -> Result<()> {
        validate_tile_id(&self.tile_id)?;
        if !self.nodata_sentinel.is_finite() {
            return Err(Error::InvalidTile("nodata sentinel must be finite".into()));
        }
        Ok(())
    }
}

pub fn validate_tile_id(id: &str) -> Result<()> {
    if id.is_empty() {
        return Err(Error::InvalidTile("tile_id is empty".into()));
    }
    if id.contains(['/', '\\']) || id == "." || id == ".." {
        return Err(Error::InvalidTile(format!(
            "tile_id {id:?} contains a path separator"
        )));
    }
    Ok(())
}

/// A multi-band float raster, `[bands, height, width]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tile {
    pub(crate) data: Vec<f32>,
    pub(crate) band_roles: Vec<BandRole>,
    pub(crate) height: usize,
    pub(crate) width: usize,
    pub(crate) meta: TileMeta,
}

impl Tile {
    pub fn new(
        data: Vec<f32>,
        band_roles: Vec<BandRole>,
        height: usize,
        width: usize,
        meta: TileMeta,
    ) -> Result<Self> {
        let tile = Tile {
            data,
            band_roles,
            height,
            width,
            meta,
        };
        tile.validate()?;
        Ok(tile)
    }

    /// Tile filled with a constant value.
    pub fn filled(
        value: f32,
        band_roles: Vec<BandRole>,
        height: usize,
        width: usize,
        meta: TileMeta,
    ) -> Result<Self> {
        let n = band_roles.len() * height * width;
        Tile::new(vec![value; n], band_roles, height, width, meta)
    }

    pub fn validate(&self) -> Result<()> {
        self.meta.validate()?;
        if self.band_roles.is_empty() {
            return Err(Error::InvalidTile("tile has no bands".into()));
        }
        if self.band_roles.len() > u16::MAX as usize {
            return Err(Error::InvalidTile("too many bands".into()));
        }
        if self.height == 0 || self.width == 0 {
            return Err(Error::InvalidTile(format!(
                "degenerate dimensions {}x{}",
                self.height, self.width
            )));
        }
        if self.height > u32::MAX as usize || self.width > u32::MAX as usize {
            return Err(Error::InvalidTile("dimensions exceed u32".into()));
        }
        let expected = self.band_roles.len() * self.height * self.width;
        if self.data.len() != expected {
            return Err(Error::InvalidTile(format!(
                "band mismatch: {} band roles x {}x{} needs {} values, data holds {}",
                self.band_roles.len(),
                self.height,
                self.width,
                expected,
                self.data.len()
            )));
        }
        if let Some(i) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidTile(format!("non-finite value at index {i}")));
        }
        if self.band_roles.contains(&BandRole::Qa60) {
            if self.band_roles.len() != 1 {
                return Err(Error::InvalidTile(
                    "QA60 tiles carry exactly one band".into(),
                ));
            }
            if let Some(i) = self
                .data
                .iter()
                .position(|&v| v < 0.0 || v > QA60_MAX || v.fract() != 0.0)
            {
                return Err(Error::InvalidTile(format!(
                    "QA60 value {} at index {i} is not a 16-bit integer",
                    self.data[i]
                )));
            }
        }
        Ok(())
    }

    pub fn bands(&self) -> usize {
        self.band_roles.len()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn band_roles(&self) -> &[BandRole] {
        &self.band_roles
    }

    pub fn meta(&self) -> &TileMeta {
        &self.meta
    }

    pub fn tile_id(&self) -> &str {
        &self.meta.tile_id
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn band(&self, index: usize) -> &[f32] {
        let n = self.pixels();
        &self.data[index * n..(index + 1) * n]
    }

    pub fn get(&self, band: usize, row: usize, col: usize) -> f32 {
        self.data[(band * self.height + row) * self.width + col]
    }

    /// Same tile with a different id, e.g. when re-keying predictions by pair id.
    pub fn with_tile_id(mut self, tile_id: impl Into<String>) -> Result<Self> {
        self.meta.tile_id = tile_id.into();
        self.meta.validate()?;
        Ok(self)
    }

    pub fn require_roles(&self, expected: &[BandRole]) -> Result<()> {
        if self.band_roles != expected {
            return Err(Error::BandRoles {
                expected: roles_to_string(expected),
                found: roles_to_string(&self.band_roles),
            });
        }
        Ok(())
    }

    pub fn same_shape(&self, other: &Tile) -> bool {
        self.band_roles.len() == other.band_roles.len()
            && self.height == other.height
            && self.width == other.width
    }

    /// Bitwise equality of data and metadata (distinguishes `-0.0` from `0.0`).
    pub fn bit_identical(&self, other: &Tile) -> bool {
        self.band_roles == other.band_roles
            && self.height == other.height
            && self.width == other.width
            && self.meta.tile_id == other.meta.tile_id
            && self.meta.acquired_date == other.meta.acquired_date
            && self.meta.sensor == other.meta.sensor
            && self.meta.nodata_sentinel.to_bits() == other.meta.nodata_sentinel.to_bits()
            && self.data.len() == other.data.len()
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Serializes a tile into the `S2TL` byte layout.
pub fn encode_tile(tile: &Tile) -> Result<Vec<u8>> {
    tile.validate()?;
    let id = tile.meta.tile_id.as_bytes();
    let date = tile.meta.acquired_date.as_bytes();
    if id.len() > u16::MAX as usize || date.len() > u16::MAX as usize {
        return Err(Error::InvalidTile("metadata string too long".into()));
    }
    let mut out = Vec::with_capacity(
        header_len(id.len(), date.len(), tile.bands()) + tile.data.len() * 4,
    );
    out.extend_from_slice(&TILE_MAGIC);
    out.push(TILE_FORMAT_VERSION);
    out.push(tile.meta.sensor.code());
    out.extend_from_slice(&(tile.bands() as u16).to_le_bytes());
    out.extend_from_slice(&(tile.height as u32).to_le_bytes());
    out.extend_from_slice(&(tile.width as u32).to_le_bytes());
    out.extend_from_slice(&tile.meta.nodata_sentinel.to_le_bytes());
    out.extend_from_slice(&(id.len() as u16).to_le_bytes());
    out.extend_from_slice(id);
    out.extend_from_slice(&(date.len() as u16).to_le_bytes());
    out.extend_from_slice(date);
    out.extend(tile.band_roles.iter().map(|r| r.code()));
    for v in &tile.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

fn header_len(id_len: usize, date_len: usize, bands: usize) -> usize {
    4 + 1 + 1 + 2 + 4 + 4 + 4 + 2 + id_len + 2 + date_len + bands
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Truncated {
                declared: end as u64,
                available: self.bytes.len() as u64,
            });
        }
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u16()? as usize;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec())
            .map_err(|_| Error::InvalidTile("metadata string is not UTF-8".into()))
    }
}

/// Parses the `S2TL` byte layout.
pub fn decode_tile(bytes: &[u8]) -> Result<Tile> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic: [u8; 4] = match cur.take(4) {
        Ok(m) => m.try_into().unwrap(),
        Err(_) => {
            let mut found = [0u8; 4];
            found[..bytes.len()].copy_from_slice(bytes);
            return Err(Error::BadMagic {
                expected: TILE_MAGIC,
                found,
            });
        }
    };
    if magic != TILE_MAGIC {
        return Err(Error::BadMagic {
            expected: TILE_MAGIC,
            found: magic,
        });
    }
    let version = cur.u8()?;
    if version != TILE_FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version as u32,
            supported: TILE_FORMAT_VERSION as u32,
        });
    }
    let sensor_code = cur.u8()?;
    let sensor = Sensor::from_code(sensor_code)
        .ok_or_else(|| Error::InvalidTile(format!("unknown sensor code {sensor_code}")))?;
    let bands = cur.u16()? as usize;
    let height = cur.u32()? as usize;
    let width = cur.u32()? as usize;
    let nodata_sentinel = cur.f32()?;
    let tile_id = cur.string()?;
    let acquired_date = cur.string()?;
    let mut band_roles = Vec::with_capacity(bands);
    for &code in cur.take(bands)? {
        band_roles.push(
            BandRole::from_code(code)
                .ok_or_else(|| Error::InvalidTile(format!("unknown band role code {code}")))?,
        );
    }
    let count = (bands as u64) * (height as u64) * (width as u64);
    let declared = cur.pos as u64 + count * 4;
    if declared > bytes.len() as u64 {
        return Err(Error::Truncated {
            declared,
            available: bytes.len() as u64,
        });
    }
    if declared < bytes.len() as u64 {
        return Err(Error::InvalidTile(format!(
            "{} trailing bytes after payload",
            bytes.len() as u64 - declared
        )));
    }
    let payload = cur.take(count as usize * 4)?;
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Tile::new(
        data,
        band_roles,
        height,
        width,
        TileMeta {
            tile_id,
            acquired_date,
            sensor,
            nodata_sentinel,
        },
    )
}

pub fn write_tile(tile: &Tile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_tile(tile)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_tile(path: impl AsRef<Path>) -> Result<Tile> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_tile(&bytes)
}
