//! Data side of the SAR-to-RGB toolkit: the tile model and its on-disk
//! container, cloud screening, dataset curation, evaluation metrics and the
//! synthetic fixture corpus.

pub mod cloudscreen;
pub mod curation;
pub mod error;
pub mod evalkit;
pub mod export;
pub mod fixture;
pub mod ingest;
pub mod manifest;
pub mod planes;
pub mod rng;
pub mod tile;

pub use error::{Error, Result};
pub use planes::Planes;
pub use tile::{read_tile, write_tile, BandRole, Sensor, Tile, TileMeta};
