//! Procedural SAR/optical corpus for tests and demos.
//!
//! SAR backscatter is a sum of low-frequency plane waves; the optical tile is a
//! fixed smooth per-pixel function of the two SAR bands, so the translation is
//! learnable. A seeded subset of optical tiles receives a bright, unsaturated
//! disk with QA60 bit 10 set underneath it.

use std::fs;
use std::path::{Path, PathBuf};

use crate::cloudscreen::QA60_OPAQUE_BIT;
use crate::curation::{PairRecord, S2_REFLECTANCE_SCALE};
use crate::error::{Error, Result};
use crate::ingest::write_tiff;
use crate::manifest::write_pair_manifest;
use crate::rng::{shuffle, SplitMix64};
use crate::tile::{write_tile, BandRole, Sensor, Tile, TileMeta, TILE_EXTENSION};

pub const FIXTURE_MANIFEST: &str = "pairs.jsonl";
pub const FIXTURE_DATE: &str = "2022-06-15";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixtureSpec {
    pub n_pairs: usize,
    pub size: usize,
    pub cloud_fraction: f64,
    pub seed: u64,
}

impl FixtureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_pairs == 0 {
            return Err(Error::Config("n_pairs must be at least 1".into()));
        }
        if self.size < 16 || !self.size.is_power_of_two() {
            return Err(Error::Config(format!(
                "size {} must be a power of two >= 16",
                self.size
            )));
        }
        if !(0.0..=1.0).contains(&self.cloud_fraction) {
            return Err(Error::Config(format!(
                "cloud_fraction {} not in [0, 1]",
                self.cloud_fraction
            )));
        }
        Ok(())
    }

    pub fn n_cloudy(&self) -> usize {
        (self.cloud_fraction * self.n_pairs as f64).round() as usize
    }

    pub fn pair_id(&self, index: usize) -> String {
        format!("pair_{index:05}")
    }

    /// Indices of the pairs that receive a cloud, ascending.
    pub fn cloudy_indices(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.n_pairs).collect();
        shuffle(&mut idx, &mut SplitMix64::for_stream(self.seed, u64::MAX));
        let mut chosen = idx[..self.n_cloudy()].to_vec();
        chosen.sort_unstable();
        chosen
    }
}

/// The optical reflectance the fixture assigns to a SAR pixel (dB inputs).
pub fn reflectance_from_sar(vv_db: f32, vh_db: f32) -> [f32; 3] {
    let t = ((vv_db + 21.0) / 14.0).clamp(0.0, 1.0);
    let s = ((vh_db + 24.0) / 10.0).clamp(0.0, 1.0);
    [
        0.02 + 0.30 * t * t,
        0.03 + 0.20 * t + 0.08 * s,
        0.02 + 0.12 * (1.0 - t) + 0.16 * s * t,
    ]
}

struct Wave {
    kx: f32,
    ky: f32,
    phase: f32,
    amp: f32,
}

fn random_field(rng: &mut SplitMix64, size: usize, n_waves: usize) -> Vec<f32> {
    let waves: Vec<Wave> = (0..n_waves)
        .map(|_| {
            let wavelength = size as f64 * (0.35 + 1.4 * rng.next_f64());
            let angle = std::f64::consts::TAU * rng.next_f64();
            let k = std::f64::consts::TAU / wavelength;
            Wave {
                kx: (k * angle.cos()) as f32,
                ky: (k * angle.sin()) as f32,
                phase: (std::f64::consts::TAU * rng.next_f64()) as f32,
                amp: (0.5 + rng.next_f64()) as f32,
            }
        })
        .collect();
    let total: f32 = waves.iter().map(|w| w.amp).sum();
    let mut out = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let v: f32 = waves
                .iter()
                .map(|w| w.amp * (w.kx * x as f32 + w.ky * y as f32 + w.phase).sin())
                .sum();
            out.push(v / total);
        }
    }
    out
}

/// One generated pair: SAR in dB, raw optical digital numbers, QA60 words.
#[derive(Debug, Clone)]
pub struct FixturePair {
    pub pair_id: String,
    pub s1: Tile,
    pub s2_raw: Tile,
    pub qa60: Tile,
    pub cloudy: bool,
}

pub fn fixture_pair(spec: &FixtureSpec, index: usize, cloudy: bool) -> Result<FixturePair> {
    let size = spec.size;
    let n = size * size;
    let mut rng = SplitMix64::for_stream(spec.seed, index as u64);
    let f1 = random_field(&mut rng, size, 3);
    let f2 = random_field(&mut rng, size, 3);
    let vv: Vec<f32> = f1.iter().map(|v| -14.0 + 7.0 * v).collect();
    let vh: Vec<f32> = f2.iter().map(|v| -19.0 + 5.0 * v).collect();

    let mut rgb = vec![0f32; 3 * n];
    for i in 0..n {
        let refl = reflectance_from_sar(vv[i], vh[i]);
        for c in 0..3 {
            rgb[c * n + i] = (refl[c] * S2_REFLECTANCE_SCALE).round();
        }
    }
    let mut qa = vec![0f32; n];
    if cloudy {
        let radius = size as f64 * (0.125 + 0.125 * rng.next_f64());
        let cy = rng.next_f64() * size as f64;
        let cx = rng.next_f64() * size as f64;
        let base = 8800.0 + 400.0 * rng.next_f64();
        let cy = cy.floor() + 0.5;
        let cx = cx.floor() + 0.5;
        for y in 0..size {
            for x in 0..size {
                let (dy, dx) = (y as f64 + 0.5 - cy, x as f64 + 0.5 - cx);
                if dy * dy + dx * dx <= radius * radius {
                    let i = y * size + x;
                    for c in 0..3 {
                        rgb[c * n + i] = (base + 100.0 * rng.next_f64()).round() as f32;
                    }
                    qa[i] = QA60_OPAQUE_BIT as f32;
                }
            }
        }
    }

    let pair_id = spec.pair_id(index);
    let meta = |sensor| TileMeta::new(pair_id.clone(), sensor).with_date(FIXTURE_DATE);
    let mut sar = vv;
    sar.extend(vh);
    Ok(FixturePair {
        s1: Tile::new(sar, BandRole::SAR.to_vec(), size, size, meta(Sensor::S1))?,
        s2_raw: Tile::new(rgb, BandRole::RGB.to_vec(), size, size, meta(Sensor::S2))?,
        qa60: Tile::new(qa, vec![BandRole::Qa60], size, size, meta(Sensor::Qa60))?,
        pair_id,
        cloudy,
    })
}

/// Generates every pair of the corpus in memory.
pub fn fixture_pairs(spec: &FixtureSpec) -> Result<Vec<FixturePair>> {
    spec.validate()?;
    let cloudy = spec.cloudy_indices();
    (0..spec.n_pairs)
        .map(|i| fixture_pair(spec, i, cloudy.binary_search(&i).is_ok()))
        .collect()
}

#[derive(Debug, Clone)]
pub struct FixtureCorpus {
    pub root: PathBuf,
    pub manifest: PathBuf,
    /// Records with paths relative to `root`.
    pub pairs: Vec<PairRecord>,
    pub cloudy_ids: Vec<String>,
}

fn rel(sub: &str, id: &str, ext: &str) -> PathBuf {
    PathBuf::from(sub).join(format!("{id}.{ext}"))
}

/// Writes `s1/`, `s2/`, `qa60/` tiles and a `pairs.jsonl` manifest under `out_dir`.
pub fn synth_fixture(spec: &FixtureSpec, out_dir: impl AsRef<Path>) -> Result<FixtureCorpus> {
    let root = out_dir.as_ref().to_path_buf();
    let pairs = fixture_pairs(spec)?;
    for sub in ["s1", "s2", "qa60"] {
        let d = root.join(sub);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let mut records = Vec::with_capacity(pairs.len());
    let mut cloudy_ids = Vec::new();
    for p in &pairs {
        let (s1, s2, qa) = (
            rel("s1", &p.pair_id, TILE_EXTENSION),
            rel("s2", &p.pair_id, TILE_EXTENSION),
            rel("qa60", &p.pair_id, TILE_EXTENSION),
        );
        write_tile(&p.s1, root.join(&s1))?;
        write_tile(&p.s2_raw, root.join(&s2))?;
        write_tile(&p.qa60, root.join(&qa))?;
        if p.cloudy {
            cloudy_ids.push(p.pair_id.clone());
        }
        records.push(PairRecord {
            pair_id: p.pair_id.clone(),
            s1_path: s1,
            s2_path: s2,
            qa60_path: Some(qa),
            screen: None,
        });
    }
    let manifest = root.join(FIXTURE_MANIFEST);
    write_pair_manifest(&manifest, &records)?;
    Ok(FixtureCorpus {
        root,
        manifest,
        pairs: records,
        cloudy_ids,
    })
}

/// Writes the corpus as float32 TIFF sources (`s1/`, `s2/`, `qa60/`) for
/// exercising the ingestion path.
pub fn synth_tiff_sources(spec: &FixtureSpec, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let root = out_dir.as_ref();
    let mut written = Vec::new();
    for p in fixture_pairs(spec)? {
        for (sub, tile) in [("s1", &p.s1), ("s2", &p.s2_raw), ("qa60", &p.qa60)] {
            let d = root.join(sub);
            fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
            let path = root.join(rel(sub, &p.pair_id, "tif"));
            write_tiff(tile, &path)?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloudscreen::{screen_tile, HeuristicParams};
    use crate::curation::normalize_s2_reflectance;

    #[test]
    fn spec_validation() {
        let ok = FixtureSpec { n_pairs: 4, size: 16, cloud_fraction: 0.5, seed: 1 };
        assert!(ok.validate().is_ok());
        assert!(FixtureSpec { size: 24, ..ok }.validate().is_err());
        assert!(FixtureSpec { size: 8, ..ok }.validate().is_err());
        assert!(FixtureSpec { cloud_fraction: 1.5, ..ok }.validate().is_err());
        assert!(FixtureSpec { n_pairs: 0, ..ok }.validate().is_err());
    }

    #[test]
    fn clean_tiles_screen_clean() {
        let spec = FixtureSpec { n_pairs: 6, size: 32, cloud_fraction: 0.0, seed: 11 };
        for p in fixture_pairs(&spec).unwrap() {
            let rgb = normalize_s2_reflectance(&p.s2_raw).unwrap();
            let rep = screen_tile(&rgb, Some(&p.qa60), &HeuristicParams::default()).unwrap();
            assert_eq!(rep.nodata_ratio, 0.0);
            assert_eq!(rep.qa60_cloud_ratio, Some(0.0));
            assert_eq!(rep.heuristic_cloud_ratio, 0.0);
        }
    }

    #[test]
    fn cloud_count_and_qa60_flags() {
        let spec = FixtureSpec { n_pairs: 10, size: 16, cloud_fraction: 0.3, seed: 5 };
        let pairs = fixture_pairs(&spec).unwrap();
        assert_eq!(pairs.iter().filter(|p| p.cloudy).count(), 3);
        for p in pairs.iter().filter(|p| p.cloudy) {
            let rgb = normalize_s2_reflectance(&p.s2_raw).unwrap();
            let rep = screen_tile(&rgb, Some(&p.qa60), &HeuristicParams::default()).unwrap();
            assert!(rep.heuristic_cloud_ratio > 0.0);
            assert_eq!(rep.qa60_cloud_ratio, Some(rep.heuristic_cloud_ratio));
        }
    }

    #[test]
    fn corpus_is_reproducible() {
        let spec = FixtureSpec { n_pairs: 3, size: 16, cloud_fraction: 0.34, seed: 9 };
        let dir = tempfile::tempdir().unwrap();
        let a = synth_fixture(&spec, dir.path().join("a")).unwrap();
        let b = synth_fixture(&spec, dir.path().join("b")).unwrap();
        assert_eq!(a.pairs, b.pairs);
        let mut files = vec![PathBuf::from(FIXTURE_MANIFEST)];
        for p in &a.pairs {
            files.extend([p.s1_path.clone(), p.s2_path.clone(), p.qa60_path.clone().unwrap()]);
        }
        for f in files {
            assert_eq!(fs::read(a.root.join(&f)).unwrap(), fs::read(b.root.join(&f)).unwrap());
        }
    }
}
