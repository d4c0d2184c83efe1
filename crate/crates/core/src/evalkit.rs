//! MAE/PSNR on `[0, 1]` reflectance, set-level reports, ensembling and
//! submission packaging.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export::check_unit_range;
use crate::tile::{encode_tile, validate_tile_id, BandRole, Tile, TILE_EXTENSION};

/// PSNR reported when the MSE falls below [`PSNR_MSE_FLOOR`].
pub const PSNR_CAP_DB: f64 = 99.0;
pub const PSNR_MSE_FLOOR: f64 = 1e-12;

pub const SUBMISSION_MANIFEST: &str = "submission.jsonl";
pub const SUBMISSION_SUMMARY: &str = "summary.json";

/// One model output (or reference) keyed by pair id.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub pair_id: String,
    pub tile: Tile,
}

impl Prediction {
    pub fn new(pair_id: impl Into<String>, tile: Tile) -> Self {
        Prediction {
            pair_id: pair_id.into(),
            tile,
        }
    }
}

fn check_pair(pred: &Tile, target: &Tile) -> Result<()> {
    pred.require_roles(&BandRole::RGB)?;
    target.require_roles(&BandRole::RGB)?;
    if !pred.same_shape(target) {
        return Err(Error::ShapeMismatch(format!(
            "prediction {}x{} vs target {}x{}",
            pred.height(),
            pred.width(),
            target.height(),
            target.width()
        )));
    }
    check_unit_range(pred.data())?;
    check_unit_range(target.data())
}

/// Mean absolute error over all `3 x H x W` elements.
pub fn mae(pred: &Tile, target: &Tile) -> Result<f64> {
    check_pair(pred, target)?;
    let sum: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| (p as f64 - t as f64).abs())
        .sum();
    Ok(sum / pred.data().len() as f64)
}

pub fn mse(pred: &Tile, target: &Tile) -> Result<f64> {
    check_pair(pred, target)?;
    let sum: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let d = p as f64 - t as f64;
            d * d
        })
        .sum();
    Ok(sum / pred.data().len() as f64)
}

/// PSNR in dB with peak 1.0, capped at [`PSNR_CAP_DB`].
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse < PSNR_MSE_FLOOR {
        PSNR_CAP_DB
    } else {
        10.0 * (1.0 / mse).log10()
    }
}

pub fn psnr(pred: &Tile, target: &Tile) -> Result<f64> {
    Ok(psnr_from_mse(mse(pred, target)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMetrics {
    pub pair_id: String,
    pub mae: f64,
    pub psnr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_images: usize,
    pub mae_mean: f64,
    pub psnr_mean_db: f64,
    pub per_image: Vec<ImageMetrics>,
}

fn keyed<'a>(items: &'a [Prediction], what: &str) -> Result<BTreeMap<&'a str, &'a Tile>> {
    let mut map = BTreeMap::new();
    for p in items {
        if map.insert(p.pair_id.as_str(), &p.tile).is_some() {
            return Err(Error::Duplicate(format!("{what} pair_id {}", p.pair_id)));
        }
    }
    Ok(map)
}

fn key_diff(a: &BTreeMap<&str, &Tile>, b: &BTreeMap<&str, &Tile>) -> Option<String> {
    let only_a: Vec<_> = a.keys().filter(|k| !b.contains_key(*k)).collect();
    let only_b: Vec<_> = b.keys().filter(|k| !a.contains_key(*k)).collect();
    if only_a.is_empty() && only_b.is_empty() {
        None
    } else {
        Some(format!("only in first: {only_a:?}; only in second: {only_b:?}"))
    }
}

/// Per-image metrics, averaged per image (not pooled over pixels).
///
/// Images are reported in `pair_id` order.
pub fn evaluate(preds: &[Prediction], refs: &[Prediction]) -> Result<MetricsReport> {
    let p = keyed(preds, "prediction")?;
    let r = keyed(refs, "reference")?;
    if let Some(diff) = key_diff(&p, &r) {
        return Err(Error::KeyMismatch(diff));
    }
    let mut per_image = Vec::with_capacity(p.len());
    for (id, pred) in &p {
        let target = r[id];
        per_image.push(ImageMetrics {
            pair_id: id.to_string(),
            mae: mae(pred, target)?,
            psnr_db: psnr(pred, target)?,
        });
    }
    let n = per_image.len();
    let (mae_mean, psnr_mean_db) = if n == 0 {
        (0.0, 0.0)
    } else {
        (
            per_image.iter().map(|m| m.mae).sum::<f64>() / n as f64,
            per_image.iter().map(|m| m.psnr_db).sum::<f64>() / n as f64,
        )
    };
    Ok(MetricsReport {
        n_images: n,
        mae_mean,
        psnr_mean_db,
        per_image,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EnsembleMode {
    #[default]
    Mean,
    Assign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub members: Vec<String>,
    #[serde(default)]
    pub mode: EnsembleMode,
    /// `pair_id -> member`, required in assign mode.
    #[serde(default)]
    pub assignment: Option<BTreeMap<String, String>>,
}

impl EnsembleSpec {
    pub fn mean(members: Vec<String>) -> Self {
        EnsembleSpec {
            members,
            mode: EnsembleMode::Mean,
            assignment: None,
        }
    }
}

/// Combines member outputs per pair id; output is in `pair_id` order.
///
/// In mean mode each pixel's member values are sorted before summation so
/// the result does not depend on member order; the mean is clamped to `[0, 1]`.
pub fn ensemble(
    outputs: &BTreeMap<String, Vec<Prediction>>,
    spec: &EnsembleSpec,
) -> Result<Vec<Prediction>> {
    if spec.members.is_empty() {
        return Err(Error::Config("ensemble has no members".into()));
    }
    let mut seen = BTreeSet::new();
    for m in &spec.members {
        if !seen.insert(m) {
            return Err(Error::Duplicate(format!("ensemble member {m}")));
        }
    }
    let mut keyed_members = Vec::with_capacity(spec.members.len());
    for m in &spec.members {
        let preds = outputs
            .get(m)
            .ok_or_else(|| Error::KeyMismatch(format!("no outputs for member {m}")))?;
        keyed_members.push((m.as_str(), keyed(preds, m)?));
    }
    let (first_name, first) = &keyed_members[0];
    for (name, other) in &keyed_members[1..] {
        if let Some(diff) = key_diff(first, other) {
            return Err(Error::KeyMismatch(format!(
                "members {first_name} and {name} disagree: {diff}"
            )));
        }
    }

    let mut out = Vec::with_capacity(first.len());
    match spec.mode {
        EnsembleMode::Mean => {
            for (id, tile0) in first {
                let tiles: Vec<&Tile> = keyed_members.iter().map(|(_, m)| m[id]).collect();
                for t in &tiles {
                    t.require_roles(&BandRole::RGB)?;
                    if !t.same_shape(tile0) {
                        return Err(Error::ShapeMismatch(format!(
                            "member outputs for {id} differ in shape"
                        )));
                    }
                }
                let k = tiles.len() as f64;
                let mut vals = vec![0f32; tiles.len()];
                let data = (0..tile0.data().len())
                    .map(|i| {
                        for (v, t) in vals.iter_mut().zip(&tiles) {
                            *v = t.data()[i];
                        }
                        vals.sort_unstable_by(f32::total_cmp);
                        let sum: f64 = vals.iter().map(|&v| v as f64).sum();
                        ((sum / k) as f32).clamp(0.0, 1.0)
                    })
                    .collect();
                let tile = Tile::new(
                    data,
                    tile0.band_roles().to_vec(),
                    tile0.height(),
                    tile0.width(),
                    tile0.meta().clone(),
                )?;
                out.push(Prediction::new(*id, tile));
            }
        }
        EnsembleMode::Assign => {
            let assignment = spec
                .assignment
                .as_ref()
                .ok_or_else(|| Error::Config("assign mode needs an assignment map".into()))?;
            for id in first.keys() {
                let member = assignment
                    .get(*id)
                    .ok_or_else(|| Error::KeyMismatch(format!("assignment misses pair {id}")))?;
                let (_, preds) = keyed_members
                    .iter()
                    .find(|(name, _)| *name == member.as_str())
                    .ok_or_else(|| {
                        Error::KeyMismatch(format!("pair {id} assigned to unknown member {member}"))
                    })?;
                out.push(Prediction::new(*id, preds[id].clone()));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmissionEntry {
    pub pair_id: String,
    pub file: String,
    pub bytes: u64,
    pub crc32: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmissionSummary {
    pub count: usize,
    /// CRC-32 over all tile files concatenated in `pair_id` order.
    pub crc32: String,
}

fn crc_hex(v: u32) -> String {
    format!("{v:08x}")
}

/// Writes `<pair_id>.s2tl` per prediction, a `submission.jsonl` manifest and a
/// one-line `summary.json`.
pub fn package_submission(preds: &[Prediction], out_dir: impl AsRef<Path>) -> Result<SubmissionSummary> {
    let out_dir = out_dir.as_ref();
    let mut sorted: Vec<&Prediction> = preds.iter().collect();
    sorted.sort_by(|a, b| a.pair_id.cmp(&b.pair_id));
    for w in sorted.windows(2) {
        if w[0].pair_id == w[1].pair_id {
            return Err(Error::Duplicate(format!("pair_id {}", w[0].pair_id)));
        }
    }
    for p in &sorted {
        validate_tile_id(&p.pair_id)?;
        p.tile.require_roles(&BandRole::RGB)?;
        check_unit_range(p.tile.data())?;
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut total = crc32fast::Hasher::new();
    let mut manifest = String::new();
    for p in &sorted {
        let tile = p.tile.clone().with_tile_id(p.pair_id.clone())?;
        let bytes = encode_tile(&tile)?;
        let file = format!("{}.{TILE_EXTENSION}", p.pair_id);
        let path = out_dir.join(&file);
        fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
        total.update(&bytes);
        let entry = SubmissionEntry {
            pair_id: p.pair_id.clone(),
            file,
            bytes: bytes.len() as u64,
            crc32: crc_hex(crc32fast::hash(&bytes)),
        };
        manifest.push_str(&serde_json::to_string(&entry).expect("entry serializes"));
        manifest.push('\n');
    }
    let summary = SubmissionSummary {
        count: sorted.len(),
        crc32: crc_hex(total.finalize()),
    };
    let mpath = out_dir.join(SUBMISSION_MANIFEST);
    fs::write(&mpath, manifest).map_err(|e| Error::io(&mpath, e))?;
    let spath = out_dir.join(SUBMISSION_SUMMARY);
    let line = serde_json::to_string(&summary).expect("summary serializes") + "\n";
    fs::write(&spath, line).map_err(|e| Error::io(&spath, e))?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tile::{Sensor, TileMeta};
    use proptest::prelude::*;

    fn rgb(values: Vec<f32>, h: usize, w: usize) -> Tile {
        Tile::new(values, BandRole::RGB.to_vec(), h, w, TileMeta::new("t", Sensor::S2)).unwrap()
    }

    fn constant(v: f32) -> Tile {
        rgb(vec![v; 3 * 4], 2, 2)
    }

    #[test]
    fn metric_examples() {
        let a = constant(0.25);
        assert_eq!(mae(&a, &a).unwrap(), 0.0);
        assert_eq!(psnr(&a, &a).unwrap(), 99.0);
        let (z, h) = (constant(0.0), constant(0.5));
        assert_eq!(mae(&z, &h).unwrap(), 0.5);
        assert!((psnr(&z, &h).unwrap() - 6.0206).abs() < 1e-3);
    }

    #[test]
    fn metric_errors() {
        let a = constant(0.2);
        let b = rgb(vec![0.2; 3 * 6], 2, 3);
        assert!(matches!(mae(&a, &b), Err(Error::ShapeMismatch(_))));
        assert!(matches!(psnr(&a, &constant(1.5)), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn evaluate_means() {
        let refs = vec![Prediction::new("a", constant(0.0)), Prediction::new("b", constant(0.0))];
        let preds = vec![Prediction::new("b", constant(0.5)), Prediction::new("a", constant(0.0))];
        let rep = evaluate(&preds, &refs).unwrap();
        assert_eq!(rep.n_images, 2);
        assert_eq!(rep.mae_mean, 0.25);
        assert_eq!(rep.per_image[0].pair_id, "a");
        assert_eq!(rep.psnr_mean_db, (99.0 + psnr_from_mse(0.25)) / 2.0);
        assert_eq!(evaluate(&preds, &refs).unwrap(), rep);

        let single = evaluate(&preds[..1], &refs[1..]).unwrap();
        assert_eq!(single.mae_mean, single.per_image[0].mae);
        assert!(matches!(evaluate(&preds[..1], &refs), Err(Error::KeyMismatch(_))));
    }

    #[test]
    fn ensemble_examples() {
        let mut outputs = BTreeMap::new();
        outputs.insert("m1".to_string(), vec![Prediction::new("x", constant(0.2))]);
        outputs.insert("m2".to_string(), vec![Prediction::new("x", constant(0.4))]);
        let one = ensemble(&outputs, &EnsembleSpec::mean(vec!["m1".into()])).unwrap();
        assert_eq!(one, outputs["m1"]);
        let both = ensemble(&outputs, &EnsembleSpec::mean(vec!["m1".into(), "m2".into()])).unwrap();
        for &v in both[0].tile.data() {
            assert!((v - 0.3).abs() < 1e-7);
        }
    }

    #[test]
    fn ensemble_errors() {
        let mut outputs = BTreeMap::new();
        outputs.insert("m1".to_string(), vec![Prediction::new("x", constant(0.2))]);
        outputs.insert("m2".to_string(), vec![Prediction::new("y", constant(0.4))]);
        let spec = EnsembleSpec::mean(vec!["m1".into(), "m2".into()]);
        assert!(matches!(ensemble(&outputs, &spec), Err(Error::KeyMismatch(_))));
        let assign = EnsembleSpec {
            members: vec!["m1".into()],
            mode: EnsembleMode::Assign,
            assignment: Some(BTreeMap::new()),
        };
        assert!(matches!(ensemble(&outputs, &assign), Err(Error::KeyMismatch(_))));
        assert!(ensemble(&outputs, &EnsembleSpec::mean(vec![])).is_err());
    }

    #[test]
    fn assign_routes_tiles() {
        let mut outputs = BTreeMap::new();
        outputs.insert(
            "m1".to_string(),
            vec![Prediction::new("x", constant(0.1)), Prediction::new("y", constant(0.1))],
        );
        outputs.insert(
            "m2".to_string(),
            vec![Prediction::new("x", constant(0.9)), Prediction::new("y", constant(0.9))],
        );
        let spec = EnsembleSpec {
            members: vec!["m1".into(), "m2".into()],
            mode: EnsembleMode::Assign,
            assignment: Some(
                [("x".to_string(), "m2".to_string()), ("y".to_string(), "m1".to_string())]
                    .into_iter()
                    .collect(),
            ),
        };
        let out = ensemble(&outputs, &spec).unwrap();
        assert_eq!(out[0].tile, constant(0.9));
        assert_eq!(out[1].tile, constant(0.1));
    }

    #[test]
    fn package_layout_and_checksum() {
        let dir = tempfile::tempdir().unwrap();
        let preds = vec![
            Prediction::new("c", constant(0.3)),
            Prediction::new("a", constant(0.1)),
            Prediction::new("b", constant(0.2)),
        ];
        let s1 = package_submission(&preds, dir.path().join("run1")).unwrap();
        let s2 = package_submission(&preds, dir.path().join("run2")).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(s1.count, 3);
        for name in ["a.s2tl", "b.s2tl", "c.s2tl", SUBMISSION_MANIFEST, SUBMISSION_SUMMARY] {
            assert_eq!(
                fs::read(dir.path().join("run1").join(name)).unwrap(),
                fs::read(dir.path().join("run2").join(name)).unwrap()
            );
        }
        let manifest = fs::read_to_string(dir.path().join("run1").join(SUBMISSION_MANIFEST)).unwrap();
        assert_eq!(manifest.lines().count(), 3);
        // Independent recomputation over the written files.
        let mut cat = Vec::new();
        for name in ["a.s2tl", "b.s2tl", "c.s2tl"] {
            cat.extend(fs::read(dir.path().join("run1").join(name)).unwrap());
        }
        assert_eq!(s1.crc32, format!("{:08x}", crc32fast::hash(&cat)));

        let dup = vec![Prediction::new("a", constant(0.1)), Prediction::new("a", constant(0.2))];
        assert!(matches!(package_submission(&dup, dir.path().join("d")), Err(Error::Duplicate(_))));
    }

    fn arb_tile() -> impl Strategy<Value = Tile> {
        proptest::collection::vec(0f32..=1.0, 3 * 9).prop_map(|v| rgb(v, 3, 3))
    }

    proptest! {
        #[test]
        fn metrics_symmetric(a in arb_tile(), b in arb_tile()) {
            prop_assert_eq!(mae(&a, &b).unwrap(), mae(&b, &a).unwrap());
            prop_assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        }

        #[test]
        fn psnr_strictly_decreasing(m1 in 1e-11f64..10.0, m2 in 1e-11f64..10.0) {
            prop_assume!(m1 != m2);
            let (lo, hi) = if m1 < m2 { (m1, m2) } else { (m2, m1) };
            prop_assert!(psnr_from_mse(lo) > psnr_from_mse(hi));
        }

        #[test]
        fn mean_order_invariant_and_idempotent(a in arb_tile(), b in arb_tile(), c in arb_tile(), r in arb_tile()) {
            let mut outputs = BTreeMap::new();
            outputs.insert("a".to_string(), vec![Prediction::new("p", a.clone())]);
            outputs.insert("b".to_string(), vec![Prediction::new("p", b)]);
            outputs.insert("c".to_string(), vec![Prediction::new("p", c)]);
            outputs.insert("a2".to_string(), vec![Prediction::new("p", a.clone())]);
            let abc = ensemble(&outputs, &EnsembleSpec::mean(vec!["a".into(), "b".into(), "c".into()])).unwrap();
            let cab = ensemble(&outputs, &EnsembleSpec::mean(vec!["c".into(), "a".into(), "b".into()])).unwrap();
            prop_assert!(abc[0].tile.bit_identical(&cab[0].tile));
            let aa = ensemble(&outputs, &EnsembleSpec::mean(vec!["a".into(), "a2".into()])).unwrap();
            prop_assert!(aa[0].tile.bit_identical(&a));
            prop_assert_eq!(mae(&aa[0].tile, &r).unwrap(), mae(&a, &r).unwrap());
        }
    }
}
