use proptest::prelude::*;
use sar2rgb_core::cloudscreen::{screen_tile, HeuristicParams};
use sar2rgb_core::curation::{filter_dataset, normalize_s2_reflectance, FilterSpec, PairRecord};
use sar2rgb_core::evalkit::{evaluate, Prediction};
use sar2rgb_core::fixture::{synth_fixture, FixtureSpec};
use sar2rgb_core::manifest::read_pair_manifest;
use sar2rgb_core::tile::{decode_tile, encode_tile};
use sar2rgb_core::{read_tile, BandRole, Sensor, Tile, TileMeta};

fn screened(spec: &FixtureSpec, dir: &std::path::Path) -> Vec<PairRecord> {
    let corpus = synth_fixture(spec, dir).unwrap();
    let params = HeuristicParams::default();
    read_pair_manifest(&corpus.manifest)
        .unwrap()
        .into_iter()
        .map(|p| {
            let rgb = normalize_s2_reflectance(&read_tile(&p.s2_path).unwrap()).unwrap();
            let qa = read_tile(p.qa60_path.as_ref().unwrap()).unwrap();
            PairRecord {
                screen: Some(screen_tile(&rgb, Some(&qa), &params).unwrap()),
                ..p
            }
        })
        .collect()
}

#[test]
fn presets_recover_clean_fixture_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = FixtureSpec { n_pairs: 20, size: 32, cloud_fraction: 0.25, seed: 12 };
    let pairs = screened(&spec, dir.path());
    let cloudy = spec.cloudy_indices();
    let clean: Vec<String> = (0..20).filter(|i| !cloudy.contains(i)).map(|i| spec.pair_id(i)).collect();
    for name in ["dataset1", "dataset2"] {
        let kept = filter_dataset(&pairs, &FilterSpec::preset(name).unwrap()).unwrap();
        let ids: Vec<String> = kept.into_iter().map(|p| p.pair_id).collect();
        assert_eq!(ids, clean, "{name}");
    }
}

#[test]
fn references_score_perfectly_against_themselves() {
    let dir = tempfile::tempdir().unwrap();
    let spec = FixtureSpec { n_pairs: 4, size: 16, cloud_fraction: 0.0, seed: 1 };
    let refs: Vec<Prediction> = screened(&spec, dir.path())
        .into_iter()
        .map(|p| Prediction::new(p.pair_id, normalize_s2_reflectance(&read_tile(&p.s2_path).unwrap()).unwrap()))
        .collect();
    let report = evaluate(&refs, &refs).unwrap();
    assert_eq!(report.n_images, 4);
    assert_eq!((report.mae_mean, report.psnr_mean_db), (0.0, 99.0));
}

proptest! {
    #[test]
    fn encoded_tiles_decode_bit_exactly(
        h in 1usize..12,
        w in 1usize..12,
        bits in proptest::collection::vec(any::<u32>(), 3 * 11 * 11),
        sentinel in -1e4f32..1e4,
    ) {
        let data: Vec<f32> = bits[..3 * h * w]
            .iter()
            .map(|&b| { let v = f32::from_bits(b); if v.is_finite() { v } else { 0.5 } })
            .collect();
        let mut meta = TileMeta::new("prop_tile", Sensor::S2).with_date("2020-02-29");
        meta.nodata_sentinel = sentinel;
        let tile = Tile::new(data, BandRole::RGB.to_vec(), h, w, meta).unwrap();
        let back = decode_tile(&encode_tile(&tile).unwrap()).unwrap();
        prop_assert!(back.bit_identical(&tile));
        prop_assert_eq!(back.meta(), tile.meta());
    }
}
