use sar2rgb_core::fixture::{fixture_pairs, FixtureSpec};
use sar2rgb_core::{BandRole, Planes};
use sar2rgb_sargen::{DiscriminatorConfig, GanKind, GeneratorConfig, LossConfig, Variant};
use sar2rgb_trainer::checkpoint::{decode_checkpoint, encode_checkpoint, CHECKPOINT_VERSION};
use sar2rgb_trainer::{
    infer, load_checkpoint, save_checkpoint, train, Checkpoint, Error, LossTrace, Sample,
    TrainConfig, Trainer,
};

fn corpus(n: usize) -> (Vec<Sample>, Vec<sar2rgb_core::Tile>) {
    let spec = FixtureSpec {
        n_pairs: n,
        size: 16,
        cloud_fraction: 0.0,
        seed: 5,
    };
    let pairs = fixture_pairs(&spec).unwrap();
    let samples = pairs
        .iter()
        .map(|p| Sample::from_tiles(&p.pair_id, &p.s1, &p.s2_raw).unwrap())
        .collect();
    (samples, pairs.into_iter().map(|p| p.s1).collect())
}

fn config(variant: Variant, loss: LossConfig) -> TrainConfig {
    let g = GeneratorConfig {
        variant,
        image_size: 16,
        base_width: 4,
        n_up_blocks: 1,
        seed_size: 8,
        n_res_blocks: 1,
        spade_hidden: 8,
        ..GeneratorConfig::spade()
    };
    let mut cfg = TrainConfig::new(g, loss);
    cfg.discriminator = DiscriminatorConfig {
        n_scales: 2,
        n_layers: 2,
        base_width: 4,
    };
    cfg.batch_size = 3;
    cfg.max_steps = 7;
    cfg.seed = 11;
    cfg.eval_every = 3;
    cfg
}

fn gan_config() -> TrainConfig {
    config(Variant::Spade, LossConfig::gan_l1(GanKind::Hinge, 1000.0))
}

#[test]
fn zero_steps_returns_initialization() {
    let (s, _) = corpus(4);
    let mut cfg = gan_config();
    cfg.max_steps = 0;
    let (ck, trace) = train(&cfg, &s, &[]).unwrap();
    assert!(trace.is_empty());
    assert_eq!(ck, Checkpoint::init(cfg).unwrap());
}

#[test]
fn empty_training_set_is_rejected() {
    assert!(matches!(train(&gan_config(), &[], &[]), Err(Error::EmptyDataset)));
}

#[test]
fn identical_runs_are_bit_exact() {
    let (s, _) = corpus(5);
    for cfg in [gan_config(), config(Variant::Pix2pixhd, LossConfig::gan_l1(GanKind::Lsgan, 100.0))] {
        let (a, ta) = train(&cfg, &s, &s[..2]).unwrap();
        let (b, tb) = train(&cfg, &s, &s[..2]).unwrap();
        assert_eq!(ta, tb);
        assert_eq!(a, b);
        assert_eq!(ta.len(), 7);
        assert!(ta.records.windows(2).all(|w| w[0].step < w[1].step));
        assert_eq!(ta.records.iter().filter(|r| r.eval_mae.is_some()).count(), 2);
        assert!(ta.records.iter().all(|r| r.generator_total.is_finite() && r.discriminator_loss.is_some()));
    }
}

#[test]
fn resumed_training_matches_uninterrupted() {
    let (s, _) = corpus(5);
    let cfg = gan_config();
    let (full_ck, full) = train(&cfg, &s, &s[..2]).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mid.s2ck");
    let mut first = cfg.clone();
    first.max_steps = 4;
    let (mid, mut trace) = train(&first, &s, &s[..2]).unwrap();
    save_checkpoint(&mid, &path).unwrap();

    let mut loaded = load_checkpoint(&path).unwrap();
    assert_eq!(loaded, mid);
    loaded.config.max_steps = cfg.max_steps;
    let mut t = Trainer::from_checkpoint(loaded).unwrap();
    trace.extend(t.run(&s, &s[..2], |_| {}).unwrap());
    assert_eq!(trace.len(), full.len());
    for (a, b) in trace.records.iter().zip(&full.records) {
        assert_eq!(a.step, b.step);
        let rel = (a.generator_total - b.generator_total).abs() / b.generator_total.abs();
        assert!(rel <= 1e-6, "step {}: {rel}", a.step);
    }
    assert_eq!(trace, full);
    assert_eq!(t.into_checkpoint().generator, full_ck.generator);
}

#[test]
fn reconstruction_only_runs_skip_the_discriminator() {
    let (s, _) = corpus(4);
    let cfg = config(Variant::Spade, LossConfig::l1(100.0));
    let (ck, trace) = train(&cfg, &s, &[]).unwrap();
    assert!(ck.discriminator.is_none() && ck.discriminator_adam.is_none());
    for r in &trace.records {
        assert!(r.gan_term.is_none() && r.discriminator_loss.is_none());
        assert_eq!(r.generator_total, (100.0f32 * r.l1_term as f32) as f64);
    }
}

#[test]
fn inference_survives_checkpoint_round_trip() {
    let (s, tiles) = corpus(4);
    let (ck, _) = train(&gan_config(), &s, &[]).unwrap();
    let before = infer(&ck.generator, &tiles).unwrap();
    let back = decode_checkpoint(&encode_checkpoint(&ck)).unwrap();
    let after = infer(&back.generator, &tiles).unwrap();
    for (a, b) in before.iter().zip(&after) {
        assert!(a.bit_identical(b));
        assert_eq!(a.band_roles(), &BandRole::RGB);
        assert_eq!(a.tile_id(), tiles[0].tile_id().replace("00000", &a.tile_id()[5..]));
        assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }
    assert!(infer(&ck.generator, &corpus_size(32)).is_err());
}

fn corpus_size(size: usize) -> Vec<sar2rgb_core::Tile> {
    let spec = FixtureSpec {
        n_pairs: 1,
        size,
        cloud_fraction: 0.0,
        seed: 1,
    };
    fixture_pairs(&spec).unwrap().into_iter().map(|p| p.s1).collect()
}

#[test]
fn damaged_checkpoints_are_rejected() {
    let (s, _) = corpus(3);
    let (ck, _) = train(&gan_config(), &s, &[]).unwrap();
    let bytes = encode_checkpoint(&ck);
    assert_eq!(&bytes[..4], b"S2CK");

    let truncated = &bytes[..bytes.len() - 100];
    assert!(matches!(decode_checkpoint(truncated), Err(Error::Checksum { .. })));

    let mut newer = bytes.clone();
    newer[4..8].copy_from_slice(&(CHECKPOINT_VERSION + 1).to_le_bytes());
    assert!(matches!(
        decode_checkpoint(&newer),
        Err(Error::Version { found, .. }) if found == CHECKPOINT_VERSION + 1
    ));

    let mut flipped = bytes.clone();
    let mid = flipped.len() / 2;
    flipped[mid] ^= 0x40;
    assert!(matches!(decode_checkpoint(&flipped), Err(Error::Checksum { .. })));
    assert!(matches!(decode_checkpoint(b"S2"), Err(Error::Format(_))));
}

#[test]
fn non_finite_loss_names_the_step() {
    let (mut s, _) = corpus(3);
    let [c, h, w] = s[1].optical.shape();
    s[1].optical = Planes::new(vec![f32::NAN; c * h * w], c, h, w).unwrap();
    let mut cfg = config(Variant::Spade, LossConfig::l1(1.0));
    cfg.batch_size = 1;
    let err = train(&cfg, &s, &[]).unwrap_err();
    let Error::NonFinite { step, .. } = err else { panic!("{err}") };
    let order = sar2rgb_trainer::train::epoch_order(3, cfg.seed, 0);
    assert_eq!(step as usize, order.iter().position(|&i| i == 1).unwrap() + 1);
    assert!(err.to_string().contains(&format!("step {step}")));
}

#[test]
fn mismatched_tile_size_is_rejected() {
    let (s, _) = corpus(2);
    let mut cfg = gan_config();
    cfg.generator.image_size = 32;
    cfg.generator.n_up_blocks = 2;
    assert!(matches!(train(&cfg, &s, &[]), Err(Error::Model(_))));
}

#[test]
fn loss_trace_round_trips_through_jsonl() {
    let (s, _) = corpus(3);
    let (_, trace) = train(&gan_config(), &s, &s).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("trace.jsonl");
    trace.write_jsonl(&p).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    assert_eq!(text.lines().count(), 7);
    assert!(text.lines().next().unwrap().starts_with("{\"step\":1,"));
    assert_eq!(LossTrace::read_jsonl(&p).unwrap(), trace);
}
