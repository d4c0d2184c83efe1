use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sar2rgb_core::manifest::read_pair_manifest;
use sar2rgb_core::read_tile;
use sar2rgb_trainer::LossTrace;

fn sar2rgb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sar2rgb"))
        .args(args)
        .env_remove("SAR2RGB_SEED")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = sar2rgb(args);
    assert!(
        out.status.success(),
        "{args:?} exited {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn corpus(root: &Path, n: &str, cf: &str) -> std::path::PathBuf {
    let c = root.join("corpus");
    ok(&["synth", "--out", s(&c), "--n-pairs", n, "--size", "16", "--cloud-fraction", cf, "--seed", "4"]);
    c
}

#[test]
fn no_arguments_is_a_usage_error() {
    assert_eq!(sar2rgb(&[]).status.code(), Some(1));
    assert_eq!(sar2rgb(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(sar2rgb(&["split", "--holdout", "x"]).status.code(), Some(1));
}

#[test]
fn help_works_for_every_subcommand() {
    ok(&["--help"]);
    ok(&["--version"]);
    for sub in ["ingest", "screen", "filter", "split", "train", "infer", "eval", "ensemble", "package", "synth"] {
        let out = ok(&[sub, "--help"]);
        assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"), "{sub}");
    }
}

#[test]
fn screen_writes_one_record_per_optical_tile() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), "12", "0.25");
    let out = dir.path().join("screen.jsonl");
    ok(&["screen", "--in", s(&c), "--out", s(&out), "--jobs", "2"]);
    let recs = read_pair_manifest(&out).unwrap();
    assert_eq!(recs.len(), 12);
    assert!(recs.iter().all(|r| r.screen.as_ref().is_some_and(|x| x.qa60_cloud_ratio.is_some())));
    let first = fs::read(&out).unwrap();

    // rerun is byte-identical, with any worker count
    ok(&["screen", "--in", s(&c), "--out", s(&out), "--jobs", "1"]);
    assert_eq!(fs::read(&out).unwrap(), first);

    // loose tiles without a manifest pair up to the same records
    fs::remove_file(c.join("pairs.jsonl")).unwrap();
    let loose = dir.path().join("loose.jsonl");
    ok(&["screen", "--in", s(&c), "--out", s(&loose)]);
    let a: Vec<_> = recs.iter().map(|r| (&r.pair_id, &r.screen)).collect();
    let got = read_pair_manifest(&loose).unwrap();
    let b: Vec<_> = got.iter().map(|r| (&r.pair_id, &r.screen)).collect();
    assert_eq!(a, b);
}

#[test]
fn filter_dataset2_keeps_clean_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), "10", "0.3");
    let scr = dir.path().join("screen.jsonl");
    let kept = dir.path().join("kept.jsonl");
    ok(&["screen", "--in", s(&c), "--out", s(&scr)]);
    ok(&["filter", "--preset", "dataset2", "--screen", s(&scr), "--out", s(&kept)]);
    let recs = read_pair_manifest(&kept).unwrap();
    assert_eq!(recs.len(), 7);
    assert!(recs.iter().all(|r| r.screen.as_ref().unwrap().heuristic_cloud_ratio == 0.0));
    assert_eq!(sar2rgb(&["filter", "--preset", "dataset3", "--screen", s(&scr), "--out", s(&kept)]).status.code(), Some(1));
}

#[test]
fn bad_inputs_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    fs::write(&bad, "{not json\n").unwrap();
    let out = dir.path().join("o.jsonl");
    assert_eq!(sar2rgb(&["screen", "--in", s(&bad), "--out", s(&out)]).status.code(), Some(2));
    assert_eq!(
        sar2rgb(&["filter", "--preset", "dataset1", "--screen", s(&dir.path().join("missing")), "--out", s(&out)]).status.code(),
        Some(2)
    );
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"sede": 3}"#).unwrap();
    let code = sar2rgb(&["--config", s(&cfg), "synth", "--out", s(dir.path())]).status.code();
    assert_eq!(code, Some(2));
}

#[test]
fn split_needs_a_seed_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), "10", "0");
    let m = c.join("pairs.jsonl");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(sar2rgb(&["split", "--in", s(&m), "--out", s(&a), "--holdout", "3"]).status.code(), Some(1));
    ok(&["split", "--in", s(&m), "--out", s(&a), "--holdout", "3", "--seed", "9"]);
    let out = Command::new(env!("CARGO_BIN_EXE_sar2rgb"))
        .args(["split", "--in", s(&m), "--out", s(&b), "--holdout", "3"])
        .env("SAR2RGB_SEED", "9")
        .output()
        .unwrap();
    assert!(out.status.success());
    for f in ["train.jsonl", "eval.jsonl"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
    assert_eq!(read_pair_manifest(a.join("eval.jsonl")).unwrap().len(), 3);
}

const SMALL: &[&str] = &[
    "--image-size", "16", "--base-width", "4", "--seed-size", "8", "--spade-hidden", "8",
    "--disc-base-width", "4", "--disc-layers", "2", "--batch-size", "2", "--max-steps", "6",
    "--eval-every", "3",
];

#[test]
fn train_infer_eval_ensemble_package() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let c = corpus(root, "8", "0");
    let m = c.join("pairs.jsonl");
    let split = root.join("split");
    ok(&["split", "--in", s(&m), "--out", s(&split), "--holdout", "2", "--seed", "1"]);
    let (tr, ev) = (split.join("train.jsonl"), split.join("eval.jsonl"));

    let run = |name: &str, extra: &[&str]| {
        let out = root.join(name);
        let mut args = vec!["--deterministic", "--seed", "5", "train", "--in", s(&tr), "--eval", s(&ev), "--out", s(&out)];
        let out_s = out.to_str().unwrap().to_string();
        args.extend_from_slice(SMALL);
        args.extend_from_slice(extra);
        ok(&args);
        std::path::PathBuf::from(out_s)
    };
    let a = run("run_a", &[]);
    let b = run("run_b", &[]);
    assert_eq!(fs::read(a.join("trace.jsonl")).unwrap(), fs::read(b.join("trace.jsonl")).unwrap());
    assert_eq!(fs::read(a.join("checkpoint.s2ck")).unwrap(), fs::read(b.join("checkpoint.s2ck")).unwrap());
    let trace = LossTrace::read_jsonl(a.join("trace.jsonl")).unwrap();
    assert_eq!(trace.len(), 6);
    assert!(trace.records.iter().all(|r| r.discriminator_loss.is_some()));

    // resume from the 6-step run to 9 steps
    let resumed = root.join("run_c");
    ok(&["train", "--in", s(&tr), "--eval", s(&ev), "--out", s(&resumed), "--resume", s(&a.join("checkpoint.s2ck")), "--max-steps", "9"]);
    assert_eq!(LossTrace::read_jsonl(resumed.join("trace.jsonl")).unwrap().records[0].step, 7);

    let p2p = run("run_p", &["--variant", "pix2pixhd", "--n-res-blocks", "1", "--gan-weight", "0", "--l1-weight", "1"]);

    let (pa, pp) = (root.join("pred_a"), root.join("pred_p"));
    ok(&["infer", "--checkpoint", s(&a.join("checkpoint.s2ck")), "--in", s(&ev), "--out", s(&pa)]);
    ok(&["infer", "--checkpoint", s(&p2p.join("checkpoint.s2ck")), "--in", s(&ev), "--out", s(&pp)]);
    let eval_ids: Vec<String> = read_pair_manifest(&ev).unwrap().into_iter().map(|p| p.pair_id).collect();
    for id in &eval_ids {
        let t = read_tile(pa.join(format!("{id}.s2tl"))).unwrap();
        assert_eq!((t.bands(), t.height()), (3, 16));
        assert!(t.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    let report = root.join("report.json");
    ok(&["eval", "--pred", s(&pa), "--ref", s(&ev), "--out", s(&report)]);
    let rep: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(rep["n_images"], 2);
    assert!(rep["mae_mean"].as_f64().unwrap() < 1.0);

    let ens = root.join("ens");
    let ma = format!("spade={}", s(&pa));
    let mp = format!("p2p={}", s(&pp));
    ok(&["ensemble", "--member", &ma, "--member", &mp, "--mode", "mean", "--out", s(&ens)]);
    let assign = root.join("assign.json");
    let map: serde_json::Map<String, serde_json::Value> =
        eval_ids.iter().map(|id| (id.clone(), "spade".into())).collect();
    fs::write(&assign, serde_json::to_string(&map).unwrap()).unwrap();
    let ens2 = root.join("ens2");
    ok(&["ensemble", "--member", &ma, "--member", &mp, "--mode", "assign", "--assignment", s(&assign), "--out", s(&ens2)]);
    for id in &eval_ids {
        let f = format!("{id}.s2tl");
        assert_eq!(fs::read(ens2.join(&f)).unwrap(), fs::read(pa.join(&f)).unwrap());
    }

    let sub = root.join("sub");
    let first = ok(&["package", "--in", s(&ens), "--out", s(&sub)]).stdout;
    let second = ok(&["package", "--in", s(&ens), "--out", s(&sub)]).stdout;
    assert_eq!(first, second);
    let summary: serde_json::Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(summary["count"], 2);
}

#[test]
fn config_document_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("pipeline.json");
    fs::write(&cfg, r#"{"seed": 4, "paths": {"out": "made"}}"#).unwrap();
    ok(&["--config", s(&cfg), "synth", "--n-pairs", "3", "--size", "16"]);
    let via_cfg = fs::read(dir.path().join("made/pairs.jsonl")).unwrap();
    let direct = dir.path().join("direct");
    ok(&["synth", "--out", s(&direct), "--n-pairs", "3", "--size", "16", "--seed", "4"]);
    let a = read_pair_manifest(dir.path().join("made/pairs.jsonl")).unwrap();
    let b = read_pair_manifest(direct.join("pairs.jsonl")).unwrap();
    assert!(!via_cfg.is_empty());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(read_tile(&x.s2_path).unwrap(), read_tile(&y.s2_path).unwrap());
    }
}

#[test]
fn ingest_reads_synthetic_geotiffs() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("tif");
    ok(&["synth", "--format", "tiff", "--out", s(&src), "--n-pairs", "2", "--size", "16", "--seed", "3"]);
    let out = dir.path().join("tiles");
    ok(&["ingest", "--in", s(&src.join("s1")), "--out", s(&out), "--bands", "VV,VH", "--date", "2022-06-15"]);
    let tiles: Vec<_> = fs::read_dir(&out).unwrap().collect();
    assert_eq!(tiles.len(), 2);
    let t = read_tile(tiles[0].as_ref().unwrap().path()).unwrap();
    assert_eq!(t.bands(), 2);
    assert_eq!(t.meta().acquired_date, "2022-06-15");
}

#[test]
fn partial_train_section_fills_in_variant_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), "4", "0");
    let cfg = dir.path().join("pipeline.json");
    fs::write(
        &cfg,
        r#"{"seed": 2, "paths": {"in": "corpus/pairs.jsonl", "out": "run"},
            "train": {"generator": {"variant": "PIX2PIXHD", "image_size": 16, "base_width": 4, "n_res_blocks": 1},
                      "loss": {"gan_weight": 1.0, "l1_weight": 10.0}, "max_steps": 2,
                      "discriminator": {"base_width": 4, "n_layers": 2}}}"#,
    )
    .unwrap();
    assert!(c.exists());
    ok(&["--config", s(&cfg), "train", "--batch-size", "2"]);
    let written: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run/train_config.json")).unwrap()).unwrap();
    assert_eq!(written["generator"]["in_channels"], 2);
    assert_eq!(written["generator"]["base_width"], 4);
    assert_eq!(written["loss"]["gan_kind"], "LSGAN");
    assert_eq!(written["optimizer"]["beta1"], 0.5);
    assert_eq!(written["batch_size"], 2);
    assert_eq!(written["seed"], 2);

    fs::write(&cfg, r#"{"train": {"generator": {"widht": 3}}}"#).unwrap();
    let m = c.join("pairs.jsonl");
    let out = sar2rgb(&["--config", s(&cfg), "train", "--in", s(&m), "--out", "y"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("widht"));
}
