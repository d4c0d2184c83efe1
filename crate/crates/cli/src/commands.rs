use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use log::{info, warn};
use rayon::prelude::*;
use sar2rgb_core::cloudscreen::{screen_tile, HeuristicParams};
use sar2rgb_core::curation::{
    attach_qa60, filter_dataset, normalize_s2_reflectance, pair_manifests, split_holdout,
    FilterSpec, MatchKey, PairPolicy, PairRecord, SourceRecord,
};
use sar2rgb_core::evalkit::{ensemble, evaluate, package_submission, EnsembleMode, EnsembleSpec, Prediction};
use sar2rgb_core::fixture::{synth_fixture, synth_tiff_sources, FixtureSpec, FIXTURE_MANIFEST};
use sar2rgb_core::ingest::ingest_external;
use sar2rgb_core::manifest::{read_pair_manifest, write_jsonl, write_pair_manifest};
use sar2rgb_core::tile::TILE_EXTENSION;
use sar2rgb_core::{read_tile, write_tile, BandRole, Sensor, Tile};
use sar2rgb_sargen::{GanKind, GeneratorConfig, LossConfig, NormStats, Variant};
use sar2rgb_trainer::{
    infer_tile, load_checkpoint, load_samples, save_checkpoint, Trainer, TrainConfig,
};

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};
use crate::{Cli, Command, Common, SEED_ENV};

pub const CHECKPOINT_FILE: &str = "checkpoint.s2ck";
pub const TRACE_FILE: &str = "trace.jsonl";
pub const TRAIN_CONFIG_FILE: &str = "train_config.json";
pub const TRAIN_SPLIT_FILE: &str = "train.jsonl";
pub const EVAL_SPLIT_FILE: &str = "eval.jsonl";

/// Resolved global settings shared by every subcommand.
struct Ctx {
    cfg: PipelineConfig,
    seed: Option<u64>,
    jobs: Option<usize>,
    deterministic: bool,
}

impl Ctx {
    fn new(common: &Common) -> Result<Self> {
        let cfg = match &common.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        let env_seed = match std::env::var(SEED_ENV) {
            Ok(v) => Some(v.trim().parse::<u64>().map_err(|_| {
                CliError::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))
            })?),
            Err(_) => None,
        };
        Ok(Ctx {
            seed: common.seed.or(cfg.seed).or(env_seed),
            jobs: common.jobs.or(cfg.jobs),
            deterministic: common.deterministic || cfg.deterministic.unwrap_or(false),
            cfg,
        })
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs.unwrap_or(0))
            .build()
            .map_err(|e| CliError::Runtime(format!("cannot start worker threads: {e}")))
    }
}

fn need<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| CliError::Usage(format!("missing required {flag}")))
}

fn existing(p: PathBuf) -> Result<PathBuf> {
    if p.exists() {
        Ok(p)
    } else {
        Err(CliError::Data(format!("{} does not exist", p.display())))
    }
}

fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| CliError::Runtime(format!("{}: {e}", p.display())))
}

fn write_text(p: &Path, text: &str) -> Result<()> {
    fs::write(p, text).map_err(|e| CliError::Runtime(format!("{}: {e}", p.display())))
}

/// Tile files directly inside `dir`, sorted by name, with their file stems.
fn tile_files(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let rd = fs::read_dir(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    let mut out = Vec::new();
    for entry in rd {
        let path = entry.map_err(|e| CliError::Data(e.to_string()))?.path();
        if path.extension().and_then(|e| e.to_str()) == Some(TILE_EXTENSION) && path.is_file() {
            let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
            out.push((stem, path));
        }
    }
    out.sort();
    Ok(out)
}

/// Predictions keyed by file stem.
fn read_predictions(dir: &Path) -> Result<Vec<Prediction>> {
    tile_files(dir)?
        .into_iter()
        .map(|(id, p)| Ok(Prediction::new(id, read_tile(&p)?)))
        .collect()
}

fn write_predictions(preds: &[Prediction], out: &Path) -> Result<()> {
    create_dir(out)?;
    for p in preds {
        let tile = p.tile.clone().with_tile_id(p.pair_id.clone())?;
        write_tile(&tile, out.join(format!("{}.{TILE_EXTENSION}", p.pair_id)))?;
    }
    Ok(())
}

pub fn dispatch(cli: Cli) -> Result<()> {
    let ctx = Ctx::new(&cli.common)?;
    match cli.command {
        Command::Ingest(a) => ingest(&ctx, a),
        Command::Screen(a) => screen(&ctx, a),
        Command::Filter(a) => filter(&ctx, a),
        Command::Split(a) => split(&ctx, a),
        Command::Train(a) => train(&ctx, a),
        Command::Infer(a) => infer(&ctx, a),
        Command::Eval(a) => eval(&ctx, a),
        Command::Ensemble(a) => ensemble_cmd(&ctx, a),
        Command::Package(a) => package(&ctx, a),
        Command::Synth(a) => synth(&ctx, a),
    }
}

// ---------------------------------------------------------------- ingest

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// GeoTIFF file, or a directory of .tif/.tiff files
    #[arg(long = "in", value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Output directory for tiles
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Band roles in raster band order, e.g. VV,VH or RED,GREEN,BLUE or QA60
    #[arg(long, value_delimiter = ',', required = true)]
    pub bands: Vec<String>,
    /// Acquisition date (YYYY-MM-DD) recorded on every tile
    #[arg(long)]
    pub date: Option<String>,
}

fn ingest(ctx: &Ctx, a: IngestArgs) -> Result<()> {
    let input = existing(need(a.input.or(ctx.cfg.paths.input.clone()), "--in")?)?;
    let out = need(a.out.or(ctx.cfg.paths.out.clone()), "--out")?;
    let roles = a
        .bands
        .iter()
        .map(|b| BandRole::parse(b).ok_or_else(|| CliError::Usage(format!("unknown band role {b:?}"))))
        .collect::<Result<Vec<_>>>()?;
    let files = if input.is_dir() {
        let mut v: Vec<PathBuf> = fs::read_dir(&input)
            .map_err(|e| CliError::Data(format!("{}: {e}", input.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("tif" | "tiff")))
            .collect();
        v.sort();
        v
    } else {
        vec![input]
    };
    create_dir(&out)?;
    for f in &files {
        let mut tile = ingest_external(f, &roles)?;
        if let Some(d) = &a.date {
            let meta = tile.meta().clone().with_date(d.clone());
            let (roles, h, w) = (tile.band_roles().to_vec(), tile.height(), tile.width());
            tile = Tile::new(tile.into_data(), roles, h, w, meta)?;
        }
        write_tile(&tile, out.join(format!("{}.{TILE_EXTENSION}", tile.tile_id())))?;
    }
    info!("ingested {} rasters into {}", files.len(), out.display());
    Ok(())
}

// ---------------------------------------------------------------- screen

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MatchKeyArg {
    TileId,
    TileIdAndDate,
}

#[derive(Debug, Args)]
pub struct ScreenArgs {
    /// Corpus directory (with pairs.jsonl, or tiles to pair) or a pair manifest
    #[arg(long = "in", value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Output JSONL: one pair record with its screen report per optical tile
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Heuristic score threshold (brightness minus saturation)
    #[arg(long)]
    pub score_threshold: Option<f32>,
    /// Heuristic brightness threshold
    #[arg(long)]
    pub brightness_threshold: Option<f32>,
    /// Pairing key when scanning loose tiles
    #[arg(long, value_enum)]
    pub match_key: Option<MatchKeyArg>,
    /// Largest SAR/optical acquisition gap in days when pairing by date
    #[arg(long)]
    pub max_day_gap: Option<u32>,
}

/// Pairs loose tiles found under `dir` and its immediate subdirectories.
fn scan_corpus(dir: &Path, policy: &PairPolicy) -> Result<Vec<PairRecord>> {
    let mut files = tile_files(dir)?;
    let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    for d in subdirs {
        files.extend(tile_files(&d)?);
    }
    let (mut s1, mut s2, mut qa) = (Vec::new(), Vec::new(), Vec::new());
    for (_, path) in files {
        let tile = read_tile(&path)?;
        let rec = SourceRecord {
            meta: tile.meta().clone(),
            path,
        };
        match tile.meta().sensor {
            Sensor::S1 => s1.push(rec),
            Sensor::S2 => s2.push(rec),
            Sensor::Qa60 => qa.push(rec),
        }
    }
    let outcome = pair_manifests(&s1, &s2, policy)?;
    if outcome.unmatched_s1 + outcome.unmatched_s2 > 0 {
        warn!(
            "{} SAR and {} optical tiles had no partner",
            outcome.unmatched_s1, outcome.unmatched_s2
        );
    }
    let mut pairs = outcome.pairs;
    attach_qa60(&mut pairs, &s2, &qa);
    Ok(pairs)
}

fn screen(ctx: &Ctx, a: ScreenArgs) -> Result<()> {
    let input = existing(need(a.input.or(ctx.cfg.paths.input.clone()), "--in")?)?;
    let out = need(a.out.or(ctx.cfg.paths.out.clone()), "--out")?;
    let mut params = ctx.cfg.heuristic.unwrap_or_default();
    if let Some(v) = a.score_threshold {
        params.score_threshold = v;
    }
    if let Some(v) = a.brightness_threshold {
        params.brightness_threshold = v;
    }
    params.validate()?;
    let mut policy = ctx.cfg.pair_policy.unwrap_or_default();
    if let Some(k) = a.match_key {
        policy.match_key = match k {
            MatchKeyArg::TileId => MatchKey::TileId,
            MatchKeyArg::TileIdAndDate => MatchKey::TileIdAndDate,
        };
    }
    if let Some(g) = a.max_day_gap {
        policy.max_day_gap = g;
    }

    let pairs = if input.is_dir() {
        let manifest = input.join(FIXTURE_MANIFEST);
        if manifest.is_file() {
            read_pair_manifest(&manifest)?
        } else {
            scan_corpus(&input, &policy)?
        }
    } else {
        read_pair_manifest(&input)?
    };
    let screened: Vec<PairRecord> = ctx.pool()?.install(|| {
        pairs
            .par_iter()
            .map(|p| screen_pair(p, &params))
            .collect::<Result<_>>()
    })?;
    write_jsonl(&out, &screened)?;
    info!("screened {} optical tiles into {}", screened.len(), out.display());
    Ok(())
}

fn screen_pair(p: &PairRecord, params: &HeuristicParams) -> Result<PairRecord> {
    let rgb = normalize_s2_reflectance(&read_tile(&p.s2_path)?)?;
    let qa = p.qa60_path.as_ref().map(read_tile).transpose()?;
    let report = screen_tile(&rgb, qa.as_ref(), params)?;
    Ok(PairRecord {
        screen: Some(report),
        ..p.clone()
    })
}

// ---------------------------------------------------------------- filter

#[derive(Debug, Args)]
pub struct FilterArgs {
    /// Dataset preset: dataset1 (no nodata, no QA60 cloud) or dataset2 (also no heuristic cloud)
    #[arg(long)]
    pub preset: Option<String>,
    /// Screened manifest written by `screen`
    #[arg(long, value_name = "PATH", alias = "in")]
    pub screen: Option<PathBuf>,
    /// Output manifest of the kept pairs
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

fn filter(ctx: &Ctx, a: FilterArgs) -> Result<()> {
    let name = need(a.preset.or(ctx.cfg.preset.clone()), "--preset")?;
    let spec = FilterSpec::preset(&name).map_err(|e| CliError::Usage(e.to_string()))?;
    let input = a
        .screen
        .or(ctx.cfg.paths.screen.clone())
        .or(ctx.cfg.paths.input.clone());
    let input = existing(need(input, "--screen")?)?;
    let out = need(a.out.or(ctx.cfg.paths.out.clone()), "--out")?;
    let pairs = read_pair_manifest(&input)?;
    let kept = filter_dataset(&pairs, &spec)?;
    write_pair_manifest(&out, &kept)?;
    info!("{name}: kept {} of {} pairs", kept.len(), pairs.len());
    Ok(())
}

// ---------------------------------------------------------------- split

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Pair manifest to split
    #[arg(long = "in", value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Output directory for train.jsonl and eval.jsonl
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Number of held-out pairs
    #[arg(long)]
    pub holdout: Option<usize>,
}

fn split(ctx: &Ctx, a: SplitArgs) -> Result<()> {
    let input = existing(need(a.input.or(ctx.cfg.paths.input.clone()), "--in")?)?;
    let out = need(a.out.or(ctx.cfg.paths.out.clone()), "--out")?;
    let n = need(a.holdout.or(ctx.cfg.holdout), "--holdout")?;
    let seed = need(ctx.seed, "--seed")?;
    let pairs = read_pair_manifest(&input)?;
    let (train, eval) = split_holdout(&pairs, n, seed)?;
    create_dir(&out)?;
    write_pair_manifest(out.join(TRAIN_SPLIT_FILE), &train)?;
    write_pair_manifest(out.join(EVAL_SPLIT_FILE), &eval)?;
    info!("split {} pairs into {} train / {} eval", pairs.len(), train.len(), eval.len());
    Ok(())
}

// ---------------------------------------------------------------- train

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Spade,
    Pix2pixhd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GanKindArg {
    Hinge,
    Lsgan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormStatsArg {
    Batch,
    Sample,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training pair manifest
    #[arg(long = "in", value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Held-out pair manifest for periodic evaluation
    #[arg(long, value_name = "PATH")]
    pub eval: Option<PathBuf>,
    /// Run directory for checkpoint.s2ck, trace.jsonl and train_config.json
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Continue from this checkpoint
    #[arg(long, value_name = "PATH")]
    pub resume: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    #[arg(long)]
    pub image_size: Option<usize>,
    #[arg(long)]
    pub base_width: Option<usize>,
    #[arg(long)]
    pub n_up_blocks: Option<usize>,
    #[arg(long)]
    pub seed_size: Option<usize>,
    #[arg(long)]
    pub n_res_blocks: Option<usize>,
    #[arg(long)]
    pub spade_hidden: Option<usize>,
    #[arg(long, value_enum)]
    pub norm_stats: Option<NormStatsArg>,
    /// Adversarial term weight (0 or 1)
    #[arg(long)]
    pub gan_weight: Option<f64>,
    /// Reconstruction (L1) term weight
    #[arg(long)]
    pub l1_weight: Option<f64>,
    #[arg(long, value_enum)]
    pub gan_kind: Option<GanKindArg>,
    #[arg(long)]
    pub disc_scales: Option<usize>,
    #[arg(long)]
    pub disc_layers: Option<usize>,
    #[arg(long)]
    pub disc_base_width: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub beta2: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_steps: Option<u64>,
    #[arg(long)]
    pub eval_every: Option<u64>,
}

/// Overlays `patch` onto `base`, recursing into objects.
fn merge(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// The variant's defaults, overlaid with the document's `train` section and
/// then with every given flag.
fn train_config(ctx: &Ctx, a: &TrainArgs) -> Result<TrainConfig> {
    let doc = ctx.cfg.train.clone().unwrap_or_else(|| serde_json::json!({}));
    let doc_variant = doc
        .pointer("/generator/variant")
        .map(|v| serde_json::from_value::<Variant>(v.clone()))
        .transpose()
        .map_err(|e| CliError::Data(format!("train.generator.variant: {e}")))?;
    let variant = match a.variant {
        Some(VariantArg::Spade) => Variant::Spade,
        Some(VariantArg::Pix2pixhd) => Variant::Pix2pixhd,
        None => doc_variant.unwrap_or(Variant::Spade),
    };
    let g = match variant {
        Variant::Spade => GeneratorConfig::spade(),
        Variant::Pix2pixhd => GeneratorConfig::pix2pixhd(),
    };
    let kind = g.default_gan_kind();
    let mut merged = serde_json::to_value(TrainConfig::new(g, LossConfig::gan_l1(kind, 100.0)))
        .expect("config serializes");
    merge(&mut merged, doc);
    let mut cfg: TrainConfig =
        serde_json::from_value(merged).map_err(|e| CliError::Data(format!("train config: {e}")))?;
    cfg.generator.variant = variant;
    let g = &mut cfg.generator;
    if let Some(v) = a.seed_size {
        g.seed_size = v;
    }
    if let Some(v) = a.image_size {
        g.image_size = v;
        if a.n_up_blocks.is_none() && g.seed_size > 0 && v % g.seed_size == 0 && (v / g.seed_size).is_power_of_two() {
            g.n_up_blocks = (v / g.seed_size).trailing_zeros() as usize;
        }
    }
    macro_rules! set {
        ($($flag:ident => $dst:expr),* $(,)?) => {
            $(if let Some(v) = a.$flag { $dst = v; })*
        };
    }
    set!(
        base_width => cfg.generator.base_width,
        n_up_blocks => cfg.generator.n_up_blocks,
        n_res_blocks => cfg.generator.n_res_blocks,
        spade_hidden => cfg.generator.spade_hidden,
        gan_weight => cfg.loss.gan_weight,
        l1_weight => cfg.loss.l1_weight,
        disc_scales => cfg.discriminator.n_scales,
        disc_layers => cfg.discriminator.n_layers,
        disc_base_width => cfg.discriminator.base_width,
        learning_rate => cfg.optimizer.learning_rate,
        beta1 => cfg.optimizer.beta1,
        beta2 => cfg.optimizer.beta2,
        batch_size => cfg.batch_size,
        max_steps => cfg.max_steps,
        eval_every => cfg.eval_every,
    );
    if let Some(v) = a.norm_stats {
        cfg.generator.norm_stats = match v {
            NormStatsArg::Batch => NormStats::Batch,
            NormStatsArg::Sample => NormStats::Sample,
        };
    }
    if let Some(k) = a.gan_kind {
        cfg.loss.gan_kind = match k {
            GanKindArg::Hinge => GanKind::Hinge,
            GanKindArg::Lsgan => GanKind::Lsgan,
        };
    }
    if let Some(s) = ctx.seed {
        cfg.seed = s;
    }
    cfg.deterministic = cfg.deterministic || ctx.deterministic;
    cfg.validate().map_err(|e| CliError::Data(e.to_string()))?;
    Ok(cfg)
}

fn train(ctx: &Ctx, a: TrainArgs) -> Result<()> {
    let input = existing(need(a.input.clone().or(ctx.cfg.paths.input.clone()), "--in")?)?;
    let eval_path = a.eval.clone().or(ctx.cfg.paths.eval.clone()).map(existing).transpose()?;
    let out = need(a.out.clone().or(ctx.cfg.paths.out.clone()), "--out")?;
    let resume = a.resume.clone().or(ctx.cfg.paths.resume.clone()).map(existing).transpose()?;

    let mut trainer = match resume {
        Some(p) => {
            let mut ck = load_checkpoint(&p)?;
            if let Some(n) = a.max_steps {
                ck.config.max_steps = n;
            }
            info!("resuming {} at step {}", p.display(), ck.step);
            Trainer::from_checkpoint(ck)?
        }
        None => Trainer::new(train_config(ctx, &a)?)?,
    };
    let cfg = trainer.checkpoint().config.clone();
    let train_set = load_samples(&read_pair_manifest(&input)?)?;
    let eval_set = match &eval_path {
        Some(p) => load_samples(&read_pair_manifest(p)?)?,
        None => Vec::new(),
    };
    info!(
        "training {:?} on {} pairs for {} steps (seed {})",
        cfg.generator.variant,
        train_set.len(),
        cfg.max_steps,
        cfg.seed
    );
    let log_every = (cfg.max_steps / 20).max(1);
    let trace = trainer.run(&train_set, &eval_set, |r| {
        if r.step % log_every == 0 || r.eval_mae.is_some() {
            let mut line = format!("step {} total {:.6} l1 {:.6}", r.step, r.generator_total, r.l1_term);
            if let (Some(g), Some(d)) = (r.gan_term, r.discriminator_loss) {
                line.push_str(&format!(" gan {g:.6} disc {d:.6}"));
            }
            if let (Some(m), Some(p)) = (r.eval_mae, r.eval_psnr) {
                line.push_str(&format!(" eval_mae {m:.6} eval_psnr {p:.4}"));
            }
            info!("{line}");
        }
    })?;
    create_dir(&out)?;
    save_checkpoint(trainer.checkpoint(), out.join(CHECKPOINT_FILE))?;
    trace.write_jsonl(out.join(TRACE_FILE))?;
    let cfg_json = serde_json::to_string_pretty(&cfg).expect("config serializes");
    write_text(&out.join(TRAIN_CONFIG_FILE), &(cfg_json + "\n"))?;
    info!("wrote {}", out.display());
    Ok(())
}

// ---------------------------------------------------------------- infer

#[derive(Debug, Args)]
pub struct InferArgs {
    /// Trained checkpoint
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    /// Pair manifest (its SAR tiles are used) or a directory of SAR tiles
    #[arg(long = "in", value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Output directory for predicted RGB tiles
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

fn infer(ctx: &Ctx, a: InferArgs) -> Result<()> {
    let ck_path = existing(need(a.checkpoint.or(ctx.cfg.paths.checkpoint.clone()), "--checkpoint")?)?;
    let input = existing(need(a.input.or(ctx.cfg.paths.input.clone()), "--in")?)?;
    let out = need(a.out.or(ctx.cfg.paths.out.clone()), "--out")?;
    let ck = load_checkpoint(&ck_path)?;
    let jobs: Vec<(String, PathBuf)> = if input.is_dir() {
        tile_files(&input)?
    } else {
        read_pair_manifest(&input)?
            .into_iter()
            .map(|p| (p.pair_id, p.s1_path))
            .collect()
    };
    let preds: Vec<Prediction> = ctx.pool()?.install(|| {
        jobs.par_iter()
            .map(|(id, path)| {
                let tile = infer_tile(&ck.generator, &read_tile(path)?)?;
                Ok(Prediction::new(id.clone(), tile))
            })
            .collect::<Result<_>>()
    })?;
    write_predictions(&preds, &out)?;
    info!("wrote {} predictions to {}", preds.len(), out.display());
    Ok(())
}

// ---------------------------------------------------------------- eval

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory of predicted RGB tiles named <pair_id>.s2tl
    #[arg(long, value_name = "DIR", alias = "in")]
    pub pred: Option<PathBuf>,
    /// Pair manifest whose optical tiles are the references
    #[arg(long = "ref", value_name = "PATH")]
    pub reference: Option<PathBuf>,
    /// Write the metrics report here instead of standard output
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

fn eval(ctx: &Ctx, a: EvalArgs) -> Result<()> {
    let pred_dir = a.pred.or(ctx.cfg.paths.pred.clone()).or(ctx.cfg.paths.input.clone());
    let pred_dir = existing(need(pred_dir, "--pred")?)?;
    let reference = existing(need(a.reference.or(ctx.cfg.paths.reference.clone()), "--ref")?)?;
    let preds = read_predictions(&pred_dir)?;
    let refs = read_pair_manifest(&reference)?
        .into_iter()
        .map(|p| Ok(Prediction::new(p.pair_id, normalize_s2_reflectance(&read_tile(&p.s2_path)?)?)))
        .collect::<Result<Vec<_>>>()?;
    let report = evaluate(&preds, &refs)?;
    info!(
        "{} images: MAE {:.6}, PSNR {:.4} dB",
        report.n_images, report.mae_mean, report.psnr_mean_db
    );
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    match a.out.or(ctx.cfg.paths.out.clone()) {
        Some(p) => write_text(&p, &json),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

// ---------------------------------------------------------------- ensemble

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EnsembleModeArg {
    Mean,
    Assign,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    /// Member as NAME=DIR; repeat for each member
    #[arg(long = "member", value_name = "NAME=DIR")]
    pub members: Vec<String>,
    #[arg(long, value_enum)]
    pub mode: Option<EnsembleModeArg>,
    /// JSON object mapping pair_id to member name (assign mode)
    #[arg(long, value_name = "PATH")]
    pub assignment: Option<PathBuf>,
    /// Output directory for combined tiles
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

fn ensemble_cmd(ctx: &Ctx, a: EnsembleArgs) -> Result<()> {
    let out = need(a.out.or(ctx.cfg.paths.out.clone()), "--out")?;
    let members: Vec<(String, PathBuf)> = if a.members.is_empty() {
        ctx.cfg
            .paths
            .members
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    } else {
        a.members
            .iter()
            .map(|m| {
                m.split_once('=')
                    .map(|(n, d)| (n.to_string(), PathBuf::from(d)))
                    .ok_or_else(|| CliError::Usage(format!("--member {m:?} is not NAME=DIR")))
            })
            .collect::<Result<_>>()?
    };
    if members.is_empty() {
        return Err(CliError::Usage("missing required --member".into()));
    }
    let mut spec = ctx
        .cfg
        .ensemble
        .clone()
        .unwrap_or_else(|| EnsembleSpec::mean(Vec::new()));
    if !a.members.is_empty() || spec.members.is_empty() {
        spec.members = members.iter().map(|(n, _)| n.clone()).collect();
    }
    if let Some(m) = a.mode {
        spec.mode = match m {
            EnsembleModeArg::Mean => EnsembleMode::Mean,
            EnsembleModeArg::Assign => EnsembleMode::Assign,
        };
    }
    if let Some(p) = a.assignment.or(ctx.cfg.paths.assignment.clone()) {
        let p = existing(p)?;
        let text = fs::read_to_string(&p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
        let map: BTreeMap<String, String> = serde_json::from_str(&text)
            .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
        spec.assignment = Some(map);
    }
    let mut outputs = BTreeMap::new();
    for (name, dir) in &members {
        outputs.insert(name.clone(), read_predictions(&existing(dir.clone())?)?);
    }
    let combined = ensemble(&outputs, &spec)?;
    write_predictions(&combined, &out)?;
    info!("combined {} members into {} tiles", members.len(), combined.len());
    Ok(())
}

// ---------------------------------------------------------------- package

#[derive(Debug, Args)]
pub struct PackageArgs {
    /// Directory of RGB prediction tiles
    #[arg(long = "in", value_name = "DIR")]
    pub input: Option<PathBuf>,
    /// Submission directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

fn package(ctx: &Ctx, a: PackageArgs) -> Result<()> {
    let input = existing(need(a.input.or(ctx.cfg.paths.input.clone()), "--in")?)?;
    let out = need(a.out.or(ctx.cfg.paths.out.clone()), "--out")?;
    let summary = package_submission(&read_predictions(&input)?, &out)?;
    println!("{}", serde_json::to_string(&summary).expect("summary serializes"));
    Ok(())
}

// ---------------------------------------------------------------- synth

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthFormat {
    /// Native tiles plus a pairs.jsonl manifest
    Tiles,
    /// Float32 GeoTIFF-style sources for the ingest path
    Tiff,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    pub n_pairs: usize,
    /// Tile side length (power of two, at least 16)
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    /// Fraction of optical tiles that receive a cloud
    #[arg(long, default_value_t = 0.0)]
    pub cloud_fraction: f64,
    #[arg(long, value_enum, default_value_t = SynthFormat::Tiles)]
    pub format: SynthFormat,
}

fn synth(ctx: &Ctx, a: SynthArgs) -> Result<()> {
    let out = need(a.out.or(ctx.cfg.paths.out.clone()), "--out")?;
    let spec = FixtureSpec {
        n_pairs: a.n_pairs,
        size: a.size,
        cloud_fraction: a.cloud_fraction,
        seed: ctx.seed.unwrap_or(0),
    };
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    match a.format {
        SynthFormat::Tiles => {
            let corpus = synth_fixture(&spec, &out)?;
            info!(
                "wrote {} pairs ({} cloudy) to {}",
                corpus.pairs.len(),
                corpus.cloudy_ids.len(),
                corpus.manifest.display()
            );
        }
        SynthFormat::Tiff => {
            let files = synth_tiff_sources(&spec, &out)?;
            info!("wrote {} rasters under {}", files.len(), out.display());
        }
    }
    Ok(())
}
