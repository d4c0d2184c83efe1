use std::io::Write;
use std::path::Path;

use sar2rgb_core::curation::model_to_rgb;
use sar2rgb_core::evalkit::{evaluate, MetricsReport, Prediction};
use sar2rgb_core::rng::{shuffle, SplitMix64};
use sar2rgb_core::{Planes, Sensor, TileMeta};
use sar2rgb_sargen::{Discriminator, GanRole, Generator, Graph, Tensor};
use serde::{Deserialize, Serialize};

use crate::adam::AdamState;
use crate::config::TrainConfig;
use crate::data::Sample;
use crate::error::{Error, Result};

/// Stream id separating discriminator initialization from the generator's.
const DISCRIMINATOR_STREAM: u64 = 1;

/// Epoch-wise shuffled batch order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerState {
    pub epoch: u64,
    /// Position of the next batch within `order`.
    pub cursor: usize,
    pub order: Vec<usize>,
}

impl SamplerState {
    fn start(n: usize, seed: u64) -> Self {
        SamplerState {
            epoch: 0,
            cursor: 0,
            order: epoch_order(n, seed, 0),
        }
    }

    fn next_batch(&mut self, n: usize, batch: usize, seed: u64) -> Result<Vec<usize>> {
        if self.order.len() != n {
            return Err(Error::Config(format!(
                "checkpoint was trained on {} pairs, got {n}",
                self.order.len()
            )));
        }
        if self.cursor >= n {
            self.epoch += 1;
            self.cursor = 0;
            self.order = epoch_order(n, seed, self.epoch);
        }
        let end = (self.cursor + batch).min(n);
        let idx = self.order[self.cursor..end].to_vec();
        self.cursor = end;
        Ok(idx)
    }
}

/// Fisher-Yates order of `0..n` for one epoch.
pub fn epoch_order(n: usize, seed: u64, epoch: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    shuffle(&mut order, &mut SplitMix64::for_stream(seed, epoch));
    order
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub generator_total: f64,
    pub gan_term: Option<f64>,
    pub l1_term: f64,
    pub discriminator_loss: Option<f64>,
    pub eval_mae: Option<f64>,
    pub eval_psnr: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossTrace {
    pub records: Vec<StepRecord>,
}

impl LossTrace {
    pub fn push(&mut self, r: StepRecord) {
        debug_assert!(self.records.last().is_none_or(|l| l.step < r.step));
        self.records.push(r);
    }

    pub fn extend(&mut self, other: LossTrace) {
        for r in other.records {
            self.push(r);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        for r in &self.records {
            let line = serde_json::to_string(r).expect("record serializes");
            writeln!(f, "{line}").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Self> {
        Ok(LossTrace {
            records: sar2rgb_core::manifest::read_jsonl(path)?,
        })
    }

    pub fn last_eval(&self) -> Option<&StepRecord> {
        self.records.iter().rev().find(|r| r.eval_mae.is_some())
    }
}

/// Everything needed to continue a run or to run inference.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub step: u64,
    pub generator: Generator<f32>,
    pub discriminator: Option<Discriminator<f32>>,
    pub generator_adam: AdamState,
    pub discriminator_adam: Option<AdamState>,
    /// `None` until the first batch is drawn.
    pub sampler: Option<SamplerState>,
}

impl Checkpoint {
    /// Freshly initialized models for `config`.
    pub fn init(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let generator = Generator::new(config.generator.clone(), config.seed)?;
        let discriminator = if config.loss.uses_gan() {
            let d_in = config.generator.in_channels + config.generator.out_channels;
            let seed = SplitMix64::for_stream(config.seed, DISCRIMINATOR_STREAM).next_u64();
            Some(Discriminator::new(config.discriminator.clone(), d_in, seed)?)
        } else {
            None
        };
        Ok(Checkpoint {
            generator_adam: AdamState::new(generator.params()),
            discriminator_adam: discriminator.as_ref().map(|d| AdamState::new(d.params())),
            generator,
            discriminator,
            step: 0,
            sampler: None,
            config,
        })
    }
}

fn stack(planes: &[&Planes]) -> Tensor<f32> {
    let [c, h, w] = planes[0].shape();
    let mut data = Vec::with_capacity(planes.len() * c * h * w);
    for p in planes {
        data.extend_from_slice(p.data());
    }
    Tensor::from_vec([planes.len(), c, h, w], data).expect("planes share a shape")
}

fn to_planes(t: &Tensor<f32>, i: usize) -> Planes {
    Planes::new(t.sample(i).to_vec(), t.c(), t.h(), t.w()).expect("sample shape")
}

fn check_samples(cfg: &TrainConfig, samples: &[Sample]) -> Result<()> {
    let g = &cfg.generator;
    let s = g.image_size;
    for x in samples {
        if x.sar.shape() != [g.in_channels, s, s] || x.optical.shape() != [g.out_channels, s, s] {
            return Err(Error::Model(sar2rgb_sargen::Error::Shape(format!(
                "pair {} has SAR {:?} and optical {:?}; the model expects {s}x{s}",
                x.pair_id,
                x.sar.shape(),
                x.optical.shape()
            ))));
        }
    }
    Ok(())
}

fn finite(v: f64, step: u64, what: &'static str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { step, what })
    }
}

/// Drives training from a [`Checkpoint`].
pub struct Trainer {
    state: Checkpoint,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        Ok(Trainer {
            state: Checkpoint::init(config)?,
        })
    }

    pub fn from_checkpoint(state: Checkpoint) -> Result<Self> {
        state.config.validate()?;
        Ok(Trainer { state })
    }

    pub fn checkpoint(&self) -> &Checkpoint {
        &self.state
    }

    pub fn into_checkpoint(self) -> Checkpoint {
        self.state
    }

    pub fn step_count(&self) -> u64 {
        self.state.step
    }

    /// One optimization step: a discriminator update on the real pair and the
    /// detached fake (when the loss is adversarial), then a generator update.
    pub fn step(&mut self, train: &[Sample]) -> Result<StepRecord> {
        if train.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let st = &mut self.state;
        let cfg = &st.config;
        let step = st.step + 1;
        let sampler = st
            .sampler
            .get_or_insert_with(|| SamplerState::start(train.len(), cfg.seed));
        let idx = sampler.next_batch(train.len(), cfg.batch_size, cfg.seed)?;
        let sar = stack(&idx.iter().map(|&i| &train[i].sar).collect::<Vec<_>>());
        let real = stack(&idx.iter().map(|&i| &train[i].optical).collect::<Vec<_>>());

        let mut g = Graph::new();
        let gp = st.generator.params().bind(&mut g, true);
        let s1 = g.constant(sar.clone());
        let fake = st.generator.forward(&mut g, &gp, s1);

        let mut discriminator_loss = None;
        let mut gan = None;
        if let (Some(d), Some(d_adam)) = (st.discriminator.as_mut(), st.discriminator_adam.as_mut()) {
            let kind = cfg.loss.gan_kind;
            let mut dg = Graph::new();
            let dp = d.params().bind(&mut dg, true);
            let ds1 = dg.constant(sar);
            let dreal = dg.constant(real.clone());
            let dfake = dg.constant(g.value(fake).clone());
            let real_maps = d.forward(&mut dg, &dp, ds1, dreal);
            let fake_maps = d.forward(&mut dg, &dp, ds1, dfake);
            let lr = dg.gan(&real_maps, GanRole::DReal, kind);
            let lf = dg.gan(&fake_maps, GanRole::DFake, kind);
            let loss = dg.weighted_sum(&[(lr, 1.0), (lf, 1.0)]);
            let dl = finite(dg.value(loss).item().into(), step, "discriminator loss")?;
            let mut grads = dg.backward(loss);
            let grads: Vec<_> = dp.iter().map(|&v| grads.take(v).expect("weight gradient")).collect();
            d_adam.update(d.params_mut(), &grads, &cfg.optimizer);
            discriminator_loss = Some(dl);

            let frozen = d.params().bind(&mut g, false);
            let maps = d.forward(&mut g, &frozen, s1, fake);
            gan = Some(g.gan(&maps, GanRole::G, kind));
        }

        let target = g.constant(real);
        let l1 = g.l1(fake, target);
        let mut terms = vec![(l1, cfg.loss.l1_weight)];
        if let Some(v) = gan {
            terms.push((v, cfg.loss.gan_weight));
        }
        let total = g.weighted_sum(&terms);
        let total_v = finite(g.value(total).item().into(), step, "generator loss")?;
        let mut grads = g.backward(total);
        let grads: Vec<_> = gp.iter().map(|&v| grads.take(v).expect("weight gradient")).collect();
        if grads.iter().any(|t| !t.all_finite()) {
            return Err(Error::NonFinite {
                step,
                what: "generator gradient",
            });
        }
        st.generator_adam
            .update(st.generator.params_mut(), &grads, &cfg.optimizer);
        st.step = step;
        Ok(StepRecord {
            step,
            generator_total: total_v,
            gan_term: gan.map(|v| f64::from(g.value(v).item())),
            l1_term: g.value(l1).item().into(),
            discriminator_loss,
            eval_mae: None,
            eval_psnr: None,
        })
    }

    /// Trains until `config.max_steps`, recording every step.
    pub fn run(
        &mut self,
        train: &[Sample],
        eval: &[Sample],
        mut on_step: impl FnMut(&StepRecord),
    ) -> Result<LossTrace> {
        if train.is_empty() {
            return Err(Error::EmptyDataset);
        }
        check_samples(&self.state.config, train)?;
        check_samples(&self.state.config, eval)?;
        let mut trace = LossTrace::default();
        while self.state.step < self.state.config.max_steps {
            let mut rec = self.step(train)?;
            let every = self.state.config.eval_every;
            if every > 0 && rec.step % every == 0 && !eval.is_empty() {
                let m = evaluate_samples(&self.state.generator, eval)?;
                rec.eval_mae = Some(m.mae_mean);
                rec.eval_psnr = Some(m.psnr_mean_db);
            }
            on_step(&rec);
            trace.push(rec);
        }
        Ok(trace)
    }
}

/// Trains a fresh model for `cfg.max_steps` steps.
pub fn train(cfg: &TrainConfig, train: &[Sample], eval: &[Sample]) -> Result<(Checkpoint, LossTrace)> {
    let mut t = Trainer::new(cfg.clone())?;
    let trace = t.run(train, eval, |_| {})?;
    Ok((t.into_checkpoint(), trace))
}

/// Reflectance-space metrics of single-sample generator outputs.
pub fn evaluate_samples(gen: &Generator<f32>, samples: &[Sample]) -> Result<MetricsReport> {
    let mut preds = Vec::with_capacity(samples.len());
    let mut refs = Vec::with_capacity(samples.len());
    for s in samples {
        let y = gen.generate(&stack(&[&s.sar]))?;
        let meta = TileMeta::new(s.pair_id.clone(), Sensor::S2);
        preds.push(Prediction::new(s.pair_id.clone(), model_to_rgb(&to_planes(&y, 0), meta.clone())?));
        refs.push(Prediction::new(s.pair_id.clone(), model_to_rgb(&s.optical, meta)?));
    }
    Ok(evaluate(&preds, &refs)?)
}
