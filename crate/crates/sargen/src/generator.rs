use sar2rgb_core::rng::SplitMix64;

use crate::config::{GeneratorConfig, Variant};
use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::nn::{Conv2d, ConvTranspose2d};
use crate::params::ParamStore;
use crate::scalar::Scalar;
use crate::spade::SpadeResBlock;
use crate::tensor::Tensor;

pub const INSTANCE_NORM_EPS: f64 = 1e-5;
pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Clone, Debug, PartialEq)]
struct SpadeNet {
    head: Conv2d,
    blocks: Vec<SpadeResBlock>,
    out: Conv2d,
}

#[derive(Clone, Debug, PartialEq)]
struct ResBlock {
    conv0: Conv2d,
    conv1: Conv2d,
}

#[derive(Clone, Debug, PartialEq)]
struct PixNet {
    front: Conv2d,
    down: Vec<Conv2d>,
    res: Vec<ResBlock>,
    up: Vec<ConvTranspose2d>,
    out: Conv2d,
}

#[derive(Clone, Debug, PartialEq)]
enum Arch {
    Spade(SpadeNet),
    Pix(PixNet),
}

/// SAR-to-optical generator; output lies in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator<T> {
    config: GeneratorConfig,
    params: ParamStore<T>,
    arch: Arch,
}

/// Channel width entering SPADE stage `i`.
pub fn spade_stage_width(cfg: &GeneratorConfig, i: usize) -> usize {
    cfg.base_width << (cfg.n_up_blocks - i)
}

fn build_spade<T: Scalar>(cfg: &GeneratorConfig, ps: &mut ParamStore<T>, rng: &mut SplitMix64) -> SpadeNet {
    let c0 = spade_stage_width(cfg, 0);
    let head = Conv2d::same(ps, rng, "head", cfg.in_channels, c0, 3);
    let blocks = (0..cfg.n_up_blocks)
        .map(|i| {
            let fin = spade_stage_width(cfg, i);
            SpadeResBlock::new(ps, rng, &format!("up{i}"), cfg.in_channels, cfg.spade_hidden, fin, fin / 2)
        })
        .collect();
    let out = Conv2d::same(ps, rng, "out", cfg.base_width, cfg.out_channels, 3);
    SpadeNet { head, blocks, out }
}

fn build_pix<T: Scalar>(cfg: &GeneratorConfig, ps: &mut ParamStore<T>, rng: &mut SplitMix64) -> PixNet {
    let b = cfg.base_width;
    let front = Conv2d::same(ps, rng, "front", cfg.in_channels, b, 7);
    let down = (0..2)
        .map(|i| Conv2d::new(ps, rng, &format!("down{i}"), b << i, b << (i + 1), 3, 2, 1, true))
        .collect();
    let res = (0..cfg.n_res_blocks)
        .map(|i| ResBlock {
            conv0: Conv2d::same(ps, rng, &format!("res{i}.conv0"), 4 * b, 4 * b, 3),
            conv1: Conv2d::same(ps, rng, &format!("res{i}.conv1"), 4 * b, 4 * b, 3),
        })
        .collect();
    let up = (0..2)
        .map(|i| ConvTranspose2d::new(ps, rng, &format!("up{i}"), b << (2 - i), b << (1 - i)))
        .collect();
    let out = Conv2d::same(ps, rng, "out", b, cfg.out_channels, 7);
    PixNet {
        front,
        down,
        res,
        up,
        out,
    }
}

impl<T: Scalar> Generator<T> {
    /// Builds a generator with Gaussian(0, 0.02) weights and zero biases drawn
    /// from `seed`.
    pub fn new(config: GeneratorConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = SplitMix64::new(seed);
        let mut params = ParamStore::new();
        let arch = match config.variant {
            Variant::Spade => Arch::Spade(build_spade(&config, &mut params, &mut rng)),
            Variant::Pix2pixhd => Arch::Pix(build_pix(&config, &mut params, &mut rng)),
        };
        Ok(Generator {
            config,
            params,
            arch,
        })
    }

    /// Rebuilds a generator around existing weights, which must match the
    /// configuration's names and shapes in order.
    pub fn from_params(config: GeneratorConfig, params: ParamStore<T>) -> Result<Self> {
        let mut g = Self::new(config, 0)?;
        check_layout(&g.params, &params)?;
        g.params = params;
        Ok(g)
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.num_scalars()
    }

    /// Expected input shape for a batch of `n`.
    pub fn input_shape(&self, n: usize) -> [usize; 4] {
        let s = self.config.image_size;
        [n, self.config.in_channels, s, s]
    }

    pub fn check_input(&self, shape: [usize; 4]) -> Result<()> {
        if shape[0] == 0 || shape != self.input_shape(shape[0]) {
            return Err(Error::Shape(format!(
                "generator expects [N, {}, {s}, {s}], got {shape:?}",
                self.config.in_channels,
                s = self.config.image_size
            )));
        }
        Ok(())
    }

    /// Records the forward pass on `g`, with `p` the bound parameters.
    pub fn forward(&self, g: &mut Graph<T>, p: &[Var], s1: Var) -> Var {
        let cfg = &self.config;
        match &self.arch {
            Arch::Spade(net) => {
                let per_sample = cfg.norm_stats.per_sample();
                let x = g.avg_pool(s1, cfg.image_size / cfg.seed_size);
                let mut x = net.head.forward(g, p, x);
                for block in &net.blocks {
                    x = block.forward(g, p, x, s1, per_sample);
                    let [_, _, h, w] = g.shape(x);
                    x = g.resize_nearest(x, 2 * h, 2 * w);
                }
                let x = g.leaky_relu(x, LEAKY_SLOPE);
                let x = net.out.forward(g, p, x);
                g.tanh(x)
            }
            Arch::Pix(net) => {
                let norm_relu = |g: &mut Graph<T>, x: Var| {
                    let x = g.normalize(x, true, INSTANCE_NORM_EPS);
                    g.relu(x)
                };
                let x = net.front.forward(g, p, s1);
                let mut x = norm_relu(g, x);
                for conv in &net.down {
                    x = conv.forward(g, p, x);
                    x = norm_relu(g, x);
                }
                for block in &net.res {
                    let h = block.conv0.forward(g, p, x);
                    let h = norm_relu(g, h);
                    let h = block.conv1.forward(g, p, h);
                    let h = g.normalize(h, true, INSTANCE_NORM_EPS);
                    x = g.add(x, h);
                }
                for conv in &net.up {
                    x = conv.forward(g, p, x);
                    x = norm_relu(g, x);
                }
                let x = net.out.forward(g, p, x);
                g.tanh(x)
            }
        }
    }

    /// Translates a batch of normalized SAR inputs `[N, in, S, S]`.
    pub fn generate(&self, s1: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(s1.shape())?;
        let mut g = Graph::new();
        let p = self.params.bind(&mut g, false);
        let x = g.constant(s1.clone());
        let y = self.forward(&mut g, &p, x);
        Ok(g.value(y).clone())
    }
}

pub(crate) fn check_layout<T: Scalar>(want: &ParamStore<T>, got: &ParamStore<T>) -> Result<()> {
    if want.len() != got.len() {
        return Err(Error::Shape(format!(
            "expected {} weight tensors, got {}",
            want.len(),
            got.len()
        )));
    }
    for (a, b) in want.iter().zip(got.iter()) {
        if a.name != b.name || a.value.shape() != b.value.shape() {
            return Err(Error::Shape(format!(
                "weight {} {:?} does not match expected {} {:?}",
                b.name,
                b.value.shape(),
                a.name,
                a.value.shape()
            )));
        }
    }
    Ok(())
}
