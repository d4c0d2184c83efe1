use sar2rgb_core::rng::SplitMix64;

use crate::config::DiscriminatorConfig;
use crate::error::{Error, Result};
use crate::generator::{check_layout, INSTANCE_NORM_EPS, LEAKY_SLOPE};
use crate::graph::{Graph, Var};
use crate::kernels::out_size;
use crate::nn::Conv2d;
use crate::params::ParamStore;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const PATCH_KERNEL: usize = 4;
/// Channel growth stops at `base_width * 2^MAX_DOUBLINGS`.
pub const MAX_DOUBLINGS: usize = 3;

#[derive(Clone, Debug, PartialEq)]
struct PatchNet {
    layers: Vec<Conv2d>,
    out: Conv2d,
}

/// Multi-scale patch discriminator over the channel concatenation of the SAR
/// input and an optical image. Emits raw logits.
#[derive(Clone, Debug, PartialEq)]
pub struct Discriminator<T> {
    config: DiscriminatorConfig,
    in_channels: usize,
    params: ParamStore<T>,
    scales: Vec<PatchNet>,
}

/// Width of patch layer `i`.
pub fn patch_width(cfg: &DiscriminatorConfig, i: usize) -> usize {
    cfg.base_width << i.min(MAX_DOUBLINGS)
}

/// Side length of the logit map for an input of side `size` at scale `k`.
pub fn logit_size(cfg: &DiscriminatorConfig, size: usize, k: usize) -> usize {
    (0..cfg.n_layers).fold(size >> k, |s, _| out_size(s, PATCH_KERNEL, 2, 1))
}

impl<T: Scalar> Discriminator<T> {
    pub fn new(config: DiscriminatorConfig, in_channels: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        if in_channels == 0 {
            return Err(Error::Config("discriminator needs at least one input channel".into()));
        }
        let mut rng = SplitMix64::new(seed);
        let mut ps = ParamStore::new();
        let scales = (0..config.n_scales)
            .map(|k| {
                let mut cin = in_channels;
                let layers = (0..config.n_layers)
                    .map(|i| {
                        let cout = patch_width(&config, i);
                        let c = Conv2d::new(&mut ps, &mut rng, &format!("scale{k}.layer{i}"), cin, cout, PATCH_KERNEL, 2, 1, true);
                        cin = cout;
                        c
                    })
                    .collect();
                let out = Conv2d::same(&mut ps, &mut rng, &format!("scale{k}.out"), cin, 1, 3);
                PatchNet { layers, out }
            })
            .collect();
        Ok(Discriminator {
            config,
            in_channels,
            params: ps,
            scales,
        })
    }

    pub fn from_params(config: DiscriminatorConfig, in_channels: usize, params: ParamStore<T>) -> Result<Self> {
        let mut d = Self::new(config, in_channels, 0)?;
        check_layout(&d.params, &params)?;
        d.params = params;
        Ok(d)
    }

    pub fn config(&self) -> &DiscriminatorConfig {
        &self.config
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    /// One logit map per scale, finest first.
    pub fn forward(&self, g: &mut Graph<T>, p: &[Var], s1: Var, rgb: Var) -> Vec<Var> {
        let x = g.concat(s1, rgb);
        self.scales
            .iter()
            .enumerate()
            .map(|(k, net)| {
                let mut h = g.avg_pool(x, 1 << k);
                for (i, conv) in net.layers.iter().enumerate() {
                    h = conv.forward(g, p, h);
                    if i > 0 {
                        h = g.normalize(h, true, INSTANCE_NORM_EPS);
                    }
                    h = g.leaky_relu(h, LEAKY_SLOPE);
                }
                net.out.forward(g, p, h)
            })
            .collect()
    }

    pub fn discriminate(&self, s1: &Tensor<T>, rgb: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        let (a, b) = (s1.shape(), rgb.shape());
        if a[0] != b[0] || a[2..] != b[2..] || a[1] + b[1] != self.in_channels {
            return Err(Error::Shape(format!(
                "inputs {a:?} and {b:?} are not aligned for {} channels",
                self.in_channels
            )));
        }
        let mut g = Graph::new();
        let p = self.params.bind(&mut g, false);
        let sv = g.constant(s1.clone());
        let rv = g.constant(rgb.clone());
        let maps = self.forward(&mut g, &p, sv, rv);
        Ok(maps.into_iter().map(|m| g.value(m).clone()).collect())
    }
}
