//! Spatially-adaptive normalization: a parameter-free normalization whose
//! per-pixel scale and shift are predicted from a modulation map.

use sar2rgb_core::rng::SplitMix64;

use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::nn::Conv2d;
use crate::params::ParamStore;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const SPADE_EPS: f64 = 1e-5;
pub const MODULATION_KERNEL: usize = 3;

/// Explicit weights of one modulation layer.
#[derive(Clone, Debug, PartialEq)]
pub struct SpadeLayerWeights<T> {
    /// `[hidden, Cm, 3, 3]`
    pub shared_weight: Tensor<T>,
    /// `[1, 1, 1, hidden]`
    pub shared_bias: Tensor<T>,
    /// `[C, hidden, 3, 3]`
    pub gamma_weight: Tensor<T>,
    pub gamma_bias: Tensor<T>,
    pub beta_weight: Tensor<T>,
    pub beta_bias: Tensor<T>,
    pub epsilon: f64,
}

impl<T: Scalar> SpadeLayerWeights<T> {
    /// Gaussian weights and zero biases, as in model initialization.
    pub fn init(cm: usize, hidden: usize, c: usize, rng: &mut SplitMix64) -> Self {
        let mut ps = ParamStore::new();
        let layer = SpadeLayer::new(&mut ps, rng, "spade", cm, hidden, c);
        let t = |i: usize| ps.get(i).value.clone();
        SpadeLayerWeights {
            shared_weight: t(layer.shared.weight),
            shared_bias: t(layer.shared.bias.unwrap()),
            gamma_weight: t(layer.gamma.weight),
            gamma_bias: t(layer.gamma.bias.unwrap()),
            beta_weight: t(layer.beta.weight),
            beta_bias: t(layer.beta.bias.unwrap()),
            epsilon: SPADE_EPS,
        }
    }

    /// Zeroes the scale and shift heads.
    pub fn zero_heads(&mut self) {
        for t in [
            &mut self.gamma_weight,
            &mut self.gamma_bias,
            &mut self.beta_weight,
            &mut self.beta_bias,
        ] {
            t.data_mut().fill(T::zero());
        }
    }

    fn check(&self, cm: usize, c: usize) -> Result<()> {
        let k = MODULATION_KERNEL;
        let [hidden, wcm, k1, k2] = self.shared_weight.shape();
        let ok = wcm == cm
            && (k1, k2) == (k, k)
            && self.shared_bias.len() == hidden
            && self.gamma_weight.shape() == [c, hidden, k, k]
            && self.beta_weight.shape() == [c, hidden, k, k]
            && self.gamma_bias.len() == c
            && self.beta_bias.len() == c
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "modulation weights do not fit {cm} modulation and {c} feature channels"
            )))
        }
    }
}

/// Graph handles for one modulation layer's weights.
#[derive(Clone, Copy, Debug)]
pub struct SpadeVars {
    pub shared_weight: Var,
    pub shared_bias: Var,
    pub gamma_weight: Var,
    pub gamma_bias: Var,
    pub beta_weight: Var,
    pub beta_bias: Var,
}

/// `normalize(x) * (1 + gamma(h)) + beta(h)` with `h = relu(shared(resize(m)))`.
pub fn spade_graph<T: Scalar>(
    g: &mut Graph<T>,
    x: Var,
    m: Var,
    v: &SpadeVars,
    eps: f64,
    per_sample: bool,
) -> Var {
    let [_, _, h, w] = g.shape(x);
    let xhat = g.normalize(x, per_sample, eps);
    let mr = g.resize_nearest(m, h, w);
    let pad = MODULATION_KERNEL / 2;
    let a = g.conv2d(mr, v.shared_weight, Some(v.shared_bias), 1, pad);
    let a = g.relu(a);
    let gamma = g.conv2d(a, v.gamma_weight, Some(v.gamma_bias), 1, pad);
    let beta = g.conv2d(a, v.beta_weight, Some(v.beta_bias), 1, pad);
    g.modulate(xhat, gamma, beta)
}

/// Places explicit weights on a graph as gradient-collecting variables.
pub fn bind_weights<T: Scalar>(g: &mut Graph<T>, w: &SpadeLayerWeights<T>) -> SpadeVars {
    SpadeVars {
        shared_weight: g.variable(w.shared_weight.clone()),
        shared_bias: g.variable(w.shared_bias.clone()),
        gamma_weight: g.variable(w.gamma_weight.clone()),
        gamma_bias: g.variable(w.gamma_bias.clone()),
        beta_weight: g.variable(w.beta_weight.clone()),
        beta_bias: g.variable(w.beta_bias.clone()),
    }
}

/// Modulated normalization of `x` `[N, C, H, W]` by `m` `[N, Cm, Hm, Wm]`.
/// Statistics are pooled over the batch unless `per_sample`.
pub fn spade_normalize<T: Scalar>(
    x: &Tensor<T>,
    m: &Tensor<T>,
    w: &SpadeLayerWeights<T>,
    per_sample: bool,
) -> Result<Tensor<T>> {
    w.check(m.c(), x.c())?;
    if x.n() != m.n() {
        return Err(Error::Shape(format!(
            "feature batch {} and modulation batch {} differ",
            x.n(),
            m.n()
        )));
    }
    let mut g = Graph::new();
    let xv = g.constant(x.clone());
    let mv = g.constant(m.clone());
    let vars = bind_weights(&mut g, w);
    let out = spade_graph(&mut g, xv, mv, &vars, w.epsilon, per_sample);
    Ok(g.value(out).clone())
}

/// Modulation layer living in a model's [`ParamStore`].
#[derive(Clone, Debug, PartialEq)]
pub struct SpadeLayer {
    pub shared: Conv2d,
    pub gamma: Conv2d,
    pub beta: Conv2d,
}

impl SpadeLayer {
    pub fn new<T: Scalar>(
        ps: &mut ParamStore<T>,
        rng: &mut SplitMix64,
        name: &str,
        cm: usize,
        hidden: usize,
        c: usize,
    ) -> Self {
        let k = MODULATION_KERNEL;
        SpadeLayer {
            shared: Conv2d::same(ps, rng, &format!("{name}.shared"), cm, hidden, k),
            gamma: Conv2d::same(ps, rng, &format!("{name}.gamma"), hidden, c, k),
            beta: Conv2d::same(ps, rng, &format!("{name}.beta"), hidden, c, k),
        }
    }

    pub fn vars(&self, p: &[Var]) -> SpadeVars {
        SpadeVars {
            shared_weight: p[self.shared.weight],
            shared_bias: p[self.shared.bias.unwrap()],
            gamma_weight: p[self.gamma.weight],
            gamma_bias: p[self.gamma.bias.unwrap()],
            beta_weight: p[self.beta.weight],
            beta_bias: p[self.beta.bias.unwrap()],
        }
    }

    pub fn forward<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        p: &[Var],
        x: Var,
        m: Var,
        per_sample: bool,
    ) -> Var {
        spade_graph(g, x, m, &self.vars(p), SPADE_EPS, per_sample)
    }
}

/// Two modulated-normalize, relu, 3x3-conv stages plus a 1x1 projection of
/// the input when the channel count changes.
#[derive(Clone, Debug, PartialEq)]
pub struct SpadeResBlock {
    pub norm0: SpadeLayer,
    pub conv0: Conv2d,
    pub norm1: SpadeLayer,
    pub conv1: Conv2d,
    pub skip: Option<Conv2d>,
}

impl SpadeResBlock {
    pub fn new<T: Scalar>(
        ps: &mut ParamStore<T>,
        rng: &mut SplitMix64,
        name: &str,
        cm: usize,
        hidden: usize,
        fin: usize,
        fout: usize,
    ) -> Self {
        let norm0 = SpadeLayer::new(ps, rng, &format!("{name}.norm0"), cm, hidden, fin);
        let conv0 = Conv2d::same(ps, rng, &format!("{name}.conv0"), fin, fout, 3);
        let norm1 = SpadeLayer::new(ps, rng, &format!("{name}.norm1"), cm, hidden, fout);
        let conv1 = Conv2d::same(ps, rng, &format!("{name}.conv1"), fout, fout, 3);
        let skip = (fin != fout)
            .then(|| Conv2d::new(ps, rng, &format!("{name}.skip"), fin, fout, 1, 1, 0, false));
        SpadeResBlock {
            norm0,
            conv0,
            norm1,
            conv1,
            skip,
        }
    }

    pub fn forward<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        p: &[Var],
        x: Var,
        m: Var,
        per_sample: bool,
    ) -> Var {
        let h = self.norm0.forward(g, p, x, m, per_sample);
        let h = g.relu(h);
        let h = self.conv0.forward(g, p, h);
        let h = self.norm1.forward(g, p, h, m, per_sample);
        let h = g.relu(h);
        let h = self.conv1.forward(g, p, h);
        let s = match &self.skip {
            Some(c) => c.forward(g, p, x),
            None => x,
        };
        g.add(s, h)
    }
}
