//! Weight-holding layers. Each layer keeps indices into a [`ParamStore`] and
//! reads the bound graph variables at forward time.

use sar2rgb_core::rng::SplitMix64;

use crate::graph::{Graph, Var};
use crate::params::ParamStore;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d {
    pub weight: usize,
    pub bias: Option<usize>,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl Conv2d {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Scalar>(
        ps: &mut ParamStore<T>,
        rng: &mut SplitMix64,
        name: &str,
        cin: usize,
        cout: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        bias: bool,
    ) -> Self {
        let weight = ps.add_normal(format!("{name}.weight"), [cout, cin, kernel, kernel], rng);
        let bias = bias.then(|| ps.add_zeros(format!("{name}.bias"), [1, 1, 1, cout]));
        Conv2d {
            weight,
            bias,
            kernel,
            stride,
            pad,
        }
    }

    /// Stride-1 convolution that preserves spatial extent.
    pub fn same<T: Scalar>(
        ps: &mut ParamStore<T>,
        rng: &mut SplitMix64,
        name: &str,
        cin: usize,
        cout: usize,
        kernel: usize,
    ) -> Self {
        Self::new(ps, rng, name, cin, cout, kernel, 1, kernel / 2, true)
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, p: &[Var], x: Var) -> Var {
        g.conv2d(x, p[self.weight], self.bias.map(|b| p[b]), self.stride, self.pad)
    }
}

/// Stride-2 transposed convolution doubling the spatial extent.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvTranspose2d {
    pub weight: usize,
    pub bias: usize,
}

impl ConvTranspose2d {
    pub const KERNEL: usize = 3;

    pub fn new<T: Scalar>(
        ps: &mut ParamStore<T>,
        rng: &mut SplitMix64,
        name: &str,
        cin: usize,
        cout: usize,
    ) -> Self {
        let k = Self::KERNEL;
        ConvTranspose2d {
            weight: ps.add_normal(format!("{name}.weight"), [cin, cout, k, k], rng),
            bias: ps.add_zeros(format!("{name}.bias"), [1, 1, 1, cout]),
        }
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, p: &[Var], x: Var) -> Var {
        g.conv_transpose2d(x, p[self.weight], Some(p[self.bias]), 2, 1, 1)
    }
}
