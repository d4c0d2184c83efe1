use sar2rgb_sargen::{ParamStore, Tensor};

use crate::config::OptimizerConfig;

/// First and second moment estimates for every weight tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Tensor<f32>>,
    pub v: Vec<Tensor<f32>>,
}

impl AdamState {
    pub fn new(params: &ParamStore<f32>) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.value.shape())).collect();
        AdamState {
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    /// Bias-corrected Adam update.
    pub fn update(&mut self, params: &mut ParamStore<f32>, grads: &[Tensor<f32>], cfg: &OptimizerConfig) {
        self.step += 1;
        let (b1, b2) = (cfg.beta1, cfg.beta2);
        let t = self.step as i32;
        let lr_t = (cfg.learning_rate * (1.0 - b2.powi(t)).sqrt() / (1.0 - b1.powi(t))) as f32;
        let (b1, b2, eps) = (b1 as f32, b2 as f32, cfg.epsilon as f32);
        for (((w, g), m), v) in params
            .values_mut()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            for (((w, &g), m), v) in w
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *w -= lr_t * *m / (v.sqrt() + eps);
            }
        }
    }
}
