use sar2rgb_sargen::{DiscriminatorConfig, GeneratorConfig, LossConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_epsilon() -> f64 {
    1e-8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

impl OptimizerConfig {
    /// Adam with learning rate 2e-4, beta2 0.999 and the generator family's beta1.
    pub fn for_generator(g: &GeneratorConfig) -> Self {
        OptimizerConfig {
            learning_rate: 2e-4,
            beta1: g.default_beta1(),
            beta2: 0.999,
            epsilon: default_epsilon(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate.is_finite()
            && self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid optimizer settings {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub generator: GeneratorConfig,
    /// Unused when the loss has no adversarial term.
    pub discriminator: DiscriminatorConfig,
    pub loss: LossConfig,
    pub optimizer: OptimizerConfig,
    pub batch_size: usize,
    pub max_steps: u64,
    pub seed: u64,
    /// Evaluate on the held-out set every this many steps; 0 disables.
    pub eval_every: u64,
    /// Restricts execution to the fixed-order sequential kernels. All kernels
    /// in this build are sequential, so runs are bit-exact either way.
    #[serde(default = "default_deterministic")]
    pub deterministic: bool,
}

fn default_deterministic() -> bool {
    true
}

impl TrainConfig {
    pub fn new(generator: GeneratorConfig, loss: LossConfig) -> Self {
        TrainConfig {
            optimizer: OptimizerConfig::for_generator(&generator),
            generator,
            discriminator: DiscriminatorConfig::default(),
            loss,
            batch_size: 4,
            max_steps: 1000,
            seed: 0,
            eval_every: 0,
            deterministic: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.loss.validate()?;
        if self.loss.uses_gan() {
            self.discriminator.validate()?;
        }
        self.optimizer.validate()?;
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}
