use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::GanKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Variant {
    Spade,
    Pix2pixhd,
}

/// Which samples the generator's normalization statistics are pooled over.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum NormStats {
    /// Per channel across the whole batch.
    #[default]
    Batch,
    /// Per channel within each sample.
    Sample,
}

impl NormStats {
    pub fn per_sample(self) -> bool {
        self == NormStats::Sample
    }
}

fn default_spade_hidden() -> usize {
    128
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub variant: Variant,
    pub in_channels: usize,
    pub out_channels: usize,
    pub image_size: usize,
    pub base_width: usize,
    pub n_up_blocks: usize,
    pub n_res_blocks: usize,
    pub seed_size: usize,
    /// Width of the shared convolution inside each modulation layer.
    #[serde(default = "default_spade_hidden")]
    pub spade_hidden: usize,
    #[serde(default)]
    pub norm_stats: NormStats,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self::spade()
    }
}

impl GeneratorConfig {
    pub fn spade() -> Self {
        GeneratorConfig {
            variant: Variant::Spade,
            in_channels: 2,
            out_channels: 3,
            image_size: 256,
            base_width: 64,
            n_up_blocks: 5,
            n_res_blocks: 9,
            seed_size: 8,
            spade_hidden: default_spade_hidden(),
            norm_stats: NormStats::Batch,
        }
    }

    pub fn pix2pixhd() -> Self {
        GeneratorConfig {
            variant: Variant::Pix2pixhd,
            ..Self::spade()
        }
    }

    /// Lineage default for the adversarial objective.
    pub fn default_gan_kind(&self) -> GanKind {
        match self.variant {
            Variant::Spade => GanKind::Hinge,
            Variant::Pix2pixhd => GanKind::Lsgan,
        }
    }

    /// Lineage default for Adam's first-moment decay.
    pub fn default_beta1(&self) -> f64 {
        match self.variant {
            Variant::Spade => 0.0,
            Variant::Pix2pixhd => 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.in_channels == 0 || self.out_channels == 0 {
            return bad("channel counts must be positive".into());
        }
        if self.base_width == 0 || self.image_size == 0 {
            return bad("base_width and image_size must be positive".into());
        }
        match self.variant {
            Variant::Spade => {
                if self.seed_size == 0 || self.spade_hidden == 0 {
                    return bad("seed_size and spade_hidden must be positive".into());
                }
                let want = self
                    .seed_size
                    .checked_shl(self.n_up_blocks as u32)
                    .filter(|_| self.n_up_blocks < 32);
                if want != Some(self.image_size) {
                    return bad(format!(
                        "image_size {} must equal seed_size {} x 2^{}",
                        self.image_size, self.seed_size, self.n_up_blocks
                    ));
                }
            }
            Variant::Pix2pixhd => {
                if self.image_size % 4 != 0 {
                    return bad(format!("image_size {} must be divisible by 4", self.image_size));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscriminatorConfig {
    pub n_scales: usize,
    pub n_layers: usize,
    pub base_width: usize,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        DiscriminatorConfig {
            n_scales: 2,
            n_layers: 4,
            base_width: 64,
        }
    }
}

impl DiscriminatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_scales == 0 || self.n_layers == 0 || self.base_width == 0 {
            return Err(Error::Config(
                "n_scales, n_layers and base_width must all be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    pub gan_weight: f64,
    pub l1_weight: f64,
    pub gan_kind: GanKind,
}

impl LossConfig {
    /// Pure reconstruction objective `w * L1`.
    pub fn l1(weight: f64) -> Self {
        LossConfig {
            gan_weight: 0.0,
            l1_weight: weight,
            gan_kind: GanKind::Hinge,
        }
    }

    /// `GAN + w * L1`.
    pub fn gan_l1(kind: GanKind, l1_weight: f64) -> Self {
        LossConfig {
            gan_weight: 1.0,
            l1_weight,
            gan_kind: kind,
        }
    }

    pub fn uses_gan(&self) -> bool {
        self.gan_weight != 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.gan_weight != 0.0 && self.gan_weight != 1.0 {
            return Err(Error::Config(format!(
                "gan_weight must be 0 or 1, got {}",
                self.gan_weight
            )));
        }
        if !self.l1_weight.is_finite() || self.l1_weight < 0.0 {
            return Err(Error::Config(format!(
                "l1_weight must be finite and non-negative, got {}",
                self.l1_weight
            )));
        }
        if self.gan_weight == 0.0 && self.l1_weight == 0.0 {
            return Err(Error::Config("at least one loss weight must be nonzero".into()));
        }
        Ok(())
    }
}

/// `gan_weight * gan_term + l1_weight * l1_term`.
pub fn total_generator_loss(cfg: &LossConfig, gan_term: f64, l1_term: f64) -> f64 {
    let gan = if cfg.gan_weight == 0.0 { 0.0 } else { cfg.gan_weight * gan_term };
    gan + cfg.l1_weight * l1_term
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_weightings() {
        assert_eq!(total_generator_loss(&LossConfig::l1(1.0), 123.0, 0.37), 0.37);
        let gan = LossConfig::gan_l1(GanKind::Hinge, 1000.0);
        assert!((total_generator_loss(&gan, 0.2, 0.01) - 10.2).abs() < 1e-12);
        assert!((total_generator_loss(&LossConfig::l1(100.0), 0.0, 0.01) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn loss_config_rules() {
        assert!(LossConfig::l1(0.0).validate().is_err());
        assert!(LossConfig { gan_weight: 0.5, ..LossConfig::l1(1.0) }.validate().is_err());
        assert!(LossConfig::gan_l1(GanKind::Lsgan, 0.0).validate().is_ok());
    }

    #[test]
    fn generator_config_rules() {
        assert!(GeneratorConfig::spade().validate().is_ok());
        assert!(GeneratorConfig { image_size: 128, ..GeneratorConfig::spade() }.validate().is_err());
        assert!(GeneratorConfig { image_size: 66, ..GeneratorConfig::pix2pixhd() }.validate().is_err());
        assert!(GeneratorConfig { image_size: 68, ..GeneratorConfig::pix2pixhd() }.validate().is_ok());
        assert!(GeneratorConfig { n_up_blocks: 40, ..GeneratorConfig::spade() }.validate().is_err());
    }

    #[test]
    fn config_json_uses_uppercase_enums() {
        let j = serde_json::to_string(&GeneratorConfig::pix2pixhd()).unwrap();
        assert!(j.contains("\"variant\":\"PIX2PIXHD\""));
        let l = serde_json::to_string(&LossConfig::gan_l1(GanKind::Lsgan, 1000.0)).unwrap();
        assert_eq!(l, r#"{"gan_weight":1.0,"l1_weight":1000.0,"gan_kind":"LSGAN"}"#);
    }
}
