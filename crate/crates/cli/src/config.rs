//! The pipeline configuration document.
//!
//! Relative paths are resolved against the directory holding the document.
//! Command-line flags take precedence over every value here.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sar2rgb_core::cloudscreen::HeuristicParams;
use sar2rgb_core::curation::PairPolicy;
use sar2rgb_core::evalkit::EnsembleSpec;
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    #[serde(rename = "in")]
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub screen: Option<PathBuf>,
    pub eval: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub resume: Option<PathBuf>,
    pub pred: Option<PathBuf>,
    #[serde(rename = "ref")]
    pub reference: Option<PathBuf>,
    pub assignment: Option<PathBuf>,
    /// Ensemble member name to prediction directory.
    #[serde(default)]
    pub members: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub paths: Paths,
    pub heuristic: Option<HeuristicParams>,
    pub preset: Option<String>,
    pub pair_policy: Option<PairPolicy>,
    pub holdout: Option<usize>,
    /// Partial training configuration, merged over the variant's defaults.
    pub train: Option<serde_json::Value>,
    pub ensemble: Option<EnsembleSpec>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub deterministic: Option<bool>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.paths.resolve(base);
        Ok(cfg)
    }
}

impl Paths {
    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut self.input,
            &mut self.out,
            &mut self.screen,
            &mut self.eval,
            &mut self.checkpoint,
            &mut self.resume,
            &mut self.pred,
            &mut self.reference,
            &mut self.assignment,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        self.members.values_mut().for_each(fix);
    }
}
