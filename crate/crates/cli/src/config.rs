//! Experiment configuration, loadable from a flat TOML document.
//!
//! Every field has a default matching the shipped denoising benchmark,
//! so an empty document (or no config file at all) runs the standard
//! setup. Unknown keys are rejected rather than silently ignored.

use crate::stepsize::StepsizeMode;
use crate::{CliError, CliResult};
use serde::Deserialize;
use std::path::{Path, PathBuf};

/// Solver selection tokens accepted in the `algorithms` list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
pub enum Algorithm {
    /// General multiplier method with an explicit relaxation.
    #[serde(rename = "alg2")]
    General,
    /// Specialized multiplier method; the default solver.
    #[serde(rename = "alg3")]
    Special,
    /// Sequential Gauss-Seidel baseline.
    #[serde(rename = "gs_admm")]
    GaussSeidel,
}

impl Algorithm {
    /// Stable token used in config files, report tables and CSV names.
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::General => "alg2",
            Algorithm::Special => "alg3",
            Algorithm::GaussSeidel => "gs_admm",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Signal length.
    pub n: usize,
    /// Number of data-fit blocks; the penalty block makes it m = data_blocks + 1.
    pub data_blocks: usize,
    /// Weight of the concave sparsity penalty.
    pub omega: f64,
    /// Standard deviation of the additive Gaussian corruption.
    pub noise_sigma: f64,
    pub seeds: Vec<u64>,
    pub stepsize_mode: StepsizeMode,
    /// Step-size ratio delta/gamma in unequal mode; must exceed 1.
    pub eta: f64,
    /// Stopping tolerance on the combined primal/dual residual.
    pub eps: f64,
    pub max_iter: usize,
    pub algorithms: Vec<Algorithm>,
    /// Directory the CSV reports are written into.
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: 3000,
            data_blocks: 2,
            omega: 4.0,
            noise_sigma: 0.5,
            seeds: (0..10).collect(),
            stepsize_mode: StepsizeMode::Unequal,
            eta: 1.01,
            eps: 1e-4,
            max_iter: 100_000,
            algorithms: vec![Algorithm::Special],
            out_dir: PathBuf::from("runs"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> CliResult<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> CliResult<()> {
        let fail = |msg: String| Err(CliError::Config(msg));
        if self.data_blocks < 1 {
            return fail("data_blocks must be at least 1".into());
        }
        if self.n < self.data_blocks + 1 {
            return fail(format!(
                "n = {} too short for {} data blocks",
                self.n, self.data_blocks
            ));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return fail(format!("omega must be positive, got {}", self.omega));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return fail(format!("noise_sigma must be nonnegative, got {}", self.noise_sigma));
        }
        if !(self.eta > 1.0 && self.eta.is_finite()) {
            return fail(format!("eta must exceed 1, got {}", self.eta));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return fail(format!("eps must be positive, got {}", self.eps));
        }
        if self.max_iter == 0 {
            return fail("max_iter must be at least 1".into());
        }
        if self.seeds.is_empty() {
            return fail("seeds must not be empty".into());
        }
        if self.algorithms.is_empty() {
            return fail("algorithms must not be empty".into());
        }
        Ok(())
    }
}
