//! Versioned experiment config. The schema is strict: unknown keys are
//! rejected so that tolerances are pre-registered, not invented post hoc.

use crate::CliError;
use nngf::fieldsim::{GridKind, Normalization};
use nngf::functionals::Observable;
use nngf::kernel::{kernel_from_series, Kernel, KernelSeries};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelSpec {
    Relu,
    /// Power-series kernel; `coeffs[q]` multiplies u^q.
    Series { coeffs: Vec<f64> },
}

impl KernelSpec {
    pub fn build(&self) -> Result<Kernel, CliError> {
        match self {
            KernelSpec::Relu => Ok(Kernel::relu()),
            KernelSpec::Series { coeffs } => Ok(kernel_from_series(
                KernelSeries::new(coeffs.clone()).map_err(CliError::validation)?,
            )),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub kind: GridKind,
    pub n: usize,
}

/// Every threshold the experiment verdicts consult, with defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Max W1 to N(0,1) accepted in Gaussian/critical cases.
    pub w1_max: f64,
    /// Min two-sample KS p-value for cross-depth stability.
    pub ks_p_min: f64,
    /// Gaussian sigma multiplier for moment comparisons.
    pub sigma: f64,
    /// Relative slack on fitted variance-rate slopes.
    pub slope_rel_tol: f64,
    /// Required |skewness|/SE separation from zero (non-central case).
    pub skew_se_min: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            w1_max: 0.15,
            ks_p_min: 0.01,
            sigma: 3.0,
            slope_rel_tol: 0.05,
            skew_se_min: 5.0,
        }
    }
}

fn default_normalization() -> Normalization {
    Normalization::Empirical
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub kernel: KernelSpec,
    pub d: usize,
    pub depths: Vec<usize>,
    pub replicates: usize,
    pub observable: Observable,
    pub grid: GridSpec,
    pub seed: u64,
    #[serde(default = "default_normalization")]
    pub normalization: Normalization,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.version != SCHEMA_VERSION {
            return Err(CliError::Validation(format!(
                "unsupported config version {} (expected {SCHEMA_VERSION})",
                self.version
            )));
        }
        if self.depths.is_empty() {
            return Err(CliError::Validation("depth schedule is empty".into()));
        }
        if self.replicates < 2 {
            return Err(CliError::Validation(
                "replicates must be at least 2".into(),
            ));
        }
        self.kernel.build().map(|_| ())
    }
}

/// Load and validate a config; also returns the raw bytes for hashing.
pub fn load_config(path: &Path) -> Result<(ExperimentConfig, Vec<u8>), CliError> {
    let bytes = std::fs::read(path).map_err(|e| {
        CliError::Validation(format!("cannot read config {}: {e}", path.display()))
    })?;
    let config: ExperimentConfig = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Validation(format!("invalid config: {e}")))?;
    config.validate()?;
    Ok((config, bytes))
}
