//! JSON configuration files. Every file carries `schema_version`; unknown
//! keys are rejected.

use std::fs;
use std::path::Path;

use dada_core::evidence::FilterKind;
use dada_core::experiments::{Ar1DemoConfig, SweepConfig};
use dada_core::filters::{EnkfConfig, GaussianBelief};
use dada_core::models::{HmmSpec, L63Params, DEFAULT_BURN_IN};
use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

fn check_version(v: u32) -> CliResult<()> {
    if v != SCHEMA_VERSION {
        return Err(CliError::config(format!(
            "unsupported schema_version {v}; this build reads version {SCHEMA_VERSION}"
        )));
    }
    Ok(())
}

/// Reads and parses a config file; parse errors keep serde's line/column.
pub fn load<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse<T: DeserializeOwned>(text: &str) -> CliResult<T> {
    serde_json::from_str(text).map_err(|e| CliError::config(e.to_string()))
}

fn default_sigma() -> f64 {
    10.0
}
fn default_rho() -> f64 {
    28.0
}
fn default_beta() -> f64 {
    8.0 / 3.0
}
fn default_theta() -> f64 {
    -140.0
}
fn default_sigma_q() -> f64 {
    0.1
}

/// L63 section; `dt` has no default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct L63Section {
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "default_theta")]
    pub theta_deg: f64,
    pub dt: f64,
    #[serde(default = "default_sigma_q")]
    pub sigma_q: f64,
}

impl From<L63Section> for L63Params {
    fn from(s: L63Section) -> Self {
        L63Params {
            sigma: s.sigma,
            rho: s.rho,
            beta: s.beta,
            lambda: s.lambda,
            theta_deg: s.theta_deg,
            dt: s.dt,
            sigma_q: s.sigma_q,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearSection {
    pub m: Vec<Vec<f64>>,
    /// Defaults to the identity.
    #[serde(default)]
    pub h: Option<Vec<Vec<f64>>>,
    pub q: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSection {
    L63(L63Section),
    Linear(LinearSection),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSection {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

/// One world: dynamics, observation noise, run length and prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub schema_version: u32,
    pub model: ModelSection,
    /// Observation noise std for the L63 model (`R = σ_R² I`).
    #[serde(default)]
    pub sigma_r: Option<f64>,
    #[serde(default)]
    pub steps: usize,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub burn_in: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Filter prior; L63 models default to the attractor moments.
    #[serde(default)]
    pub prior: Option<PriorSection>,
    #[serde(default = "default_attractor_samples")]
    pub attractor_samples: usize,
    #[serde(default)]
    pub filter: Option<FilterKind>,
}

fn default_attractor_samples() -> usize {
    10_000
}

pub fn matrix(rows: &[Vec<f64>], what: &str) -> CliResult<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(CliError::config(format!(
            "`{what}` must be a nonempty rectangular matrix"
        )));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

impl ModelConfig {
    pub fn validate(&self) -> CliResult<()> {
        check_version(self.schema_version)?;
        self.spec()?;
        if let Some(x0) = &self.x0 {
            if x0.len() != self.state_dim()? {
                return Err(CliError::config("`x0` length does not match the state dimension"));
            }
        }
        Ok(())
    }

    pub fn l63(&self) -> Option<L63Params> {
        match &self.model {
            ModelSection::L63(s) => Some((*s).into()),
            ModelSection::Linear(_) => None,
        }
    }

    pub fn state_dim(&self) -> CliResult<usize> {
        Ok(self.spec()?.state_dim())
    }

    pub fn spec(&self) -> CliResult<HmmSpec> {
        match &self.model {
            ModelSection::L63(s) => {
                let sigma_r = self
                    .sigma_r
                    .ok_or_else(|| CliError::config("missing field `sigma_r` (required for the l63 model)"))?;
                Ok(HmmSpec::l63((*s).into(), sigma_r)?)
            }
            ModelSection::Linear(s) => {
                if self.sigma_r.is_some() {
                    return Err(CliError::config(
                        "`sigma_r` applies to the l63 model only; set `r` instead",
                    ));
                }
                let m = matrix(&s.m, "m")?;
                let h = match &s.h {
                    Some(h) => matrix(h, "h")?,
                    None => DMatrix::identity(m.nrows(), m.nrows()),
                };
                Ok(HmmSpec::linear(m, h, matrix(&s.q, "q")?, matrix(&s.r, "r")?)?)
            }
        }
    }

    pub fn initial_state(&self) -> CliResult<DVector<f64>> {
        let n = self.state_dim()?;
        Ok(match &self.x0 {
            Some(x) => DVector::from_column_slice(x),
            None if self.l63().is_some() => DVector::from_element(n, 1.0),
            None => DVector::zeros(n),
        })
    }

    pub fn burn_in_steps(&self) -> usize {
        self.burn_in
            .unwrap_or(if self.l63().is_some() { DEFAULT_BURN_IN } else { 0 })
    }

    pub fn explicit_prior(&self) -> CliResult<Option<GaussianBelief>> {
        let Some(p) = &self.prior else { return Ok(None) };
        let mean = DVector::from_column_slice(&p.mean);
        let cov = matrix(&p.cov, "prior.cov")?;
        Ok(Some(GaussianBelief::prior(mean, cov)?))
    }
}

/// Filter chosen from command-line overrides, the config, or the default
/// (KF for linear models, EnKF otherwise).
pub fn resolve_filter(
    configured: Option<FilterKind>,
    linear: bool,
    flag: Option<FilterFlag>,
    ensemble_size: Option<usize>,
) -> CliResult<FilterKind> {
    let base = configured.unwrap_or(if linear {
        FilterKind::Kf
    } else {
        FilterKind::Enkf(EnkfConfig::default())
    });
    let mut filter = match (flag, base) {
        (None, f) => f,
        (Some(FilterFlag::Kf), _) => FilterKind::Kf,
        (Some(FilterFlag::Enkf), FilterKind::Enkf(c)) => FilterKind::Enkf(c),
        (Some(FilterFlag::Enkf), FilterKind::Kf) => FilterKind::Enkf(EnkfConfig::default()),
    };
    if let Some(n) = ensemble_size {
        match &mut filter {
            FilterKind::Enkf(c) => c.ensemble_size = n,
            FilterKind::Kf => return Err(CliError::config("--ensemble-size needs the enkf filter")),
        }
    }
    if let FilterKind::Enkf(c) = &filter {
        if c.ensemble_size < 2 || !(c.inflation > 0.0) {
            return Err(CliError::config("ensemble_size must be >= 2 and inflation > 0"));
        }
    }
    if matches!(filter, FilterKind::Kf) && !linear {
        return Err(CliError::config("the kf filter needs linear dynamics"));
    }
    Ok(filter)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FilterFlag {
    Kf,
    Enkf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub schema_version: u32,
    pub sweep: SweepConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ar1File {
    pub schema_version: u32,
    pub ar1: Ar1DemoConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttractorSection {
    pub model: L63Section,
    #[serde(default = "default_attractor_samples")]
    pub samples: usize,
    #[serde(default = "default_thin")]
    pub thin: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_grid")]
    pub grid: [usize; 2],
    /// Grid margin in bandwidths beyond the sample range.
    #[serde(default = "default_pad")]
    pub pad: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_thin() -> usize {
    dada_core::experiments::attractor::DEFAULT_THIN
}
fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}
fn default_grid() -> [usize; 2] {
    [100, 100]
}
fn default_pad() -> f64 {
    4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttractorFile {
    pub schema_version: u32,
    pub attractor: AttractorSection,
}

impl SweepFile {
    pub fn validate(&self) -> CliResult<()> {
        check_version(self.schema_version)?;
        Ok(self.sweep.validate()?)
    }
}

impl Ar1File {
    pub fn validate(&self) -> CliResult<()> {
        check_version(self.schema_version)?;
        Ok(self.ar1.validate()?)
    }
}

impl AttractorFile {
    pub fn validate(&self) -> CliResult<()> {
        check_version(self.schema_version)?;
        let a = &self.attractor;
        L63Params::from(a.model).validate()?;
        if a.samples < dada_core::experiments::attractor::MIN_SAMPLES || a.thin == 0 {
            return Err(CliError::config("samples must be >= 1000 and thin >= 1"));
        }
        if a.grid[0] < 2 || a.grid[1] < 2 || !(a.pad >= 0.0) {
            return Err(CliError::config("grid needs at least 2 points per axis and pad >= 0"));
        }
        Ok(())
    }
}
