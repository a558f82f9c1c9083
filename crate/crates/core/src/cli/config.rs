//! Effective run configurations. Every command echoes its config, defaults
//! included, into the run manifest; feeding that manifest back through
//! `amloc rerun` reproduces the outputs.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::arithmetic::Frequency;
use crate::dynamics::TimeGrid;
use crate::expectation::{AmoFamily, PhasePlan, PhaseStrategy};
use crate::operator::{OperatorSpec, Window};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorConfig {
    pub lambda: f64,
    /// `golden`, `sqrt2` or a decimal.
    pub alpha: String,
    pub theta: f64,
    pub n_min: i64,
    pub n_max: i64,
}

impl OperatorConfig {
    pub fn window(&self) -> Result<Window, CliError> {
        Ok(Window::new(self.n_min, self.n_max)?)
    }

    pub fn frequency(&self) -> Result<Frequency, CliError> {
        Ok(Frequency::parse(&self.alpha)?)
    }

    pub fn spec(&self) -> Result<OperatorSpec, CliError> {
        Ok(OperatorSpec::new(self.lambda, self.frequency()?, self.theta, self.window()?)?)
    }

    pub fn family(&self) -> Result<AmoFamily, CliError> {
        Ok(AmoFamily::new(self.lambda, self.frequency()?, self.window()?)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumConfig {
    pub operator: OperatorConfig,
    pub dump_eig: bool,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseConfig {
    pub count: usize,
    pub strategy: PhaseStrategy,
    pub seed: u64,
}

impl PhaseConfig {
    pub fn plan(&self) -> Result<PhasePlan, CliError> {
        Ok(PhasePlan::new(self.count, self.strategy, self.seed)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaConfig {
    /// `theta` is ignored: the phase is averaged over.
    pub operator: OperatorConfig,
    pub phases: PhaseConfig,
    pub k_list: Vec<u64>,
    /// Replace the operator by the planted-profile family with this rate.
    pub synthetic_rate: Option<f64>,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonancesConfig {
    pub alpha: String,
    pub theta: f64,
    pub eta: f64,
    pub c0: f64,
    pub horizon: u64,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub operator: OperatorConfig,
    pub pairs: Vec<(i64, i64)>,
    pub t_max: f64,
    pub t_count: usize,
    pub seed: u64,
    pub summation_gammas: Vec<f64>,
    pub summation_max_distance: u64,
    /// Perturbs one eigenvector before the checks run.
    pub inject_fault: bool,
    pub out: PathBuf,
}

impl VerifyConfig {
    pub fn grid(&self) -> Result<TimeGrid, CliError> {
        Ok(TimeGrid::new(self.t_max, self.t_count)?)
    }
}

/// A command together with its effective configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "config", rename_all = "snake_case")]
pub enum RunConfig {
    Spectrum(SpectrumConfig),
    Gamma(GammaConfig),
    Resonances(ResonancesConfig),
    Verify(VerifyConfig),
}

impl RunConfig {
    pub fn name(&self) -> &'static str {
        match self {
            RunConfig::Spectrum(_) => "spectrum",
            RunConfig::Gamma(_) => "gamma",
            RunConfig::Resonances(_) => "resonances",
            RunConfig::Verify(_) => "verify",
        }
    }

    pub fn out(&self) -> &PathBuf {
        match self {
            RunConfig::Spectrum(c) => &c.out,
            RunConfig::Gamma(c) => &c.out,
            RunConfig::Resonances(c) => &c.out,
            RunConfig::Verify(c) => &c.out,
        }
    }

    pub fn set_out(&mut self, out: PathBuf) {
        match self {
            RunConfig::Spectrum(c) => c.out = out,
            RunConfig::Gamma(c) => c.out = out,
            RunConfig::Resonances(c) => c.out = out,
            RunConfig::Verify(c) => c.out = out,
        }
    }

    /// Checks everything that can be checked before computing.
    pub fn validate(&self) -> Result<(), CliError> {
        match self {
            RunConfig::Spectrum(c) => {
                c.operator.spec()?;
            }
            RunConfig::Gamma(c) => {
                c.phases.plan()?;
                let window = c.operator.window()?;
                match c.synthetic_rate {
                    Some(rate) if !(rate > 0.0 && rate.is_finite()) => {
                        return Err(CliError::Config(format!("synthetic rate {rate} must be positive")));
                    }
                    Some(_) => {}
                    None => {
                        c.operator.family()?;
                    }
                }
                if c.k_list.len() < 5 {
                    return Err(CliError::Config("k-list needs at least 5 distances".into()));
                }
                let inner = window.inner();
                if !inner.contains(0) {
                    return Err(CliError::Config("site 0 must lie in the inner window".into()));
                }
                if let Some(k) = c.k_list.iter().find(|&&k| !inner.contains(k as i64)) {
                    return Err(CliError::Config(format!(
                        "distance {k} outside the inner window [{}, {}]",
                        inner.n_min, inner.n_max
                    )));
                }
            }
            RunConfig::Resonances(c) => {
                Frequency::parse(&c.alpha)?;
                if c.horizon == 0 {
                    return Err(CliError::Config("horizon K must be at least 1".into()));
                }
                if !(c.eta > 0.0) {
                    return Err(CliError::Config("eta must be positive".into()));
                }
                if !(c.c0 >= 1.0) {
                    return Err(CliError::Config("C0 must be at least 1".into()));
                }
                if !c.theta.is_finite() {
                    return Err(CliError::Config("theta must be finite".into()));
                }
            }
            RunConfig::Verify(c) => {
                let spec = c.operator.spec()?;
                c.grid()?;
                if c.pairs.is_empty() {
                    return Err(CliError::Config("pair list is empty".into()));
                }
                for &(k, l) in &c.pairs {
                    if !spec.window.contains(k) || !spec.window.contains(l) {
                        return Err(CliError::Config(format!("pair ({k}, {l}) outside the window")));
                    }
                }
                if c.summation_gammas.iter().any(|g| !(*g > 0.0)) {
                    return Err(CliError::Config("summation gammas must be positive".into()));
                }
            }
        }
        Ok(())
    }
}
