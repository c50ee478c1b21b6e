//! Scenario configuration: a strict TOML document mirroring the simulation
//! inputs. Unknown keys are hard errors so parameter typos cannot slip into
//! physics runs.

use std::collections::BTreeSet;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use spinosc_core::models::ModelKind;
use spinosc_core::{SystemParams, TimeGrid};

use crate::error::RunError;

/// Default occupation threshold for the truncation guard.
pub const DEFAULT_OCCUPATION_THRESHOLD: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    ZSom,
    XzSom,
    JcmRwa,
}

impl From<ModelChoice> for ModelKind {
    fn from(m: ModelChoice) -> ModelKind {
        match m {
            ModelChoice::ZSom => ModelKind::ZSom,
            ModelChoice::XzSom => ModelKind::XzSom,
            ModelChoice::JcmRwa => ModelKind::JcmRwa,
        }
    }
}

/// Complex amplitude in config form: a bare float or a [re, im] pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaConfig {
    Real(f64),
    Complex([f64; 2]),
}

impl From<AlphaConfig> for Complex64 {
    fn from(a: AlphaConfig) -> Complex64 {
        match a {
            AlphaConfig::Real(re) => Complex64::new(re, 0.0),
            AlphaConfig::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub omega_s: f64,
    pub omega_o: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub mass: f64,
    pub alpha: AlphaConfig,
    pub ground_weight: f64,
}

impl From<ParamsConfig> for SystemParams {
    fn from(p: ParamsConfig) -> SystemParams {
        SystemParams {
            omega_s: p.omega_s,
            omega_o: p.omega_o,
            lambda: p.lambda,
            kappa: p.kappa,
            mass: p.mass,
            alpha: p.alpha.into(),
            ground_weight: p.ground_weight,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub t0: f64,
    pub t1: f64,
    pub step: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CutoffConfig {
    /// Resolve via the pilot-run search at the configured threshold.
    Auto(AutoTag),
    Fixed(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoTag {
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Purity,
    Fluxes,
    Quality,
    SignedWq,
    RwaDeviation,
    OracleChecks,
}

impl OutputKind {
    pub fn file_name(&self) -> &'static str {
        match self {
            OutputKind::Purity => "purity.csv",
            OutputKind::Fluxes => "fluxes.csv",
            OutputKind::Quality => "quality.csv",
            OutputKind::SignedWq => "signed_wq.csv",
            OutputKind::RwaDeviation => "rwa_deviation.csv",
            OutputKind::OracleChecks => "oracle_checks.csv",
        }
    }
}

/// One scenario: model, parameters, grid, cutoff policy and requested
/// outputs. Fully deterministic; there is no randomness to seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub model: ModelChoice,
    pub cutoff: CutoffConfig,
    pub outputs: Vec<OutputKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occupation_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    pub params: ParamsConfig,
    pub grid: GridConfig,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, RunError> {
        toml::from_str(text).map_err(|e| RunError::Validation(format!("config: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn system_params(&self) -> SystemParams {
        self.params.into()
    }

    pub fn model_kind(&self) -> ModelKind {
        self.model.into()
    }

    pub fn occupation_threshold(&self) -> f64 {
        self.occupation_threshold.unwrap_or(DEFAULT_OCCUPATION_THRESHOLD)
    }

    /// Requested outputs, sorted and de-duplicated.
    pub fn output_set(&self) -> BTreeSet<OutputKind> {
        self.outputs.iter().copied().collect()
    }

    pub fn time_grid(&self) -> Result<TimeGrid, RunError> {
        TimeGrid::from_step(self.grid.t0, self.grid.t1, self.grid.step)
            .map_err(|e| RunError::Validation(format!("grid: {e}")))
    }

    /// Field-path diagnostics for everything the type system cannot catch.
    pub fn validate(&self) -> Result<(), RunError> {
        if self.name.is_empty()
            || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return Err(RunError::Validation(format!(
                "name: '{}' must be non-empty and [A-Za-z0-9_-]",
                self.name
            )));
        }
        self.system_params()
            .validate()
            .map_err(|e| RunError::Validation(format!("params: {e}")))?;
        self.time_grid()?;
        if let CutoffConfig::Fixed(n) = self.cutoff {
            if n < 2 {
                return Err(RunError::Validation(format!("cutoff: {n} must be >= 2")));
            }
        }
        if let Some(th) = self.occupation_threshold {
            if !(0.0 < th && th < 1.0) {
                return Err(RunError::Validation(format!(
                    "occupation_threshold: {th} must lie in (0, 1)"
                )));
            }
        }
        if self.output_set().contains(&OutputKind::RwaDeviation)
            && self.model == ModelChoice::JcmRwa
        {
            return Err(RunError::Validation(
                "outputs: rwa_deviation compares exact dynamics against the RWA; \
                 use model z_som or xz_som"
                    .into(),
            ));
        }
        if self.model != ModelChoice::ZSom && self.params.kappa != 0.0 {
            let p = self.system_params();
            if (self.output_set().contains(&OutputKind::RwaDeviation)
                || self.output_set().contains(&OutputKind::Quality))
                && p.omega_s != p.omega_o
            {
                return Err(RunError::Validation(
                    "params: rwa companion dynamics require resonance omega_s = omega_o".into(),
                ));
            }
        }
        Ok(())
    }
}
