use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lifetime::{LifetimeConfig, Scenario, WealthMode};
use crate::model::ModelParams;
use crate::solver::CalibrationConfig;
use crate::wealth::NestedConfig;

/// Settings for policy-surface generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicySettings {
    pub times: Vec<f64>,
    /// Habit level held fixed along each curve.
    pub habit: f64,
    /// Density grid spans `[e^{log_zeta_lo}, e^{log_zeta_hi}]` times the median of `ζ_t`.
    pub log_zeta_lo: f64,
    pub log_zeta_hi: f64,
    pub n_zeta: usize,
    /// Points with larger wealth are dropped.
    pub max_wealth: f64,
}

impl Default for PolicySettings {
    fn default() -> Self {
        Self {
            times: vec![0.0, 10.0, 20.0, 30.0, 40.0],
            habit: 1.0,
            log_zeta_lo: -4.0,
            log_zeta_hi: 8.0,
            n_zeta: 61,
            max_wealth: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LifetimeSettings {
    pub pensions: Vec<f64>,
    pub scenario: Scenario,
    pub mode: WealthMode,
    pub record_interval: f64,
    pub horizon: f64,
    pub dt: f64,
}

impl Default for LifetimeSettings {
    fn default() -> Self {
        let base = LifetimeConfig::default();
        Self {
            pensions: vec![0.0, 0.5, 1.0, 1.5, 2.0],
            scenario: Scenario::Seeded(2_024),
            mode: base.mode,
            record_interval: base.record_interval,
            horizon: base.horizon,
            dt: base.dt,
        }
    }
}

/// Full configuration of a command-line run. Every field is optional in the
/// file; omitted fields take the defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    pub calibration: CalibrationConfig,
    pub nested: NestedConfig,
    pub policy: PolicySettings,
    pub lifetime: LifetimeSettings,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(format!("key `{path}`: {}", e.inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.calibration.validate()?;
        self.nested.validate()?;
        let p = &self.policy;
        if p.n_zeta < 2 || !(p.log_zeta_lo < p.log_zeta_hi) {
            return Err(Error::config(
                "policy: need n_zeta >= 2 and log_zeta_lo < log_zeta_hi",
            ));
        }
        if !(p.habit > 0.0) || !(p.max_wealth > 0.0) {
            return Err(Error::config("policy: habit and max_wealth must be > 0"));
        }
        if p.times
            .iter()
            .any(|t| !(*t >= 0.0 && *t < self.calibration.t_max))
        {
            return Err(Error::config("policy: times must lie in [0, t_max)"));
        }
        let l = &self.lifetime;
        if l.pensions.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::config("lifetime: pensions must be >= 0"));
        }
        if !(l.horizon > 0.0 && l.horizon <= self.calibration.t_max) {
            return Err(Error::config("lifetime: horizon must be in (0, t_max]"));
        }
        Ok(())
    }

    pub fn lifetime_config(&self) -> LifetimeConfig {
        LifetimeConfig {
            mode: self.lifetime.mode,
            record_interval: self.lifetime.record_interval,
            horizon: self.lifetime.horizon,
            dt: self.lifetime.dt,
            nested: self.nested,
        }
    }
}
