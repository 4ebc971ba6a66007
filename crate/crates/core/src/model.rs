use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::habit::HabitParams;
use crate::market::{GompertzParams, MarketParams};

/// Everything that defines one retiree's problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    pub market: MarketParams,
    pub mortality: GompertzParams,
    pub habit: HabitParams,
    /// Exogenous pension income rate π (consumption units per year).
    pub pension: f64,
    /// Initial wealth v.
    pub wealth: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            market: MarketParams::default(),
            mortality: GompertzParams::default(),
            habit: HabitParams::default(),
            pension: 0.0,
            wealth: 10.0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        self.market.validate()?;
        self.mortality.validate()?;
        self.habit.validate()?;
        if !(self.pension >= 0.0 && self.pension.is_finite()) {
            return Err(Error::config("pension must be finite and >= 0"));
        }
        if !(self.wealth > 0.0 && self.wealth.is_finite()) {
            return Err(Error::config("wealth must be finite and > 0"));
        }
        Ok(())
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.habit.eta = eta;
        self
    }

    pub fn with_pension(mut self, pension: f64) -> Self {
        self.pension = pension;
        self
    }

    pub fn with_wealth(mut self, wealth: f64) -> Self {
        self.wealth = wealth;
        self
    }

    pub fn with_initial_habit(mut self, c_bar: f64) -> Self {
        self.habit.c_bar = c_bar;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.market.gamma = gamma;
        self
    }
}
