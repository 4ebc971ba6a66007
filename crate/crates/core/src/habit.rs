//! Habit state equation `dH = η (C − H) dt`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::market::{GompertzParams, MarketParams, TimeGrid};
use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HabitParams {
    /// Smoothing factor η (1/yr): how fast habit follows consumption.
    pub eta: f64,
    /// Initial habit c̄.
    pub c_bar: f64,
}

impl Default for HabitParams {
    fn default() -> Self {
        Self {
            eta: 0.1,
            c_bar: 1.0,
        }
    }
}

impl HabitParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::config("habit.eta must be finite and >= 0"));
        }
        if !(self.c_bar > 0.0 && self.c_bar.is_finite()) {
            return Err(Error::config("habit.c_bar must be finite and > 0"));
        }
        Ok(())
    }
}

/// Greedy habit along one density path, from grid point `from_index` where the
/// habit equals `habit_at_start`, solved in closed form with consumption given
/// by the unconstrained greedy rule. Returns the habit at `from_index..`.
#[allow(clippy::too_many_arguments)]
pub fn habit_closed_form(
    hp: &HabitParams,
    mp: &MarketParams,
    mort: &GompertzParams,
    alpha: f64,
    grid: &TimeGrid,
    zeta: &[f64],
    from_index: usize,
    habit_at_start: f64,
) -> Result<Vec<f64>> {
    if !(alpha > 0.0) {
        return Err(Error::domain(format!("alpha must be > 0, got {alpha}")));
    }
    if !(habit_at_start > 0.0) {
        return Err(Error::domain(format!(
            "habit must be > 0, got {habit_at_start}"
        )));
    }
    if zeta.len() != grid.n_points() {
        return Err(Error::config(format!(
            "density path has {} points, grid has {}",
            zeta.len(),
            grid.n_points()
        )));
    }
    if from_index >= grid.n_points() {
        return Err(Error::domain(format!(
            "start index {from_index} outside grid"
        )));
    }
    if zeta.iter().any(|z| !(*z > 0.0)) {
        return Err(Error::domain("density values must be > 0"));
    }
    let params = ModelParams {
        market: *mp,
        mortality: *mort,
        habit: *hp,
        ..ModelParams::default()
    };
    let kernel = Kernel::new(&params, grid)?;
    let log_zeta: Vec<f64> = zeta.iter().map(|z| z.ln()).collect();
    let mut out = Vec::with_capacity(grid.n_points() - from_index);
    kernel.closed_form(
        alpha.ln(),
        &log_zeta,
        from_index,
        habit_at_start,
        |_, _, h| out.push(h),
    );
    Ok(out)
}

/// One explicit Euler step of the habit equation.
pub fn habit_euler_step(hp: &HabitParams, habit: f64, consumption: f64, dt: f64) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::config(format!("dt must be > 0, got {dt}")));
    }
    if hp.eta * dt >= 1.0 {
        return Err(Error::config(format!(
            "eta * dt = {} >= 1: habit step too coarse to stay positive",
            hp.eta * dt
        )));
    }
    if !(habit > 0.0) || !(consumption >= 0.0) {
        return Err(Error::domain(format!(
            "need habit > 0 and consumption >= 0, got ({habit}, {consumption})"
        )));
    }
    Ok(habit + hp.eta * (consumption - habit) * dt)
}
