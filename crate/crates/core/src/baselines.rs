//! Closed-form results for the habit-free case η = 0: Merton's problem with
//! mortality folded into the discount factor.

use crate::error::{Error, Result};
use crate::market::{GompertzParams, MarketParams};
use crate::quad::adaptive_simpson;

const QUAD_TOL: f64 = 1e-10;

/// Constant Merton allocation κ/(σγ).
pub fn merton_theta(mp: &MarketParams) -> f64 {
    mp.kappa() / (mp.sigma * mp.gamma)
}

/// `∫₀^{horizon} e^{−ρs/γ} (ₛp_y)^{1/γ} E[ζ_s^{1−1/γ}] ds` for an individual
/// aged `mort.x`, where `E[ζ_s^a] = exp(−a r s + a(a−1) κ² s / 2)`.
pub fn annuity_factor(mp: &MarketParams, mort: &GompertzParams, horizon: f64) -> f64 {
    if horizon <= 0.0 {
        return 0.0;
    }
    let inv_g = 1.0 / mp.gamma;
    let a = 1.0 - inv_g;
    let k2 = mp.kappa().powi(2);
    let rate = -mp.rho * inv_g - a * mp.r + 0.5 * a * (a - 1.0) * k2;
    adaptive_simpson(
        |s| (rate * s + inv_g * mort.log_survival(s)).exp(),
        0.0,
        horizon,
        QUAD_TOL,
    )
}

/// Exact budget `E[∫₀^{t_max} ζ_s C*_s ds]` of greedy consumption with η = 0
/// and habit frozen at `c_bar`.
pub fn merton_budget(
    alpha: f64,
    mp: &MarketParams,
    mort: &GompertzParams,
    c_bar: f64,
    t_max: f64,
) -> f64 {
    let inv_g = 1.0 / mp.gamma;
    c_bar.powf(1.0 - inv_g) * alpha.powf(-inv_g) * annuity_factor(mp, mort, t_max)
}

/// The α that makes [`merton_budget`] equal `wealth`: `(A/v)^γ c̄^{γ−1}`.
pub fn merton_alpha(
    wealth: f64,
    mp: &MarketParams,
    mort: &GompertzParams,
    c_bar: f64,
    t_max: f64,
) -> f64 {
    let a = annuity_factor(mp, mort, t_max);
    (a / wealth).powf(mp.gamma) * c_bar.powf(mp.gamma - 1.0)
}

/// Consumption per unit wealth at time `t` along any path when η = 0.
///
/// From time `t` the remaining budget is `C_t ζ_t^{-1} E[∫_t ζ_s (C_s/C_t) ds]`;
/// the ratio `ζ_s C_s / (ζ_t C_t)` is `(ζ̃ᵗ_s)^{1−1/γ} e^{−ρ(s−t)/γ} (p_s/p_t)^{1/γ}`,
/// so wealth is `C_t` times the annuity factor of an individual aged `x + t`
/// over the remaining horizon.
pub fn merton_propensity(
    mp: &MarketParams,
    mort: &GompertzParams,
    t: f64,
    t_max: f64,
) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("t must be >= 0, got {t}")));
    }
    if t >= t_max {
        return Err(Error::domain(format!(
            "t = {t} is not before the horizon {t_max}"
        )));
    }
    Ok(1.0 / annuity_factor(mp, &mort.aged(t), t_max - t))
}

/// Closed-form η = 0 policy.
#[derive(Debug, Clone, Copy)]
pub struct MertonOracle {
    pub theta_star: f64,
    market: MarketParams,
    mortality: GompertzParams,
    t_max: f64,
}

impl MertonOracle {
    pub fn new(mp: &MarketParams, mort: &GompertzParams, t_max: f64) -> Self {
        Self {
            theta_star: merton_theta(mp),
            market: *mp,
            mortality: *mort,
            t_max,
        }
    }

    pub fn propensity(&self, t: f64) -> Result<f64> {
        merton_propensity(&self.market, &self.mortality, t, self.t_max)
    }
}
