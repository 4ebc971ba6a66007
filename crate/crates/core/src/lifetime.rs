//! Lifetime simulation of the greedy strategy along one market scenario.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::market::{PathBundle, Sampling, TimeGrid};
use crate::model::ModelParams;
use crate::solver::{self, calibrate_alpha, Branch, CalibrationConfig, GreedySolution};
use crate::wealth::{InnerSimulation, NestedConfig};

/// How wealth is produced along the scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WealthMode {
    /// Euler–Maruyama of the wealth equation with nested-MC allocations.
    EulerWealth,
    /// Wealth read off the conditional-expectation representation.
    MartingaleWealth,
}

/// The market path driving a lifetime simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// A random path drawn from this seed.
    Seeded(u64),
    /// The path with no Brownian shocks.
    Flat,
}

impl Scenario {
    pub fn paths(&self, params: &ModelParams, grid: &TimeGrid) -> Result<PathBundle> {
        match *self {
            Scenario::Seeded(seed) => {
                PathBundle::generate(&params.market, grid, 1, seed, Sampling::Independent)
            }
            Scenario::Flat => {
                PathBundle::from_increments(&params.market, grid, &vec![0.0; grid.n_steps()])
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LifetimeConfig {
    pub mode: WealthMode,
    /// Spacing of recorded points and of allocation refreshes (yr).
    pub record_interval: f64,
    /// Length of the recorded window (yr).
    pub horizon: f64,
    /// Step of the scenario grid (yr).
    pub dt: f64,
    pub nested: NestedConfig,
}

impl Default for LifetimeConfig {
    fn default() -> Self {
        Self {
            mode: WealthMode::EulerWealth,
            record_interval: 0.25,
            horizon: 40.0,
            dt: 0.05,
            nested: NestedConfig::default(),
        }
    }
}

/// What a lifetime simulation needs from a calibration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibratedPolicy {
    pub params: ModelParams,
    pub alpha: f64,
    pub branch: Branch,
    pub grid: TimeGrid,
}

impl GreedySolution {
    pub fn policy(&self) -> CalibratedPolicy {
        CalibratedPolicy {
            params: self.params,
            alpha: self.alpha,
            branch: self.branch,
            grid: *self.paths.grid(),
        }
    }
}

/// Realised consumption, habit, wealth and allocation along one scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LifetimeRecord {
    pub times: Vec<f64>,
    pub zeta: Vec<f64>,
    pub consumption: Vec<f64>,
    pub habit: Vec<f64>,
    pub wealth: Vec<f64>,
    /// `None` where wealth was too small relative to its noise to divide by.
    pub allocation: Vec<Option<f64>>,
    pub pension: f64,
    pub exhausted_at: Option<f64>,
}

impl LifetimeRecord {
    /// First recorded time at which wealth is at or below `threshold`.
    pub fn depletion_time(&self, threshold: f64) -> Option<f64> {
        self.times
            .iter()
            .zip(&self.wealth)
            .find(|(_, w)| **w <= threshold)
            .map(|(t, _)| *t)
    }
}

/// Log-offsets of the state at which θ is evaluated on each refresh; the outer
/// pair gives the slope used between refreshes.
const PROFILE_OFFSETS: [f64; 3] = [-0.1, 0.0, 0.1];

/// Nested-MC evaluation at one refresh point.
struct Refresh {
    /// `None` when wealth is too small relative to its noise to divide by.
    theta: Option<f64>,
    /// `dθ / d ln x`, with `x` the state variable of [`log_state`].
    slope: f64,
    log_state: f64,
    wealth: f64,
}

impl Refresh {
    /// θ at a later state inside the refresh interval. Interpolating in the
    /// state rather than towards the next refresh keeps θ adapted: the value
    /// at the next refresh depends on shocks not yet realised.
    fn theta_at(&self, log_state: f64) -> f64 {
        self.theta
            .map_or(0.0, |th| th + self.slope * (log_state - self.log_state))
    }
}

/// `ln z = ln(ζ H)` without pension, `ln y = ln ζ` with one.
fn log_state(params: &ModelParams, log_zeta: f64, habit: f64) -> f64 {
    if params.pension == 0.0 {
        log_zeta + habit.ln()
    } else {
        log_zeta
    }
}

fn refresh(
    policy: &CalibratedPolicy,
    nested: &NestedConfig,
    t: f64,
    log_zeta: f64,
    habit: f64,
    with_slope: bool,
) -> Result<Refresh> {
    let params = &policy.params;
    let x = log_state(params, log_zeta, habit);
    let Some(sim) = InnerSimulation::new(params, t, nested)? else {
        return Ok(Refresh {
            theta: None,
            slope: 0.0,
            log_state: x,
            wealth: 0.0,
        });
    };
    // G is wealth itself; F is discounted wealth.
    let to_wealth = if params.pension == 0.0 {
        (-log_zeta).exp()
    } else {
        1.0
    };
    let offsets: &[f64] = if with_slope { &PROFILE_OFFSETS } else { &[0.0] };
    let mut profile = sim.theta_profile(policy.alpha, x.exp(), habit, offsets, nested)?;
    let centre = profile.remove(offsets.len() / 2);
    let (theta, wealth) = match centre {
        Ok(a) => (Some(a.theta), a.value.value * to_wealth),
        Err(Error::Unreliable { value, .. }) => (None, value.max(0.0) * to_wealth),
        Err(e) => return Err(e),
    };
    let slope = match (with_slope, &profile[..]) {
        (true, [Ok(lo), Ok(hi)]) if theta.is_some() => {
            (hi.theta - lo.theta) / (PROFILE_OFFSETS[2] - PROFILE_OFFSETS[0])
        }
        _ => 0.0,
    };
    Ok(Refresh {
        theta,
        slope,
        log_state: x,
        wealth,
    })
}

/// Simulate the calibrated greedy strategy along `scenario`.
pub fn simulate_lifetime(
    policy: &CalibratedPolicy,
    scenario: &Scenario,
    cfg: &LifetimeConfig,
) -> Result<LifetimeRecord> {
    if !(policy.alpha > 0.0 && policy.alpha.is_finite()) {
        return Err(Error::State(format!(
            "no calibrated multiplier (alpha = {})",
            policy.alpha
        )));
    }
    cfg.nested.validate()?;
    if cfg.horizon > policy.grid.t_max() + 1e-9 {
        return Err(Error::config(format!(
            "horizon {} exceeds the calibration horizon {}",
            cfg.horizon,
            policy.grid.t_max()
        )));
    }
    let grid = TimeGrid::new(cfg.horizon, cfg.dt)?;
    let params = &policy.params;
    let stride = (cfg.record_interval / grid.dt()).round();
    if !(stride >= 1.0) || (stride * grid.dt() - cfg.record_interval).abs() > 1e-9 {
        return Err(Error::config(format!(
            "record interval {} is not a multiple of dt = {}",
            cfg.record_interval,
            grid.dt()
        )));
    }
    let stride = stride as usize;
    let record_idx: Vec<usize> = (0..=grid.n_steps()).step_by(stride).collect();

    let bundle = scenario.paths(params, &grid)?;
    let kernel = Kernel::new(params, &grid)?;
    if policy.branch == Branch::Euler {
        kernel.check_euler_step()?;
    }
    let log_zeta = bundle.log_zeta(0);
    let traj = solver::trajectory(&kernel, policy.branch, policy.alpha, log_zeta);
    let pension = params.pension;

    let state = |k: usize, with_slope: bool| -> Result<Refresh> {
        refresh(
            policy,
            &cfg.nested,
            grid.time(k),
            log_zeta[k],
            traj.habit[k],
            with_slope,
        )
    };

    let mut rec = LifetimeRecord {
        times: Vec::with_capacity(record_idx.len()),
        zeta: Vec::with_capacity(record_idx.len()),
        consumption: Vec::with_capacity(record_idx.len()),
        habit: Vec::with_capacity(record_idx.len()),
        wealth: Vec::with_capacity(record_idx.len()),
        allocation: Vec::with_capacity(record_idx.len()),
        pension,
        exhausted_at: None,
    };
    let push = |rec: &mut LifetimeRecord, k: usize, c: f64, x: f64, theta: Option<f64>| {
        rec.times.push(grid.time(k));
        rec.zeta.push(log_zeta[k].exp());
        rec.consumption.push(c);
        rec.habit.push(traj.habit[k]);
        rec.wealth.push(x);
        rec.allocation.push(theta);
    };

    match cfg.mode {
        WealthMode::MartingaleWealth => {
            let states: Vec<Refresh> = record_idx
                .par_iter()
                .map(|&k| state(k, false))
                .collect::<Result<_>>()?;
            let mut exhausted = false;
            for (&k, s) in record_idx.iter().zip(&states) {
                if !exhausted && s.wealth <= 0.0 {
                    exhausted = true;
                    rec.exhausted_at = Some(grid.time(k));
                }
                let c = if exhausted {
                    pension
                } else {
                    traj.consumption[k]
                };
                let theta = if exhausted { Some(0.0) } else { s.theta };
                push(&mut rec, k, c, s.wealth, theta);
            }
        }
        WealthMode::EulerWealth => {
            let mp = &params.market;
            let dt = grid.dt();
            let w = bundle.w(0);
            let mut x = params.wealth;
            let mut absorbed = false;
            for (j, &k0) in record_idx.iter().enumerate() {
                if absorbed {
                    push(&mut rec, k0, pension, 0.0, Some(0.0));
                    continue;
                }
                let current = state(k0, true)?;
                push(&mut rec, k0, traj.consumption[k0], x, current.theta);
                let Some(&k1) = record_idx.get(j + 1) else {
                    break;
                };
                for k in k0..k1 {
                    let theta = current.theta_at(log_state(params, log_zeta[k], traj.habit[k]));
                    let c = traj.consumption[k];
                    let dw = w[k + 1] - w[k];
                    x += ((theta * (mp.mu - mp.r) + mp.r) * x - c + pension) * dt
                        + theta * mp.sigma * x * dw;
                    if x <= 0.0 {
                        x = 0.0;
                        absorbed = true;
                        rec.exhausted_at = Some(grid.time(k + 1));
                        break;
                    }
                }
            }
        }
    }
    Ok(rec)
}

/// One lifetime record per pension level, all driven by the same scenario and
/// calibrated on the same bundle seed.
pub fn pension_sweep(
    base: &ModelParams,
    calibration: &CalibrationConfig,
    pensions: &[f64],
    scenario: &Scenario,
    cfg: &LifetimeConfig,
) -> Result<Vec<LifetimeRecord>> {
    // Calibrations run one at a time: each holds a full path bundle.
    let policies: Vec<CalibratedPolicy> = pensions
        .iter()
        .map(|&p| calibrate_alpha(&base.with_pension(p), calibration).map(|s| s.policy()))
        .collect::<Result<_>>()?;
    policies
        .par_iter()
        .map(|p| simulate_lifetime(p, scenario, cfg))
        .collect()
}
