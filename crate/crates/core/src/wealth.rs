//! Wealth and asset allocation of the greedy strategy by nested Monte Carlo.
//!
//! Inner simulations restart the shifted density at 1 at the evaluation time
//! `t`, so a state enters only through its current density level and habit.
//! Without a pension, discounted wealth `F(t, z) = ζ_t X_t` depends on the
//! state through `z = ζ_t H_t` alone and the habit is solved in closed form;
//! with a pension, wealth `G(t, y, h)` is computed with the floored explicit
//! recursion. Allocations come from central differences on common inner paths.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{pow, Kernel};
use crate::market::{PathBundle, Sampling, TimeGrid};
use crate::model::ModelParams;
use crate::solver::consumption_with_pension;
use crate::stats::Estimate;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NestedConfig {
    pub n_inner: usize,
    /// Relative finite-difference step for `F_z` and `G_y`.
    pub bump: f64,
    pub seed: u64,
    pub sampling: Sampling,
    pub t_max: f64,
    /// Largest inner step; the actual step divides `t_max − t` evenly.
    pub dt: f64,
    /// Wealth below this many standard errors makes θ unreliable.
    pub noise_ratio: f64,
}

impl Default for NestedConfig {
    fn default() -> Self {
        Self {
            n_inner: 5_000,
            bump: 1e-3,
            seed: 7_777,
            sampling: Sampling::Stratified,
            t_max: 60.0,
            dt: 0.05,
            noise_ratio: 10.0,
        }
    }
}

impl NestedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_inner == 0 {
            return Err(Error::config("n_inner must be >= 1"));
        }
        if !(self.bump > 0.0 && self.bump < 0.5) {
            return Err(Error::config(format!(
                "bump must be in (0, 0.5), got {}",
                self.bump
            )));
        }
        if !(self.dt > 0.0 && self.t_max > 0.0) {
            return Err(Error::config("nested dt and t_max must be > 0"));
        }
        Ok(())
    }
}

/// Inner paths started at time `t`, shared by every evaluation at that time.
pub struct InnerSimulation {
    kernel: Kernel,
    paths: PathBundle,
}

impl InnerSimulation {
    /// `None` when `t` is at or beyond the horizon, where wealth vanishes.
    pub fn new(params: &ModelParams, t: f64, cfg: &NestedConfig) -> Result<Option<Self>> {
        cfg.validate()?;
        if !(t >= 0.0) {
            return Err(Error::domain(format!("t must be >= 0, got {t}")));
        }
        if t >= cfg.t_max - 1e-12 {
            return Ok(None);
        }
        let grid = TimeGrid::spanning(t, cfg.t_max, cfg.dt)?;
        let kernel = Kernel::new(params, &grid)?;
        let paths = kernel.bundle(cfg.n_inner, cfg.seed, cfg.sampling)?;
        Ok(Some(Self { kernel, paths }))
    }

    pub fn paths(&self) -> &PathBundle {
        &self.paths
    }

    /// Per-path contributions to `F(t, z)` for each `z`; indexed `[z][path]`.
    ///
    /// Along an inner path with `ζ_t = 1` and `H_t = z` the closed-form habit
    /// gives `ζ̃_s C_s = e^{−ηs} A_s ζ̃_s (η/γ ∫_t^s A + z^{1/γ} e^{ηt/γ})^{γ−1}`
    /// with `A_s = (α ζ̃_s e^{(ρ−η)s} / ₛp_x)^{−1/γ}`; the integral does not
    /// depend on `z`, so it is computed once per path.
    pub fn f_per_path(&self, alpha: f64, zs: &[f64]) -> Vec<Vec<f64>> {
        let k = &self.kernel;
        let grid = *k.grid();
        let gamma = k.params().market.gamma;
        let coeff = k.params().habit.eta * k.inv_gamma();
        let log_alpha = alpha.ln();
        let starts: Vec<f64> = zs
            .iter()
            .map(|z| z.powf(k.inv_gamma()) * k.growth(0))
            .collect();
        let rows: Vec<Vec<f64>> = (0..self.paths.n_paths())
            .into_par_iter()
            .map(|i| {
                let log_zeta = self.paths.log_zeta(i);
                let n = grid.n_points();
                let mut weight = Vec::with_capacity(n);
                let mut integral = Vec::with_capacity(n);
                let mut acc = 0.0;
                let mut prev_a = 0.0;
                for j in 0..n {
                    let a = k.log_d(log_alpha, log_zeta[j], j).exp() * k.growth(j);
                    if j > 0 {
                        acc += 0.5 * grid.dt() * (prev_a + a);
                    }
                    prev_a = a;
                    weight.push(grid.trapezoid_weight(j) * log_zeta[j].exp() * k.decay(j) * a);
                    integral.push(coeff * acc);
                }
                starts
                    .iter()
                    .map(|u0| {
                        weight
                            .iter()
                            .zip(&integral)
                            .map(|(w, i)| w * pow(i + u0, gamma - 1.0))
                            .sum()
                    })
                    .collect()
            })
            .collect();
        transpose(rows, zs.len())
    }

    /// Per-path contributions to `G(t, y, h)` for each `y`; indexed `[y][path]`.
    pub fn g_per_path(&self, alpha: f64, ys: &[f64], habit: f64) -> Result<Vec<Vec<f64>>> {
        self.kernel.check_euler_step()?;
        let k = &self.kernel;
        let grid = *k.grid();
        let pension = k.params().pension;
        let log_alpha = alpha.ln();
        let rows: Vec<Vec<f64>> = (0..self.paths.n_paths())
            .into_par_iter()
            .map(|i| {
                let log_zeta = self.paths.log_zeta(i);
                ys.iter()
                    .map(|y| {
                        // ln D depends on α and ζ only through α·ζ.
                        let mut total = 0.0;
                        k.euler(log_alpha + y.ln(), log_zeta, 0, habit, |j, c, _| {
                            total += grid.trapezoid_weight(j) * log_zeta[j].exp() * (c - pension);
                        });
                        total
                    })
                    .collect()
            })
            .collect();
        Ok(transpose(rows, ys.len()))
    }

    fn f_estimate(&self, alpha: f64, z: f64) -> Estimate {
        self.paths.estimate(&self.f_per_path(alpha, &[z])[0])
    }

    fn g_estimate(&self, alpha: f64, y: f64, habit: f64) -> Result<Estimate> {
        Ok(self
            .paths
            .estimate(&self.g_per_path(alpha, &[y], habit)?[0]))
    }

    /// θ from the three-point values `[x(1−b), x, x(1+b)]` of the wealth
    /// function.
    fn theta_from(
        &self,
        rows: &[Vec<f64>],
        bump: f64,
        noise_ratio: f64,
        form: Form,
    ) -> Result<Allocation> {
        let mp = &self.kernel.params().market;
        let value = self.paths.estimate(&rows[1]);
        if !(value.value > noise_ratio * value.std_error) || value.value <= 0.0 {
            return Err(Error::Unreliable {
                value: value.value,
                std_error: value.std_error,
            });
        }
        let diff: Vec<f64> = rows[2]
            .iter()
            .zip(&rows[0])
            .map(|(up, down)| (up - down) / (2.0 * bump))
            .collect();
        let elasticity = self.paths.ratio_estimate(&diff, &rows[1]);
        let scale = mp.kappa() / mp.sigma;
        let theta = match form {
            Form::Discounted => scale * (1.0 - elasticity.value),
            Form::Undiscounted => -scale * elasticity.value,
        };
        Ok(Allocation {
            theta,
            std_error: scale * elasticity.std_error,
            value,
        })
    }

    /// θ at the states `x e^{o}` for each log-offset `o`, where `x` is
    /// `z = ζ_t H_t` without pension and `y = ζ_t` with one. All states share
    /// one pass over the inner paths; each entry fails on its own when its
    /// wealth is too noisy.
    pub fn theta_profile(
        &self,
        alpha: f64,
        x: f64,
        habit: f64,
        log_offsets: &[f64],
        cfg: &NestedConfig,
    ) -> Result<Vec<Result<Allocation>>> {
        let b = cfg.bump;
        let points: Vec<f64> = log_offsets
            .iter()
            .flat_map(|o| {
                let c = x * o.exp();
                [c * (1.0 - b), c, c * (1.0 + b)]
            })
            .collect();
        let (rows, form) = if self.kernel.params().pension == 0.0 {
            (self.f_per_path(alpha, &points), Form::Discounted)
        } else {
            (self.g_per_path(alpha, &points, habit)?, Form::Undiscounted)
        };
        Ok(rows
            .chunks(3)
            .map(|r| self.theta_from(r, b, cfg.noise_ratio, form))
            .collect())
    }

    /// θ without pension at state `z = ζ_t H_t`.
    pub fn theta_no_pension(&self, alpha: f64, z: f64, cfg: &NestedConfig) -> Result<Allocation> {
        let b = cfg.bump;
        let rows = self.f_per_path(alpha, &[z * (1.0 - b), z, z * (1.0 + b)]);
        self.theta_from(&rows, b, cfg.noise_ratio, Form::Discounted)
    }

    /// θ with pension at state `(y, h) = (ζ_t, H_t)`.
    pub fn theta_pension(
        &self,
        alpha: f64,
        y: f64,
        habit: f64,
        cfg: &NestedConfig,
    ) -> Result<Allocation> {
        let b = cfg.bump;
        let rows = self.g_per_path(alpha, &[y * (1.0 - b), y, y * (1.0 + b)], habit)?;
        self.theta_from(&rows, b, cfg.noise_ratio, Form::Undiscounted)
    }
}

#[derive(Clone, Copy)]
enum Form {
    Discounted,
    Undiscounted,
}

fn transpose(rows: Vec<Vec<f64>>, width: usize) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::with_capacity(rows.len()); width];
    for row in rows {
        for (col, v) in out.iter_mut().zip(row) {
            col.push(v);
        }
    }
    out
}

/// An allocation estimate together with the wealth function value it divides by.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Allocation {
    pub theta: f64,
    pub std_error: f64,
    /// `F(t, z)` or `G(t, y, h)` at the evaluation state.
    pub value: Estimate,
}

fn require_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "{name} must be finite and > 0, got {v}"
        )))
    }
}

fn require_no_pension(params: &ModelParams) -> Result<()> {
    if params.pension != 0.0 {
        return Err(Error::config(
            "F(t, z) applies only without pension; use the G representation",
        ));
    }
    Ok(())
}

/// Discounted wealth `F(t, z)`; wealth itself is `F(t, ζ_t H_t) / ζ_t`.
pub fn wealth_f(
    t: f64,
    z: f64,
    alpha: f64,
    params: &ModelParams,
    cfg: &NestedConfig,
) -> Result<Estimate> {
    require_no_pension(params)?;
    require_positive("z", z)?;
    require_positive("alpha", alpha)?;
    Ok(match InnerSimulation::new(params, t, cfg)? {
        Some(sim) => sim.f_estimate(alpha, z),
        None => Estimate::new(0.0, 0.0),
    })
}

/// Wealth `G(t, y, h)` at density level `y` and habit `h`.
pub fn wealth_g(
    t: f64,
    y: f64,
    h: f64,
    alpha: f64,
    params: &ModelParams,
    cfg: &NestedConfig,
) -> Result<Estimate> {
    require_positive("y", y)?;
    require_positive("h", h)?;
    require_positive("alpha", alpha)?;
    match InnerSimulation::new(params, t, cfg)? {
        Some(sim) => sim.g_estimate(alpha, y, h),
        None => Ok(Estimate::new(0.0, 0.0)),
    }
}

fn unreliable_at_horizon() -> Error {
    Error::Unreliable {
        value: 0.0,
        std_error: 0.0,
    }
}

/// `θ = (κ/σ)(1 − z F_z / F)`.
pub fn allocation_theta_no_pension(
    t: f64,
    z: f64,
    alpha: f64,
    params: &ModelParams,
    cfg: &NestedConfig,
) -> Result<Allocation> {
    require_no_pension(params)?;
    require_positive("z", z)?;
    require_positive("alpha", alpha)?;
    InnerSimulation::new(params, t, cfg)?
        .ok_or_else(unreliable_at_horizon)?
        .theta_no_pension(alpha, z, cfg)
}

/// `θ = −κ y G_y / (σ G)`.
pub fn allocation_theta_pension(
    t: f64,
    y: f64,
    h: f64,
    alpha: f64,
    params: &ModelParams,
    cfg: &NestedConfig,
) -> Result<Allocation> {
    require_positive("y", y)?;
    require_positive("h", h)?;
    require_positive("alpha", alpha)?;
    InnerSimulation::new(params, t, cfg)?
        .ok_or_else(unreliable_at_horizon)?
        .theta_pension(alpha, y, h, cfg)
}

/// One point of a policy surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolicyPoint {
    pub t: f64,
    pub habit: f64,
    pub zeta: f64,
    pub wealth: f64,
    pub wealth_se: f64,
    pub consumption: f64,
    /// `None` when wealth is too close to its Monte Carlo noise.
    pub theta: Option<f64>,
}

/// Log-spaced density levels around the median of `ζ_t`.
pub fn zeta_grid(params: &ModelParams, t: f64, log_lo: f64, log_hi: f64, n: usize) -> Vec<f64> {
    let mp = &params.market;
    let centre = -(mp.r + 0.5 * mp.kappa().powi(2)) * t;
    if n == 1 {
        return vec![(centre + 0.5 * (log_lo + log_hi)).exp()];
    }
    (0..n)
        .map(|i| (centre + log_lo + (log_hi - log_lo) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Wealth, consumption and allocation at time `t` with habit fixed at
/// `habit`, one point per density level, ordered by wealth.
pub fn policy_curve(
    t: f64,
    habit: f64,
    alpha: f64,
    params: &ModelParams,
    zeta_grid: &[f64],
    cfg: &NestedConfig,
) -> Result<Vec<PolicyPoint>> {
    require_positive("habit", habit)?;
    require_positive("alpha", alpha)?;
    if zeta_grid.iter().any(|z| !(*z > 0.0)) || zeta_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain(
            "density grid must be positive and increasing",
        ));
    }
    let sim = InnerSimulation::new(params, t, cfg)?
        .ok_or_else(|| Error::domain(format!("t = {t} is not before the horizon")))?;
    let b = cfg.bump;
    let bumped: Vec<f64> = zeta_grid
        .iter()
        .flat_map(|z| [z * (1.0 - b), *z, z * (1.0 + b)])
        .collect();
    let pension = params.pension;
    let rows = if pension == 0.0 {
        let zs: Vec<f64> = bumped.iter().map(|y| y * habit).collect();
        sim.f_per_path(alpha, &zs)
    } else {
        sim.g_per_path(alpha, &bumped, habit)?
    };

    let mut points = Vec::with_capacity(zeta_grid.len());
    for (i, &zeta) in zeta_grid.iter().enumerate() {
        let triple = &rows[3 * i..3 * i + 3];
        let (form, to_wealth) = if pension == 0.0 {
            (Form::Discounted, 1.0 / zeta)
        } else {
            (Form::Undiscounted, 1.0)
        };
        let value = sim.paths.estimate(&triple[1]).scale(to_wealth);
        let theta = match sim.theta_from(triple, b, cfg.noise_ratio, form) {
            Ok(a) => Some(a.theta),
            Err(Error::Unreliable { .. }) => None,
            Err(e) => return Err(e),
        };
        let consumption = consumption_with_pension(
            habit,
            zeta,
            t,
            alpha,
            pension,
            &params.market,
            &params.mortality,
        )?;
        points.push(PolicyPoint {
            t,
            habit,
            zeta,
            wealth: value.value,
            wealth_se: value.std_error,
            consumption,
            theta,
        });
    }
    points.sort_by(|a, b| a.wealth.total_cmp(&b.wealth));
    Ok(points)
}
