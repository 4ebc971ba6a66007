//! Per-grid precomputation shared by every path-level consumption and habit
//! evaluation.
//!
//! With `D_t = (α e^{ρt} ζ_t / ₜp_x)^{-1/γ}` the unconstrained greedy
//! consumption is `H^{1-1/γ} D`, and along a path the habit solves a Bernoulli
//! equation. Everything that depends only on time is tabulated here.

use crate::error::{Error, Result};
use crate::market::{PathBundle, Sampling, TimeGrid};
use crate::model::ModelParams;

#[derive(Debug, Clone)]
pub struct Kernel {
    pub(crate) params: ModelParams,
    pub(crate) grid: TimeGrid,
    inv_gamma: f64,
    /// `(ln ₜp_x − ρt)/γ`, so `ln D = −(ln α + ln ζ)/γ + log_d_base`.
    log_d_base: Vec<f64>,
    /// `e^{−ηt}`
    decay: Vec<f64>,
    /// `e^{ηt/γ}`
    growth: Vec<f64>,
}

/// `x^p`, taking the cheaper integer route when `p` is a small whole number.
#[inline]
pub(crate) fn pow(x: f64, p: f64) -> f64 {
    if p == p.trunc() && p.abs() <= 16.0 {
        x.powi(p as i32)
    } else {
        x.powf(p)
    }
}

impl Kernel {
    pub fn new(params: &ModelParams, grid: &TimeGrid) -> Result<Self> {
        params.validate()?;
        let gamma = params.market.gamma;
        let inv_gamma = 1.0 / gamma;
        let eta = params.habit.eta;
        let mort = &params.mortality;
        let n = grid.n_points();
        let mut log_d_base = Vec::with_capacity(n);
        let mut decay = Vec::with_capacity(n);
        let mut growth = Vec::with_capacity(n);
        for k in 0..n {
            let t = grid.time(k);
            log_d_base.push((mort.log_survival(t) - params.market.rho * t) * inv_gamma);
            decay.push((-eta * t).exp());
            growth.push((eta * t * inv_gamma).exp());
        }
        Ok(Self {
            params: *params,
            grid: *grid,
            inv_gamma,
            log_d_base,
            decay,
            growth,
        })
    }

    /// Direction of the best linear predictor, in terms of `W`, of the
    /// frictionless budget integrand `ζ D`: `Cov(ζ_k D_k, W_j) ∝ min(t_j, t_k)
    /// E[ζ_k D_k]`, so each grid point is weighted by its expected contribution.
    /// Used as the stratification direction.
    pub fn budget_direction(&self) -> Vec<f64> {
        let mp = &self.params.market;
        let a = 1.0 - self.inv_gamma;
        let k2 = mp.kappa().powi(2);
        (0..self.grid.n_points())
            .map(|k| {
                let s = self.grid.elapsed(k);
                let log_moment = -a * mp.r * s + 0.5 * a * (a - 1.0) * k2 * s;
                self.grid.trapezoid_weight(k) * (log_moment + self.log_d_base[k]).exp()
            })
            .collect()
    }

    /// Path bundle on this kernel's grid, stratified along
    /// [`Kernel::budget_direction`] when that scheme is requested.
    pub fn bundle(&self, n_paths: usize, seed: u64, sampling: Sampling) -> Result<PathBundle> {
        let mp = &self.params.market;
        match sampling {
            Sampling::Stratified => PathBundle::generate_stratified(
                mp,
                &self.grid,
                n_paths,
                seed,
                &self.budget_direction(),
            ),
            _ => PathBundle::generate(mp, &self.grid, n_paths, seed, sampling),
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub(crate) fn inv_gamma(&self) -> f64 {
        self.inv_gamma
    }

    /// `e^{−η t_k}`
    #[inline]
    pub(crate) fn decay(&self, k: usize) -> f64 {
        self.decay[k]
    }

    /// `e^{η t_k / γ}`
    #[inline]
    pub(crate) fn growth(&self, k: usize) -> f64 {
        self.growth[k]
    }

    /// `ln D_k` for multiplier `alpha` and density `exp(log_zeta)` at point `k`.
    #[inline]
    pub fn log_d(&self, log_alpha: f64, log_zeta: f64, k: usize) -> f64 {
        self.log_d_base[k] - (log_alpha + log_zeta) * self.inv_gamma
    }

    /// Unconstrained greedy consumption `H^{1-1/γ} D` at grid point `k`.
    #[inline]
    pub fn unconstrained(&self, log_alpha: f64, log_zeta: f64, k: usize, habit: f64) -> f64 {
        ((1.0 - self.inv_gamma) * habit.ln() + self.log_d(log_alpha, log_zeta, k)).exp()
    }

    /// Positivity of the explicit habit step requires `η·dt < 1`.
    pub fn check_euler_step(&self) -> Result<()> {
        let h = self.params.habit.eta * self.grid.dt();
        if h >= 1.0 {
            return Err(Error::config(format!(
                "eta * dt = {h} >= 1: habit step too coarse to stay positive"
            )));
        }
        Ok(())
    }

    /// Bernoulli closed form from point `k0` with habit `h0`: calls
    /// `visit(k, consumption, habit)` for every `k >= k0`. The time integral is
    /// a trapezoid on the grid. Only valid without a pension floor.
    #[inline]
    pub fn closed_form(
        &self,
        log_alpha: f64,
        log_zeta: &[f64],
        k0: usize,
        h0: f64,
        mut visit: impl FnMut(usize, f64, f64),
    ) {
        let gamma = self.params.market.gamma;
        let coeff = self.params.habit.eta * self.inv_gamma;
        let half_dt = 0.5 * self.grid.dt();
        let u0 = h0.powf(self.inv_gamma) * self.growth[k0];
        let mut integral = 0.0;
        let mut prev_a = 0.0;
        for k in k0..self.grid.n_points() {
            let a = self.log_d(log_alpha, log_zeta[k], k).exp() * self.growth[k];
            if k > k0 {
                integral += half_dt * (prev_a + a);
            }
            prev_a = a;
            let u = coeff * integral + u0;
            let u_gm1 = pow(u, gamma - 1.0);
            let habit = self.decay[k] * u_gm1 * u;
            let consumption = self.decay[k] * u_gm1 * a;
            visit(k, consumption, habit);
        }
    }

    /// Explicit scheme for the floored system: `C_k = π ∨ H_k^{1-1/γ} D_k`,
    /// then `H_{k+1} = H_k + η (C_k − H_k) dt`.
    #[inline]
    pub fn euler(
        &self,
        log_alpha: f64,
        log_zeta: &[f64],
        k0: usize,
        h0: f64,
        mut visit: impl FnMut(usize, f64, f64),
    ) {
        let pension = self.params.pension;
        let eta_dt = self.params.habit.eta * self.grid.dt();
        let mut habit = h0;
        for k in k0..self.grid.n_points() {
            let consumption = self
                .unconstrained(log_alpha, log_zeta[k], k, habit)
                .max(pension);
            visit(k, consumption, habit);
            habit += eta_dt * (consumption - habit);
        }
    }
}
