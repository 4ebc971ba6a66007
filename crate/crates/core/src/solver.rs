//! Greedy-optimal consumption for a given Lagrange multiplier, the budget it
//! consumes, and calibration of the multiplier to initial wealth.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::market::{GompertzParams, MarketParams, PathBundle, Sampling, TimeGrid};
use crate::model::ModelParams;
use crate::stats::Estimate;

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "{name} must be finite and > 0, got {v}"
        )))
    }
}

/// Unconstrained greedy consumption `H^{1-1/γ} (α e^{ρt} ζ / ₜp_x)^{-1/γ}`.
pub fn consumption_no_pension(
    habit: f64,
    zeta: f64,
    t: f64,
    alpha: f64,
    mp: &MarketParams,
    mort: &GompertzParams,
) -> Result<f64> {
    check_positive("habit", habit)?;
    check_positive("zeta", zeta)?;
    check_positive("alpha", alpha)?;
    if !(t >= 0.0) {
        return Err(Error::domain(format!("t must be >= 0, got {t}")));
    }
    let inv_g = 1.0 / mp.gamma;
    let log_c = (1.0 - inv_g) * habit.ln()
        - inv_g * (alpha.ln() + mp.rho * t - mort.log_survival(t) + zeta.ln());
    Ok(log_c.exp())
}

/// Greedy consumption floored at the pension rate.
pub fn consumption_with_pension(
    habit: f64,
    zeta: f64,
    t: f64,
    alpha: f64,
    pension: f64,
    mp: &MarketParams,
    mort: &GompertzParams,
) -> Result<f64> {
    if !(pension >= 0.0) {
        return Err(Error::domain(format!(
            "pension must be >= 0, got {pension}"
        )));
    }
    Ok(consumption_no_pension(habit, zeta, t, alpha, mp, mort)?.max(pension))
}

/// How the coupled consumption/habit system is advanced along a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Bernoulli closed form (no pension floor).
    ClosedForm,
    /// Explicit per-step recursion with the pension floor.
    Euler,
}

impl Branch {
    pub fn for_params(params: &ModelParams) -> Self {
        if params.pension == 0.0 {
            Branch::ClosedForm
        } else {
            Branch::Euler
        }
    }
}

/// Consumption and habit along one path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub consumption: Vec<f64>,
    pub habit: Vec<f64>,
}

/// Walk one path with the chosen branch, starting from the kernel grid origin.
pub(crate) fn walk(
    kernel: &Kernel,
    branch: Branch,
    log_alpha: f64,
    log_zeta: &[f64],
    h0: f64,
    visit: impl FnMut(usize, f64, f64),
) {
    match branch {
        Branch::ClosedForm => kernel.closed_form(log_alpha, log_zeta, 0, h0, visit),
        Branch::Euler => kernel.euler(log_alpha, log_zeta, 0, h0, visit),
    }
}

pub(crate) fn trajectory(
    kernel: &Kernel,
    branch: Branch,
    alpha: f64,
    log_zeta: &[f64],
) -> Trajectory {
    let n = kernel.grid().n_points();
    let mut consumption = Vec::with_capacity(n);
    let mut habit = Vec::with_capacity(n);
    walk(
        kernel,
        branch,
        alpha.ln(),
        log_zeta,
        kernel.params().habit.c_bar,
        |_, c, h| {
            consumption.push(c);
            habit.push(h);
        },
    );
    Trajectory { consumption, habit }
}

fn kernel_for(params: &ModelParams, grid: &TimeGrid, branch: Branch) -> Result<Kernel> {
    let kernel = Kernel::new(params, grid)?;
    match branch {
        Branch::Euler => kernel.check_euler_step()?,
        Branch::ClosedForm if params.pension > 0.0 => {
            return Err(Error::config(
                "closed-form habit does not apply with a pension floor",
            ))
        }
        Branch::ClosedForm => {}
    }
    Ok(kernel)
}

/// Greedy consumption and habit on every path of the bundle, using the closed
/// form when there is no pension and the explicit recursion otherwise.
pub fn solve_paths(
    alpha: f64,
    params: &ModelParams,
    paths: &PathBundle,
) -> Result<Vec<Trajectory>> {
    solve_paths_with(alpha, params, paths, Branch::for_params(params))
}

/// As [`solve_paths`] with an explicit branch choice.
pub fn solve_paths_with(
    alpha: f64,
    params: &ModelParams,
    paths: &PathBundle,
    branch: Branch,
) -> Result<Vec<Trajectory>> {
    check_positive("alpha", alpha)?;
    let kernel = kernel_for(params, paths.grid(), branch)?;
    Ok((0..paths.n_paths())
        .into_par_iter()
        .map(|i| trajectory(&kernel, branch, alpha, paths.log_zeta(i)))
        .collect())
}

/// Reusable budget evaluation on a fixed bundle.
pub struct BudgetEvaluator<'a> {
    kernel: Kernel,
    branch: Branch,
    paths: &'a PathBundle,
}

impl<'a> BudgetEvaluator<'a> {
    pub fn new(params: &ModelParams, paths: &'a PathBundle) -> Result<Self> {
        Self::with_branch(params, paths, Branch::for_params(params))
    }

    pub fn with_branch(
        params: &ModelParams,
        paths: &'a PathBundle,
        branch: Branch,
    ) -> Result<Self> {
        Ok(Self {
            kernel: kernel_for(params, paths.grid(), branch)?,
            branch,
            paths,
        })
    }

    /// Discounted consumption-from-wealth integral of every path.
    pub fn per_path(&self, alpha: f64) -> Result<Vec<f64>> {
        check_positive("alpha", alpha)?;
        let log_alpha = alpha.ln();
        let pension = self.kernel.params().pension;
        let c_bar = self.kernel.params().habit.c_bar;
        let grid = *self.kernel.grid();
        Ok((0..self.paths.n_paths())
            .into_par_iter()
            .map(|i| {
                let log_zeta = self.paths.log_zeta(i);
                let mut total = 0.0;
                walk(
                    &self.kernel,
                    self.branch,
                    log_alpha,
                    log_zeta,
                    c_bar,
                    |k, c, _| {
                        total += grid.trapezoid_weight(k) * log_zeta[k].exp() * (c - pension);
                    },
                );
                total
            })
            .collect())
    }

    pub fn evaluate(&self, alpha: f64) -> Result<Estimate> {
        Ok(self.paths.estimate(&self.per_path(alpha)?))
    }
}

/// Monte Carlo estimate of `E[∫₀^{t_max} ζ_s (C*_s − π) ds]`.
pub fn budget_value(alpha: f64, params: &ModelParams, paths: &PathBundle) -> Result<Estimate> {
    BudgetEvaluator::new(params, paths)?.evaluate(alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    /// Relative budget tolerance `|budget − v| / v`.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub t_max: f64,
    pub dt: f64,
    pub sampling: Sampling,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            tolerance: 5e-3,
            max_iterations: 80,
            alpha_lo: 1e-6,
            alpha_hi: 1e6,
            n_paths: 20_000,
            seed: 20_240_601,
            t_max: 60.0,
            dt: 0.05,
            sampling: Sampling::Stratified,
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_lo > 0.0 && self.alpha_lo < self.alpha_hi && self.alpha_hi.is_finite()) {
            return Err(Error::config(format!(
                "bracket must satisfy 0 < alpha_lo < alpha_hi, got ({}, {})",
                self.alpha_lo, self.alpha_hi
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::config("tolerance must be > 0"));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("max_iterations must be >= 1"));
        }
        self.grid()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.t_max, self.dt)
    }

    pub fn paths(&self, params: &ModelParams) -> Result<PathBundle> {
        Kernel::new(params, &self.grid()?)?.bundle(self.n_paths, self.seed, self.sampling)
    }
}

/// Calibrated greedy optimum on the calibration bundle.
#[derive(Debug, Clone)]
pub struct GreedySolution {
    pub alpha: f64,
    pub budget: Estimate,
    /// `|budget(α) − v| / v`
    pub budget_residual: f64,
    /// Bisection evaluations used after the bracket was settled.
    pub iterations: usize,
    pub params: ModelParams,
    pub branch: Branch,
    pub paths: PathBundle,
}

impl GreedySolution {
    pub fn pension(&self) -> f64 {
        self.params.pension
    }

    pub fn wealth(&self) -> f64 {
        self.params.wealth
    }

    /// Consumption and habit on calibration path `i`.
    pub fn trajectory(&self, i: usize) -> Result<Trajectory> {
        let kernel = kernel_for(&self.params, self.paths.grid(), self.branch)?;
        Ok(trajectory(
            &kernel,
            self.branch,
            self.alpha,
            self.paths.log_zeta(i),
        ))
    }

    pub fn trajectories(&self) -> Result<Vec<Trajectory>> {
        solve_paths_with(self.alpha, &self.params, &self.paths, self.branch)
    }
}

/// Calibrate α on a fresh bundle drawn from `config`.
pub fn calibrate_alpha(params: &ModelParams, config: &CalibrationConfig) -> Result<GreedySolution> {
    config.validate()?;
    let paths = config.paths(params)?;
    calibrate_on(params, paths, config)
}

/// Bisection in `ln α` on a fixed bundle (common random numbers across trials).
pub fn calibrate_on(
    params: &ModelParams,
    paths: PathBundle,
    config: &CalibrationConfig,
) -> Result<GreedySolution> {
    params.validate()?;
    config.validate()?;
    let v = params.wealth;
    let branch = Branch::for_params(params);
    let evaluator = BudgetEvaluator::with_branch(params, &paths, branch)?;
    let mut history = History::default();
    let mut eval = |alpha: f64| -> Result<Estimate> {
        let b = evaluator.evaluate(alpha)?;
        history.insert(alpha, b.value)?;
        Ok(b)
    };
    let residual = |b: &Estimate| (b.value - v).abs() / v;

    let mut lo = config.alpha_lo;
    let mut b_lo = eval(lo)?;
    for _ in 0..6 {
        if b_lo.value >= v {
            break;
        }
        lo /= 10.0;
        b_lo = eval(lo)?;
    }
    let mut hi = config.alpha_hi;
    let mut b_hi = eval(hi)?;
    for _ in 0..6 {
        if b_hi.value <= v {
            break;
        }
        hi *= 10.0;
        b_hi = eval(hi)?;
    }
    if b_lo.value < v || b_hi.value > v {
        return Err(Error::Calibration(format!(
            "bracket [{lo:e}, {hi:e}] gives budgets [{:e}, {:e}], which do not straddle v = {v}",
            b_lo.value, b_hi.value
        )));
    }

    let finish =
        |alpha: f64, budget: Estimate, iterations: usize, paths: PathBundle| GreedySolution {
            alpha,
            budget,
            budget_residual: residual(&budget),
            iterations,
            params: *params,
            branch,
            paths,
        };
    if residual(&b_lo) <= config.tolerance {
        return Ok(finish(lo, b_lo, 0, paths));
    }
    if residual(&b_hi) <= config.tolerance {
        return Ok(finish(hi, b_hi, 0, paths));
    }

    for iteration in 1..=config.max_iterations {
        let mid = (lo * hi).sqrt();
        let b = eval(mid)?;
        if residual(&b) <= config.tolerance {
            return Ok(finish(mid, b, iteration, paths));
        }
        if b.value > v {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Calibration(format!(
        "no alpha within tolerance {} after {} iterations (bracket [{lo:e}, {hi:e}])",
        config.tolerance, config.max_iterations
    )))
}

/// Once the floor binds everywhere the budget is exactly zero for all larger α.
fn both_zero(a: f64, b: f64) -> bool {
    a == 0.0 && b == 0.0
}

/// Budget values seen so far, kept sorted by α and checked to be strictly
/// decreasing (apart from the zero plateau).
#[derive(Default)]
struct History(Vec<(f64, f64)>);

impl History {
    fn insert(&mut self, alpha: f64, budget: f64) -> Result<()> {
        let pos = self.0.partition_point(|(a, _)| *a < alpha);
        if let Some(&(a, b)) = self.0.get(pos) {
            if a == alpha {
                return Ok(());
            }
            if budget <= b && !both_zero(budget, b) {
                return Err(Error::NonMonotone {
                    alpha_lo: alpha,
                    budget_lo: budget,
                    alpha_hi: a,
                    budget_hi: b,
                });
            }
        }
        if pos > 0 {
            let (a, b) = self.0[pos - 1];
            if b <= budget && !both_zero(budget, b) {
                return Err(Error::NonMonotone {
                    alpha_lo: a,
                    budget_lo: b,
                    alpha_hi: alpha,
                    budget_hi: budget,
                });
            }
        }
        self.0.insert(pos, (alpha, budget));
        Ok(())
    }
}
