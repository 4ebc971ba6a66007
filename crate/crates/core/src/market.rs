//! Market and mortality parameters, the simulation time grid, and exact
//! simulation of the state price density.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::Estimate;

/// Parameters of the single-stock Black–Scholes market and of the investor's
/// preferences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketParams {
    /// Stock drift (1/yr).
    pub mu: f64,
    /// Stock volatility (1/√yr).
    pub sigma: f64,
    /// Risk-free rate (1/yr).
    pub r: f64,
    /// Subjective discount rate (1/yr).
    pub rho: f64,
    /// Relative risk aversion.
    pub gamma: f64,
}

impl Default for MarketParams {
    fn default() -> Self {
        Self {
            mu: 0.08,
            sigma: 0.16,
            r: 0.02,
            rho: 0.02,
            gamma: 3.0,
        }
    }
}

impl MarketParams {
    pub fn new(mu: f64, sigma: f64, r: f64, rho: f64, gamma: f64) -> Result<Self> {
        let mp = Self {
            mu,
            sigma,
            r,
            rho,
            gamma,
        };
        mp.validate()?;
        Ok(mp)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mu", self.mu),
            ("sigma", self.sigma),
            ("r", self.r),
            ("rho", self.rho),
            ("gamma", self.gamma),
        ] {
            if !v.is_finite() {
                return Err(Error::config(format!("market.{name} must be finite")));
            }
        }
        if self.sigma <= 0.0 {
            return Err(Error::config("market.sigma must be > 0"));
        }
        if self.gamma <= 0.0 || self.gamma == 1.0 {
            return Err(Error::config("market.gamma must be > 0 and != 1"));
        }
        Ok(())
    }

    /// Market price of risk (μ − r)/σ.
    pub fn kappa(&self) -> f64 {
        (self.mu - self.r) / self.sigma
    }
}

/// Gompertz law of mortality for an individual currently aged `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GompertzParams {
    /// Current age (yr).
    pub x: f64,
    /// Modal age at death (yr).
    pub m: f64,
    /// Dispersion (yr).
    pub b: f64,
}

impl Default for GompertzParams {
    fn default() -> Self {
        Self {
            x: 65.0,
            m: 89.335,
            b: 9.5,
        }
    }
}

impl GompertzParams {
    pub fn new(x: f64, m: f64, b: f64) -> Result<Self> {
        let g = Self { x, m, b };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x.is_finite() && self.m.is_finite() && self.b.is_finite()) {
            return Err(Error::config("mortality parameters must be finite"));
        }
        if self.b <= 0.0 {
            return Err(Error::config("mortality.b must be > 0"));
        }
        Ok(())
    }

    /// The same law viewed from age `x + s`.
    pub fn aged(&self, s: f64) -> Self {
        Self {
            x: self.x + s,
            ..*self
        }
    }

    /// Log of the probability of surviving `s` years. No domain check.
    #[inline]
    pub fn log_survival(&self, s: f64) -> f64 {
        -((self.x - self.m) / self.b).exp() * (s / self.b).exp_m1()
    }

    /// Probability of surviving `s ≥ 0` more years.
    pub fn survival(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(Error::domain(format!(
                "survival horizon must be >= 0, got {s}"
            )));
        }
        Ok(self.log_survival(s).exp())
    }

    /// Force of mortality at age `y`.
    pub fn hazard(&self, y: f64) -> f64 {
        ((y - self.m) / self.b).exp() / self.b
    }
}

/// Probability that an individual aged `mort.x` survives `s` more years.
pub fn survival_probability(mort: &GompertzParams, s: f64) -> Result<f64> {
    mort.survival(s)
}

/// Gompertz hazard rate at age `y`.
pub fn hazard_rate(mort: &GompertzParams, y: f64) -> f64 {
    mort.hazard(y)
}

/// Uniform time grid `origin + k·dt`, `k = 0..=n_steps`, ending at `t_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    origin: f64,
    t_max: f64,
    dt: f64,
    n_steps: usize,
}

impl TimeGrid {
    /// Grid on `[0, t_max]`; `t_max` must be an integer multiple of `dt`.
    pub fn new(t_max: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::config(format!("dt must be > 0, got {dt}")));
        }
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(Error::config(format!("t_max must be > 0, got {t_max}")));
        }
        let ratio = t_max / dt;
        let n = ratio.round();
        if (ratio - n).abs() > 1e-9 * ratio.max(1.0) || n < 1.0 {
            return Err(Error::config(format!(
                "t_max = {t_max} is not an integer multiple of dt = {dt}"
            )));
        }
        Ok(Self {
            origin: 0.0,
            t_max,
            dt,
            n_steps: n as usize,
        })
    }

    /// Grid on `[origin, t_end]` whose step is the largest value `<= max_dt`
    /// that divides the interval evenly.
    pub fn spanning(origin: f64, t_end: f64, max_dt: f64) -> Result<Self> {
        if !(max_dt > 0.0) {
            return Err(Error::config(format!("dt must be > 0, got {max_dt}")));
        }
        let len = t_end - origin;
        if !(len > 0.0) {
            return Err(Error::config(format!(
                "empty grid: origin {origin} >= end {t_end}"
            )));
        }
        let n = ((len / max_dt) - 1e-9).ceil().max(1.0);
        Ok(Self {
            origin,
            t_max: t_end,
            dt: len / n,
            n_steps: n as usize,
        })
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_points(&self) -> usize {
        self.n_steps + 1
    }

    /// Absolute time of grid point `k`, recomputed from `k` every call.
    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        self.origin + k as f64 * self.dt
    }

    /// Time elapsed since the origin at grid point `k`.
    #[inline]
    pub fn elapsed(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// Index of the grid point nearest to absolute time `t`, if within range.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let k = ((t - self.origin) / self.dt).round();
        if k < 0.0 || k > self.n_steps as f64 {
            return None;
        }
        let k = k as usize;
        ((self.time(k) - t).abs() <= 1e-9 * self.dt.max(t.abs())).then_some(k)
    }

    /// Trapezoid weight of grid point `k` (in years).
    #[inline]
    pub fn trapezoid_weight(&self, k: usize) -> f64 {
        if k == 0 || k == self.n_steps {
            0.5 * self.dt
        } else {
            self.dt
        }
    }
}

/// How Brownian increments are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Every path has its own stream.
    #[default]
    Independent,
    /// Paths `2j` and `2j+1` share stream `j` with opposite increments.
    Antithetic,
    /// Paths `2j` and `2j+1` are drawn conditionally on a linear functional
    /// `L = Σ c_k W_k` of the path lying in the `j`-th of `n/2` equiprobable
    /// strata of its Gaussian law.
    Stratified,
}

/// Simulated Brownian and state price density paths on a common grid.
///
/// The density `ζ̃` restarts at 1 at the grid origin, so for a grid starting at
/// `t` the bundle holds the shifted density `ζ_s / ζ_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    grid: TimeGrid,
    n_paths: usize,
    seed: u64,
    sampling: Sampling,
    w: Vec<f64>,
    log_zeta: Vec<f64>,
}

/// Simulate `n_paths` independent paths. A pure function of its arguments.
pub fn generate_paths(
    mp: &MarketParams,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<PathBundle> {
    PathBundle::generate(mp, grid, n_paths, seed, Sampling::Independent)
}

impl PathBundle {
    pub fn generate(
        mp: &MarketParams,
        grid: &TimeGrid,
        n_paths: usize,
        seed: u64,
        sampling: Sampling,
    ) -> Result<Self> {
        if sampling == Sampling::Stratified {
            // Default direction: the time integral of W.
            let direction: Vec<f64> = (0..grid.n_points())
                .map(|k| grid.trapezoid_weight(k))
                .collect();
            return Self::generate_stratified(mp, grid, n_paths, seed, &direction);
        }
        mp.validate()?;
        if n_paths == 0 {
            return Err(Error::config("n_paths must be >= 1"));
        }
        if sampling != Sampling::Independent && !n_paths.is_multiple_of(2) {
            return Err(Error::config(format!(
                "{sampling:?} sampling needs an even path count, got {n_paths}"
            )));
        }
        let stride = grid.n_points();
        let mut w = vec![0.0; n_paths * stride];
        let mut log_zeta = vec![0.0; n_paths * stride];
        let group = match sampling {
            Sampling::Independent => 1,
            _ => 2,
        };
        let drift = -(mp.r + 0.5 * mp.kappa().powi(2)) * grid.dt();
        let kappa = mp.kappa();
        let sqrt_dt = grid.dt().sqrt();

        w.par_chunks_mut(stride * group)
            .zip(log_zeta.par_chunks_mut(stride * group))
            .enumerate()
            .for_each(|(stream, (w_chunk, lz_chunk))| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(stream as u64);
                let (w_a, w_b) = w_chunk.split_at_mut(stride);
                let (lz_a, lz_b) = lz_chunk.split_at_mut(stride);
                for k in 0..grid.n_steps() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let dw = sqrt_dt * z;
                    w_a[k + 1] = w_a[k] + dw;
                    lz_a[k + 1] = lz_a[k] + drift - kappa * dw;
                    if group == 2 {
                        w_b[k + 1] = w_b[k] - dw;
                        lz_b[k + 1] = lz_b[k] + drift + kappa * dw;
                    }
                }
            });

        Ok(Self {
            grid: *grid,
            n_paths,
            seed,
            sampling,
            w,
            log_zeta,
        })
    }

    /// Stratified bundle along `direction` (one weight per grid point).
    ///
    /// With `L = Σ_j C_j ΔW_j`, `C_j = Σ_{k>j} c_k`, an unconditioned draw
    /// `ΔW'` is moved to `ΔW' + (C dt / Var L)(L* − L')`, which has exactly the
    /// law of the increments given `L = L*`.
    pub fn generate_stratified(
        mp: &MarketParams,
        grid: &TimeGrid,
        n_paths: usize,
        seed: u64,
        direction: &[f64],
    ) -> Result<Self> {
        mp.validate()?;
        if n_paths == 0 || !n_paths.is_multiple_of(2) {
            return Err(Error::config(format!(
                "stratified sampling needs an even, positive path count, got {n_paths}"
            )));
        }
        if direction.len() != grid.n_points() {
            return Err(Error::config(format!(
                "direction has {} weights, grid has {} points",
                direction.len(),
                grid.n_points()
            )));
        }
        let n = grid.n_steps();
        let dt = grid.dt();
        let mut tail = vec![0.0; n];
        let mut acc = 0.0;
        for j in (0..n).rev() {
            acc += direction[j + 1];
            tail[j] = acc;
        }
        let var_l: f64 = tail.iter().map(|c| c * c * dt).sum();
        if !(var_l > 0.0 && var_l.is_finite()) {
            return Err(Error::config("stratification direction has zero variance"));
        }
        let sd_l = var_l.sqrt();
        let strata = n_paths / 2;
        let normal = statrs::distribution::Normal::standard();
        let stride = grid.n_points();
        let drift = -(mp.r + 0.5 * mp.kappa().powi(2)) * dt;
        let kappa = mp.kappa();
        let sqrt_dt = dt.sqrt();
        let mut w = vec![0.0; n_paths * stride];
        let mut log_zeta = vec![0.0; n_paths * stride];

        w.par_chunks_mut(stride)
            .zip(log_zeta.par_chunks_mut(stride))
            .enumerate()
            .for_each(|(path, (w_p, lz_p))| {
                use rand::Rng;
                use statrs::distribution::ContinuousCDF;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(path as u64);
                let mut dw: Vec<f64> = (0..n)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        sqrt_dt * z
                    })
                    .collect();
                let u: f64 = rng.random();
                let stratum = path / 2;
                let target = sd_l * normal.inverse_cdf((stratum as f64 + u) / strata as f64);
                let drawn: f64 = dw.iter().zip(&tail).map(|(d, c)| d * c).sum();
                let shift = (target - drawn) / var_l;
                for (d, c) in dw.iter_mut().zip(&tail) {
                    *d += shift * c * dt;
                }
                for k in 0..n {
                    w_p[k + 1] = w_p[k] + dw[k];
                    lz_p[k + 1] = lz_p[k] + drift - kappa * dw[k];
                }
            });

        Ok(Self {
            grid: *grid,
            n_paths,
            seed,
            sampling: Sampling::Stratified,
            w,
            log_zeta,
        })
    }

    /// A single path driven by prescribed Brownian increments.
    pub fn from_increments(mp: &MarketParams, grid: &TimeGrid, dw: &[f64]) -> Result<Self> {
        mp.validate()?;
        if dw.len() != grid.n_steps() {
            return Err(Error::config(format!(
                "expected {} increments, got {}",
                grid.n_steps(),
                dw.len()
            )));
        }
        let drift = -(mp.r + 0.5 * mp.kappa().powi(2)) * grid.dt();
        let mut w = vec![0.0; grid.n_points()];
        let mut log_zeta = vec![0.0; grid.n_points()];
        for (k, d) in dw.iter().enumerate() {
            w[k + 1] = w[k] + d;
            log_zeta[k + 1] = log_zeta[k] + drift - mp.kappa() * d;
        }
        Ok(Self {
            grid: *grid,
            n_paths: 1,
            seed: 0,
            sampling: Sampling::Independent,
            w,
            log_zeta,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sampling(&self) -> Sampling {
        self.sampling
    }

    fn range(&self, path: usize) -> std::ops::Range<usize> {
        let stride = self.grid.n_points();
        path * stride..(path + 1) * stride
    }

    /// Brownian values `W` along `path`.
    pub fn w(&self, path: usize) -> &[f64] {
        &self.w[self.range(path)]
    }

    /// `ln ζ` along `path`.
    pub fn log_zeta(&self, path: usize) -> &[f64] {
        &self.log_zeta[self.range(path)]
    }

    pub fn zeta(&self, path: usize, k: usize) -> f64 {
        self.log_zeta(path)[k].exp()
    }

    pub fn zeta_path(&self, path: usize) -> Vec<f64> {
        self.log_zeta(path).iter().map(|l| l.exp()).collect()
    }

    /// Mean of one value per path with a standard error that matches the
    /// sampling scheme: antithetic partners are averaged first, and stratified
    /// bundles use the within-stratum variance.
    pub fn estimate(&self, per_path: &[f64]) -> Estimate {
        assert_eq!(per_path.len(), self.n_paths);
        match self.sampling {
            Sampling::Independent => Estimate::from_samples(per_path),
            Sampling::Antithetic => {
                let pairs: Vec<f64> = per_path
                    .chunks_exact(2)
                    .map(|p| 0.5 * (p[0] + p[1]))
                    .collect();
                Estimate::from_samples(&pairs)
            }
            Sampling::Stratified => {
                let strata = (per_path.len() / 2) as f64;
                let mean = per_path.iter().sum::<f64>() / per_path.len() as f64;
                // Two draws per stratum: sample variance (a − b)²/2, mean of two divides by 2.
                let var: f64 = per_path
                    .chunks_exact(2)
                    .map(|p| 0.25 * (p[0] - p[1]).powi(2))
                    .sum::<f64>()
                    / (strata * strata);
                Estimate::new(mean, var.sqrt())
            }
        }
    }

    /// Delta-method estimate of `mean(num) / mean(den)` under this bundle's
    /// sampling scheme.
    pub fn ratio_estimate(&self, num: &[f64], den: &[f64]) -> Estimate {
        let n = num.len() as f64;
        let mean_den = den.iter().sum::<f64>() / n;
        let ratio = num.iter().sum::<f64>() / n / mean_den;
        let resid: Vec<f64> = num.iter().zip(den).map(|(a, b)| a - ratio * b).collect();
        Estimate::new(ratio, self.estimate(&resid).std_error / mean_den.abs())
    }
}
