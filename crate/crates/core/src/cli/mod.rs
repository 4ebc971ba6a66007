//! Command-line surface: configuration, subcommands and CSV output.

mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

pub use config::{LifetimeSettings, PolicySettings, RunConfig};

use crate::baselines::{merton_alpha, merton_propensity, merton_theta};
use crate::error::{Error, Result};
use crate::lifetime::{pension_sweep, LifetimeRecord};
use crate::solver::{calibrate_alpha, GreedySolution};
use crate::wealth::{policy_curve, zeta_grid, InnerSimulation, PolicyPoint};

/// Environment variable supplying the default calibration seed.
pub const SEED_ENV: &str = "GREEDY_HABIT_SEED";

pub const POLICY_COLUMNS: [&str; 8] = [
    "t",
    "H",
    "zeta",
    "wealth",
    "consumption",
    "theta",
    "wealth_se",
    "theta_reliable",
];

pub const LIFETIME_COLUMNS: [&str; 6] = ["t", "pension", "consumption", "habit", "wealth", "theta"];

#[derive(Debug, Parser)]
#[command(
    name = "greedy-habit",
    version,
    about = "Greedy-optimal retirement consumption with habit formation"
)]
pub struct Cli {
    /// JSON configuration file; omitted keys take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Calibration path seed.
    #[arg(long, global = true, env = SEED_ENV)]
    pub seed: Option<u64>,
    /// Number of calibration paths.
    #[arg(long, global = true)]
    pub paths: Option<usize>,
    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Also write the effective configuration to this file.
    #[arg(long, global = true)]
    pub dump_config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Calibrate the Lagrange multiplier to initial wealth.
    Calibrate,
    /// Wealth, consumption and allocation curves at fixed habit.
    PolicySurface,
    /// Lifetime simulations over a sweep of pension levels.
    Lifetime,
    /// Habit-free limit checks against closed-form Merton results.
    MertonCheck,
}

impl Cli {
    pub fn effective_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.calibration.seed = seed;
        }
        if let Some(n) = self.paths {
            cfg.calibration.n_paths = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Process entry point: parse, run, map errors to exit codes
/// (1 for usage and configuration, 2 for numerical failures).
pub fn main_entry() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

/// Run a parsed command; `Ok(false)` means a check failed.
pub fn run(cli: &Cli) -> Result<bool> {
    let cfg = cli.effective_config()?;
    if let Some(p) = &cli.dump_config {
        std::fs::write(p, cfg.to_json())?;
    }
    let mut out: Box<dyn Write> = match &cli.out {
        Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    };
    let ok = match cli.command {
        Command::Calibrate => {
            let report = cmd_calibrate(&cfg)?;
            writeln!(
                out,
                "{}",
                serde_json::to_string_pretty(&report).expect("report serialises")
            )?;
            true
        }
        Command::PolicySurface => {
            let points = cmd_policy_surface(&cfg)?;
            write_policy_csv(&mut out, &points)?;
            true
        }
        Command::Lifetime => {
            let records = cmd_lifetime(&cfg)?;
            write_lifetime_csv(&mut out, &records)?;
            true
        }
        Command::MertonCheck => {
            let checks = cmd_merton_check(&cfg)?;
            for c in &checks {
                writeln!(out, "{c}")?;
            }
            checks.iter().all(|c| c.passed)
        }
    };
    out.flush()?;
    Ok(ok)
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport {
    pub alpha: f64,
    pub budget: f64,
    pub std_error: f64,
    pub residual: f64,
    pub iterations: usize,
    pub tolerance: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub wealth: f64,
    pub pension: f64,
    pub eta: f64,
}

impl CalibrationReport {
    fn new(sol: &GreedySolution, cfg: &RunConfig) -> Self {
        Self {
            alpha: sol.alpha,
            budget: sol.budget.value,
            std_error: sol.budget.std_error,
            residual: sol.budget_residual,
            iterations: sol.iterations,
            tolerance: cfg.calibration.tolerance,
            n_paths: cfg.calibration.n_paths,
            seed: cfg.calibration.seed,
            wealth: sol.params.wealth,
            pension: sol.params.pension,
            eta: sol.params.habit.eta,
        }
    }
}

pub fn cmd_calibrate(cfg: &RunConfig) -> Result<CalibrationReport> {
    let sol = calibrate_alpha(&cfg.model, &cfg.calibration)?;
    Ok(CalibrationReport::new(&sol, cfg))
}

/// Policy curves for every configured time, wealth-clipped, ordered by time
/// then wealth.
pub fn cmd_policy_surface(cfg: &RunConfig) -> Result<Vec<PolicyPoint>> {
    let alpha = calibrate_alpha(&cfg.model, &cfg.calibration)?.alpha;
    let p = &cfg.policy;
    let mut rows = Vec::new();
    for &t in &p.times {
        let grid = zeta_grid(&cfg.model, t, p.log_zeta_lo, p.log_zeta_hi, p.n_zeta);
        let curve = policy_curve(t, p.habit, alpha, &cfg.model, &grid, &cfg.nested)?;
        rows.extend(curve.into_iter().filter(|pt| pt.wealth <= p.max_wealth));
    }
    Ok(rows)
}

pub fn cmd_lifetime(cfg: &RunConfig) -> Result<Vec<LifetimeRecord>> {
    pension_sweep(
        &cfg.model,
        &cfg.calibration,
        &cfg.lifetime.pensions,
        &cfg.lifetime.scenario,
        &cfg.lifetime_config(),
    )
}

/// Outcome of one limit check.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub value: f64,
    pub expected: f64,
    pub tolerance: String,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {} value={} expected={} tolerance={}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.expected,
            self.tolerance
        )
    }
}

/// Tightest calibration tolerance used by the limit checks: α moves by about
/// γ times the relative budget error.
const CHECK_TOLERANCE: f64 = 1e-3;

pub fn cmd_merton_check(cfg: &RunConfig) -> Result<Vec<Check>> {
    let mut cal = cfg.calibration;
    cal.tolerance = cal.tolerance.min(CHECK_TOLERANCE);
    let mp = cfg.model.market;
    let mort = cfg.model.mortality;
    let base = cfg.model.with_pension(0.0);
    let v = base.wealth;
    let c_bar = base.habit.c_bar;
    let mut checks = Vec::new();

    // Allocation in the near-habit-free regime.
    let near = base.with_eta(1e-6);
    let alpha = calibrate_alpha(&near, &cal)?.alpha;
    let theta_star = merton_theta(&mp);
    let mut worst: f64 = 0.0;
    let mut reported = theta_star;
    for (i, t) in [0.0, 10.0, 20.0].into_iter().enumerate() {
        let sim = InnerSimulation::new(&near, t, &cfg.nested)?
            .ok_or_else(|| Error::domain("check time beyond horizon"))?;
        for z in [0.5 * c_bar, c_bar, 2.0 * c_bar] {
            let a = sim.theta_no_pension(alpha, z, &cfg.nested)?;
            if i == 0 && z == c_bar {
                reported = a.theta;
            }
            worst = worst.max((a.theta - theta_star).abs());
        }
    }
    checks.push(Check {
        name: "theta_limit",
        passed: worst <= 0.02,
        value: reported,
        expected: theta_star,
        tolerance: format!("0.02 (max deviation {worst:.3e})"),
    });

    // Multiplier against the closed-form inversion.
    let zero = base.with_eta(0.0);
    let sol = calibrate_alpha(&zero, &cal)?;
    let exact = merton_alpha(v, &mp, &mort, c_bar, cal.t_max);
    checks.push(Check {
        name: "alpha_closed_form",
        passed: (sol.alpha / exact - 1.0).abs() <= 0.01,
        value: sol.alpha,
        expected: exact,
        tolerance: "1% relative".into(),
    });

    // Initial consumption-to-wealth ratio.
    let c0 = sol.trajectory(0)?.consumption[0];
    let prop = merton_propensity(&mp, &mort, 0.0, cal.t_max)?;
    checks.push(Check {
        name: "propensity",
        passed: (c0 / v / prop - 1.0).abs() <= 0.01,
        value: c0 / v,
        expected: prop,
        tolerance: "1% relative".into(),
    });
    Ok(checks)
}

/// Shortest representation that round-trips.
fn num(v: f64) -> String {
    format!("{v}")
}

pub fn write_policy_csv(out: &mut dyn Write, points: &[PolicyPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(POLICY_COLUMNS)?;
    for p in points {
        w.write_record([
            num(p.t),
            num(p.habit),
            num(p.zeta),
            num(p.wealth),
            num(p.consumption),
            p.theta.map(num).unwrap_or_default(),
            num(p.wealth_se),
            p.theta.is_some().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_lifetime_csv(out: &mut dyn Write, records: &[LifetimeRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LIFETIME_COLUMNS)?;
    for r in records {
        for i in 0..r.times.len() {
            w.write_record([
                num(r.times[i]),
                num(r.pension),
                num(r.consumption[i]),
                num(r.habit[i]),
                num(r.wealth[i]),
                r.allocation[i].map(num).unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
