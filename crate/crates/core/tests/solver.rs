use greedy_habit::baselines::{merton_alpha, merton_budget};
use greedy_habit::solver::{budget_value, calibrate_on, solve_paths, solve_paths_with, Branch};
use greedy_habit::{
    calibrate_alpha, CalibrationConfig, Error, ModelParams, PathBundle, Sampling, TimeGrid,
};

fn small() -> CalibrationConfig {
    CalibrationConfig {
        n_paths: 2_000,
        t_max: 30.0,
        dt: 0.1,
        ..CalibrationConfig::default()
    }
}

#[test]
fn habit_free_budget_matches_closed_form() {
    let p = ModelParams::default().with_eta(0.0);
    let grid = TimeGrid::new(60.0, 0.1).unwrap();
    let b = PathBundle::generate(&p.market, &grid, 10_000, 5, Sampling::Independent).unwrap();
    for alpha in [0.1, 1.0, 10.0] {
        let est = budget_value(alpha, &p, &b).unwrap();
        let exact = merton_budget(alpha, &p.market, &p.mortality, p.habit.c_bar, 60.0);
        assert!(est.within(exact, 3.0), "alpha={alpha}: {est:?} vs {exact}");
    }
}

#[test]
fn budget_ignores_wealth_and_vanishes_for_huge_alpha() {
    let p = ModelParams::default();
    let cfg = small();
    let b = cfg.paths(&p).unwrap();
    let one = budget_value(2.0, &p, &b).unwrap();
    let two = budget_value(2.0, &p.with_wealth(2.0 * p.wealth), &b).unwrap();
    assert_eq!(one, two);
    let tiny = budget_value(1e12, &p, &b).unwrap();
    assert!(
        tiny.value >= 0.0 && tiny.value < 1e-3 * one.value,
        "{tiny:?}"
    );
}

#[test]
fn overwhelming_pension_pins_consumption_to_the_floor() {
    let p = ModelParams::default().with_pension(50.0);
    let cfg = CalibrationConfig {
        n_paths: 200,
        ..small()
    };
    let b = cfg.paths(&p).unwrap();
    let eta = p.habit.eta;
    for tr in solve_paths(1e9, &p, &b).unwrap() {
        assert!(tr.consumption.iter().all(|c| *c == 50.0));
        for (k, h) in tr.habit.iter().enumerate() {
            // Explicit recursion of dH = η(π − H) dt.
            let exact_step = 50.0 + (p.habit.c_bar - 50.0) * (1.0 - eta * 0.1).powi(k as i32);
            assert!((h / exact_step - 1.0).abs() < 1e-12);
            let t = 0.1 * k as f64;
            let ode = 50.0 + (p.habit.c_bar - 50.0) * (-eta * t).exp();
            // (1 − ηdt)^k and e^{−ηt} differ by at most ηdt.
            assert!(
                (h - ode).abs() <= eta * 0.1 * (50.0 - p.habit.c_bar),
                "t={t}: {h} vs {ode}"
            );
        }
    }
    assert_eq!(budget_value(1e9, &p, &b).unwrap().value, 0.0);
}

#[test]
fn pension_branch_at_zero_pension_tracks_closed_form() {
    let p = ModelParams::default();
    for dt in [0.1, 0.05] {
        let cfg = CalibrationConfig {
            n_paths: 100,
            dt,
            ..small()
        };
        let b = cfg.paths(&p).unwrap();
        let closed = solve_paths_with(0.5, &p, &b, Branch::ClosedForm).unwrap();
        let euler = solve_paths_with(0.5, &p, &b, Branch::Euler).unwrap();
        for (c, e) in closed.iter().zip(&euler) {
            for (x, y) in c.consumption.iter().zip(&e.consumption) {
                assert!((y / x - 1.0).abs() <= 5.0 * dt);
            }
            for (x, y) in c.habit.iter().zip(&e.habit) {
                assert!((y / x - 1.0).abs() <= 5.0 * dt);
            }
        }
    }
}

#[test]
fn trajectories_rescale_exactly() {
    let p = ModelParams::default();
    let cfg = CalibrationConfig {
        n_paths: 50,
        ..small()
    };
    let b = cfg.paths(&p).unwrap();
    let alpha = 0.7;
    let base = solve_paths(alpha, &p, &b).unwrap();
    for lambda in [0.5, 2.0, 10.0] {
        let q = p.with_initial_habit(lambda * p.habit.c_bar);
        let scaled = solve_paths(alpha / lambda, &q, &b).unwrap();
        for (x, y) in base.iter().zip(&scaled) {
            for (a, b) in x.consumption.iter().zip(&y.consumption) {
                assert!((b / (lambda * a) - 1.0).abs() < 1e-12);
            }
            for (a, b) in x.habit.iter().zip(&y.habit) {
                assert!((b / (lambda * a) - 1.0).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn calibration_meets_tolerance_and_floor() {
    let cfg = small();
    for pension in [0.0, 0.5] {
        let p = ModelParams::default().with_pension(pension);
        let sol = calibrate_alpha(&p, &cfg).unwrap();
        assert!(sol.budget_residual <= cfg.tolerance);
        for tr in sol.trajectories().unwrap() {
            assert!(tr.consumption.iter().all(|c| *c >= pension));
            assert!(tr.habit.iter().all(|h| *h > 0.0));
        }
    }
}

#[test]
fn more_wealth_means_smaller_multiplier() {
    let cfg = small();
    let p = ModelParams::default();
    let paths = cfg.paths(&p).unwrap();
    let mut last = f64::INFINITY;
    for v in [5.0, 10.0, 20.0] {
        let sol = calibrate_on(&p.with_wealth(v), paths.clone(), &cfg).unwrap();
        assert!(sol.alpha < last, "v={v}");
        last = sol.alpha;
    }
}

#[test]
fn habit_free_calibration_inverts_closed_form() {
    let p = ModelParams::default().with_eta(0.0);
    let cfg = CalibrationConfig {
        n_paths: 4_000,
        tolerance: 1e-4,
        ..small()
    };
    let sol = calibrate_alpha(&p, &cfg).unwrap();
    let exact = merton_alpha(p.wealth, &p.market, &p.mortality, p.habit.c_bar, cfg.t_max);
    // α error is about γ times the budget error; allow 4 budget SEs.
    let rel_se = sol.budget.std_error / sol.budget.value;
    assert!(
        (sol.alpha / exact - 1.0).abs() < 4.0 * p.market.gamma * rel_se + 3.0 * cfg.tolerance,
        "{} vs {exact}",
        sol.alpha
    );
}

#[test]
fn unreachable_wealth_is_a_calibration_failure() {
    let cfg = CalibrationConfig {
        alpha_lo: 1.0,
        alpha_hi: 2.0,
        ..small()
    };
    // Even α_lo / 10⁶ cannot buy this much consumption.
    let p = ModelParams::default().with_wealth(1e9);
    let err = calibrate_alpha(&p, &cfg).unwrap_err();
    assert!(matches!(err, Error::Calibration(_)), "{err}");
    assert!(err.is_numerical());
}

#[test]
fn calibration_is_deterministic() {
    let cfg = CalibrationConfig {
        n_paths: 500,
        ..small()
    };
    let p = ModelParams::default().with_pension(0.5);
    let a = calibrate_alpha(&p, &cfg).unwrap();
    let b = calibrate_alpha(&p, &cfg).unwrap();
    assert_eq!(a.alpha, b.alpha);
    assert_eq!(a.budget, b.budget);
}
