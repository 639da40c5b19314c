mod common;

use common::rk4;
use posbvp::solver::{self, nonempty_subsets};
use posbvp::Problem;

/// Each reported solution, re-integrated from its initial slope with
/// fixed-step RK4, ends on the right boundary condition and stays close to
/// the reported trajectory.
fn assert_rk4_agrees(name: &str, h: f64) {
    let p = common::load(name);
    let rep = solver::solve(&p).unwrap();
    assert!(rep.complete, "{name}");
    let cuts = p.breakpoints();
    let field = |mid: f64, x: f64, u: f64, _du: f64| {
        let k = p.interval_at(mid).unwrap();
        -p.f_extended_in(k, x, u)
    };
    for sol in &rep.solutions {
        let (u0, du0) = p.bc().left_ray(sol.s0);
        let path = rk4(field, 0.0, p.length(), (u0, du0), &cuts, h);
        let &(_, ul, dul) = path.last().unwrap();
        let bc = p.bc().right_residual(ul, dul).abs();
        assert!(bc < 1e-6, "{name}, s0 = {}: right residual {bc}", sol.s0);
        for &(x, u, _) in path.iter().step_by(97) {
            let got = sol.trajectory.eval(x).0;
            assert!(
                (got - u).abs() < 1e-6,
                "{name}, s0 = {}: x = {x}, {got} vs {u}",
                sol.s0
            );
        }
    }
}

#[test]
fn figure_one_solutions_match_rk4() {
    assert_rk4_agrees("figure1.json", 1e-3);
}

#[test]
fn figure_two_solutions_match_rk4() {
    assert_rk4_agrees("figure2.json", 1e-3);
}

#[test]
fn figure_one_scan_has_three_brackets() {
    // dense RK4 shooting scan, independent of the solver's own scan
    let p = common::load("figure1.json");
    let cuts = p.breakpoints();
    let field = |mid: f64, x: f64, u: f64, _du: f64| {
        let k = p.interval_at(mid).unwrap();
        -p.f_extended_in(k, x, u)
    };
    let s_max = 100.0;
    let n = 400;
    let residual = |s0: f64| {
        let path = rk4(field, 0.0, p.length(), (0.0, s0), &cuts, 2e-3);
        let &(x, u, _) = path.last().unwrap();
        if x < p.length() || !u.is_finite() {
            f64::INFINITY
        } else {
            u
        }
    };
    let values: Vec<f64> = (1..=n)
        .map(|k| residual(s_max * (k as f64 / n as f64).powi(4)))
        .collect();
    let changes = values
        .windows(2)
        .filter(|w| w[0].is_finite() && w[1].is_finite() && (w[0] > 0.0) != (w[1] > 0.0))
        .count();
    assert!(changes >= 3, "{changes} sign changes");
}

#[test]
fn single_hump_covers_its_only_class() {
    let p = Problem::load(
        r#"{
          "L": "pi",
          "bc": {"alpha": 1, "beta": 0, "gamma": 1, "delta": 0},
          "intervals": [
            {"kind": "I", "lo": 0, "hi": "pi", "weight": "1", "nonlinearity": "s^2",
             "coefficient": 1, "limits": {"g0": 0, "ginf": "inf"}}
          ]
        }"#,
    )
    .unwrap();
    let rep = solver::solve(&p).unwrap();
    assert!(rep.complete);
    assert_eq!(rep.covered(), nonempty_subsets(1));
    for sol in &rep.solutions {
        assert!(sol.positivity > 0.0);
    }
}

#[test]
fn figure_one_at_small_mu_still_verifies() {
    let p = common::load("figure1.json");
    let q = p.with_coefficient(posbvp::problem::CoefficientSelector::Beta(None), 0.01);
    let rep = solver::solve(&q).unwrap();
    assert!(rep.count >= 1);
    for sol in &rep.solutions {
        let s = q.settings();
        assert!(sol.residuals.bc < s.bc_tol && sol.residuals.phi < s.phi_tol);
    }
}
