mod common;

use common::{rel_err, sine_ledger};
use posbvp::analysis::{self, ProofConstants, RPolicy, SmallRadius, Verdict};
use posbvp::problem::CoefficientSelector;

const LEDGER_REL: f64 = 1e-4;

/// `(name, library value, oracle value)` for every ledger entry.
fn ledger_pairs(got: &ProofConstants) -> Vec<(String, f64, f64)> {
    let want = sine_ledger(got.big_r);
    let mut out = vec![
        ("lambda0".to_string(), got.lambda0, want.lambda0),
        ("r".to_string(), got.r, want.r),
        (
            "beta_star".to_string(),
            got.beta_star.unwrap(),
            want.beta_star,
        ),
    ];
    for (k, rho) in got.rho_i.iter().enumerate() {
        out.push((format!("rho_{}", k + 1), *rho, want.rho));
    }
    for (h, w) in got.humps.iter().zip(&want.humps) {
        let l = h.index;
        let side = if l == 1 { h.right } else { h.left }.expect("one trough side");
        out.extend([
            (format!("M_{l}"), h.m, w.m),
            (format!("c_{l}"), h.c, w.c),
            (format!("dphi_sup_{l}"), h.dphi_sup, w.dphi_sup),
            (
                format!("lambda1_dirichlet_{l}"),
                h.lambda1_dirichlet,
                w.lambda1,
            ),
            (format!("nu_{l}"), side.nu, w.nu),
            (format!("delta_{l}"), side.delta, w.delta),
            (format!("beta_{l}"), side.beta, w.beta),
        ]);
    }
    out
}

fn assert_ledger(got: &ProofConstants) {
    for (name, g, w) in ledger_pairs(got) {
        assert!(rel_err(g, w) < LEDGER_REL, "{name}: {g} vs oracle {w}");
    }
}

#[test]
fn figure_one_ledger_fixed_r() {
    let p = common::load("figure1.json");
    let got = analysis::proof_constants(&p, RPolicy::Fixed { value: 10.0 }).unwrap();
    assert_ledger(&got);
    // one-sided entries exist only next to the trough
    assert!(got.humps[0].beta_l_minus.is_none() && got.humps[0].beta_l_plus.is_some());
    assert!(got.humps[1].beta_l_plus.is_none() && got.humps[1].beta_l_minus.is_some());
}

#[test]
fn figure_one_ledger_auto_r() {
    let p = common::load("figure1.json");
    let got = analysis::proof_constants(&p, RPolicy::Auto).unwrap();
    assert!(got.big_r > 0.0 && got.a_priori.is_some());
    assert_ledger(&got);
}

#[test]
fn c_is_invariant_under_halving_r() {
    let p = common::load("figure1.json");
    let small = analysis::small_radius(&p).unwrap();
    let half = SmallRadius {
        r: small.r / 2.0,
        ..small.clone()
    };
    let policy = RPolicy::Fixed { value: 10.0 };
    let a = analysis::proof_constants_with(&p, &small, 10.0, policy).unwrap();
    let b = analysis::proof_constants_with(&p, &half, 10.0, policy).unwrap();
    for (x, y) in a.humps.iter().zip(&b.humps) {
        assert!(rel_err(y.c, x.c) < 1e-10, "{} vs {}", x.c, y.c);
    }
}

#[test]
fn beta_star_non_decreasing_in_r() {
    let p = common::load("figure1.json");
    let mut last = 0.0;
    for k in 0..6 {
        let big_r = 10.0 * 2f64.powi(k);
        let b = analysis::proof_constants(&p, RPolicy::Fixed { value: big_r })
            .unwrap()
            .beta_star
            .unwrap();
        assert!(b >= last, "R = {big_r}: {b} < {last}");
        last = b;
    }
}

#[test]
fn rho_is_half_lambda0_when_g0_vanishes() {
    let p = common::load("figure1.json");
    let small = analysis::small_radius(&p).unwrap();
    for rho in &small.rho {
        assert_eq!(*rho, small.lambda0 / 2.0);
    }
}

#[test]
fn r_decreases_when_alpha_doubles() {
    let p = common::load("figure1.json");
    let mut last = f64::INFINITY;
    for k in 0..5 {
        let q = p.with_coefficient(CoefficientSelector::Alpha(None), 2f64.powi(k));
        let r = analysis::small_radius(&q).unwrap().r;
        assert!(r <= last, "alpha = 2^{k}: r = {r} > {last}");
        last = r;
    }
}

#[test]
fn figure_two_reports_growth_comparison() {
    let p = common::load("figure2.json");
    let rep = analysis::check_hypotheses(&p).unwrap();
    assert_ne!(rep.overall, Verdict::Fail);
    let growth = rep.check("cond_B").expect("cond_B present");
    assert_eq!(growth.status, Verdict::Pass);
}
