mod common;

use std::f64::consts::PI;

use common::{fd_eigen, rel_err, End, DIRICHLET, NEUMANN};
use posbvp::eigen::{self, EigenProblem, EndCondition, WeightPiece};
use posbvp::expr;

const FD_NODES: usize = 10_000;
const FD_REL: f64 = 1e-6;

fn piece(lo: f64, hi: f64, text: &str) -> WeightPiece {
    WeightPiece {
        lo,
        hi,
        expr: expr::parse(text, "x").unwrap(),
        scale: 1.0,
    }
}

fn end(e: End) -> EndCondition {
    EndCondition { c: e.c, d: e.d }
}

fn assert_matches_fd(ep: &EigenProblem, w: impl Fn(f64) -> f64, left: End, right: End) {
    let got = eigen::first_eigenvalue(ep, 1e-12).unwrap().lambda;
    let want = fd_eigen(w, ep.a, ep.b, left, right, FD_NODES).lambda;
    assert!(
        rel_err(got, want) < FD_REL,
        "shooting {got} vs finite differences {want}"
    );
}

#[test]
fn constant_weight_closed_forms() {
    let dd = EigenProblem::constant(
        0.0,
        PI,
        1.0,
        EndCondition::DIRICHLET,
        EndCondition::DIRICHLET,
    );
    let l = eigen::first_eigenvalue(&dd, 1e-12).unwrap().lambda;
    assert!((l - 1.0).abs() < 1e-8, "{l}");
    let dn = EigenProblem::constant(
        0.0,
        1.0,
        1.0,
        EndCondition::DIRICHLET,
        EndCondition::NEUMANN,
    );
    let l = eigen::first_eigenvalue(&dn, 1e-12).unwrap().lambda;
    assert!((l - PI * PI / 4.0).abs() < 1e-8, "{l}");
}

#[test]
fn oracle_reproduces_closed_forms() {
    let l = fd_eigen(|_| 1.0, 0.0, PI, DIRICHLET, DIRICHLET, FD_NODES).lambda;
    assert!(rel_err(l, 1.0) < FD_REL, "{l}");
    let l = fd_eigen(|_| 1.0, 0.0, 1.0, DIRICHLET, NEUMANN, FD_NODES).lambda;
    assert!(rel_err(l, PI * PI / 4.0) < FD_REL, "{l}");
}

#[test]
fn positive_sine_hump() {
    let ep = EigenProblem::new(
        0.0,
        PI,
        vec![piece(0.0, PI, "pos(sin(x))")],
        EndCondition::DIRICHLET,
        EndCondition::DIRICHLET,
    );
    assert_matches_fd(&ep, |x| x.sin().max(0.0), DIRICHLET, DIRICHLET);
}

#[test]
fn robin_ends_with_linear_weight() {
    let (left, right) = (End { c: 1.0, d: 2.0 }, End { c: 3.0, d: 0.5 });
    let ep = EigenProblem::new(
        0.0,
        2.0,
        vec![piece(0.0, 2.0, "1+x")],
        end(left),
        end(right),
    );
    assert_matches_fd(&ep, |x| 1.0 + x, left, right);
}

#[test]
fn figure_one_lambda0_and_lambda1() {
    let p = common::load("figure1.json");
    let a = |x: f64| x.sin().max(0.0);
    let want = fd_eigen(a, 0.0, 3.0 * PI, DIRICHLET, DIRICHLET, 3 * FD_NODES).lambda;
    let got = eigen::lambda0(&p).unwrap().lambda;
    assert!(rel_err(got, want) < FD_REL, "{got} vs {want}");

    let mu1 = fd_eigen(|x| x.sin(), 0.0, PI, DIRICHLET, DIRICHLET, FD_NODES).lambda;
    let got = eigen::lambda1(&p, 1).unwrap().lambda;
    assert!(rel_err(got, mu1) < FD_REL, "{got} vs {mu1}");
    assert!(eigen::lambda0(&p).unwrap().lambda < got);
}

#[test]
fn figure_two_mixed_conditions() {
    let p = common::load("figure2.json");
    let a = |x: f64| {
        if x <= 2.0 {
            1.0
        } else if x < 3.0 {
            0.0
        } else {
            (PI * x).sin().max(0.0)
        }
    };
    let want = fd_eigen(a, 0.0, 5.0, DIRICHLET, NEUMANN, FD_NODES).lambda;
    let got = eigen::lambda0(&p).unwrap().lambda;
    assert!(rel_err(got, want) < FD_REL, "{got} vs {want}");

    // the second hump touches x = L, where the Neumann condition applies
    let want = fd_eigen(
        |x| (PI * x).sin().max(0.0),
        3.0,
        5.0,
        DIRICHLET,
        NEUMANN,
        FD_NODES,
    )
    .lambda;
    let got = eigen::lambda1(&p, 2).unwrap().lambda;
    assert!(rel_err(got, want) < FD_REL, "{got} vs {want}");

    let want = fd_eigen(|_| 1.0, 0.0, 2.0, DIRICHLET, DIRICHLET, FD_NODES).lambda;
    let got = eigen::lambda1(&p, 1).unwrap().lambda;
    assert!(rel_err(got, want) < FD_REL, "{got} vs {want}");
}

#[test]
fn eigenfunction_shape_matches_oracle() {
    let ep = EigenProblem::new(
        0.0,
        PI,
        vec![piece(0.0, PI, "pos(sin(x))")],
        EndCondition::DIRICHLET,
        EndCondition::DIRICHLET,
    );
    let got = eigen::first_eigenvalue(&ep, 1e-12).unwrap();
    let fd = fd_eigen(
        |x| x.sin().max(0.0),
        0.0,
        PI,
        DIRICHLET,
        DIRICHLET,
        FD_NODES,
    );
    for x in common::samples(0.0, PI, 101) {
        let (phi, _) = got.eigenfunction.eval(x);
        assert!(
            (phi - fd.eval(x)).abs() < 1e-5,
            "x = {x}: {phi} vs {}",
            fd.eval(x)
        );
    }
    assert!(rel_err(got.dphi_sup, fd.dphi_sup()) < 1e-5);
}
