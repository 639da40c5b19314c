mod common;

use std::f64::consts::E;

use posbvp::numerics::{integrate, IvpOptions, Tolerance};
use posbvp::radial::{self, AnnulusProblem, RadialMap, DEFAULT_RADIAL_GRID};

#[test]
fn planar_annulus_reduces_to_unit_interval() {
    let text = std::fs::read_to_string(common::config_path("annulus_demo.json")).unwrap();
    let ap = AnnulusProblem::load(&text).unwrap();
    let (p, map) = radial::reduce(&ap);
    assert!((p.length() - 1.0).abs() < 1e-12);
    for t in common::samples(0.0, 1.0, 101) {
        assert!((map.r_of_t(t) - t.exp()).abs() < 1e-12 * E);
        assert!((map.h(t.exp()) - t).abs() < 1e-12);
    }
}

#[test]
fn linear_three_dimensional_profile_in_closed_form() {
    // (r² U')' + r² c = 0 on [1, 2]: U = −c r²/6 − A/r + B
    let (c, a, b) = (2.0, 1.0, 3.0);
    let u = |r: f64| -c * r * r / 6.0 - a / r + b;
    let du = |r: f64| -c * r / 3.0 + a / (r * r);
    let map = RadialMap { n: 3, r1: 1.0 };
    let r2 = 2.0;
    let t_end = map.h(r2);
    let opts = IvpOptions {
        tol: Tolerance {
            abs: 1e-13,
            rel: 1e-13,
        },
        ..Default::default()
    };
    let v = integrate(
        |_, t, _, _| -map.r_of_t(t).powi(4) * c,
        0.0,
        t_end,
        (u(1.0), du(1.0)),
        &[],
        &opts,
    );
    assert!(v.reached_end());
    let profile = radial::lift(&v, &map, r2, 2001);
    for q in &profile {
        assert!(
            (q.u - u(q.r)).abs() < 1e-10,
            "r = {}: {} vs {}",
            q.r,
            q.u,
            u(q.r)
        );
        assert!(
            (q.du - du(q.r)).abs() < 1e-9,
            "r = {}: {} vs {}",
            q.r,
            q.du,
            du(q.r)
        );
    }
    let res = radial::radial_residual_with(3, |_, _| c, &profile);
    assert!(res < 1e-6, "{res}");
}

#[test]
fn demo_profiles_satisfy_the_radial_equation() {
    let text = std::fs::read_to_string(common::config_path("annulus_demo.json")).unwrap();
    let ap = AnnulusProblem::load(&text).unwrap();
    let rep = radial::solve_annulus(&ap, DEFAULT_RADIAL_GRID).unwrap();
    assert!(rep.reduced.complete);
    assert!(rep.profiles.len() >= 3);
    for prof in &rep.profiles {
        assert!(
            prof.residual < 1e-5,
            "profile {}: {}",
            prof.index,
            prof.residual
        );
        // independent of the library residual: centred differences on every
        // fourth point with the radial right-hand side
        let pts = &prof.profile;
        let mut worst: f64 = 0.0;
        for k in (4..pts.len() - 4).step_by(4) {
            let (lo, mid, hi) = (&pts[k - 1], &pts[k], &pts[k + 1]);
            let flux = (hi.r * hi.du - lo.r * lo.du) / (hi.r - lo.r);
            worst = worst.max((flux + mid.r * ap.f_radial(mid.r, mid.u)).abs());
        }
        assert!(worst < 1e-5, "profile {}: {worst}", prof.index);
    }
}
