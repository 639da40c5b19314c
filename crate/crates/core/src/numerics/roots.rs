//! Sign-change scanning and bracketed root refinement.
//!
//! Objective values may be `±∞` (a signed but otherwise unusable sample, e.g.
//! a trajectory that escaped upward); those still carry a sign for
//! bracketing. NaN marks an invalid sample and breaks adjacency.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub f_lo: f64,
    pub f_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RootError {
    #[error("objective is invalid at {x} inside the bracket")]
    BracketLost { x: f64 },
    #[error("endpoints do not bracket a sign change")]
    NotBracketed,
    #[error("no convergence after {iterations} iterations (best {best})")]
    NoConvergence { iterations: usize, best: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootTolerance {
    /// absolute bracket width
    pub x: f64,
    /// absolute objective value
    pub f: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub fx: f64,
}

/// Evaluates `f` on `n` uniform points of `[lo, hi]` and returns every
/// adjacent sign change.
pub fn scan_brackets<F>(f: F, lo: f64, hi: f64, n: usize) -> Vec<Bracket>
where
    F: Fn(f64) -> f64,
{
    assert!(n >= 2);
    let xs: Vec<f64> = (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    brackets_from_samples(&xs, &fs)
}

/// Sign changes between consecutive valid samples. Exact zeros are skipped
/// over, so `(-, 0, +)` yields one bracket spanning the zero.
pub fn brackets_from_samples(xs: &[f64], fs: &[f64]) -> Vec<Bracket> {
    assert_eq!(xs.len(), fs.len());
    let mut out = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for (&x, &fx) in xs.iter().zip(fs) {
        if fx.is_nan() {
            prev = None;
            continue;
        }
        if fx == 0.0 {
            continue;
        }
        if let Some((px, pf)) = prev {
            if (pf < 0.0) != (fx < 0.0) {
                out.push(Bracket {
                    lo: px,
                    hi: x,
                    f_lo: pf,
                    f_hi: fx,
                });
            }
        }
        prev = Some((x, fx));
    }
    out
}

/// Brent refinement with `tol` used for both bracket width and `|f|`.
pub fn refine_root<F>(f: F, bracket: &Bracket, tol: f64) -> Result<f64, RootError>
where
    F: Fn(f64) -> f64,
{
    refine_root_with(
        f,
        bracket,
        RootTolerance {
            x: tol,
            f: tol,
            max_iter: 400,
        },
    )
    .map(|r| r.x)
}

/// Brent's method (inverse quadratic / secant / bisection). Falls back to
/// bisection whenever an infinite value is involved. Stops when the bracket
/// is narrower than `tol.x` and `|f| <= tol.f`, or when the bracket has
/// shrunk to machine precision.
pub fn refine_root_with<F>(f: F, bracket: &Bracket, tol: RootTolerance) -> Result<Root, RootError>
where
    F: Fn(f64) -> f64,
{
    let (mut a, mut b) = (bracket.lo, bracket.hi);
    let (mut fa, mut fb) = (bracket.f_lo, bracket.f_hi);
    if fa.is_nan() || fb.is_nan() {
        return Err(RootError::BracketLost {
            x: if fa.is_nan() { a } else { b },
        });
    }
    if fa == 0.0 {
        return Ok(Root { x: a, fx: fa });
    }
    if fb == 0.0 {
        return Ok(Root { x: b, fx: fb });
    }
    if (fa < 0.0) == (fb < 0.0) {
        return Err(RootError::NotBracketed);
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..tol.max_iter {
        if (fb < 0.0) == (fc < 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol.x.min(f64::MAX);
        let xm = 0.5 * (c - b);
        let at_machine_limit = xm.abs() <= 2.0 * f64::EPSILON * b.abs().max(f64::MIN_POSITIVE);
        if fb == 0.0 || at_machine_limit || (xm.abs() <= tol1 && fb.abs() <= tol.f) {
            return Ok(Root { x: b, fx: fb });
        }
        let finite = fa.is_finite() && fb.is_finite() && fc.is_finite();
        // once the bracket is within tolerance but |f| is not, only
        // bisection still makes progress
        let narrow = xm.abs() <= tol1;
        if narrow {
            d = xm;
            e = d;
        } else if finite && e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        let step = if narrow || d.abs() > tol1 {
            d
        } else {
            tol1.copysign(xm)
        };
        b += step;
        fb = f(b);
        if fb.is_nan() {
            return Err(RootError::BracketLost { x: b });
        }
    }
    Err(RootError::NoConvergence {
        iterations: tol.max_iter,
        best: b,
    })
}
