//! Independent reference computations: finite differences, brute-force
//! quadrature, fixed-step RK4 and a closed-form Green kernel. None of them
//! call into the library's numerics.

#![allow(dead_code)]

use std::path::PathBuf;

use posbvp::Problem;
use rand::Rng;

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

pub fn load(name: &str) -> Problem {
    let text = std::fs::read_to_string(config_path(name)).expect("config exists");
    Problem::load(&text).expect("config is valid")
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
}

/// Midpoint rule with `n` cells.
pub fn riemann(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    (0..n).map(|k| f(a + (k as f64 + 0.5) * h)).sum::<f64>() * h
}

/// `n` uniform samples of `[a, b]`, both ends included.
pub fn samples(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| {
        if k + 1 == n {
            b
        } else {
            a + (b - a) * k as f64 / (n - 1) as f64
        }
    })
}

pub fn sample_min(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    samples(a, b, n).map(f).fold(f64::INFINITY, f64::min)
}

pub fn sample_max(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    samples(a, b, n).map(f).fold(f64::NEG_INFINITY, f64::max)
}

/// Endpoint condition `c φ ∓ d φ'` (minus on the left, plus on the right).
#[derive(Debug, Clone, Copy)]
pub struct End {
    pub c: f64,
    pub d: f64,
}

pub const DIRICHLET: End = End { c: 1.0, d: 0.0 };
pub const NEUMANN: End = End { c: 0.0, d: 1.0 };

pub struct FdEigen {
    pub lambda: f64,
    pub x: Vec<f64>,
    /// Non-negative, with maximum 1; zero at Dirichlet ends.
    pub phi: Vec<f64>,
}

impl FdEigen {
    /// Piecewise linear interpolation.
    pub fn eval(&self, x: f64) -> f64 {
        let h = self.x[1] - self.x[0];
        let n = self.x.len();
        let k = (((x - self.x[0]) / h).floor() as usize).min(n - 2);
        let t = (x - self.x[k]) / h;
        (1.0 - t) * self.phi[k] + t * self.phi[k + 1]
    }

    /// `max |φ'|` from second-order differences.
    pub fn dphi_sup(&self) -> f64 {
        let h = self.x[1] - self.x[0];
        let p = &self.phi;
        let n = p.len();
        let left = (-3.0 * p[0] + 4.0 * p[1] - p[2]) / (2.0 * h);
        let right = (3.0 * p[n - 1] - 4.0 * p[n - 2] + p[n - 3]) / (2.0 * h);
        (1..n - 1)
            .map(|k| ((p[k + 1] - p[k - 1]) / (2.0 * h)).abs())
            .fold(left.abs().max(right.abs()), f64::max)
    }
}

/// Smallest `λ` of `−φ'' = λ w φ` on `[a, b]` by a three-point scheme on
/// `n` cells with cell-averaged mass, solved by inverse iteration.
pub fn fd_eigen(
    w: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    left: End,
    right: End,
    n: usize,
) -> FdEigen {
    let h = (b - a) / n as f64;
    let x: Vec<f64> = (0..=n).map(|k| a + k as f64 * h).collect();
    let cell_mass = |k: usize| {
        const SUB: usize = 8;
        let lo = if k == 0 { x[0] } else { x[k] - 0.5 * h };
        let hi = if k == n { x[n] } else { x[k] + 0.5 * h };
        riemann(&w, lo, hi, SUB) / h
    };
    let first = if left.d == 0.0 { 1 } else { 0 };
    let last = if right.d == 0.0 { n - 1 } else { n };
    let m = last - first + 1;
    let h2 = h * h;
    let mut diag = vec![2.0 / h2; m];
    let off = -1.0 / h2;
    if first == 0 {
        diag[0] = 1.0 / h2 + left.c / left.d / h;
    }
    if last == n {
        diag[m - 1] = 1.0 / h2 + right.c / right.d / h;
    }
    let mass: Vec<f64> = (first..=last).map(cell_mass).collect();

    let mut v = vec![1.0; m];
    let mut lambda = f64::NAN;
    for _ in 0..20_000 {
        let rhs: Vec<f64> = v.iter().zip(&mass).map(|(a, b)| a * b).collect();
        let mut y = thomas(&diag, off, &rhs);
        let top = y.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
        y.iter_mut().for_each(|v| *v /= top);
        let next = rayleigh(&diag, off, &mass, &y);
        v = y;
        let done = (next - lambda).abs() <= 1e-15 * next.abs();
        lambda = next;
        if done {
            break;
        }
    }
    let sign = if v.iter().sum::<f64>() < 0.0 {
        -1.0
    } else {
        1.0
    };
    let mut phi = vec![0.0; n + 1];
    for (k, val) in v.iter().enumerate() {
        phi[first + k] = sign * val;
    }
    let top = phi.iter().cloned().fold(0.0, f64::max);
    phi.iter_mut().for_each(|p| *p /= top);
    FdEigen { lambda, x, phi }
}

fn rayleigh(diag: &[f64], off: f64, mass: &[f64], v: &[f64]) -> f64 {
    let m = v.len();
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..m {
        let mut av = diag[k] * v[k];
        if k > 0 {
            av += off * v[k - 1];
        }
        if k + 1 < m {
            av += off * v[k + 1];
        }
        num += v[k] * av;
        den += v[k] * mass[k] * v[k];
    }
    num / den
}

/// Symmetric tridiagonal solve with constant off-diagonal.
fn thomas(diag: &[f64], off: f64, rhs: &[f64]) -> Vec<f64> {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    c[0] = off / diag[0];
    d[0] = rhs[0] / diag[0];
    for k in 1..m {
        let den = diag[k] - off * c[k - 1];
        c[k] = off / den;
        d[k] = (rhs[k] - off * d[k - 1]) / den;
    }
    let mut x = vec![0.0; m];
    x[m - 1] = d[m - 1];
    for k in (0..m - 1).rev() {
        x[k] = d[k] - c[k] * x[k + 1];
    }
    x
}

/// Fixed-step classical RK4 for `u'' = field(mid, x, u, u')`, where `mid`
/// is the midpoint of the current piece between cuts. Steps are aligned so
/// that every cut is hit exactly. Returns `(x, u, u')` at every step.
pub fn rk4(
    field: impl Fn(f64, f64, f64, f64) -> f64,
    x0: f64,
    x1: f64,
    y0: (f64, f64),
    cuts: &[f64],
    h: f64,
) -> Vec<(f64, f64, f64)> {
    let mut ends: Vec<f64> = cuts.iter().copied().filter(|&c| c > x0 && c < x1).collect();
    ends.push(x1);
    let mut out = vec![(x0, y0.0, y0.1)];
    let (mut x, mut u, mut v) = (x0, y0.0, y0.1);
    for end in ends {
        let steps = ((end - x) / h).ceil().max(1.0) as usize;
        let start = x;
        let hh = (end - start) / steps as f64;
        let mid = 0.5 * (start + end);
        for k in 0..steps {
            let xa = start + k as f64 * hh;
            let f = |t: f64, u: f64, v: f64| field(mid, t, u, v);
            let (k1u, k1v) = (v, f(xa, u, v));
            let (k2u, k2v) = (
                v + 0.5 * hh * k1v,
                f(xa + 0.5 * hh, u + 0.5 * hh * k1u, v + 0.5 * hh * k1v),
            );
            let (k3u, k3v) = (
                v + 0.5 * hh * k2v,
                f(xa + 0.5 * hh, u + 0.5 * hh * k2u, v + 0.5 * hh * k2v),
            );
            let (k4u, k4v) = (v + hh * k3v, f(xa + hh, u + hh * k3u, v + hh * k3v));
            u += hh / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
            v += hh / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            x = if k + 1 == steps {
                end
            } else {
                start + (k + 1) as f64 * hh
            };
            out.push((x, u, v));
            if !u.is_finite() || !v.is_finite() {
                return out;
            }
        }
    }
    out
}

/// Green kernel of `−u'' = w` with `αu(0) − βu'(0) = 0`,
/// `γu(L) + δu'(L) = 0`, written out from the two homogeneous solutions.
pub fn green_closed(bc: [f64; 4], l: f64, x: f64, s: f64) -> f64 {
    let [alpha, beta, gamma, delta] = bc;
    let left = |t: f64| beta + alpha * t;
    let right = |t: f64| delta + gamma * (l - t);
    // Wronskian of (left, right)
    let wronskian = left(0.0) * (-gamma) - alpha * right(0.0);
    if x <= s {
        -left(x) * right(s) / wronskian
    } else {
        -left(s) * right(x) / wronskian
    }
}

/// `∫₀ᴸ G(x, s) w(s) ds` by midpoint sums on each piece between `cuts`.
pub fn green_apply(
    bc: [f64; 4],
    l: f64,
    w: impl Fn(f64) -> f64,
    x: f64,
    cuts: &[f64],
    n: usize,
) -> f64 {
    let mut pts: Vec<f64> = cuts.iter().copied().filter(|&c| c > 0.0 && c < l).collect();
    pts.push(0.0);
    pts.push(l);
    if x > 0.0 && x < l {
        pts.push(x);
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts.windows(2)
        .map(|ab| riemann(|s| green_closed(bc, l, x, s) * w(s), ab[0], ab[1], n))
        .sum()
}

const FUNCS1: [&str; 9] = [
    "sin", "cos", "exp", "log", "atan", "sqrt", "abs", "pos", "neg",
];
const FUNCS2: [&str; 2] = ["max", "min"];
const OPS: [&str; 5] = ["+", "-", "*", "/", "^"];

/// Random expression text in the variable `x`.
pub fn random_expr<R: Rng>(rng: &mut R, depth: u32) -> String {
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..5) {
            0 => "x".to_string(),
            1 => "pi".to_string(),
            2 => format!("{}", rng.gen_range(0..100)),
            3 => format!("{:.3}", rng.gen_range(0.0..10.0)),
            _ => format!("{}e{}", rng.gen_range(1..10), rng.gen_range(-3..4)),
        };
    }
    match rng.gen_range(0..6) {
        0..=2 => {
            let op = OPS[rng.gen_range(0..OPS.len())];
            let lhs = random_expr(rng, depth - 1);
            let rhs = random_expr(rng, depth - 1);
            format!("{}{op}{}", wrap(rng, lhs), wrap(rng, rhs))
        }
        3 => {
            let inner = random_expr(rng, depth - 1);
            format!("-{}", wrap(rng, inner))
        }
        4 => {
            let f = FUNCS1[rng.gen_range(0..FUNCS1.len())];
            format!("{f}({})", random_expr(rng, depth - 1))
        }
        _ => {
            let f = FUNCS2[rng.gen_range(0..FUNCS2.len())];
            let a = random_expr(rng, depth - 1);
            let b = random_expr(rng, depth - 1);
            format!("{f}({a}, {b})")
        }
    }
}

fn wrap<R: Rng>(rng: &mut R, s: String) -> String {
    if rng.gen_bool(0.6) {
        format!("({s})")
    } else {
        s
    }
}

/// `parse → print → parse` keeps the printed text and the values.
pub fn round_trips(text: &str) -> Result<(), String> {
    let e = posbvp::expr::parse(text, "x").map_err(|e| format!("`{text}`: {e}"))?;
    let printed = posbvp::expr::print(&e);
    let again = posbvp::expr::parse(&printed, "x").map_err(|e| format!("`{printed}`: {e}"))?;
    if posbvp::expr::print(&again) != printed {
        return Err(format!("`{text}` prints unstably as `{printed}`"));
    }
    for x in [-2.5, -0.5, 0.0, 0.3, 1.0, 2.0, 7.25] {
        let (a, b) = (e.eval_or_nan(x), again.eval_or_nan(x));
        if !(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan())) {
            return Err(format!("`{text}` vs `{printed}` at x = {x}: {a} != {b}"));
        }
    }
    Ok(())
}

/// One hump of the hand-computed ledger for the two-hump sine problem.
#[derive(Debug, Clone)]
pub struct HumpLedger {
    pub m: f64,
    pub c: f64,
    pub dphi_sup: f64,
    pub lambda1: f64,
    /// Trough side next to this hump: `(ν, δ, β)`.
    pub nu: f64,
    pub delta: f64,
    pub beta: f64,
}

#[derive(Debug, Clone)]
pub struct SineLedger {
    pub lambda0: f64,
    pub rho: f64,
    pub r: f64,
    pub humps: [HumpLedger; 2],
    pub beta_star: f64,
}

const RIEMANN_N: usize = 1_000_000;
const MIN_SAMPLES: usize = 10_000;
const FD_NODES: usize = 10_000;

/// The threshold ledger for `L = 3π`, Dirichlet ends, `a = sin⁺`,
/// `b = sin⁻`, `g = s²`, `k = s³`, unit coefficients, `r₀ = 1`, recomputed
/// with finite differences, midpoint sums and sampled extrema.
pub fn sine_ledger(big_r: f64) -> SineLedger {
    use std::f64::consts::PI;
    let l = 3.0 * PI;
    let a = |x: f64| x.sin().max(0.0);
    let b = |x: f64| (-x.sin()).max(0.0);
    let g = |s: f64| s * s;
    let k = |s: f64| s * s * s;

    let lambda0 = fd_eigen(a, 0.0, l, DIRICHLET, DIRICHLET, 3 * FD_NODES).lambda;
    let rho = lambda0 / 2.0;
    // g(s)/s = s is increasing, so the sampled condition reduces to r < λ₀ − ρ
    let r = (0..)
        .map(|j| 2f64.powf(-(j as f64) / 16.0))
        .find(|&r| r < lambda0 - rho)
        .unwrap();

    let hump = |lo: f64, hi: f64, trough_right: bool| {
        let int_a = riemann(a, lo, hi, RIEMANN_N);
        let m = r / (hi - lo) + sample_max(g, 0.0, r, MIN_SAMPLES) * int_a;
        let eig = fd_eigen(a, lo, hi, DIRICHLET, DIRICHLET, FD_NODES);
        let dphi_sup = eig.dphi_sup();
        let tent = riemann(
            |x| (x - lo).min(hi - x) * a(x) * eig.eval(x),
            lo,
            hi,
            RIEMANN_N,
        );
        let c = rho / ((hi - lo) * dphi_sup) * tent;
        let nu = sample_min(k, c * r / 4.0, big_r, MIN_SAMPLES);
        let delta = PI.min(c * r / (4.0 * m));
        let b_int = if trough_right {
            riemann(|x| (hi + delta - x) * b(x), hi, hi + delta, RIEMANN_N)
        } else {
            riemann(|x| (x - (lo - delta)) * b(x), lo - delta, lo, RIEMANN_N)
        };
        let beta = (big_r + m * l) / (nu * b_int);
        HumpLedger {
            m,
            c,
            dphi_sup,
            lambda1: eig.lambda,
            nu,
            delta,
            beta,
        }
    };
    let h1 = hump(0.0, PI, true);
    let h2 = hump(2.0 * PI, 3.0 * PI, false);
    let beta_star = h1.beta.max(h2.beta);
    SineLedger {
        lambda0,
        rho,
        r,
        humps: [h1, h2],
        beta_star,
    }
}

/// Piecewise-constant forcing `w = values[k]` on `[cuts[k], cuts[k+1]]`
/// (with `0` and `L` added) under random Sturm-Liouville coefficients.
#[derive(Debug, Clone)]
pub struct Forcing {
    pub bc: [f64; 4],
    pub l: f64,
    pub cuts: Vec<f64>,
    pub values: Vec<f64>,
}

pub const FORCING_STEP: f64 = 0.02;

impl Forcing {
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let l = rng.gen_range(0.5..5.0);
        let bc = loop {
            let mut c = [0.0; 4];
            for v in &mut c {
                *v = if rng.gen_bool(0.3) {
                    0.0
                } else {
                    rng.gen_range(0.0..3.0)
                };
            }
            let [a, b, g, d] = c;
            if a * g * l + a * d + b * g > 0.1 && a + b > 0.0 && g + d > 0.0 {
                break c;
            }
        };
        let room = (l / (12.0 * FORCING_STEP)) as usize;
        let pieces = rng.gen_range(1..=room.clamp(1, 6));
        // every piece leaves room for a three-point stencil on either side
        let cuts = loop {
            let mut c: Vec<f64> = (0..pieces - 1).map(|_| rng.gen_range(0.0..l)).collect();
            c.sort_by(f64::total_cmp);
            let mut all = vec![0.0];
            all.extend(&c);
            all.push(l);
            if all.windows(2).all(|w| w[1] - w[0] > 6.0 * FORCING_STEP) {
                break c;
            }
        };
        let values = (0..pieces).map(|_| rng.gen_range(-5.0..5.0)).collect();
        Self {
            bc,
            l,
            cuts,
            values,
        }
    }

    pub fn w(&self, x: f64) -> f64 {
        let k = self.cuts.partition_point(|&c| c <= x);
        self.values[k]
    }

    /// `(left BC defect, right BC defect, sup |u'' + w|)` of `u`, with
    /// derivatives from three-point stencils that never straddle a cut.
    pub fn defects(&self, u: impl Fn(f64) -> f64) -> (f64, f64, f64) {
        let [alpha, beta, gamma, delta] = self.bc;
        let h = FORCING_STEP;
        let l = self.l;
        let du0 = (-3.0 * u(0.0) + 4.0 * u(h) - u(2.0 * h)) / (2.0 * h);
        let dul = (3.0 * u(l) - 4.0 * u(l - h) + u(l - 2.0 * h)) / (2.0 * h);
        let left = (alpha * u(0.0) - beta * du0).abs();
        let right = (gamma * u(l) + delta * dul).abs();
        let mut edges = vec![0.0];
        edges.extend(&self.cuts);
        edges.push(l);
        let mut ode: f64 = 0.0;
        for w in edges.windows(2) {
            for x in samples(w[0] + 2.0 * h, w[1] - 2.0 * h, 9) {
                let d2 = (u(x + h) - 2.0 * u(x) + u(x - h)) / (h * h);
                ode = ode.max((d2 + self.w(x)).abs());
            }
        }
        (left, right, ode)
    }
}
