//! Multiple shooting with a damped Newton iteration, and continuation of
//! solutions in a common scale factor of the trough coefficients.
//!
//! Single shooting from `x = 0` loses solutions once the troughs are strong:
//! the slope window that carries `u` through a trough shrinks below the
//! integrator's resolution. Splitting `[0, L]` into segments whose
//! linearized growth stays bounded keeps every sub-problem well conditioned.

use rayon::prelude::*;

use crate::numerics::{integrate, BandMatrix, IvpOptions, Status, Tolerance, Trajectory};
use crate::problem::{CoefficientSelector, Problem};

type State = [f64; 2];

/// Linearized growth allowed per segment, `∫ sqrt|∂f/∂u| dx`.
const GROWTH_BUDGET: f64 = 1.0;
const MIN_SEGMENTS: usize = 32;
const SAMPLES_PER_PIECE: usize = 400;
const NEWTON_MAX_ITER: usize = 40;
const DEFECT_REL: f64 = 1e-10;
const FD_REL: f64 = 1e-6;
/// Smallest row scale relative to the largest, so that segments where the
/// iterate vanishes do not dominate the merit function.
const SCALE_FLOOR: f64 = 1e-12;
/// Smallest difference-quotient step relative to the largest state.
const FD_FLOOR: f64 = 1e-9;
const MAX_FACTOR: f64 = 64.0;
const MAX_STEPS: usize = 400;

/// `p` with every trough coefficient multiplied by `theta`.
pub fn scale_troughs(p: &Problem, theta: f64) -> Problem {
    let mut q = p.clone();
    for j in 0..=p.hump_count() {
        if let Some(t) = p.trough(j) {
            q = q.with_coefficient(CoefficientSelector::Beta(Some(j)), theta * t.coefficient);
        }
    }
    q
}

fn segment_options(p: &Problem, y: &State, h: f64) -> IvpOptions {
    let s = p.settings();
    let scale = y[0].abs().max(y[1].abs() * h).max(f64::MIN_POSITIVE);
    IvpOptions {
        tol: Tolerance {
            abs: s.tol_abs.min(1e-10) * scale.min(1.0),
            rel: s.tol_rel.min(1e-10),
        },
        blow_cap: s.blow_cap,
        ..IvpOptions::default()
    }
}

fn segment(p: &Problem, a: f64, b: f64, y: &State) -> Trajectory {
    integrate(
        |piece, x, u, _| -p.f_extended_in(p.interval_for_piece(piece), x, u),
        a,
        b,
        (y[0], y[1]),
        &p.breakpoints(),
        &segment_options(p, y, b - a),
    )
}

fn segment_end(p: &Problem, a: f64, b: f64, y: &State) -> Option<State> {
    let t = segment(p, a, b, y);
    if matches!(t.status(), Status::BlewUp { .. }) {
        return None;
    }
    let end = t.last();
    Some([end.u, end.du])
}

/// Segment boundaries for `p` along the profile `u`: every breakpoint, and
/// cuts wherever the accumulated growth rate reaches the budget.
pub fn mesh(p: &Problem, u: &Trajectory) -> Vec<f64> {
    let l = p.length();
    let max_len = l / MIN_SEGMENTS as f64;
    let mut cuts = vec![0.0];
    cuts.extend(p.breakpoints());
    cuts.push(l);
    let mut xs = vec![0.0];
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let k = p.interval_at(0.5 * (a + b)).expect("inside [0, L]");
        let mut samples: Vec<f64> = (0..=SAMPLES_PER_PIECE)
            .map(|j| a + (b - a) * j as f64 / SAMPLES_PER_PIECE as f64)
            .collect();
        samples.extend(u.nodes().iter().map(|n| n.x).filter(|&x| x > a && x < b));
        samples.sort_by(f64::total_cmp);
        samples.dedup();
        let rate = |x: f64| {
            let v = u.eval(x).0;
            if v <= 0.0 {
                return 0.0;
            }
            let dv = FD_REL * v;
            let d = (p.f_extended_in(k, x, v + dv) - p.f_extended_in(k, x, v)) / dv;
            d.abs().sqrt()
        };
        let mut acc = 0.0;
        let mut last = a;
        let mut prev_x = a;
        let mut prev_r = rate(a);
        for &x in &samples[1..] {
            let r = rate(x);
            acc += 0.5 * (r + prev_r) * (x - prev_x);
            if x < b && (acc >= GROWTH_BUDGET || x - last >= max_len) {
                xs.push(x);
                acc = 0.0;
                last = x;
            }
            prev_x = x;
            prev_r = r;
        }
        xs.push(b);
    }
    xs
}

fn row_scales(xs: &[f64], ys: &[State], ends: &[State]) -> Vec<State> {
    let raw: Vec<f64> = (0..xs.len() - 1)
        .map(|k| {
            let h = xs[k + 1] - xs[k];
            let (y, e) = (ys[k + 1], ends[k]);
            y[0].abs()
                .max(e[0].abs())
                .max(h * y[1].abs())
                .max(h * e[1].abs())
        })
        .collect();
    let floor = (SCALE_FLOOR * raw.iter().copied().fold(0.0, f64::max)).max(f64::MIN_POSITIVE);
    raw.iter()
        .enumerate()
        .map(|(k, &s)| {
            let s = s.max(floor);
            [s, s / (xs[k + 1] - xs[k])]
        })
        .collect()
}

/// Weighted 2-norm of the continuity defects and the right boundary row.
/// The left boundary row is linear and held exactly by every iterate.
fn merit(p: &Problem, ys: &[State], ends: &[State], scales: &[State]) -> f64 {
    let bc = p.bc();
    let mut acc = 0.0;
    for k in 0..ends.len() {
        for c in 0..2 {
            acc += ((ends[k][c] - ys[k + 1][c]) / (DEFECT_REL * scales[k][c])).powi(2);
        }
    }
    let last = ys[ys.len() - 1];
    let bscale = DEFECT_REL
        * (bc.gamma * scales[scales.len() - 1][0] + bc.delta * scales[scales.len() - 1][1]);
    acc += (bc.right_residual(last[0], last[1]) / bscale).powi(2);
    (acc / (2 * ends.len() + 1) as f64).sqrt()
}

fn all_ends(p: &Problem, xs: &[f64], ys: &[State]) -> Option<Vec<State>> {
    (0..xs.len() - 1)
        .into_par_iter()
        .map(|k| segment_end(p, xs[k], xs[k + 1], &ys[k]))
        .collect()
}

/// Newton's method for the multiple-shooting system on the mesh `xs`,
/// starting from `ys`. Returns the node states once every weighted defect
/// is below one.
pub fn newton(p: &Problem, xs: &[f64], mut ys: Vec<State>) -> Option<Vec<State>> {
    let bc = p.bc();
    let nseg = xs.len() - 1;
    let n = 2 * (nseg + 1);
    let (u0, du0) = bc.left_ray(bc.ray_parameter(ys[0][0], ys[0][1]));
    ys[0] = [u0, du0];
    let mut ends = all_ends(p, xs, &ys)?;
    for _ in 0..NEWTON_MAX_ITER {
        let scales = row_scales(xs, &ys, &ends);
        let current = merit(p, &ys, &ends, &scales);
        if current <= 1.0 {
            return Some(ys);
        }
        let global = (0..nseg)
            .map(|k| ys[k][0].abs().max((xs[k + 1] - xs[k]) * ys[k][1].abs()))
            .fold(0.0, f64::max);
        let jac: Vec<[State; 2]> = (0..nseg)
            .into_par_iter()
            .map(|k| {
                let h = xs[k + 1] - xs[k];
                let y = ys[k];
                let size = y[0]
                    .abs()
                    .max(h * y[1].abs())
                    .max(FD_FLOOR * global)
                    .max(f64::MIN_POSITIVE);
                let eps = [FD_REL * size, FD_REL * size / h];
                let mut cols = [[0.0; 2]; 2];
                for (c, col) in cols.iter_mut().enumerate() {
                    let mut z = y;
                    z[c] += eps[c];
                    let e = segment_end(p, xs[k], xs[k + 1], &z)?;
                    *col = [(e[0] - ends[k][0]) / eps[c], (e[1] - ends[k][1]) / eps[c]];
                }
                Some(cols)
            })
            .collect::<Option<Vec<_>>>()?;

        let mut a = BandMatrix::zeros(n, 2, 2);
        let mut rhs = vec![0.0; n];
        let lscale = bc.alpha.abs().max(bc.beta.abs());
        a.set(0, 0, bc.alpha / lscale);
        a.set(0, 1, -bc.beta / lscale);
        rhs[0] = -bc.left_residual(ys[0][0], ys[0][1]) / lscale;
        for k in 0..nseg {
            for r in 0..2 {
                let row = 2 * k + 1 + r;
                let w = scales[k][r];
                a.set(row, 2 * k, jac[k][0][r] / w);
                a.set(row, 2 * k + 1, jac[k][1][r] / w);
                a.set(row, 2 * k + 2 + r, -1.0 / w);
                rhs[row] = -(ends[k][r] - ys[k + 1][r]) / w;
            }
        }
        let last = ys[nseg];
        let rscale = bc.gamma * scales[nseg - 1][0] + bc.delta * scales[nseg - 1][1];
        a.set(n - 1, n - 2, bc.gamma / rscale);
        a.set(n - 1, n - 1, bc.delta / rscale);
        rhs[n - 1] = -bc.right_residual(last[0], last[1]) / rscale;
        let delta = a.solve(&rhs).ok()?;

        let mut step = 1.0;
        let mut accepted = false;
        while step >= 1.0 / 1024.0 {
            let trial: Vec<State> = ys
                .iter()
                .enumerate()
                .map(|(k, y)| [y[0] + step * delta[2 * k], y[1] + step * delta[2 * k + 1]])
                .collect();
            if let Some(e) = all_ends(p, xs, &trial) {
                let m = merit(p, &trial, &e, &scales);
                if m.is_finite() && m < (1.0 - 1e-4 * step) * current {
                    ys = trial;
                    ends = e;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            return None;
        }
    }
    let scales = row_scales(xs, &ys, &ends);
    (merit(p, &ys, &ends, &scales) <= 1.0).then_some(ys)
}

/// Dense solution through the node states.
pub fn composite(p: &Problem, xs: &[f64], ys: &[State]) -> Trajectory {
    let parts: Vec<Trajectory> = (0..xs.len() - 1)
        .into_par_iter()
        .map(|k| segment(p, xs[k], xs[k + 1], &ys[k]))
        .collect();
    Trajectory::concat(parts)
}

/// Re-solves `p` by multiple shooting, starting from the profile `guess`.
pub fn polish(p: &Problem, guess: &Trajectory) -> Option<Trajectory> {
    let xs = mesh(p, guess);
    let ys: Vec<State> = xs
        .iter()
        .map(|&x| {
            let (u, du) = guess.eval(x);
            [u, du]
        })
        .collect();
    let ys = newton(p, &xs, ys)?;
    Some(composite(p, &xs, &ys))
}

/// Follows a solution of `scale_troughs(p, theta0)` up to `p` itself with
/// geometric steps in the scale factor, shrinking the step after a failed
/// Newton solve.
pub fn continue_branch(p: &Problem, theta0: f64, start: &Trajectory) -> Option<Trajectory> {
    let mut theta = theta0;
    let mut u = start.clone();
    let mut factor: f64 = 4.0;
    for _ in 0..MAX_STEPS {
        if theta >= 1.0 {
            return Some(u);
        }
        let next = (theta * factor).min(1.0);
        let q = scale_troughs(p, next);
        match polish(&q, &u) {
            Some(v) => {
                u = v;
                theta = next;
                factor = (factor * 2.0).min(MAX_FACTOR);
            }
            None => {
                factor = factor.sqrt();
                if factor < 1.0 + 1e-3 {
                    return None;
                }
            }
        }
    }
    None
}
