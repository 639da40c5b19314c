//! Shooting search for positive solutions, verification against the Green
//! operator, and classification by which humps carry a large maximum.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::greenop::{self, verification_grid};
use crate::numerics::{
    brackets_from_samples, integrate, quad, refine_root_with, Bracket, IvpOptions, RootTolerance,
    Status, Tolerance, Trajectory,
};
use crate::problem::Problem;

pub mod homotopy;

/// Solver tunables; every field may be set from the `solver` object of a
/// configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub blow_cap: f64,
    pub scan_points: usize,
    /// Largest shooting slope; `10·R` when absent.
    pub scan_smax: Option<f64>,
    /// Smallest slope as a fraction of `scan_smax`.
    pub scan_smin_ratio: f64,
    pub refine_passes: usize,
    pub dedupe_tol: f64,
    pub root_merge_tol: f64,
    pub bc_tol: f64,
    pub phi_tol: f64,
    pub ode_tol: f64,
    pub quad_tol: f64,
    pub tie_tol: f64,
    pub samples_per_hump: usize,
    /// Classification threshold; computed from the eigenvalue condition
    /// when absent.
    pub r: Option<f64>,
    /// A priori bound; estimated by a coarse scan when absent.
    #[serde(rename = "R")]
    pub big_r: Option<f64>,
    pub r0: f64,
    pub coarse_points: usize,
    pub coarse_smax: f64,
    /// Continue solutions from weaker troughs when scanning leaves a class
    /// uncovered.
    pub homotopy: bool,
    /// Decades below the configured trough coefficients at which the
    /// continuation may start.
    pub homotopy_decades: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol_abs: 1e-10,
            tol_rel: 1e-8,
            blow_cap: 1e8,
            scan_points: 800,
            scan_smax: None,
            scan_smin_ratio: 1e-6,
            refine_passes: 2,
            dedupe_tol: 1e-4,
            root_merge_tol: 1e-10,
            bc_tol: 1e-8,
            phi_tol: 1e-6,
            ode_tol: 1e-6,
            quad_tol: 1e-10,
            tie_tol: 1e-9,
            samples_per_hump: 64,
            r: None,
            big_r: None,
            r0: 1.0,
            coarse_points: 200,
            coarse_smax: 1e3,
            homotopy: true,
            homotopy_decades: 24,
        }
    }
}

impl SolverSettings {
    pub fn ivp_options(&self) -> IvpOptions {
        IvpOptions {
            tol: Tolerance {
                abs: self.tol_abs,
                rel: self.tol_rel,
            },
            blow_cap: self.blow_cap,
            ..IvpOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("no default classification radius: {0}; set solver.r")]
    NoRadius(String),
    #[error("invalid set bounds: need 0 < r < R, got r = {r}, R = {big_r}")]
    BadSpec { r: f64, big_r: f64 },
}

/// Classification thresholds `0 < r < R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SetSpec {
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
}

impl SetSpec {
    pub fn new(r: f64, big_r: f64) -> Result<Self, SolveError> {
        if !(r > 0.0 && r < big_r) || !big_r.is_finite() {
            return Err(SolveError::BadSpec { r, big_r });
        }
        Ok(Self { r, big_r })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanSpec {
    pub s_max: f64,
    pub n_points: usize,
}

pub struct Shot {
    pub trajectory: Trajectory,
    /// `γu(L) + δu'(L)`; `±∞` on blow-up, NaN when invalid.
    pub residual: f64,
}

/// Integrates `u'' = −f̃(x, u)` from `s0·(β, α)/max(α, β)`.
pub fn shoot(p: &Problem, s0: f64) -> Shot {
    shoot_with(p, s0, &p.settings().ivp_options())
}

pub fn shoot_with(p: &Problem, s0: f64, opts: &IvpOptions) -> Shot {
    let bc = p.bc();
    let trajectory = integrate(
        |piece, x, u, _| -p.f_extended_in(p.interval_for_piece(piece), x, u),
        0.0,
        p.length(),
        bc.left_ray(s0),
        &p.breakpoints(),
        opts,
    );
    let end = trajectory.last();
    let residual = match trajectory.status() {
        Status::Completed | Status::WentNegative { .. } => bc.right_residual(end.u, end.du),
        Status::BlewUp { stalled: true, .. } => f64::NAN,
        Status::BlewUp { .. } => {
            let b = bc.right_residual(end.u, end.du);
            let sign = if b != 0.0 { b } else { end.u };
            if sign > 0.0 {
                f64::INFINITY
            } else if sign < 0.0 {
                f64::NEG_INFINITY
            } else {
                f64::NAN
            }
        }
    };
    Shot {
        trajectory,
        residual,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Classification {
    Subset { subset: Vec<usize> },
    Reject { reason: String },
}

/// Maximum of `u` over each hump.
pub fn hump_maxima(p: &Problem, u: &Trajectory, samples_per_hump: usize) -> Vec<f64> {
    (1..=p.hump_count())
        .map(|i| {
            let h = p.hump(i);
            u.max_on(h.lo, h.hi, samples_per_hump)
        })
        .collect()
}

/// Subset of humps whose maximum exceeds `r`.
pub fn classify_maxima(maxima: &[f64], spec: &SetSpec, tie_tol: f64) -> Classification {
    for (k, &m) in maxima.iter().enumerate() {
        if !m.is_finite() {
            return Classification::Reject {
                reason: format!("maximum on hump {} is not finite", k + 1),
            };
        }
        if m >= spec.big_r {
            return Classification::Reject {
                reason: format!("maximum {m} on hump {} reaches R = {}", k + 1, spec.big_r),
            };
        }
        if (m - spec.r).abs() <= tie_tol {
            return Classification::Reject {
                reason: format!("maximum {m} on hump {} ties r = {}", k + 1, spec.r),
            };
        }
    }
    Classification::Subset {
        subset: maxima
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > spec.r)
            .map(|(k, _)| k + 1)
            .collect(),
    }
}

pub fn classify(u: &Trajectory, spec: &SetSpec, p: &Problem) -> Classification {
    let s = p.settings();
    classify_maxima(&hump_maxima(p, u, s.samples_per_hump), spec, s.tie_tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residuals {
    pub bc: f64,
    pub phi: f64,
    pub ode: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Solution {
    #[serde(skip)]
    pub trajectory: Trajectory,
    pub s0: f64,
    pub maxima: Vec<f64>,
    pub classification: Classification,
    pub residuals: Residuals,
    /// Minimum of `u` over interior grid points and interior nodes.
    pub positivity: f64,
    pub sup_norm: f64,
}

impl Solution {
    pub fn subset(&self) -> Option<&[usize]> {
        match &self.classification {
            Classification::Subset { subset } => Some(subset),
            Classification::Reject { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rejected {
    pub s0: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageEntry {
    pub subset: Vec<usize>,
    pub found: bool,
    /// Index into `solutions` of the first solution in this class.
    pub solution: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MultiplicityReport {
    pub spec: SetSpec,
    pub scan: ScanSpec,
    pub passes: usize,
    pub homotopy: Option<HomotopyReport>,
    pub count: usize,
    pub complete: bool,
    pub coverage: Vec<CoverageEntry>,
    pub solutions: Vec<Solution>,
    pub rejected: Vec<Rejected>,
    pub settings: SolverSettings,
}

impl MultiplicityReport {
    pub fn covered(&self) -> Vec<Vec<usize>> {
        self.coverage
            .iter()
            .filter(|c| c.found)
            .map(|c| c.subset.clone())
            .collect()
    }
}

/// All non-empty subsets of `{1..m}`, by size then lexicographically.
pub fn nonempty_subsets(m: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = (1u64..(1u64 << m))
        .map(|mask| {
            (0..m)
                .filter(|k| mask >> k & 1 == 1)
                .map(|k| k + 1)
                .collect()
        })
        .collect();
    out.sort_by(|a: &Vec<usize>, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let ratio = (hi / lo).ln();
    (0..n)
        .map(|k| {
            if k + 1 == n {
                hi
            } else {
                lo * (ratio * k as f64 / (n - 1).max(1) as f64).exp()
            }
        })
        .collect()
}

/// `sup ‖u′(x) − u′(0) + ∫₀ˣ f̃(ξ, u)‖` over `grid`.
pub fn ode_residual(p: &Problem, u: &Trajectory, grid: &[f64], tol: f64) -> f64 {
    ode_residual_with(p, |x| u.eval(x), grid, tol)
}

/// [`ode_residual`] for any `(u, u′)` evaluator.
pub fn ode_residual_with<U>(p: &Problem, u: U, grid: &[f64], tol: f64) -> f64
where
    U: Fn(f64) -> (f64, f64),
{
    let du0 = u(0.0).1;
    let mut acc = 0.0;
    let mut worst: f64 = 0.0;
    for w in grid.windows(2) {
        let (a, b) = (w[0], w[1]);
        let k = p
            .interval_at(0.5 * (a + b))
            .expect("grid lies inside [0, L]");
        let seg_tol = tol * (b - a) / p.length();
        acc += quad(|x| p.f_extended_in(k, x, u(x).0), a, b, seg_tol, &[]).unwrap_or(f64::NAN);
        let r = (u(b).1 - du0 + acc).abs();
        worst = if r.is_nan() { f64::NAN } else { worst.max(r) };
    }
    worst
}

/// Verifies a root of the shooting residual and packages it. Returns the
/// reason when a check fails.
pub fn verify(p: &Problem, s0: f64, spec: &SetSpec) -> Result<Solution, String> {
    verify_trajectory(p, s0, shoot(p, s0).trajectory, spec)
}

/// Runs the residual, positivity and classification checks on any dense
/// solution candidate starting on the left boundary ray at `s0`.
pub fn verify_trajectory(
    p: &Problem,
    s0: f64,
    u: Trajectory,
    spec: &SetSpec,
) -> Result<Solution, String> {
    let s = p.settings();
    if !u.reached_end() || u.x_end() < p.length() {
        return Err("trajectory blows up".into());
    }
    let end = u.last();
    let bc = p.bc().right_residual(end.u, end.du);
    if !(bc.abs() < s.bc_tol) {
        return Err(format!("boundary residual {bc:e}"));
    }
    let grid = verification_grid(p);
    let interior = &grid[1..grid.len() - 1];
    let l = p.length();
    let positivity = interior
        .iter()
        .map(|&x| u.eval(x).0)
        .chain(
            u.nodes()
                .iter()
                .filter(|n| n.x > 0.0 && n.x < l)
                .map(|n| n.u),
        )
        .fold(f64::INFINITY, f64::min);
    if !(positivity > 0.0) {
        return Err(format!("not positive: minimum {positivity:e}"));
    }
    let phi = greenop::phi_residual(p, &u, s.quad_tol).map_err(|e| e.to_string())?;
    if !(phi < s.phi_tol) {
        return Err(format!("operator residual {phi:e}"));
    }
    let ode = ode_residual(p, &u, &grid, s.quad_tol);
    if !(ode < s.ode_tol) {
        return Err(format!("integral residual {ode:e}"));
    }
    let maxima = hump_maxima(p, &u, s.samples_per_hump);
    let classification = classify_maxima(&maxima, spec, s.tie_tol);
    let sup_norm = u.sample(4).iter().map(|n| n.u.abs()).fold(0.0, f64::max);
    Ok(Solution {
        trajectory: u,
        s0,
        maxima,
        classification,
        residuals: Residuals {
            bc: bc.abs(),
            phi,
            ode,
        },
        positivity,
        sup_norm,
    })
}

fn refine_bracket(p: &Problem, b: &Bracket) -> Option<f64> {
    let s = p.settings();
    refine_root_with(
        |s0| shoot(p, s0).residual,
        b,
        RootTolerance {
            x: 4.0 * f64::EPSILON * b.hi,
            f: 1e-3 * s.bc_tol,
            max_iter: 300,
        },
    )
    .ok()
    .map(|r| r.x)
}

fn sup_distance(p: &Problem, a: &Trajectory, b: &Trajectory) -> f64 {
    verification_grid(p)
        .iter()
        .map(|&x| (a.eval(x).0 - b.eval(x).0).abs())
        .fold(0.0, f64::max)
}

fn admit(p: &Problem, solutions: &mut Vec<Solution>, sol: Solution) -> bool {
    let tol = p.settings().dedupe_tol;
    let dup = solutions
        .iter()
        .any(|other| sup_distance(p, &other.trajectory, &sol.trajectory) < tol);
    if !dup {
        solutions.push(sol);
    }
    !dup
}

fn reject(rejected: &mut Vec<Rejected>, s0: f64, reason: String) {
    if !rejected.iter().any(|r| r.s0 == s0) {
        rejected.push(Rejected { s0, reason });
    }
}

/// One scan over `grid`: brackets, refinement, verification.
fn scan_pass(
    p: &Problem,
    spec: &SetSpec,
    grid: &[f64],
    solutions: &mut Vec<Solution>,
    rejected: &mut Vec<Rejected>,
) {
    let s = p.settings();
    let values: Vec<f64> = grid.par_iter().map(|&s0| shoot(p, s0).residual).collect();
    let brackets = brackets_from_samples(grid, &values);
    let mut roots: Vec<f64> = brackets
        .par_iter()
        .filter_map(|b| refine_bracket(p, b))
        .collect();
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() < s.root_merge_tol);
    roots.retain(|r| {
        solutions
            .iter()
            .all(|sol| (sol.s0 - r).abs() >= s.root_merge_tol)
    });
    let checked: Vec<(f64, Result<Solution, String>)> =
        roots.par_iter().map(|&r| (r, verify(p, r, spec))).collect();
    for (s0, outcome) in checked {
        match outcome {
            Ok(sol) => {
                admit(p, solutions, sol);
            }
            Err(reason) => reject(rejected, s0, reason),
        }
    }
}

fn is_complete(subsets: &[Vec<usize>], solutions: &[Solution]) -> bool {
    subsets
        .iter()
        .all(|sub| solutions.iter().any(|x| x.subset() == Some(sub.as_slice())))
}

/// Outcome of the continuation stage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomotopyReport {
    /// Scale factor of the trough coefficients where the start solutions
    /// were found; absent when no decade gave enough of them.
    pub theta_start: Option<f64>,
    pub branches: usize,
    pub continued: usize,
    pub admitted: usize,
}

/// Finds at least `2^m − 1` solutions with every trough coefficient scaled
/// down by a power of ten, follows each back to `p` and verifies it there.
fn run_homotopy(
    p: &Problem,
    spec: &SetSpec,
    grid: &[f64],
    solutions: &mut Vec<Solution>,
    rejected: &mut Vec<Rejected>,
) -> HomotopyReport {
    let s = p.settings();
    let needed = nonempty_subsets(p.hump_count()).len();
    let mut report = HomotopyReport {
        theta_start: None,
        branches: 0,
        continued: 0,
        admitted: 0,
    };
    for k in 1..=s.homotopy_decades {
        let theta = 10f64.powi(-(k as i32));
        let q = homotopy::scale_troughs(p, theta);
        let mut start = Vec::new();
        let mut ignored = Vec::new();
        scan_pass(&q, spec, grid, &mut start, &mut ignored);
        if start.len() < needed {
            continue;
        }
        report.theta_start = Some(theta);
        report.branches = start.len();
        let ends: Vec<(f64, Option<Trajectory>)> = start
            .par_iter()
            .map(|sol| (sol.s0, homotopy::continue_branch(p, theta, &sol.trajectory)))
            .collect();
        let bc = p.bc();
        for (s_start, end) in ends {
            let Some(u) = end else {
                reject(
                    rejected,
                    f64::NAN,
                    format!("continuation from s0 = {s_start} at scale {theta:e} failed"),
                );
                continue;
            };
            report.continued += 1;
            let (u0, du0) = u.eval(0.0);
            let s0 = bc.ray_parameter(u0, du0);
            match verify_trajectory(p, s0, u, spec) {
                Ok(sol) => {
                    if admit(p, solutions, sol) {
                        report.admitted += 1;
                    }
                }
                Err(reason) => reject(rejected, s0, format!("continued branch: {reason}")),
            }
        }
        break;
    }
    report
}

/// Scans `s0` on a log grid, refines every sign change of the shooting
/// residual, verifies and classifies the roots. Denser rescans follow while
/// some class is missing, then continuation from weaker troughs.
pub fn find_solutions(p: &Problem, spec: SetSpec, scan: ScanSpec) -> MultiplicityReport {
    let s = p.settings();
    let subsets = nonempty_subsets(p.hump_count());
    let mut solutions: Vec<Solution> = Vec::new();
    let mut rejected: Vec<Rejected> = Vec::new();
    let mut passes = 0;
    let mut n_points = scan.n_points.max(2);
    let lo = scan.s_max * s.scan_smin_ratio;

    loop {
        passes += 1;
        let grid = log_grid(lo, scan.s_max, n_points);
        scan_pass(p, &spec, &grid, &mut solutions, &mut rejected);
        if is_complete(&subsets, &solutions) || passes > s.refine_passes {
            break;
        }
        n_points *= 2;
    }

    let has_troughs = (0..=p.hump_count()).any(|j| p.trough(j).is_some());
    let homotopy = (s.homotopy && has_troughs && !is_complete(&subsets, &solutions)).then(|| {
        let grid = log_grid(lo, scan.s_max, scan.n_points.max(2));
        run_homotopy(p, &spec, &grid, &mut solutions, &mut rejected)
    });

    solutions.sort_by(|a, b| a.s0.total_cmp(&b.s0));
    rejected.sort_by(|a, b| a.s0.total_cmp(&b.s0));
    let coverage: Vec<CoverageEntry> = subsets
        .into_iter()
        .map(|subset| {
            let idx = solutions
                .iter()
                .position(|x| x.subset() == Some(subset.as_slice()));
            CoverageEntry {
                subset,
                found: idx.is_some(),
                solution: idx,
            }
        })
        .collect();
    MultiplicityReport {
        spec,
        scan: ScanSpec {
            s_max: scan.s_max,
            n_points,
        },
        passes,
        homotopy,
        count: solutions.len(),
        complete: coverage.iter().all(|c| c.found),
        coverage,
        solutions,
        rejected,
        settings: s.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AprioriBound {
    #[serde(rename = "R")]
    pub big_r: f64,
    pub largest_sup: f64,
    pub completed: usize,
    pub scanned: usize,
}

pub const R_FLOOR: f64 = 10.0;

/// Numerical stand-in for the a priori bound: twice the largest sup-norm
/// among coarse-scan trajectories that reach `L` without blowing up or
/// going negative, and at least 10.
pub fn a_priori_bound(p: &Problem) -> AprioriBound {
    let s = p.settings();
    let grid = log_grid(s.coarse_smax * 1e-6, s.coarse_smax, s.coarse_points.max(2));
    let sups: Vec<Option<f64>> = grid
        .par_iter()
        .map(|&s0| {
            let t = shoot(p, s0).trajectory;
            (t.status() == Status::Completed)
                .then(|| t.sample(4).iter().map(|n| n.u.abs()).fold(0.0, f64::max))
        })
        .collect();
    let largest = sups.iter().flatten().copied().fold(0.0, f64::max);
    AprioriBound {
        big_r: (2.0 * largest).max(R_FLOOR),
        largest_sup: largest,
        completed: sups.iter().flatten().count(),
        scanned: grid.len(),
    }
}

/// `R` from the settings, or the coarse-scan estimate.
pub fn resolve_big_r(p: &Problem) -> f64 {
    p.settings()
        .big_r
        .unwrap_or_else(|| a_priori_bound(p).big_r)
}

/// Default thresholds and scan for a problem.
pub fn default_spec(p: &Problem) -> Result<(SetSpec, ScanSpec), SolveError> {
    let s = p.settings();
    let big_r = resolve_big_r(p);
    let r = match s.r {
        Some(r) => r,
        None => crate::analysis::classification_radius(p)
            .map_err(|e| SolveError::NoRadius(e.to_string()))?,
    };
    let spec = SetSpec::new(r, big_r)?;
    let scan = ScanSpec {
        s_max: s.scan_smax.unwrap_or(10.0 * big_r),
        n_points: s.scan_points,
    };
    Ok((spec, scan))
}

/// Full search with default thresholds.
pub fn solve(p: &Problem) -> Result<MultiplicityReport, SolveError> {
    let (spec, scan) = default_spec(p)?;
    Ok(find_solutions(p, spec, scan))
}
