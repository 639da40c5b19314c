//! Radial solutions on an annulus `R1 < |x| < R2` in `ℝᴺ`.
//!
//! With `t = h(r) = ∫_{R1}^r ξ^{1−N} dξ` the radial equation
//! `(r^{N−1} U')' + r^{N−1} F(r, U) = 0` becomes `v'' + f(t, v) = 0` on
//! `[0, h(R2)]` with `f(t, v) = r(t)^{2(N−1)} F(r(t), v)`.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::expr::{self, Expr};
use crate::numerics::Trajectory;
use crate::problem::{
    parse_intervals, BoundaryCoefficients, DraftInterval, IntervalKind, Problem, ProblemError,
};
use crate::solver::{self, MultiplicityReport, SolveError, SolverSettings};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RadialError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("RADIAL_DISCONTINUOUS: weights do not vanish at the junction r = {r} ({value})")]
    Discontinuous { r: f64, value: f64 },
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RadialBc {
    /// Dirichlet at both radii.
    #[serde(rename = "DD")]
    DirichletDirichlet,
    /// Dirichlet at `R1`, `∂u/∂r = 0` at `R2`.
    #[serde(rename = "DN")]
    DirichletNeumann,
    /// `∂u/∂r = 0` at `R1`, Dirichlet at `R2`.
    #[serde(rename = "ND")]
    NeumannDirichlet,
}

impl RadialBc {
    pub fn coefficients(self) -> BoundaryCoefficients {
        let (alpha, beta, gamma, delta) = match self {
            RadialBc::DirichletDirichlet => (1.0, 0.0, 1.0, 0.0),
            RadialBc::DirichletNeumann => (1.0, 0.0, 0.0, 1.0),
            RadialBc::NeumannDirichlet => (0.0, 1.0, 1.0, 0.0),
        };
        BoundaryCoefficients {
            alpha,
            beta,
            gamma,
            delta,
        }
    }
}

/// The change of variable `t = h(r)` and its inverse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialMap {
    pub n: u32,
    pub r1: f64,
}

impl RadialMap {
    pub fn h(&self, r: f64) -> f64 {
        match self.n {
            2 => (r / self.r1).ln(),
            n => {
                let k = 2.0 - n as f64;
                (self.r1.powf(k) - r.powf(k)) / (n as f64 - 2.0)
            }
        }
    }

    pub fn r_of_t(&self, t: f64) -> f64 {
        match self.n {
            2 => self.r1 * t.exp(),
            n => {
                let k = 2.0 - n as f64;
                (self.r1.powf(k) + k * t).powf(1.0 / k)
            }
        }
    }

    /// `r(t)` as an expression in `x`.
    pub fn r_expr(&self) -> Expr {
        let text = match self.n {
            2 => format!("{:?}*exp(x)", self.r1),
            n => {
                let k = 2.0 - n as f64;
                format!(
                    "({:?}-{:?}*x)^({:?})",
                    self.r1.powf(k),
                    n as f64 - 2.0,
                    1.0 / k
                )
            }
        };
        expr::parse(&text, "x").expect("generated expression parses")
    }

    /// `r(t)^{2(N−1)}` as an expression in `x`.
    pub fn jacobian_expr(&self) -> Expr {
        let text = format!("({})^{}", expr::print(&self.r_expr()), 2 * (self.n - 1));
        expr::parse(&text, "x").expect("generated expression parses")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialInterval {
    pub kind: IntervalKind,
    pub lo: f64,
    pub hi: f64,
    pub weight: Expr,
    pub nonlinearity: Expr,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnulusProblem {
    pub map: RadialMap,
    pub r2: f64,
    pub radial_bc: RadialBc,
    /// Non-empty intervals in `r`, aligned with the reduced problem's.
    pub intervals: Vec<RadialInterval>,
    reduced: Problem,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnnulus {
    #[serde(rename = "N")]
    n: u32,
    #[serde(rename = "R1")]
    r1: Value,
    #[serde(rename = "R2")]
    r2: Value,
    radial_bc: RadialBc,
    #[allow(dead_code)]
    intervals: Value,
    #[serde(default)]
    solver: SolverSettings,
}

fn number(v: &Value, what: &str) -> Result<f64, RadialError> {
    match v {
        Value::Number(n) => n
            .as_f64()
            .ok_or_else(|| RadialError::Schema(format!("{what}: not a number"))),
        Value::String(s) => {
            expr::parse_constant(s).map_err(|e| RadialError::Schema(format!("{what}: {e}")))
        }
        _ => Err(RadialError::Schema(format!("{what}: expected a number"))),
    }
}

impl AnnulusProblem {
    pub fn load(config_text: &str) -> Result<Self, RadialError> {
        let value: Value = serde_json::from_str(config_text)
            .map_err(|e| RadialError::Schema(format!("invalid JSON: {e}")))?;
        let raw: RawAnnulus = serde_json::from_value(value.clone())
            .map_err(|e| RadialError::Schema(e.to_string()))?;
        if raw.n < 2 {
            return Err(RadialError::Schema("N must be at least 2".into()));
        }
        let r1 = number(&raw.r1, "R1")?;
        let r2 = number(&raw.r2, "R2")?;
        if !(r1 > 0.0 && r1 < r2 && r2.is_finite()) {
            return Err(RadialError::Schema(format!(
                "need 0 < R1 < R2, got {r1}, {r2}"
            )));
        }
        let intervals_raw = value
            .get("intervals")
            .and_then(Value::as_array)
            .ok_or_else(|| RadialError::Schema("`intervals` must be an array".into()))?;
        let drafts = parse_intervals(intervals_raw, "r")?;
        Self::build(raw.n, r1, r2, raw.radial_bc, drafts, raw.solver)
    }

    fn build(
        n: u32,
        r1: f64,
        r2: f64,
        radial_bc: RadialBc,
        drafts: Vec<DraftInterval>,
        settings: SolverSettings,
    ) -> Result<Self, RadialError> {
        let map = RadialMap { n, r1 };
        let snap = 1e-12 * r2.max(1.0);
        let mut radial = Vec::new();
        let mut reduced_drafts = Vec::new();
        let last = drafts.len().saturating_sub(1);
        let r_expr = map.r_expr();
        let jac = map.jacobian_expr();
        for (k, d) in drafts.into_iter().enumerate() {
            // snap the outer radii so rounding in h does not break tiling
            let lo = if k == 0 && (d.lo - r1).abs() <= snap {
                r1
            } else {
                d.lo
            };
            let hi = if k == last && (d.hi - r2).abs() <= snap {
                r2
            } else {
                d.hi
            };
            let body = d.body.map(|(weight, nonlinearity, coefficient, limits)| {
                if hi > lo {
                    radial.push(RadialInterval {
                        kind: d.kind,
                        lo,
                        hi,
                        weight: weight.clone(),
                        nonlinearity: nonlinearity.clone(),
                        coefficient,
                    });
                }
                let reduced_weight = weight.compose(&r_expr).mul(&jac);
                (reduced_weight, nonlinearity, coefficient, limits)
            });
            let to_t = |r: f64| if r == r1 { 0.0 } else { map.h(r) };
            reduced_drafts.push(DraftInterval {
                kind: d.kind,
                lo: to_t(lo),
                hi: to_t(hi),
                body,
            });
        }
        let reduced = Problem::assemble(
            map.h(r2),
            radial_bc.coefficients(),
            reduced_drafts,
            settings,
        )?;
        let ap = Self {
            map,
            r2,
            radial_bc,
            intervals: radial,
            reduced,
        };
        ap.check_continuity()?;
        Ok(ap)
    }

    /// Classical solutions need `F` continuous in `r`; with opposite signs on
    /// adjacent intervals that means both weights vanish at each junction.
    fn check_continuity(&self) -> Result<(), RadialError> {
        for w in self.intervals.windows(2) {
            let r = w[0].hi;
            for iv in w {
                let value = iv.weight.eval_or_nan(r);
                let scale = (0..=64)
                    .map(|j| {
                        iv.weight
                            .eval_or_nan(iv.lo + (iv.hi - iv.lo) * j as f64 / 64.0)
                            .abs()
                    })
                    .fold(0.0, f64::max);
                if !(value.abs() <= 1e-9 * scale.max(1.0)) {
                    return Err(RadialError::Discontinuous { r, value });
                }
            }
        }
        Ok(())
    }

    /// Solver settings of the reduced problem.
    pub fn settings_mut(&mut self) -> &mut SolverSettings {
        self.reduced.settings_mut()
    }

    pub fn n(&self) -> u32 {
        self.map.n
    }

    pub fn r1(&self) -> f64 {
        self.map.r1
    }

    pub fn r2(&self) -> f64 {
        self.r2
    }

    /// `F(r, s)` extended by zero for `s ≤ 0`.
    pub fn f_radial(&self, r: f64, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let k = self
            .intervals
            .partition_point(|iv| iv.hi < r)
            .min(self.intervals.len() - 1);
        let iv = &self.intervals[k];
        let v = iv.coefficient * iv.weight.eval_or_nan(r) * iv.nonlinearity.eval_or_nan(s);
        match iv.kind {
            IntervalKind::Positive => v,
            IntervalKind::Negative => -v,
        }
    }
}

/// The one-dimensional problem and the coordinate map.
pub fn reduce(ap: &AnnulusProblem) -> (Problem, RadialMap) {
    (ap.reduced.clone(), ap.map)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialPoint {
    pub r: f64,
    pub u: f64,
    pub du: f64,
}

/// `U(r) = v(h(r))` and `U'(r) = v'(h(r))·r^{1−N}` on `n_grid` uniform
/// radii of `[R1, R2]`.
pub fn lift(v: &Trajectory, map: &RadialMap, r2: f64, n_grid: usize) -> Vec<RadialPoint> {
    let n_grid = n_grid.max(2);
    let r1 = map.r1;
    (0..n_grid)
        .map(|k| {
            let r = if k + 1 == n_grid {
                r2
            } else {
                r1 + (r2 - r1) * k as f64 / (n_grid - 1) as f64
            };
            let t = if k == 0 { 0.0 } else { map.h(r) };
            let (u, dv) = v.eval(t);
            RadialPoint {
                r,
                u,
                du: dv * r.powi(1 - map.n as i32),
            }
        })
        .collect()
}

/// `sup |(r^{N−1}U')' + r^{N−1}F(r, U)|` over interior radii, with the
/// derivative by central differences.
pub fn radial_residual(ap: &AnnulusProblem, profile: &[RadialPoint]) -> f64 {
    radial_residual_with(ap.n(), |r, s| ap.f_radial(r, s), profile)
}

pub fn radial_residual_with<F>(n: u32, f: F, profile: &[RadialPoint]) -> f64
where
    F: Fn(f64, f64) -> f64,
{
    let w = |p: &RadialPoint| p.r.powi(n as i32 - 1);
    profile
        .windows(3)
        .map(|t| {
            let dp = (w(&t[2]) * t[2].du - w(&t[0]) * t[0].du) / (t[2].r - t[0].r);
            (dp + w(&t[1]) * f(t[1].r, t[1].u)).abs()
        })
        .fold(0.0, f64::max)
}

pub const DEFAULT_RADIAL_GRID: usize = 20001;

#[derive(Debug, Clone, Serialize)]
pub struct RadialSolution {
    pub index: usize,
    pub subset: Option<Vec<usize>>,
    pub residual: f64,
    #[serde(skip)]
    pub profile: Vec<RadialPoint>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RadialReport {
    pub n: u32,
    #[serde(rename = "R1")]
    pub r1: f64,
    #[serde(rename = "R2")]
    pub r2: f64,
    #[serde(rename = "L")]
    pub length: f64,
    pub reduced: MultiplicityReport,
    pub profiles: Vec<RadialSolution>,
}

/// Reduces, solves and lifts every verified solution.
pub fn solve_annulus(ap: &AnnulusProblem, n_grid: usize) -> Result<RadialReport, RadialError> {
    let (p, map) = reduce(ap);
    let rep = solver::solve(&p)?;
    let profiles = rep
        .solutions
        .iter()
        .enumerate()
        .map(|(index, sol)| {
            let profile = lift(&sol.trajectory, &map, ap.r2, n_grid);
            RadialSolution {
                index,
                subset: sol.subset().map(<[usize]>::to_vec),
                residual: radial_residual(ap, &profile),
                profile,
            }
        })
        .collect();
    Ok(RadialReport {
        n: ap.n(),
        r1: ap.r1(),
        r2: ap.r2,
        length: p.length(),
        reduced: rep,
        profiles,
    })
}
