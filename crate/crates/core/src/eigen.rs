//! First eigenvalues of `φ'' + λ w(x) φ = 0` with Sturm–Liouville endpoint
//! conditions, by shooting on the Prüfer angle.

use thiserror::Error;

use crate::expr::Expr;
use crate::numerics::{
    integrate, refine_root_with, Bracket, IvpOptions, Piece, RootTolerance, Status, Tolerance,
    Trajectory,
};
use crate::problem::{BoundaryCoefficients, Problem};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EigenError {
    #[error("NO_EIGENVALUE_FOUND: no eigenvalue below {lambda_max}")]
    NoEigenvalueFound { lambda_max: f64 },
    #[error("invalid eigenvalue problem: {0}")]
    Invalid(String),
    #[error("eigenfunction has {zeros} interior zeros")]
    NotFirst { zeros: usize },
    #[error("integration failed at lambda = {lambda}")]
    Integration { lambda: f64 },
}

/// `c φ − d φ'` at the left end, `c φ + d φ'` at the right end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndCondition {
    pub c: f64,
    pub d: f64,
}

impl EndCondition {
    pub const DIRICHLET: Self = Self { c: 1.0, d: 0.0 };
    pub const NEUMANN: Self = Self { c: 0.0, d: 1.0 };
}

/// A weight `scale · expr(x)` on `[lo, hi]`, zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightPiece {
    pub lo: f64,
    pub hi: f64,
    pub expr: Expr,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenProblem {
    pub a: f64,
    pub b: f64,
    pub weight: Vec<WeightPiece>,
    pub left: EndCondition,
    pub right: EndCondition,
    pub lambda_max: f64,
}

#[derive(Debug, Clone)]
pub struct EigenResult {
    pub lambda: f64,
    /// Non-negative, with `‖φ‖∞ = 1`.
    pub eigenfunction: Trajectory,
    pub dphi_sup: f64,
}

const DENSE_SAMPLES: usize = 16;

impl EigenProblem {
    pub fn new(
        a: f64,
        b: f64,
        weight: Vec<WeightPiece>,
        left: EndCondition,
        right: EndCondition,
    ) -> Self {
        Self {
            a,
            b,
            weight,
            left,
            right,
            lambda_max: 1e8,
        }
    }

    /// Constant weight `c` on the whole domain.
    pub fn constant(a: f64, b: f64, c: f64, left: EndCondition, right: EndCondition) -> Self {
        let one = crate::expr::parse("1", "x").expect("literal parses");
        Self::new(
            a,
            b,
            vec![WeightPiece {
                lo: a,
                hi: b,
                expr: one,
                scale: c,
            }],
            left,
            right,
        )
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut bps: Vec<f64> = self
            .weight
            .iter()
            .flat_map(|w| [w.lo, w.hi])
            .filter(|&x| x > self.a && x < self.b)
            .collect();
        bps.sort_by(f64::total_cmp);
        bps.dedup();
        bps
    }

    /// Weight on the piece containing `piece`'s midpoint.
    #[inline]
    pub fn weight_on(&self, piece: &Piece, x: f64) -> f64 {
        let m = piece.mid();
        self.weight
            .iter()
            .filter(|w| w.lo <= m && m <= w.hi)
            .map(|w| w.scale * w.expr.eval_or_nan(x))
            .sum()
    }

    pub fn weight_at(&self, x: f64) -> f64 {
        self.weight
            .iter()
            .filter(|w| w.lo <= x && x <= w.hi)
            .map(|w| w.scale * w.expr.eval_or_nan(x))
            .fold(0.0, f64::max)
    }

    fn validate(&self) -> Result<(), EigenError> {
        if !(self.a < self.b) {
            return Err(EigenError::Invalid(format!(
                "empty domain [{}, {}]",
                self.a, self.b
            )));
        }
        for e in [self.left, self.right] {
            if !(e.c >= 0.0 && e.d >= 0.0) || e.c == 0.0 && e.d == 0.0 {
                return Err(EigenError::Invalid("bad endpoint condition".into()));
            }
        }
        if self.left.c == 0.0 && self.right.c == 0.0 {
            return Err(EigenError::Invalid(
                "Neumann at both ends has eigenvalue 0".into(),
            ));
        }
        if self.weight.is_empty() {
            return Err(EigenError::Invalid("no weight".into()));
        }
        Ok(())
    }

    fn options() -> IvpOptions {
        IvpOptions {
            tol: Tolerance {
                abs: 1e-13,
                rel: 1e-12,
            },
            blow_cap: 1e100,
            ..IvpOptions::default()
        }
    }

    /// Solution of the initial value problem for a given `λ`.
    pub fn shoot(&self, lambda: f64) -> Trajectory {
        let m = self.left.c.max(self.left.d);
        integrate(
            |piece, x, u, _| -lambda * self.weight_on(piece, x) * u,
            self.a,
            self.b,
            (self.left.d / m, self.left.c / m),
            &self.breakpoints(),
            &Self::options(),
        )
    }

    fn start_angle(&self) -> f64 {
        self.left.d.atan2(self.left.c)
    }

    fn target_angle(&self) -> f64 {
        std::f64::consts::PI - self.right.d.atan2(self.right.c)
    }

    /// Continuous Prüfer angle `atan2(φ, φ')` at `b`.
    fn end_angle(&self, lambda: f64) -> Result<f64, EigenError> {
        let t = self.shoot(lambda);
        if !matches!(t.status(), Status::Completed | Status::WentNegative { .. }) {
            return Err(EigenError::Integration { lambda });
        }
        let mut theta = self.start_angle();
        let mut prev = theta;
        for p in t.sample(4).iter().skip(1) {
            let raw = p.u.atan2(p.du);
            let mut step = raw - prev;
            step -= (step / std::f64::consts::TAU).round() * std::f64::consts::TAU;
            theta += step;
            prev = raw;
        }
        Ok(theta)
    }
}

/// Smallest positive eigenvalue with a non-negative, sup-normalized
/// eigenfunction.
pub fn first_eigenvalue(ep: &EigenProblem, tol: f64) -> Result<EigenResult, EigenError> {
    ep.validate()?;
    let target = ep.target_angle();
    let objective = |lambda: f64| ep.end_angle(lambda).map(|t| t - target).unwrap_or(f64::NAN);

    let mut lo = 0.0;
    let mut f_lo = objective(0.0);
    let mut hi = tol.max(1e-12);
    let mut f_hi = objective(hi);
    while !(f_hi > 0.0) {
        if f_hi.is_nan() {
            return Err(EigenError::Integration { lambda: hi });
        }
        lo = hi;
        f_lo = f_hi;
        hi *= 2.0;
        if hi > ep.lambda_max {
            return Err(EigenError::NoEigenvalueFound {
                lambda_max: ep.lambda_max,
            });
        }
        f_hi = objective(hi);
    }
    let root = refine_root_with(
        objective,
        &Bracket { lo, hi, f_lo, f_hi },
        RootTolerance {
            x: 1e-3 * tol * hi.max(1.0),
            f: 1e-11,
            max_iter: 400,
        },
    )
    .map_err(|_| EigenError::Integration { lambda: hi })?;
    let lambda = root.x;

    let raw = ep.shoot(lambda);
    let samples = raw.sample(DENSE_SAMPLES);
    let interior_zeros = samples
        .windows(2)
        .filter(|w| w[0].x > ep.a && w[1].x < ep.b && (w[0].u > 0.0) != (w[1].u > 0.0))
        .count();
    if interior_zeros > 0 {
        return Err(EigenError::NotFirst {
            zeros: interior_zeros,
        });
    }
    let sup = samples.iter().map(|p| p.u.abs()).fold(0.0, f64::max);
    let phi = raw.scaled(1.0 / sup);
    let dphi_sup = phi
        .sample(DENSE_SAMPLES)
        .iter()
        .map(|p| p.du.abs())
        .fold(0.0, f64::max);
    Ok(EigenResult {
        lambda,
        eigenfunction: phi,
        dphi_sup,
    })
}

const TOL: f64 = 1e-10;

fn hump_pieces(p: &Problem, humps: impl Iterator<Item = usize>) -> Vec<WeightPiece> {
    humps
        .map(|i| {
            let h = p.hump(i);
            WeightPiece {
                lo: h.lo,
                hi: h.hi,
                expr: h.weight.clone(),
                scale: 1.0,
            }
        })
        .collect()
}

fn left_of(bc: BoundaryCoefficients) -> EndCondition {
    EndCondition {
        c: bc.alpha,
        d: bc.beta,
    }
}

fn right_of(bc: BoundaryCoefficients) -> EndCondition {
    EndCondition {
        c: bc.gamma,
        d: bc.delta,
    }
}

/// `λ₀`: weight `Σ aᵢ` on `[0, L]` with the problem's own conditions.
pub fn lambda0(p: &Problem) -> Result<EigenResult, EigenError> {
    let ep = EigenProblem::new(
        0.0,
        p.length(),
        hump_pieces(p, 1..=p.hump_count()),
        left_of(p.bc()),
        right_of(p.bc()),
    );
    first_eigenvalue(&ep, TOL)
}

/// The eigenvalue problem behind `λ₁ⁱ`: weight `aᵢ` on `Iᵢ`, Dirichlet at
/// interior endpoints, the problem's own condition where `Iᵢ` touches `0` or
/// `L`.
pub fn lambda1_problem(p: &Problem, i: usize) -> EigenProblem {
    let h = p.hump(i);
    let left = if i == 1 && h.lo == 0.0 {
        left_of(p.bc())
    } else {
        EndCondition::DIRICHLET
    };
    let right = if i == p.hump_count() && h.hi == p.length() {
        right_of(p.bc())
    } else {
        EndCondition::DIRICHLET
    };
    EigenProblem::new(h.lo, h.hi, hump_pieces(p, std::iter::once(i)), left, right)
}

/// `λ₁ⁱ` for hump `i` (1-based).
pub fn lambda1(p: &Problem, i: usize) -> Result<EigenResult, EigenError> {
    first_eigenvalue(&lambda1_problem(p, i), TOL)
}

/// `μ₁(q)` with Dirichlet conditions on `[a, b]`.
pub fn mu1_dirichlet(a: f64, b: f64, weight: Vec<WeightPiece>) -> Result<EigenResult, EigenError> {
    let ep = EigenProblem::new(
        a,
        b,
        weight,
        EndCondition::DIRICHLET,
        EndCondition::DIRICHLET,
    );
    first_eigenvalue(&ep, TOL)
}
