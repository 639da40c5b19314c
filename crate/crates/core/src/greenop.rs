//! Green's function of `−u'' = w` under the problem's boundary conditions
//! and the fixed-point operator `Φu = ∫ G(·, ξ) f̃(ξ, u(ξ)) dξ`, used to
//! cross-check solutions found by shooting.

use rayon::prelude::*;
use thiserror::Error;

use crate::numerics::{quad_pieces, Piece, QuadError, Trajectory};
use crate::problem::{BoundaryCoefficients, Problem};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GreenError {
    #[error("({x}, {s}) outside [0, L]²")]
    OutOfDomain { x: f64, s: f64 },
    #[error("boundary coefficients give a zero denominator")]
    Degenerate,
    #[error("trajectory does not reach x = L")]
    Incomplete,
    #[error(transparent)]
    Quad(#[from] QuadError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenKernel {
    bc: BoundaryCoefficients,
    length: f64,
    denom: f64,
}

impl GreenKernel {
    pub fn new(bc: BoundaryCoefficients, length: f64) -> Result<Self, GreenError> {
        let denom = bc.denominator(length);
        if !(denom > 0.0) {
            return Err(GreenError::Degenerate);
        }
        Ok(Self { bc, length, denom })
    }

    pub fn for_problem(p: &Problem) -> Self {
        Self::new(p.bc(), p.length()).expect("validated problems have a positive denominator")
    }

    pub fn denominator(&self) -> f64 {
        self.denom
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn green(&self, x: f64, s: f64) -> Result<f64, GreenError> {
        let l = self.length;
        if !(0.0..=l).contains(&x) || !(0.0..=l).contains(&s) {
            return Err(GreenError::OutOfDomain { x, s });
        }
        Ok(self.green_unchecked(x, s))
    }

    #[inline]
    fn green_unchecked(&self, x: f64, s: f64) -> f64 {
        let (lo, hi) = if x <= s { (x, s) } else { (s, x) };
        let b = &self.bc;
        (b.beta + b.alpha * lo) * (b.delta + b.gamma * (self.length - hi)) / self.denom
    }

    /// `∫₀ᴸ G(x, ξ) w(ξ) dξ` with the integrand split at `x` and at
    /// `breakpoints`.
    pub fn apply<W>(&self, w: W, x: f64, breakpoints: &[f64], tol: f64) -> Result<f64, GreenError>
    where
        W: Fn(&Piece, f64) -> f64,
    {
        let mut cuts = breakpoints.to_vec();
        cuts.push(x);
        cuts.sort_by(f64::total_cmp);
        let w = &w;
        Ok(quad_pieces(
            |piece, xi| self.green_unchecked(x, xi) * w(piece, xi),
            0.0,
            self.length,
            tol,
            &cuts,
        )?)
    }
}

/// `G(x, s)` for `0 ≤ x, s ≤ L`.
pub fn green(k: &GreenKernel, x: f64, s: f64) -> Result<f64, GreenError> {
    k.green(x, s)
}

pub const GRID_UNIFORM_POINTS: usize = 512;

/// Interval boundaries plus 512 uniform points of `[0, L]`, sorted.
pub fn verification_grid(p: &Problem) -> Vec<f64> {
    let l = p.length();
    let n = GRID_UNIFORM_POINTS;
    let mut xs: Vec<f64> = (0..n)
        .map(|j| {
            if j + 1 == n {
                l
            } else {
                l * j as f64 / (n - 1) as f64
            }
        })
        .collect();
    xs.extend(p.breakpoints());
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

/// `(x, (Φu)(x))` on the verification grid.
pub fn apply_phi<U>(p: &Problem, u: U, quad_tol: f64) -> Result<Vec<(f64, f64)>, GreenError>
where
    U: Fn(f64) -> f64 + Sync,
{
    let kernel = GreenKernel::for_problem(p);
    let bps = p.breakpoints();
    let forcing = |piece: &Piece, xi: f64| {
        let k = p.interval_for_piece(piece);
        p.f_extended_in(k, xi, u(xi))
    };
    verification_grid(p)
        .into_par_iter()
        .map(|x| Ok((x, kernel.apply(forcing, x, &bps, quad_tol)?)))
        .collect()
}

/// `sup |u − Φu|` over the verification grid.
pub fn phi_residual(p: &Problem, u: &Trajectory, quad_tol: f64) -> Result<f64, GreenError> {
    if !u.reached_end() || u.x_end() < p.length() {
        return Err(GreenError::Incomplete);
    }
    phi_residual_with(p, |x| u.eval(x).0, quad_tol)
}

/// [`phi_residual`] for any evaluator of `u` on `[0, L]`.
pub fn phi_residual_with<U>(p: &Problem, u: U, quad_tol: f64) -> Result<f64, GreenError>
where
    U: Fn(f64) -> f64 + Sync,
{
    let phi = apply_phi(p, &u, quad_tol)?;
    Ok(phi
        .iter()
        .map(|&(x, v)| (u(x) - v).abs())
        .fold(0.0, f64::max))
}
