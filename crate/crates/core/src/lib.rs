//! Multiple positive solutions of indefinite Sturm–Liouville boundary value
//! problems `u'' + f(x, u) = 0` whose right-hand side alternates between
//! positive humps and negative troughs.
//!
//! The pipeline is: [`problem::Problem::load`] a configuration, check the
//! eigenvalue conditions and compute the threshold constants with
//! [`analysis`], then find and classify solutions with [`solver`]. Radial
//! solutions on annuli go through [`radial`].

// `!(a < b)` is used on purpose so that NaN fails every check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod eigen;
pub mod expr;
pub mod greenop;
pub mod numerics;
pub mod problem;
pub mod radial;
pub mod solver;

pub use problem::{BoundaryCoefficients, IntervalKind, IntervalSpec, Problem, ProblemError};
