//! Shared numerical kernels.

pub mod banded;
pub mod ode;
pub mod quad;
pub mod roots;

pub use banded::{BandMatrix, SingularMatrix};
pub use ode::{integrate, IvpOptions, Piece, Point, Status, Tolerance, Trajectory};
pub use quad::{quad, quad_pieces, QuadError};
pub use roots::{
    brackets_from_samples, refine_root, refine_root_with, scan_brackets, Bracket, Root, RootError,
    RootTolerance,
};
