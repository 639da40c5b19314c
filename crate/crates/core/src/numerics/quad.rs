//! Adaptive Simpson quadrature on panels split at breakpoints.

use thiserror::Error;

use super::ode::Piece;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("non-finite integrand value {value} at x = {x}")]
    NonFinite { x: f64, value: f64 },
    #[error("invalid interval [{a}, {b}]")]
    BadInterval { a: f64, b: f64 },
}

const MAX_DEPTH: u32 = 50;

/// `∫_a^b f` with absolute error estimated below `tol`.
pub fn quad<F>(f: F, a: f64, b: f64, tol: f64, breakpoints: &[f64]) -> Result<f64, QuadError>
where
    F: Fn(f64) -> f64,
{
    quad_pieces(|_, x| f(x), a, b, tol, breakpoints)
}

/// Like [`quad`], but the integrand learns which panel it is being sampled
/// on, so piecewise integrands get the right branch at shared endpoints.
pub fn quad_pieces<F>(f: F, a: f64, b: f64, tol: f64, breakpoints: &[f64]) -> Result<f64, QuadError>
where
    F: Fn(&Piece, f64) -> f64,
{
    if !(a <= b) {
        return Err(QuadError::BadInterval { a, b });
    }
    if a == b {
        return Ok(0.0);
    }
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&c| c > a && c < b)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.push(b);

    let mut total = 0.0;
    let mut lo = a;
    for (index, &hi) in cuts.iter().enumerate() {
        let piece = Piece { index, lo, hi };
        let g = |x: f64| -> Result<f64, QuadError> {
            let v = f(&piece, x);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(QuadError::NonFinite { x, value: v })
            }
        };
        let panel_tol = tol * (hi - lo) / (b - a);
        total += simpson_panel(&g, lo, hi, panel_tol)?;
        lo = hi;
    }
    Ok(total)
}

fn simpson_panel<G>(g: &G, a: f64, b: f64, tol: f64) -> Result<f64, QuadError>
where
    G: Fn(f64) -> Result<f64, QuadError>,
{
    let fa = g(a)?;
    let fb = g(b)?;
    let m = 0.5 * (a + b);
    let fm = g(m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    refine(g, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn refine<G>(
    g: &G,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64, QuadError>
where
    G: Fn(f64) -> Result<f64, QuadError>,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = g(lm)?;
    let frm = g(rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let halves = left + right;
    let diff = halves - whole;
    // two levels minimum so a coincidental match on the first split is not trusted
    if depth == 0 || (depth < MAX_DEPTH - 1 && diff.abs() <= 15.0 * tol) || m <= a || m >= b {
        return Ok(halves + diff / 15.0);
    }
    Ok(refine(g, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + refine(g, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}
