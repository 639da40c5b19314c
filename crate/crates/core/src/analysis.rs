//! Hypothesis checks and the explicit constants behind the trough
//! threshold `β*`.

use serde::Serialize;
use thiserror::Error;

use crate::eigen::{self, EigenError, EigenProblem, EndCondition, WeightPiece};
use crate::numerics::{quad, QuadError};
use crate::problem::{CoefficientSelector, IntervalSpec, Limit, Problem};
use crate::solver::{self, AprioriBound, SolveError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error("condition A fails on hump {hump}: alpha*g0 = {value} >= lambda0 = {lambda0}")]
    ConditionA {
        hump: usize,
        value: f64,
        lambda0: f64,
    },
    #[error("no admissible r found down to {smallest}")]
    NoSmallRadius { smallest: f64 },
    #[error("DEGENERATE_B_INTEGRAL: trough weight integrates to 0 next to hump {hump} ({side})")]
    DegenerateBIntegral { hump: usize, side: Side },
    #[error("R = {big_r} must exceed c*r/4 = {lower} and be finite")]
    BadBound { big_r: f64, lower: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Warn,
    Fail,
}

impl Verdict {
    fn worst(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
            (Verdict::Warn, _) | (_, Verdict::Warn) => Verdict::Warn,
            _ => Verdict::Pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub status: Verdict,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HumpNumbers {
    pub i: usize,
    pub lambda1: f64,
    pub alpha_g0: f64,
    pub alpha_ginf: f64,
}

/// A declared limit compared with sampled quotients `n(s)/s`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitCheck {
    pub interval: String,
    pub limit: &'static str,
    pub declared: f64,
    pub samples: Vec<(f64, f64)>,
    pub status: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub lambda0: f64,
    pub humps: Vec<HumpNumbers>,
    pub checks: Vec<Check>,
    pub limit_checks: Vec<LimitCheck>,
    pub warnings: Vec<String>,
    pub overall: Verdict,
}

impl HypothesisReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.status != Verdict::Fail)
    }
}

const SMALL: f64 = 1e-3;

fn spot_check(iv: &IntervalSpec, name: String, which: &'static str) -> LimitCheck {
    let (declared, ss): (Limit, [f64; 3]) = match which {
        "ginf" => (
            iv.limits.at_infinity.unwrap_or(Limit::Infinite),
            [1e3, 1e4, 1e5],
        ),
        _ => (iv.limits.at_zero, [1e-3, 1e-4, 1e-5]),
    };
    let samples: Vec<(f64, f64)> = ss
        .iter()
        .map(|&s| (s, iv.nonlinearity.eval_or_nan(s) / s))
        .collect();
    let closest = samples[2].1;
    let status = match declared {
        Limit::Infinite => {
            let increasing = samples.windows(2).all(|w| w[1].1 > w[0].1);
            if increasing {
                Verdict::Pass
            } else {
                Verdict::Warn
            }
        }
        Limit::Finite(d) => {
            if !closest.is_finite() {
                Verdict::Warn
            } else if d < SMALL && closest < SMALL {
                Verdict::Pass
            } else {
                let (lo, hi) = (d.min(closest), d.max(closest));
                if lo > 0.0 && hi / lo <= 2.0 {
                    Verdict::Pass
                } else {
                    Verdict::Warn
                }
            }
        }
    };
    LimitCheck {
        interval: name,
        limit: which,
        declared: declared.value(),
        samples,
        status,
    }
}

/// Evaluates the structural hypotheses and the two eigenvalue conditions
/// `αᵢg₀ⁱ < λ₀` and `αᵢg∞ⁱ > λ₁ⁱ`.
pub fn check_hypotheses(p: &Problem) -> Result<HypothesisReport, AnalysisError> {
    let lambda0 = eigen::lambda0(p)?.lambda;
    let m = p.hump_count();
    let mut humps = Vec::with_capacity(m);
    for i in 1..=m {
        let h = p.hump(i);
        humps.push(HumpNumbers {
            i,
            lambda1: eigen::lambda1(p, i)?.lambda,
            alpha_g0: h.coefficient * h.limits.at_zero.value(),
            alpha_ginf: h.coefficient * h.limits.at_infinity.map_or(f64::INFINITY, Limit::value),
        });
    }

    let mut checks = Vec::new();
    checks.push(Check {
        name: "h1",
        status: if p.warnings().is_empty() {
            Verdict::Pass
        } else {
            Verdict::Warn
        },
        detail: format!(
            "{m} humps, {} non-empty troughs",
            (0..=m).filter(|&j| p.trough(j).is_some()).count()
        ),
    });
    checks.push(Check {
        name: "h2",
        status: Verdict::Pass,
        detail: "every nonlinearity vanishes at 0 and is positive on sampled s > 0".into(),
    });
    let mut h3 = Vec::new();
    for i in 1..=m {
        let l = p.hump(i).limits;
        if l.at_zero == Limit::Infinite {
            h3.push(format!("g0 of hump {i} is infinite"));
        }
        if l.at_infinity.map_or(0.0, Limit::value) <= 0.0 {
            h3.push(format!("ginf of hump {i} is not positive"));
        }
    }
    for j in 0..=m {
        if let Some(t) = p.trough(j) {
            if t.limits.at_zero == Limit::Infinite {
                h3.push(format!("k0 of trough {j} is infinite"));
            }
        }
    }
    checks.push(Check {
        name: "h3",
        status: if h3.is_empty() {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
        detail: if h3.is_empty() {
            "g0 < inf, ginf > 0, k0 < inf".into()
        } else {
            h3.join("; ")
        },
    });
    let fail_a: Vec<String> = humps
        .iter()
        .filter(|h| !(h.alpha_g0 < lambda0))
        .map(|h| format!("hump {}: {} >= {}", h.i, h.alpha_g0, lambda0))
        .collect();
    checks.push(Check {
        name: "cond_A",
        status: if fail_a.is_empty() {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
        detail: if fail_a.is_empty() {
            format!("alpha_i*g0_i < lambda0 = {lambda0}")
        } else {
            fail_a.join("; ")
        },
    });
    let fail_b: Vec<String> = humps
        .iter()
        .filter(|h| !(h.alpha_ginf > h.lambda1))
        .map(|h| format!("hump {}: {} <= {}", h.i, h.alpha_ginf, h.lambda1))
        .collect();
    checks.push(Check {
        name: "cond_B",
        status: if fail_b.is_empty() {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
        detail: if fail_b.is_empty() {
            "alpha_i*ginf_i > lambda1_i".into()
        } else {
            fail_b.join("; ")
        },
    });

    let mut limit_checks = Vec::new();
    for i in 1..=m {
        let h = p.hump(i);
        limit_checks.push(spot_check(h, format!("I{i}"), "g0"));
        limit_checks.push(spot_check(h, format!("I{i}"), "ginf"));
    }
    for j in 0..=m {
        if let Some(t) = p.trough(j) {
            limit_checks.push(spot_check(t, format!("J{j}"), "k0"));
        }
    }
    let limits_verdict = limit_checks
        .iter()
        .fold(Verdict::Pass, |v, c| v.worst(c.status));
    checks.push(Check {
        name: "limits",
        status: limits_verdict,
        detail: "declared limits against sampled quotients".into(),
    });

    let overall = checks.iter().fold(Verdict::Pass, |v, c| v.worst(c.status));
    Ok(HypothesisReport {
        lambda0,
        humps,
        checks,
        limit_checks,
        warnings: p.warnings().to_vec(),
        overall,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmallRadius {
    pub lambda0: f64,
    pub rho: Vec<f64>,
    pub r: f64,
}

const R_GRID_STEPS_PER_OCTAVE: i32 = 16;
const R_GRID_MAX_STEPS: i32 = 16 * 64;
const QUOTIENT_SAMPLES: usize = 256;
const QUOTIENT_DECADES: f64 = 10.0;

/// Log samples of `(0, r]`: ten decades down from `r`.
pub fn quotient_samples(r: f64) -> impl Iterator<Item = f64> {
    (0..QUOTIENT_SAMPLES)
        .map(move |j| r * 10f64.powf(-QUOTIENT_DECADES * j as f64 / (QUOTIENT_SAMPLES - 1) as f64))
}

/// `ρᵢ = (λ₀ − αᵢg₀ⁱ)/2` and the first `r` on the grid `r₀·2^(−k/16)` with
/// `αᵢ gᵢ(s)/s < λ₀ − ρᵢ` on sampled `(0, r]` for every hump.
pub fn small_radius(p: &Problem) -> Result<SmallRadius, AnalysisError> {
    let lambda0 = eigen::lambda0(p)?.lambda;
    small_radius_with(p, lambda0)
}

pub fn small_radius_with(p: &Problem, lambda0: f64) -> Result<SmallRadius, AnalysisError> {
    let m = p.hump_count();
    let mut rho = Vec::with_capacity(m);
    for i in 1..=m {
        let h = p.hump(i);
        let value = h.coefficient * h.limits.at_zero.value();
        if !(value < lambda0) {
            return Err(AnalysisError::ConditionA {
                hump: i,
                value,
                lambda0,
            });
        }
        rho.push((lambda0 - value) / 2.0);
    }
    let bounds: Vec<f64> = rho.iter().map(|r| lambda0 - r).collect();
    let r = grid_radius(p, &bounds)?;
    Ok(SmallRadius { lambda0, rho, r })
}

/// First `r` on the grid `r₀·2^(−k/16)` with `αᵢ gᵢ(s)/s < bounds[i]` on
/// sampled `(0, r]` for every hump.
fn grid_radius(p: &Problem, bounds: &[f64]) -> Result<f64, AnalysisError> {
    let r0 = p.settings().r0;
    let admissible = |r: f64| {
        bounds.iter().enumerate().all(|(k, &bound)| {
            let h = p.hump(k + 1);
            quotient_samples(r).all(|s| h.coefficient * h.nonlinearity.eval_or_nan(s) / s < bound)
        })
    };
    (0..=R_GRID_MAX_STEPS)
        .map(|k| r0 * 2f64.powf(-(k as f64) / R_GRID_STEPS_PER_OCTAVE as f64))
        .find(|&r| admissible(r))
        .ok_or(AnalysisError::NoSmallRadius {
            smallest: r0 * 2f64.powi(-R_GRID_MAX_STEPS / R_GRID_STEPS_PER_OCTAVE),
        })
}

/// Default classification threshold: the largest grid `r` with
/// `αᵢ gᵢ(s)/s < λ₀` on sampled `(0, r]`, i.e. the small-radius rule with
/// `ρᵢ → 0`. Any such `r` separates the classes; the proof's `r` (with
/// `ρᵢ` at half the gap) is smaller and can merge them.
pub fn classification_radius(p: &Problem) -> Result<f64, AnalysisError> {
    let lambda0 = eigen::lambda0(p)?.lambda;
    for i in 1..=p.hump_count() {
        let h = p.hump(i);
        let value = h.coefficient * h.limits.at_zero.value();
        if !(value < lambda0) {
            return Err(AnalysisError::ConditionA {
                hump: i,
                value,
                lambda0,
            });
        }
    }
    grid_radius(p, &vec![lambda0; p.hump_count()])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SideConstants {
    pub nu: f64,
    pub delta: f64,
    /// `∫∫ b` over the `δ` window next to the hump.
    pub b_integral: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HumpConstants {
    #[serde(rename = "l")]
    pub index: usize,
    #[serde(rename = "rho_l")]
    pub rho: f64,
    #[serde(rename = "M_l")]
    pub m: f64,
    #[serde(rename = "eta_l1")]
    pub eta_l1: f64,
    #[serde(rename = "c_l")]
    pub c: f64,
    /// `λ₁ˡ` with Dirichlet conditions on `Iℓ` and `‖φℓ′‖∞`.
    pub lambda1_dirichlet: f64,
    pub dphi_sup: f64,
    pub nu_l_left: Option<f64>,
    pub nu_l_right: Option<f64>,
    pub delta_l_minus: Option<f64>,
    pub delta_l_plus: Option<f64>,
    pub beta_l_minus: Option<f64>,
    pub beta_l_plus: Option<f64>,
    #[serde(skip)]
    pub left: Option<SideConstants>,
    #[serde(skip)]
    pub right: Option<SideConstants>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RPolicy {
    Fixed { value: f64 },
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProofConstants {
    pub lambda0: f64,
    pub rho_i: Vec<f64>,
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    #[serde(rename = "R_policy")]
    pub r_policy: RPolicy,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_priori: Option<AprioriBound>,
    pub humps: Vec<HumpConstants>,
    pub beta_star: Option<f64>,
    pub note: &'static str,
}

pub const EMPIRICAL_NOTE: &str = "R is a numerical estimate of the a priori bound, so beta_star \
     is an empirical sufficient threshold rather than a certified one";

const NU_SAMPLES: usize = 1024;
const GMAX_SAMPLES: usize = 1024;
const QUAD_TOL: f64 = 1e-12;

/// `min k` over `[lo, hi]` on 1024 log-spaced samples including both ends.
pub fn nu(k: &IntervalSpec, lo: f64, hi: f64) -> f64 {
    let ratio = (hi / lo).ln();
    (0..NU_SAMPLES)
        .map(|j| {
            let s = if j + 1 == NU_SAMPLES {
                hi
            } else {
                lo * (ratio * j as f64 / (NU_SAMPLES - 1) as f64).exp()
            };
            k.nonlinearity.eval_or_nan(s)
        })
        .fold(f64::INFINITY, f64::min)
}

/// `max g` over `[0, r]` on uniform samples.
fn g_max(h: &IntervalSpec, r: f64) -> f64 {
    (0..=GMAX_SAMPLES)
        .map(|j| {
            h.nonlinearity
                .eval_or_nan(r * j as f64 / GMAX_SAMPLES as f64)
        })
        .fold(0.0, f64::max)
}

/// `cℓ` with the Dirichlet eigenfunction of `aℓ` on `Iℓ`. Returns
/// `(c, λ, ‖φ′‖∞)`.
pub fn c_l(p: &Problem, l: usize, rho: f64) -> Result<(f64, f64, f64), AnalysisError> {
    let h = p.hump(l);
    let ep = EigenProblem::new(
        h.lo,
        h.hi,
        vec![WeightPiece {
            lo: h.lo,
            hi: h.hi,
            expr: h.weight.clone(),
            scale: 1.0,
        }],
        EndCondition::DIRICHLET,
        EndCondition::DIRICHLET,
    );
    let e = eigen::first_eigenvalue(&ep, 1e-10)?;
    let (s, t) = (h.lo, h.hi);
    let mid = 0.5 * (s + t);
    let integral = quad(
        |x| (x - s).min(t - x) * h.weight.eval_or_nan(x) * e.eigenfunction.eval(x).0,
        s,
        t,
        QUAD_TOL,
        &[mid],
    )?;
    Ok((
        rho / ((t - s) * e.dphi_sup) * integral,
        e.lambda,
        e.dphi_sup,
    ))
}

#[allow(clippy::too_many_arguments)]
fn side_constants(
    p: &Problem,
    trough: &IntervalSpec,
    side: Side,
    hump: usize,
    c: f64,
    r: f64,
    m_l: f64,
    big_r: f64,
) -> Result<SideConstants, AnalysisError> {
    let lower = c * r / 4.0;
    let nu = nu(trough, lower, big_r);
    let delta = trough.len().min(c * r / (4.0 * m_l));
    let b = |x: f64| trough.weight.eval_or_nan(x);
    let b_integral = match side {
        Side::Right => {
            let (a, e) = (trough.lo, trough.lo + delta);
            quad(|x| (e - x) * b(x), a, e, QUAD_TOL * delta * delta, &[])?
        }
        Side::Left => {
            let (a, e) = (trough.hi - delta, trough.hi);
            quad(|x| (x - a) * b(x), a, e, QUAD_TOL * delta * delta, &[])?
        }
    };
    if !(b_integral > 0.0) {
        return Err(AnalysisError::DegenerateBIntegral { hump, side });
    }
    let beta = (big_r + m_l * p.length()) / (nu * b_integral);
    Ok(SideConstants {
        nu,
        delta,
        b_integral,
        beta,
    })
}

/// The constant ledger for a given `r` and `R`.
pub fn proof_constants_with(
    p: &Problem,
    small: &SmallRadius,
    big_r: f64,
    r_policy: RPolicy,
) -> Result<ProofConstants, AnalysisError> {
    let r = small.r;
    let mut humps = Vec::new();
    for l in 1..=p.hump_count() {
        let h = p.hump(l);
        let rho = small.rho[l - 1];
        let integral_a = quad(|x| h.weight.eval_or_nan(x), h.lo, h.hi, QUAD_TOL, &[])?;
        let eta_l1 = h.coefficient * g_max(h, r) * integral_a;
        let m_l = r / h.len() + eta_l1;
        let (c, lambda1_dirichlet, dphi_sup) = c_l(p, l, rho)?;
        if !(big_r > c * r / 4.0) || !big_r.is_finite() {
            return Err(AnalysisError::BadBound {
                big_r,
                lower: c * r / 4.0,
            });
        }
        let left = p
            .trough(l - 1)
            .map(|t| side_constants(p, t, Side::Left, l, c, r, m_l, big_r))
            .transpose()?;
        let right = p
            .trough(l)
            .map(|t| side_constants(p, t, Side::Right, l, c, r, m_l, big_r))
            .transpose()?;
        humps.push(HumpConstants {
            index: l,
            rho,
            m: m_l,
            eta_l1,
            c,
            lambda1_dirichlet,
            dphi_sup,
            nu_l_left: left.map(|s| s.nu),
            nu_l_right: right.map(|s| s.nu),
            delta_l_minus: left.map(|s| s.delta),
            delta_l_plus: right.map(|s| s.delta),
            beta_l_minus: left.map(|s| s.beta),
            beta_l_plus: right.map(|s| s.beta),
            left,
            right,
        });
    }
    let beta_star = humps
        .iter()
        .flat_map(|h| [h.beta_l_minus, h.beta_l_plus])
        .flatten()
        .reduce(f64::max);
    Ok(ProofConstants {
        lambda0: small.lambda0,
        rho_i: small.rho.clone(),
        r,
        big_r,
        r_policy,
        a_priori: None,
        humps,
        beta_star,
        note: EMPIRICAL_NOTE,
    })
}

/// The full ledger: `r` from the small-radius search, `R` fixed or from a
/// coarse shooting scan.
pub fn proof_constants(p: &Problem, r_policy: RPolicy) -> Result<ProofConstants, AnalysisError> {
    let small = small_radius(p)?;
    let (big_r, a_priori) = match r_policy {
        RPolicy::Fixed { value } => (value, None),
        RPolicy::Auto => {
            let b = solver::a_priori_bound(p);
            (b.big_r, Some(b))
        }
    };
    let mut out = proof_constants_with(p, &small, big_r, r_policy)?;
    out.a_priori = a_priori;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub ok: bool,
    pub error: Option<String>,
    pub count: usize,
    pub complete: bool,
    pub covered: Vec<Vec<usize>>,
}

/// Re-solves with the selected coefficient set to each value.
pub fn sweep(p: &Problem, target: CoefficientSelector, values: &[f64]) -> Vec<SweepRow> {
    values
        .iter()
        .map(|&value| {
            let q = p.with_coefficient(target, value);
            match solver::solve(&q) {
                Ok(rep) => SweepRow {
                    value,
                    ok: true,
                    error: None,
                    count: rep.count,
                    complete: rep.complete,
                    covered: rep.covered(),
                },
                Err(e) => failed_row(value, e),
            }
        })
        .collect()
}

fn failed_row(value: f64, e: SolveError) -> SweepRow {
    SweepRow {
        value,
        ok: false,
        error: Some(e.to_string()),
        count: 0,
        complete: false,
        covered: Vec::new(),
    }
}
