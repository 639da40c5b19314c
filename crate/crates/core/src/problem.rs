//! Boundary value problem data: interval partition, weights, nonlinearities
//! and Sturm–Liouville boundary coefficients.
//!
//! The equation is `u'' + f(x, u) = 0` on `[0, L]` with
//! `α u(0) − β u'(0) = 0`, `γ u(L) + δ u'(L) = 0`, where on a hump interval
//! `Iᵢ` we have `f = αᵢ aᵢ(x) gᵢ(s)` and on a trough interval `Jⱼ` we have
//! `f = −βⱼ bⱼ(x) kⱼ(s)`.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::expr::{self, Expr};
use crate::numerics::{quad, Piece};
use crate::solver::SolverSettings;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("NON_TILING: {0}")]
    NonTiling(String),
    #[error("NON_ALTERNATING: {0}")]
    NonAlternating(String),
    #[error("NEGATIVE_WEIGHT: {0}")]
    NegativeWeight(String),
    #[error("ZERO_WEIGHT: {0}")]
    ZeroWeight(String),
    #[error("NONLINEARITY_SIGN: {0}")]
    NonlinearitySign(String),
    #[error("DEGENERATE_BC: {0}")]
    DegenerateBc(String),
    #[error("x = {0} outside [0, L]")]
    OutOfDomain(f64),
}

impl ProblemError {
    pub fn code(&self) -> &'static str {
        match self {
            ProblemError::Schema(_) => "SCHEMA",
            ProblemError::NonTiling(_) => "NON_TILING",
            ProblemError::NonAlternating(_) => "NON_ALTERNATING",
            ProblemError::NegativeWeight(_) => "NEGATIVE_WEIGHT",
            ProblemError::ZeroWeight(_) => "ZERO_WEIGHT",
            ProblemError::NonlinearitySign(_) => "NONLINEARITY_SIGN",
            ProblemError::DegenerateBc(_) => "DEGENERATE_BC",
            ProblemError::OutOfDomain(_) => "OUT_OF_DOMAIN",
        }
    }
}

fn schema(msg: impl Into<String>) -> ProblemError {
    ProblemError::Schema(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryCoefficients {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl BoundaryCoefficients {
    pub const DIRICHLET: Self = Self {
        alpha: 1.0,
        beta: 0.0,
        gamma: 1.0,
        delta: 0.0,
    };

    /// `αγL + αδ + βγ`; positive for admissible coefficients.
    pub fn denominator(&self, length: f64) -> f64 {
        self.alpha * self.gamma * length + self.alpha * self.delta + self.beta * self.gamma
    }

    pub fn validate(&self, length: f64) -> Result<(), ProblemError> {
        let c = [self.alpha, self.beta, self.gamma, self.delta];
        if c.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(ProblemError::DegenerateBc(
                "boundary coefficients must be finite and non-negative".into(),
            ));
        }
        if self.alpha == 0.0 && self.beta == 0.0 || self.gamma == 0.0 && self.delta == 0.0 {
            return Err(ProblemError::DegenerateBc(
                "each endpoint needs a non-zero coefficient".into(),
            ));
        }
        if !(self.denominator(length) > 0.0) {
            return Err(ProblemError::DegenerateBc(
                "alpha*gamma*L + alpha*delta + beta*gamma must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Initial state `(u, u')(0)` on the ray satisfying the left condition,
    /// scaled by `s0`.
    pub fn left_ray(&self, s0: f64) -> (f64, f64) {
        let m = self.alpha.max(self.beta);
        (s0 * self.beta / m, s0 * self.alpha / m)
    }

    /// The `s0` whose ray point is closest to `(u, u')`.
    pub fn ray_parameter(&self, u: f64, du: f64) -> f64 {
        let m = self.alpha.max(self.beta);
        (self.beta * u + self.alpha * du) * m / (self.alpha.powi(2) + self.beta.powi(2))
    }

    pub fn left_residual(&self, u: f64, du: f64) -> f64 {
        self.alpha * u - self.beta * du
    }

    pub fn right_residual(&self, u: f64, du: f64) -> f64 {
        self.gamma * u + self.delta * du
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum IntervalKind {
    /// a hump `Iᵢ` carrying `αᵢ aᵢ(x) gᵢ(s)`
    Positive,
    /// a trough `Jⱼ` carrying `−βⱼ bⱼ(x) kⱼ(s)`
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Limit {
    Finite(f64),
    Infinite,
}

impl Limit {
    pub fn value(self) -> f64 {
        match self {
            Limit::Finite(v) => v,
            Limit::Infinite => f64::INFINITY,
        }
    }

    fn to_json(self) -> Value {
        match self {
            Limit::Finite(v) => json!(v),
            Limit::Infinite => json!("inf"),
        }
    }
}

/// User-declared limits of `n(s)/s`: at zero (`g₀`/`k₀`) and, for humps,
/// at infinity (`g∞`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeclaredLimits {
    pub at_zero: Limit,
    pub at_infinity: Option<Limit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSpec {
    pub kind: IntervalKind,
    pub lo: f64,
    pub hi: f64,
    pub weight: Expr,
    pub nonlinearity: Expr,
    pub coefficient: f64,
    pub limits: DeclaredLimits,
}

impl IntervalSpec {
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    /// Signed contribution to `f(x, s)` for `s ≥ 0`; NaN on domain errors.
    #[inline]
    pub fn term(&self, x: f64, s: f64) -> f64 {
        let v = self.coefficient * self.weight.eval_or_nan(x) * self.nonlinearity.eval_or_nan(s);
        match self.kind {
            IntervalKind::Positive => v,
            IntervalKind::Negative => -v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    length: f64,
    bc: BoundaryCoefficients,
    // non-empty intervals in order
    intervals: Vec<IntervalSpec>,
    // interval index of hump i (0-based here, 1-based in the public API)
    humps: Vec<usize>,
    // trough j = 0..=m as interval index, None when empty
    troughs: Vec<Option<usize>>,
    settings: SolverSettings,
    warnings: Vec<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawNumber {
    Num(f64),
    Text(String),
}

impl RawNumber {
    fn value(&self, what: &str) -> Result<f64, ProblemError> {
        match self {
            RawNumber::Num(v) => Ok(*v),
            RawNumber::Text(t) => {
                expr::parse_constant(t).map_err(|e| schema(format!("{what}: {e}")))
            }
        }
    }

    fn limit(&self, what: &str) -> Result<Limit, ProblemError> {
        if let RawNumber::Text(t) = self {
            let t = t.trim();
            if t.eq_ignore_ascii_case("inf") || t == "+inf" || t.eq_ignore_ascii_case("infinity") {
                return Ok(Limit::Infinite);
            }
        }
        let v = self.value(what)?;
        if !(v >= 0.0) {
            return Err(schema(format!("{what} must be non-negative")));
        }
        Ok(if v.is_infinite() {
            Limit::Infinite
        } else {
            Limit::Finite(v)
        })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBc {
    alpha: RawNumber,
    beta: RawNumber,
    gamma: RawNumber,
    delta: RawNumber,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLimits {
    g0: Option<RawNumber>,
    ginf: Option<RawNumber>,
    k0: Option<RawNumber>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInterval {
    kind: String,
    lo: RawNumber,
    hi: RawNumber,
    weight: Option<String>,
    nonlinearity: Option<String>,
    coefficient: Option<RawNumber>,
    limits: Option<RawLimits>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(rename = "L")]
    length: RawNumber,
    bc: RawBc,
    intervals: Vec<Value>,
    #[serde(default)]
    solver: SolverSettings,
}

/// An interval as read from a configuration, before tiling checks. Empty
/// troughs have no expressions.
pub(crate) struct DraftInterval {
    pub kind: IntervalKind,
    pub lo: f64,
    pub hi: f64,
    pub body: Option<(Expr, Expr, f64, DeclaredLimits)>,
}

pub(crate) fn parse_intervals(
    raw: &[Value],
    weight_var: &str,
) -> Result<Vec<DraftInterval>, ProblemError> {
    let mut out = Vec::with_capacity(raw.len());
    for (n, v) in raw.iter().enumerate() {
        let ri: RawInterval = serde_json::from_value(v.clone())
            .map_err(|e| schema(format!("intervals[{n}]: {e}")))?;
        out.push(draft_interval(n, &ri, weight_var)?);
    }
    Ok(out)
}

fn draft_interval(
    n: usize,
    ri: &RawInterval,
    weight_var: &str,
) -> Result<DraftInterval, ProblemError> {
    let at = |f: &str| format!("intervals[{n}].{f}");
    let kind = match ri.kind.as_str() {
        "I" => IntervalKind::Positive,
        "J" => IntervalKind::Negative,
        k => return Err(schema(format!("{}: unknown kind `{k}`", at("kind")))),
    };
    let lo = ri.lo.value(&at("lo"))?;
    let hi = ri.hi.value(&at("hi"))?;
    if !lo.is_finite() || !hi.is_finite() {
        return Err(schema(format!("intervals[{n}]: endpoints must be finite")));
    }
    if kind == IntervalKind::Negative && lo == hi && ri.weight.is_none() {
        return Ok(DraftInterval {
            kind,
            lo,
            hi,
            body: None,
        });
    }
    let weight_text = ri
        .weight
        .as_deref()
        .ok_or_else(|| schema(format!("{} missing", at("weight"))))?;
    let weight = expr::parse(weight_text, weight_var)
        .map_err(|e| schema(format!("{}: {e}", at("weight"))))?;
    let nl_text = ri
        .nonlinearity
        .as_deref()
        .ok_or_else(|| schema(format!("{} missing", at("nonlinearity"))))?;
    let nonlinearity =
        expr::parse(nl_text, "s").map_err(|e| schema(format!("{}: {e}", at("nonlinearity"))))?;
    let coefficient = ri
        .coefficient
        .as_ref()
        .ok_or_else(|| schema(format!("{} missing", at("coefficient"))))?
        .value(&at("coefficient"))?;
    if !(coefficient > 0.0) || !coefficient.is_finite() {
        return Err(schema(format!("{} must be positive", at("coefficient"))));
    }
    let rl = ri
        .limits
        .as_ref()
        .ok_or_else(|| schema(format!("{} missing", at("limits"))))?;
    let limits = match kind {
        IntervalKind::Positive => {
            if rl.k0.is_some() {
                return Err(schema(format!("{}: `k0` belongs to troughs", at("limits"))));
            }
            let g0 = rl
                .g0
                .as_ref()
                .ok_or_else(|| schema(format!("{}.g0 missing", at("limits"))))?;
            let ginf = rl
                .ginf
                .as_ref()
                .ok_or_else(|| schema(format!("{}.ginf missing", at("limits"))))?;
            DeclaredLimits {
                at_zero: g0.limit(&at("limits.g0"))?,
                at_infinity: Some(ginf.limit(&at("limits.ginf"))?),
            }
        }
        IntervalKind::Negative => {
            if rl.g0.is_some() || rl.ginf.is_some() {
                return Err(schema(format!(
                    "{}: `g0`/`ginf` belong to humps",
                    at("limits")
                )));
            }
            let k0 = rl
                .k0
                .as_ref()
                .ok_or_else(|| schema(format!("{}.k0 missing", at("limits"))))?;
            DeclaredLimits {
                at_zero: k0.limit(&at("limits.k0"))?,
                at_infinity: None,
            }
        }
    };
    Ok(DraftInterval {
        kind,
        lo,
        hi,
        body: Some((weight, nonlinearity, coefficient, limits)),
    })
}

impl Problem {
    /// Parses and validates a JSON configuration.
    pub fn load(config_text: &str) -> Result<Problem, ProblemError> {
        let value: Value =
            serde_json::from_str(config_text).map_err(|e| schema(format!("invalid JSON: {e}")))?;
        Self::from_value(&value)
    }

    pub fn from_value(value: &Value) -> Result<Problem, ProblemError> {
        let raw: RawConfig =
            serde_json::from_value(value.clone()).map_err(|e| schema(e.to_string()))?;
        let length = raw.length.value("L")?;
        if !(length > 0.0) || !length.is_finite() {
            return Err(schema("L must be positive and finite"));
        }
        let bc = BoundaryCoefficients {
            alpha: raw.bc.alpha.value("bc.alpha")?,
            beta: raw.bc.beta.value("bc.beta")?,
            gamma: raw.bc.gamma.value("bc.gamma")?,
            delta: raw.bc.delta.value("bc.delta")?,
        };
        let drafts = parse_intervals(&raw.intervals, "x")?;
        Self::assemble(length, bc, drafts, raw.solver)
    }

    pub(crate) fn assemble(
        length: f64,
        bc: BoundaryCoefficients,
        mut drafts: Vec<DraftInterval>,
        settings: SolverSettings,
    ) -> Result<Problem, ProblemError> {
        bc.validate(length)?;
        if drafts.is_empty() {
            return Err(schema("no intervals"));
        }
        let snap = 1e-12 * length.max(1.0);

        // tiling
        if drafts[0].lo.abs() > snap {
            return Err(ProblemError::NonTiling(format!(
                "first interval starts at {} instead of 0",
                drafts[0].lo
            )));
        }
        drafts[0].lo = 0.0;
        let last = drafts.len() - 1;
        if (drafts[last].hi - length).abs() > snap {
            return Err(ProblemError::NonTiling(format!(
                "last interval ends at {} instead of L = {length}",
                drafts[last].hi
            )));
        }
        drafts[last].hi = length;
        for k in 1..drafts.len() {
            let prev_hi = drafts[k - 1].hi;
            if (drafts[k].lo - prev_hi).abs() > snap {
                return Err(ProblemError::NonTiling(format!(
                    "gap or overlap between {prev_hi} and {}",
                    drafts[k].lo
                )));
            }
            drafts[k].lo = prev_hi;
        }
        for (k, d) in drafts.iter().enumerate() {
            if d.hi < d.lo {
                return Err(ProblemError::NonTiling(format!(
                    "intervals[{k}] has hi < lo"
                )));
            }
        }

        // alternation: [J] I (J I)* [J], only end troughs may be empty
        for (k, d) in drafts.iter().enumerate() {
            let at_end = k == 0 || k == last;
            if d.hi == d.lo && (d.kind == IntervalKind::Positive || !at_end) {
                return Err(ProblemError::NonAlternating(format!(
                    "intervals[{k}] is empty; only the first or last trough may be"
                )));
            }
            if d.body.is_none() && d.hi > d.lo {
                return Err(schema(format!(
                    "intervals[{k}] needs weight and nonlinearity"
                )));
            }
        }
        for w in drafts.windows(2) {
            if w[0].kind == w[1].kind {
                return Err(ProblemError::NonAlternating(format!(
                    "two consecutive {:?} intervals at x = {}",
                    w[0].kind, w[0].hi
                )));
            }
        }

        let mut intervals = Vec::new();
        let mut humps = Vec::new();
        let mut troughs: Vec<Option<usize>> = Vec::new();
        if drafts[0].kind == IntervalKind::Positive {
            troughs.push(None);
        }
        for d in drafts {
            let Some((weight, nonlinearity, coefficient, limits)) = d.body else {
                troughs.push(None);
                continue;
            };
            if d.hi == d.lo {
                troughs.push(None);
                continue;
            }
            let idx = intervals.len();
            match d.kind {
                IntervalKind::Positive => humps.push(idx),
                IntervalKind::Negative => troughs.push(Some(idx)),
            }
            intervals.push(IntervalSpec {
                kind: d.kind,
                lo: d.lo,
                hi: d.hi,
                weight,
                nonlinearity,
                coefficient,
                limits,
            });
        }
        if troughs.len() == humps.len() {
            troughs.push(None);
        }
        if humps.is_empty() {
            return Err(ProblemError::NonAlternating("no hump interval".into()));
        }
        debug_assert_eq!(troughs.len(), humps.len() + 1);

        let mut warnings = Vec::new();
        for (k, iv) in intervals.iter().enumerate() {
            check_weight(k, iv)?;
            check_nonlinearity(k, iv)?;
            if iv.kind == IntervalKind::Negative {
                warnings.extend(trough_endpoint_warning(k, iv));
            }
        }

        Ok(Problem {
            length,
            bc,
            intervals,
            humps,
            troughs,
            settings,
            warnings,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn bc(&self) -> BoundaryCoefficients {
        self.bc
    }

    /// Non-empty intervals, left to right.
    pub fn intervals(&self) -> &[IntervalSpec] {
        &self.intervals
    }

    pub fn settings(&self) -> &SolverSettings {
        &self.settings
    }

    pub fn settings_mut(&mut self) -> &mut SolverSettings {
        &mut self.settings
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Number of humps `m`.
    pub fn hump_count(&self) -> usize {
        self.humps.len()
    }

    /// Hump `Iᵢ`, `1 ≤ i ≤ m`.
    pub fn hump(&self, i: usize) -> &IntervalSpec {
        &self.intervals[self.humps[i - 1]]
    }

    /// Trough `Jⱼ`, `0 ≤ j ≤ m`, or `None` if empty.
    pub fn trough(&self, j: usize) -> Option<&IntervalSpec> {
        self.troughs
            .get(j)
            .copied()
            .flatten()
            .map(|k| &self.intervals[k])
    }

    /// Interior interval boundaries.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.intervals.iter().skip(1).map(|iv| iv.lo).collect()
    }

    /// Index of the interval owning `x`; the left interval owns shared
    /// endpoints.
    pub fn interval_at(&self, x: f64) -> Result<usize, ProblemError> {
        if !(x >= 0.0 && x <= self.length) {
            return Err(ProblemError::OutOfDomain(x));
        }
        let k = self.intervals.partition_point(|iv| iv.hi < x);
        Ok(k.min(self.intervals.len() - 1))
    }

    /// Interval containing the midpoint of a piece.
    #[inline]
    pub fn interval_for_piece(&self, piece: &Piece) -> usize {
        let m = piece.mid().clamp(0.0, self.length);
        let k = self.intervals.partition_point(|iv| iv.hi < m);
        k.min(self.intervals.len() - 1)
    }

    /// `f(x, s)` for `s ≥ 0`.
    pub fn f_of(&self, x: f64, s: f64) -> Result<f64, ProblemError> {
        let k = self.interval_at(x)?;
        Ok(self.intervals[k].term(x, s))
    }

    /// Extension by zero for `s < 0`.
    pub fn f_extended(&self, x: f64, s: f64) -> Result<f64, ProblemError> {
        if s <= 0.0 {
            self.interval_at(x)?;
            return Ok(0.0);
        }
        self.f_of(x, s)
    }

    /// Extended right-hand side on a known interval.
    #[inline]
    pub fn f_extended_in(&self, interval: usize, x: f64, s: f64) -> f64 {
        if s <= 0.0 {
            0.0
        } else {
            self.intervals[interval].term(x, s)
        }
    }

    /// Copy with one or more coefficients replaced.
    pub fn with_coefficient(&self, sel: CoefficientSelector, value: f64) -> Problem {
        let mut p = self.clone();
        let targets: Vec<usize> = match sel {
            CoefficientSelector::Alpha(Some(i)) => vec![p.humps[i - 1]],
            CoefficientSelector::Alpha(None) => p.humps.clone(),
            CoefficientSelector::Beta(Some(j)) => p.troughs[j].into_iter().collect(),
            CoefficientSelector::Beta(None) => p.troughs.iter().flatten().copied().collect(),
        };
        for k in targets {
            p.intervals[k].coefficient = value;
        }
        p
    }

    /// Serializes back to the configuration schema.
    pub fn to_config_json(&self) -> Value {
        let intervals: Vec<Value> = self
            .intervals
            .iter()
            .map(|iv| {
                let limits = match iv.kind {
                    IntervalKind::Positive => json!({
                        "g0": iv.limits.at_zero.to_json(),
                        "ginf": iv.limits.at_infinity.unwrap_or(Limit::Infinite).to_json(),
                    }),
                    IntervalKind::Negative => json!({"k0": iv.limits.at_zero.to_json()}),
                };
                json!({
                    "kind": if iv.kind == IntervalKind::Positive { "I" } else { "J" },
                    "lo": iv.lo,
                    "hi": iv.hi,
                    "weight": expr::print(&iv.weight),
                    "nonlinearity": expr::print(&iv.nonlinearity),
                    "coefficient": iv.coefficient,
                    "limits": limits,
                })
            })
            .collect();
        json!({
            "L": self.length,
            "bc": {
                "alpha": self.bc.alpha,
                "beta": self.bc.beta,
                "gamma": self.bc.gamma,
                "delta": self.bc.delta,
            },
            "intervals": intervals,
            "solver": serde_json::to_value(&self.settings).expect("settings serialize"),
        })
    }
}

/// Which coefficients a sweep varies: `alpha`/`alpha<i>` for humps,
/// `beta`/`beta<j>`/`mu` for troughs (`mu` and bare `beta` mean all troughs).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefficientSelector {
    Alpha(Option<usize>),
    Beta(Option<usize>),
}

impl CoefficientSelector {
    pub fn parse(text: &str, p: &Problem) -> Result<Self, String> {
        let t = text.trim();
        let (head, tail) = t.split_at(t.find(|c: char| c.is_ascii_digit()).unwrap_or(t.len()));
        let index = if tail.is_empty() {
            None
        } else {
            Some(
                tail.parse::<usize>()
                    .map_err(|e| format!("bad index in `{t}`: {e}"))?,
            )
        };
        match (head, index) {
            ("alpha", None) => Ok(Self::Alpha(None)),
            ("alpha", Some(i)) if (1..=p.hump_count()).contains(&i) => Ok(Self::Alpha(Some(i))),
            ("beta" | "mu", None) => Ok(Self::Beta(None)),
            ("beta", Some(j)) if p.trough(j).is_some() => Ok(Self::Beta(Some(j))),
            _ => Err(format!(
                "unknown or out-of-range coefficient selector `{t}`"
            )),
        }
    }
}

fn check_weight(k: usize, iv: &IntervalSpec) -> Result<(), ProblemError> {
    let n = 256;
    let mut any_positive = false;
    for j in 0..=n {
        let x = iv.lo + (iv.hi - iv.lo) * j as f64 / n as f64;
        let w = iv.weight.eval(x).map_err(|e| {
            schema(format!(
                "interval {k}: weight not evaluable at x = {x}: {e}"
            ))
        })?;
        if w < 0.0 {
            return Err(ProblemError::NegativeWeight(format!(
                "interval {k}: weight {} is {w} at x = {x}",
                iv.weight
            )));
        }
        any_positive |= w > 0.0;
    }
    if !any_positive {
        return Err(ProblemError::ZeroWeight(format!(
            "interval {k}: weight {} vanishes on [{}, {}]",
            iv.weight, iv.lo, iv.hi
        )));
    }
    Ok(())
}

fn check_nonlinearity(k: usize, iv: &IntervalSpec) -> Result<(), ProblemError> {
    let n0 = iv
        .nonlinearity
        .eval(0.0)
        .map_err(|e| ProblemError::NonlinearitySign(format!("interval {k}: at s = 0: {e}")))?;
    if n0 != 0.0 {
        return Err(ProblemError::NonlinearitySign(format!(
            "interval {k}: {}(0) = {n0}, must vanish",
            iv.nonlinearity
        )));
    }
    for j in 0..=48 {
        let s = 10f64.powf(-6.0 + 12.0 * j as f64 / 48.0);
        let v = iv.nonlinearity.eval(s).unwrap_or(f64::NAN);
        if !(v > 0.0) {
            return Err(ProblemError::NonlinearitySign(format!(
                "interval {k}: {} is {v} at s = {s}, must be positive",
                iv.nonlinearity
            )));
        }
    }
    Ok(())
}

fn trough_endpoint_warning(k: usize, iv: &IntervalSpec) -> Vec<String> {
    let eps = 0.01 * iv.len();
    let w = |x: f64| iv.weight.eval_or_nan(x);
    let mut out = Vec::new();
    for (name, a, b) in [("left", iv.lo, iv.lo + eps), ("right", iv.hi - eps, iv.hi)] {
        let mass = quad(w, a, b, 1e-14, &[]).unwrap_or(f64::NAN);
        if !(mass > 0.0) {
            out.push(format!(
                "trough interval {k}: weight vanishes near its {name} endpoint; \
                 the threshold constants need it non-zero there"
            ));
        }
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use std::f64::consts::PI;

    pub(crate) const FIG1: &str = r#"{
      "L": "3*pi",
      "bc": {"alpha": 1, "beta": 0, "gamma": 1, "delta": 0},
      "intervals": [
        {"kind": "I", "lo": 0, "hi": "pi", "weight": "pos(sin(x))", "nonlinearity": "s^2",
         "coefficient": 1, "limits": {"g0": 0, "ginf": "inf"}},
        {"kind": "J", "lo": "pi", "hi": "2*pi", "weight": "neg(sin(x))", "nonlinearity": "s^3",
         "coefficient": 1, "limits": {"k0": 0}},
        {"kind": "I", "lo": "2*pi", "hi": "3*pi", "weight": "pos(sin(x))", "nonlinearity": "s^2",
         "coefficient": 1, "limits": {"g0": 0, "ginf": "inf"}}
      ]
    }"#;

    #[test]
    fn loads_two_hump_problem() {
        let p = Problem::load(FIG1).unwrap();
        assert_eq!(p.hump_count(), 2);
        assert!(p.trough(0).is_none());
        assert!(p.trough(1).is_some());
        assert!(p.trough(2).is_none());
        assert_eq!(p.breakpoints().len(), 2);
        assert!((p.length() - 3.0 * PI).abs() < 1e-15);
        assert!(p.warnings().is_empty());
    }

    #[test]
    fn f_of_values() {
        let p = Problem::load(FIG1).unwrap();
        assert!((p.f_of(PI / 2.0, 2.0).unwrap() - 4.0).abs() < 1e-14);
        assert!((p.f_of(1.5 * PI, 1.0).unwrap() + 1.0).abs() < 1e-14);
        assert_eq!(p.f_extended(PI / 2.0, -1.0).unwrap(), 0.0);
        assert_eq!(p.f_extended(PI / 2.0, 0.0).unwrap(), 0.0);
        assert!((p.f_extended(PI / 2.0, 2.0).unwrap() - 4.0).abs() < 1e-14);
        assert!(matches!(
            p.f_of(-0.1, 1.0),
            Err(ProblemError::OutOfDomain(_))
        ));
        assert!(matches!(
            p.f_of(10.0, 1.0),
            Err(ProblemError::OutOfDomain(_))
        ));
        for j in 0..=1000 {
            let x = p.length() * j as f64 / 1000.0;
            assert_eq!(p.f_of(x, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn left_interval_owns_endpoint() {
        let p = Problem::load(FIG1).unwrap();
        assert_eq!(p.interval_at(PI).unwrap(), 0);
        assert_eq!(p.interval_at(PI + 1e-9).unwrap(), 1);
        assert_eq!(p.interval_at(0.0).unwrap(), 0);
        assert_eq!(p.interval_at(p.length()).unwrap(), 2);
    }

    #[test]
    fn sign_structure() {
        let p = Problem::load(FIG1).unwrap();
        for j in 0..=300 {
            let x = p.length() * j as f64 / 300.0;
            let k = p.interval_at(x).unwrap();
            for s in [0.0, 1e-3, 0.5, 1.0, 7.0, 100.0] {
                let v = p.f_of(x, s).unwrap();
                match p.intervals()[k].kind {
                    IntervalKind::Positive => assert!(v >= 0.0),
                    IntervalKind::Negative => assert!(v <= 0.0),
                }
            }
        }
    }

    fn replace(text: &str, from: &str, to: &str) -> String {
        assert!(text.contains(from), "{from}");
        text.replacen(from, to, 1)
    }

    #[test]
    fn named_errors() {
        let gap = replace(
            FIG1,
            r#""lo": "pi", "hi": "2*pi""#,
            r#""lo": 3.5, "hi": "2*pi""#,
        );
        assert_eq!(Problem::load(&gap).unwrap_err().code(), "NON_TILING");

        let neg = replace(FIG1, r#""weight": "neg(sin(x))""#, r#""weight": "sin(x)""#);
        assert_eq!(Problem::load(&neg).unwrap_err().code(), "NEGATIVE_WEIGHT");

        let sign = replace(
            FIG1,
            r#""nonlinearity": "s^3""#,
            r#""nonlinearity": "s^3+1""#,
        );
        assert_eq!(
            Problem::load(&sign).unwrap_err().code(),
            "NONLINEARITY_SIGN"
        );

        let sign2 = replace(FIG1, r#""nonlinearity": "s^3""#, r#""nonlinearity": "-s""#);
        assert_eq!(
            Problem::load(&sign2).unwrap_err().code(),
            "NONLINEARITY_SIGN"
        );

        let alt = replace(FIG1, r#""kind": "J""#, r#""kind": "I""#);
        let alt = replace(
            &alt,
            r#""limits": {"k0": 0}"#,
            r#""limits": {"g0": 0, "ginf": 1}"#,
        );
        assert_eq!(Problem::load(&alt).unwrap_err().code(), "NON_ALTERNATING");

        let bc = replace(
            FIG1,
            r#""gamma": 1, "delta": 0"#,
            r#""gamma": 0, "delta": 0"#,
        );
        assert_eq!(Problem::load(&bc).unwrap_err().code(), "DEGENERATE_BC");

        assert_eq!(Problem::load("{").unwrap_err().code(), "SCHEMA");
        let bad_expr = replace(FIG1, "pos(sin(x))", "pos(sin(s))");
        assert_eq!(Problem::load(&bad_expr).unwrap_err().code(), "SCHEMA");
    }

    #[test]
    fn explicit_empty_end_troughs() {
        let text = replace(
            FIG1,
            r#""intervals": ["#,
            r#""intervals": [{"kind": "J", "lo": 0, "hi": 0},"#,
        );
        let p = Problem::load(&text).unwrap();
        assert_eq!(p.hump_count(), 2);
        assert!(p.trough(0).is_none());
    }

    #[test]
    fn selectors_and_overrides() {
        let p = Problem::load(FIG1).unwrap();
        let mu = CoefficientSelector::parse("mu", &p).unwrap();
        let q = p.with_coefficient(mu, 5.0);
        assert!((q.f_of(1.5 * PI, 1.0).unwrap() + 5.0).abs() < 1e-13);
        let a2 = CoefficientSelector::parse("alpha2", &p).unwrap();
        let q = p.with_coefficient(a2, 3.0);
        assert!((q.f_of(2.5 * PI, 1.0).unwrap() - 3.0).abs() < 1e-13);
        assert!((q.f_of(0.5 * PI, 1.0).unwrap() - 1.0).abs() < 1e-13);
        assert!(CoefficientSelector::parse("beta0", &p).is_err());
        assert!(CoefficientSelector::parse("alpha3", &p).is_err());
        assert!(CoefficientSelector::parse("gamma", &p).is_err());
    }

    #[test]
    fn config_round_trip() {
        let p = Problem::load(FIG1).unwrap();
        let text = p.to_config_json().to_string();
        let q = Problem::load(&text).unwrap();
        assert_eq!(p, q);
    }
}
