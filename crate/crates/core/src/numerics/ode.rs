//! Dormand–Prince 5(4) integration of scalar second-order equations
//! `u'' = F(x, u, u')` with PI step control, breakpoint-aligned nodes and
//! the pair's quartic dense output.

use serde::Serialize;

/// The smooth piece `[lo, hi]` of the integration span currently being
/// stepped through. Right-hand sides that are only piecewise smooth use it to
/// decide which formula applies at a shared endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub index: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Piece {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-10,
            rel: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IvpOptions {
    pub tol: Tolerance,
    /// `|u|` or `|u'|` above this counts as blow-up.
    pub blow_cap: f64,
    pub max_steps: usize,
}

impl Default for IvpOptions {
    fn default() -> Self {
        Self {
            tol: Tolerance::default(),
            blow_cap: 1e8,
            max_steps: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Completed,
    /// Escape past the blow-up cap at `x`. `stalled` marks a step-size
    /// underflow rather than a genuine escape.
    BlewUp {
        x: f64,
        stalled: bool,
    },
    /// Reached the end, but `u` dipped below zero first at `x` (node
    /// resolution), with minimum `-depth`.
    WentNegative {
        x: f64,
        depth: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Point {
    pub x: f64,
    pub u: f64,
    pub du: f64,
}

/// Dense numerical solution `(u, u')` of an initial value problem.
#[derive(Debug, Clone)]
pub struct Trajectory {
    nodes: Vec<Point>,
    // Dense-output coefficients for the step ending at nodes[k + 1].
    dense: Vec<[[f64; 2]; 5]>,
    status: Status,
}

impl Trajectory {
    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn x_start(&self) -> f64 {
        self.nodes[0].x
    }

    pub fn x_end(&self) -> f64 {
        self.nodes[self.nodes.len() - 1].x
    }

    pub fn last(&self) -> Point {
        self.nodes[self.nodes.len() - 1]
    }

    /// True when the integration reached its requested end point.
    pub fn reached_end(&self) -> bool {
        !matches!(self.status, Status::BlewUp { .. })
    }

    /// `(u, u')` at `x`, or `None` outside `[x_start, x_end]`.
    pub fn try_eval(&self, x: f64) -> Option<(f64, f64)> {
        if x < self.x_start() || x > self.x_end() {
            return None;
        }
        Some(self.eval(x))
    }

    /// `(u, u')` at `x`, clamped to the computed range.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let n = self.nodes.len();
        if n == 1 || x <= self.nodes[0].x {
            let p = self.nodes[0];
            return (p.u, p.du);
        }
        if x >= self.nodes[n - 1].x {
            let p = self.nodes[n - 1];
            return (p.u, p.du);
        }
        // first node with node.x > x
        let k = self.nodes.partition_point(|p| p.x <= x);
        let (a, b) = (self.nodes[k - 1], self.nodes[k]);
        if x == a.x {
            return (a.u, a.du);
        }
        let h = b.x - a.x;
        let theta = (x - a.x) / h;
        let th1 = 1.0 - theta;
        let r = &self.dense[k - 1];
        let comp = |i: usize| {
            r[0][i] + theta * (r[1][i] + th1 * (r[2][i] + theta * (r[3][i] + th1 * r[4][i])))
        };
        (comp(0), comp(1))
    }

    /// Nodes plus `per_step - 1` interior dense samples in every step.
    pub fn sample(&self, per_step: usize) -> Vec<Point> {
        let per_step = per_step.max(1);
        let mut out = Vec::with_capacity(self.nodes.len() * per_step);
        for w in self.nodes.windows(2) {
            out.push(w[0]);
            for j in 1..per_step {
                let x = w[0].x + (w[1].x - w[0].x) * j as f64 / per_step as f64;
                let (u, du) = self.eval(x);
                out.push(Point { x, u, du });
            }
        }
        out.push(self.last());
        out
    }

    /// Maximum of `u` over `[lo, hi]` using nodes inside the range plus at
    /// least `min_samples` uniform dense samples.
    pub fn max_on(&self, lo: f64, hi: f64, min_samples: usize) -> f64 {
        let mut m = f64::NEG_INFINITY;
        for p in &self.nodes {
            if p.x >= lo && p.x <= hi {
                m = m.max(p.u);
            }
        }
        let n = min_samples.max(2);
        for j in 0..=n {
            let x = lo + (hi - lo) * j as f64 / n as f64;
            if let Some((u, _)) = self.try_eval(x) {
                m = m.max(u);
            }
        }
        m
    }

    /// Joins trajectories whose spans abut end to start. At each junction
    /// the later piece's starting state wins for `eval` to the right.
    pub fn concat(parts: Vec<Trajectory>) -> Trajectory {
        let mut it = parts.into_iter();
        let mut out = it.next().expect("at least one piece");
        for part in it {
            assert!(
                part.x_start() == out.x_end(),
                "pieces must abut: {} vs {}",
                out.x_end(),
                part.x_start()
            );
            if matches!(out.status, Status::BlewUp { .. }) {
                break;
            }
            let start = part.nodes[0];
            *out.nodes.last_mut().expect("non-empty") = start;
            out.nodes.extend_from_slice(&part.nodes[1..]);
            out.dense.extend(part.dense);
            if let Status::BlewUp { .. } = part.status {
                out.status = part.status;
            }
        }
        if !matches!(out.status, Status::BlewUp { .. }) {
            out.status = match out.nodes.iter().find(|p| p.u < 0.0) {
                Some(p) => Status::WentNegative {
                    x: p.x,
                    depth: -out.nodes.iter().map(|p| p.u).fold(f64::INFINITY, f64::min),
                },
                None => Status::Completed,
            };
        }
        out
    }

    /// The same trajectory multiplied by `c` (valid for linear equations).
    pub fn scaled(&self, c: f64) -> Trajectory {
        let nodes: Vec<Point> = self
            .nodes
            .iter()
            .map(|p| Point {
                x: p.x,
                u: c * p.u,
                du: c * p.du,
            })
            .collect();
        let status = match self.status {
            Status::BlewUp { .. } => self.status,
            _ => match nodes.iter().find(|p| p.u < 0.0) {
                Some(p) => Status::WentNegative {
                    x: p.x,
                    depth: -nodes.iter().map(|p| p.u).fold(f64::INFINITY, f64::min),
                },
                None => Status::Completed,
            },
        };
        Trajectory {
            nodes,
            dense: self
                .dense
                .iter()
                .map(|r| r.map(|row| [c * row[0], c * row[1]]))
                .collect(),
            status,
        }
    }
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

type State = [f64; 2];

#[inline]
fn axpy(y: &State, h: f64, terms: &[(f64, &State)]) -> State {
    let mut out = *y;
    for (c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

/// Integrates `u'' = field(piece, x, u, u')` from `x0` to `x_end` starting at
/// `y0 = (u, u')`. Every breakpoint strictly inside the span becomes a node,
/// and no step straddles one.
pub fn integrate<F>(
    field: F,
    x0: f64,
    x_end: f64,
    y0: (f64, f64),
    breakpoints: &[f64],
    opts: &IvpOptions,
) -> Trajectory
where
    F: Fn(&Piece, f64, f64, f64) -> f64,
{
    assert!(x_end >= x0, "integration runs left to right");
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&b| b > x0 && b < x_end)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.push(x_end);

    let mut nodes = vec![Point {
        x: x0,
        u: y0.0,
        du: y0.1,
    }];
    let mut dense = Vec::new();
    let mut min_u = y0.0;
    let mut neg_at: Option<f64> = if y0.0 < 0.0 { Some(x0) } else { None };

    if x_end == x0 {
        return Trajectory {
            nodes,
            dense,
            status: Status::Completed,
        };
    }

    let tol = opts.tol;
    let norm = |e: &State, ya: &State, yb: &State| -> f64 {
        let mut acc = 0.0;
        for i in 0..2 {
            let sk = tol.abs + tol.rel * ya[i].abs().max(yb[i].abs());
            acc += (e[i] / sk).powi(2);
        }
        (acc / 2.0).sqrt()
    };

    let mut y: State = [y0.0, y0.1];
    let mut x = x0;
    let mut h = 0.0_f64;
    let mut facold = 1e-4_f64;
    let mut steps = 0usize;
    let mut lo = x0;

    for (index, &hi) in cuts.iter().enumerate() {
        let piece = Piece { index, lo, hi };
        let f = |x: f64, y: &State| -> State { [y[1], field(&piece, x, y[0], y[1])] };
        let mut k1 = f(x, &y);
        if h == 0.0 {
            h = initial_step(&f, x, &y, &k1, hi - x, &tol);
        }
        let mut last_rejected = false;
        while x < hi {
            steps += 1;
            if steps > opts.max_steps {
                return Trajectory {
                    nodes,
                    dense,
                    status: Status::BlewUp { x, stalled: true },
                };
            }
            let mut last = false;
            if x + h >= hi || x + 1.01 * h >= hi {
                h = hi - x;
                last = true;
            }
            if h <= 16.0 * f64::EPSILON * x.abs().max(1.0) && !last {
                return Trajectory {
                    nodes,
                    dense,
                    status: Status::BlewUp { x, stalled: true },
                };
            }
            let k2 = f(x + C2 * h, &axpy(&y, h, &[(A21, &k1)]));
            let k3 = f(x + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
            let k4 = f(
                x + C4 * h,
                &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
            );
            let k5 = f(
                x + C5 * h,
                &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            );
            let y6 = axpy(
                &y,
                h,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            );
            let xn = if last { hi } else { x + h };
            let k6 = f(x + h, &y6);
            let yn = axpy(
                &y,
                h,
                &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
            );
            let k7 = f(xn, &yn);
            let mut e = [0.0; 2];
            for (i, ei) in e.iter_mut().enumerate() {
                *ei = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            }
            let err = norm(&e, &y, &yn);
            if !err.is_finite() || !yn[0].is_finite() || !yn[1].is_finite() {
                h *= 0.1;
                last_rejected = true;
                continue;
            }
            // PI controller (Hairer & Wanner's DOPRI5 settings)
            let beta = 0.04;
            let expo1 = 0.2 - beta * 0.75;
            let fac11 = err.max(1e-300).powf(expo1);
            if err <= 1.0 {
                let mut fac = fac11 / facold.powf(beta);
                fac = (fac / 0.9).clamp(0.2, 10.0);
                let mut hnew = h / fac;
                if last_rejected {
                    hnew = hnew.min(h);
                }
                facold = err.max(1e-4);

                let mut r = [[0.0; 2]; 5];
                for i in 0..2 {
                    let ydiff = yn[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    r[0][i] = y[i];
                    r[1][i] = ydiff;
                    r[2][i] = bspl;
                    r[3][i] = ydiff - h * k7[i] - bspl;
                    r[4][i] = h
                        * (D1 * k1[i]
                            + D3 * k3[i]
                            + D4 * k4[i]
                            + D5 * k5[i]
                            + D6 * k6[i]
                            + D7 * k7[i]);
                }
                dense.push(r);
                x = xn;
                y = yn;
                k1 = k7;
                nodes.push(Point {
                    x,
                    u: y[0],
                    du: y[1],
                });
                if y[0] < min_u {
                    min_u = y[0];
                }
                if y[0] < 0.0 && neg_at.is_none() {
                    neg_at = Some(x);
                }
                if y[0].abs() > opts.blow_cap || y[1].abs() > opts.blow_cap {
                    return Trajectory {
                        nodes,
                        dense,
                        status: Status::BlewUp { x, stalled: false },
                    };
                }
                if !last {
                    h = hnew;
                }
                last_rejected = false;
            } else {
                h /= (fac11 / 0.9).min(5.0);
                last_rejected = true;
            }
        }
        lo = hi;
    }

    let status = match neg_at {
        Some(x) => Status::WentNegative { x, depth: -min_u },
        None => Status::Completed,
    };
    Trajectory {
        nodes,
        dense,
        status,
    }
}

fn initial_step<F>(f: &F, x: f64, y: &State, k1: &State, span: f64, tol: &Tolerance) -> f64
where
    F: Fn(f64, &State) -> State,
{
    let sk = |i: usize| tol.abs + tol.rel * y[i].abs();
    let dnf = ((k1[0] / sk(0)).powi(2) + (k1[1] / sk(1)).powi(2)) / 2.0;
    let dny = ((y[0] / sk(0)).powi(2) + (y[1] / sk(1)).powi(2)) / 2.0;
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        (dny / dnf).sqrt() * 0.01
    };
    h = h.min(span);
    let y1 = axpy(y, h, &[(1.0, k1)]);
    let k2 = f(x + h, &y1);
    let mut der2 = 0.0;
    for i in 0..2 {
        der2 += ((k2[i] - k1[i]) / sk(i)).powi(2);
    }
    let der2 = (der2 / 2.0).sqrt() / h;
    let der12 = der2.max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(0.2)
    };
    let h = (100.0 * h).min(h1).min(span);
    if h.is_finite() && h > 0.0 {
        h
    } else {
        span.min(1e-6)
    }
}
