//! Exact minimizers of `‖u″‖_∞` on an interval under clamped data.
//!
//! Minimizers are piecewise quadratic with one breakpoint `x̄` where `u″`
//! jumps from `σ s` to `-σ s`. Writing `S = σ s` and `t = x̄ - a`, the two
//! matching conditions at `b` read
//!
//! ```text
//! S (2t - L)                = u'(b) - u'(a)
//! S (-t² + 2tL - L²/2)      = u(b) - u(a) - u'(a) L
//! ```
//!
//! Eliminating `S` leaves a scalar equation in `t`, which is located by a
//! dense scan and refined by bisection; the smallest `s` over all roots is
//! returned. Data interpolated by a quadratic is detected through the cubic
//! coefficient of the Hermite interpolant.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::grid::{ClampedData, EllipticMatrix, Grid, GridError, ScalarField};
use crate::jet::jets_via_ghosts;

/// Points in the dense scan of breakpoint candidates.
pub const SCAN_POINTS: usize = 10_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("interval must satisfy a < b (got a={a}, b={b})")]
    Interval { a: f64, b: f64 },
    #[error("non-finite boundary data")]
    NonFinite,
    #[error("trial {index} violates the clamped data by {mismatch:e}")]
    Infeasible { index: usize, mismatch: f64 },
    #[error("trial field is not on a 1D grid")]
    NotInterval,
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Order of the curvature signs left and right of the breakpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SignPattern {
    #[serde(rename = "+-")]
    PlusMinus,
    #[serde(rename = "-+")]
    MinusPlus,
}

impl SignPattern {
    pub fn as_str(&self) -> &'static str {
        match self {
            SignPattern::PlusMinus => "+-",
            SignPattern::MinusPlus => "-+",
        }
    }

    pub fn swapped(&self) -> SignPattern {
        match self {
            SignPattern::PlusMinus => SignPattern::MinusPlus,
            SignPattern::MinusPlus => SignPattern::PlusMinus,
        }
    }
}

/// `u` on `[a, b]` with `u″ = left_curvature` before `xbar` and
/// `right_curvature` after it.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseQuadratic {
    pub a: f64,
    pub b: f64,
    pub ua: f64,
    pub sa: f64,
    pub xbar: f64,
    pub s: f64,
    pub sign_pattern: SignPattern,
    pub smooth: bool,
    pub left_curvature: f64,
    pub right_curvature: f64,
}

/// JSON summary of an oracle solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSummary {
    pub s: f64,
    pub xbar: f64,
    pub sign_pattern: SignPattern,
    pub smooth: bool,
}

impl PiecewiseQuadratic {
    pub fn summary(&self) -> OracleSummary {
        OracleSummary {
            s: self.s,
            xbar: self.xbar,
            sign_pattern: self.sign_pattern,
            smooth: self.smooth,
        }
    }

    fn value_at_break(&self) -> (f64, f64) {
        let t = self.xbar - self.a;
        (
            self.ua + self.sa * t + 0.5 * self.left_curvature * t * t,
            self.sa + self.left_curvature * t,
        )
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.xbar {
            let t = x - self.a;
            self.ua + self.sa * t + 0.5 * self.left_curvature * t * t
        } else {
            let (ub, sb) = self.value_at_break();
            let t = x - self.xbar;
            ub + sb * t + 0.5 * self.right_curvature * t * t
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        if x <= self.xbar {
            self.sa + self.left_curvature * (x - self.a)
        } else {
            let (_, sb) = self.value_at_break();
            sb + self.right_curvature * (x - self.xbar)
        }
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        if x < self.xbar {
            self.left_curvature
        } else if x > self.xbar {
            self.right_curvature
        } else {
            0.5 * (self.left_curvature + self.right_curvature)
        }
    }

    /// Largest mismatch against the right-end data `(ub, sb)`.
    pub fn boundary_residual(&self, ub: f64, sb: f64) -> f64 {
        (self.eval(self.b) - ub)
            .abs()
            .max((self.derivative(self.b) - sb).abs())
    }

    /// Samples the solution at the nodes of a 1D grid.
    pub fn sample(&self, grid: &Arc<Grid>) -> ScalarField {
        ScalarField::from_fn(grid.clone(), |x| self.eval(x[0]))
    }

    /// Clamped data of the solution on a grid spanning `[a, b]`.
    pub fn clamped_data(&self, grid: &Grid) -> Result<ClampedData, GridError> {
        ClampedData::interval(
            grid,
            self.ua,
            self.sa,
            self.eval(self.b),
            self.derivative(self.b),
        )
    }
}

/// Minimal-`s` piecewise quadratic with data `u(a)=ua, u'(a)=sa,
/// u(b)=ub, u'(b)=sb`.
pub fn solve_exact(
    a: f64,
    b: f64,
    ua: f64,
    sa: f64,
    ub: f64,
    sb: f64,
) -> Result<PiecewiseQuadratic, OracleError> {
    if [a, b, ua, sa, ub, sb].iter().any(|v| !v.is_finite()) {
        return Err(OracleError::NonFinite);
    }
    if !(a < b) {
        return Err(OracleError::Interval { a, b });
    }
    let l = b - a;
    let d1 = sb - sa;
    let d2 = ub - ua - sa * l;

    // Hermite cubic coefficient, scaled to the size of the data
    let c3 = (d1 * l - 2.0 * d2) / (l * l * l);
    let scale = (d1.abs() * l + d2.abs()) / (l * l * l);
    if c3.abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE) || (d1 == 0.0 && d2 == 0.0) {
        let curv = 2.0 * d2 / (l * l);
        return Ok(PiecewiseQuadratic {
            a,
            b,
            ua,
            sa,
            xbar: 0.5 * (a + b),
            s: curv.abs(),
            sign_pattern: if curv >= 0.0 {
                SignPattern::PlusMinus
            } else {
                SignPattern::MinusPlus
            },
            smooth: true,
            left_curvature: curv,
            right_curvature: curv,
        });
    }

    let alpha1 = |t: f64| 2.0 * t - l;
    let alpha2 = |t: f64| -t * t + 2.0 * t * l - 0.5 * l * l;
    let r = |t: f64| d1 * alpha2(t) - d2 * alpha1(t);

    let mut roots = Vec::new();
    let tk = |k: usize| l * k as f64 / SCAN_POINTS as f64;
    let mut prev = r(0.0);
    if prev == 0.0 {
        roots.push(0.0);
    }
    for k in 1..=SCAN_POINTS {
        let (t0, t1) = (tk(k - 1), tk(k));
        let cur = r(t1);
        if cur == 0.0 {
            roots.push(t1);
        } else if prev != 0.0 && (prev < 0.0) != (cur < 0.0) {
            let (mut lo, mut hi) = (t0, t1);
            let rlo_neg = prev < 0.0;
            while hi - lo > 1e-12 * l {
                let mid = 0.5 * (lo + hi);
                let rm = r(mid);
                if rm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if (rm < 0.0) == rlo_neg {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        prev = cur;
    }

    let mut best: Option<(f64, f64)> = None;
    for t in roots {
        let (a1, a2) = (alpha1(t), alpha2(t));
        let big_s = if a1.abs() * l >= a2.abs() { d1 / a1 } else { d2 / a2 };
        if !big_s.is_finite() {
            continue;
        }
        if best.map_or(true, |(_, s)| big_s.abs() < s.abs()) {
            best = Some((t, big_s));
        }
    }
    // r(0) = -r(L), so a sign change or an exact zero always exists
    let (t, big_s) = best.expect("matching equation has a root on [a, b]");
    Ok(PiecewiseQuadratic {
        a,
        b,
        ua,
        sa,
        xbar: a + t,
        s: big_s.abs(),
        sign_pattern: if big_s >= 0.0 {
            SignPattern::PlusMinus
        } else {
            SignPattern::MinusPlus
        },
        smooth: false,
        left_curvature: big_s,
        right_curvature: -big_s,
    })
}

/// Result of a brute-force optimality check.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessReport {
    pub pass: bool,
    /// Smallest discrete `max |w″|` over all trials.
    pub min_trial_sup: f64,
    /// Index of the trial attaining it.
    pub worst_trial: usize,
    pub tolerance: f64,
    pub trial_count: usize,
}

/// Discrete `max |w″|` of a clamped trial over all nodes, boundary nodes
/// reading the ghost layer built from the data.
pub fn discrete_sup_curvature(field: &ScalarField, data: &ClampedData) -> Result<f64, GridError> {
    let jets = jets_via_ghosts(field, &EllipticMatrix::identity(1), data)?;
    Ok(jets.xi_values().iter().fold(0.0, |m, v| m.max(v.abs())))
}

/// Checks `max |w″| ≥ s - tol` for every trial, with
/// `tol = 1e-6 + h (s + max |w‴|)`, `w‴` from third differences.
pub fn optimality_witness(
    pq: &PiecewiseQuadratic,
    trials: &[ScalarField],
) -> Result<WitnessReport, OracleError> {
    let mut report = WitnessReport {
        pass: true,
        min_trial_sup: f64::INFINITY,
        worst_trial: 0,
        tolerance: 0.0,
        trial_count: trials.len(),
    };
    for (index, w) in trials.iter().enumerate() {
        let g = w.grid();
        if g.dim() != 1 {
            return Err(OracleError::NotInterval);
        }
        let data = pq.clamped_data(g)?;
        let mismatch = data.boundary_mismatch(w);
        if mismatch > 1e-9 * (1.0 + pq.s) {
            return Err(OracleError::Infeasible { index, mismatch });
        }
        let h = g.spacing()[0];
        let v = w.values();
        let third = v
            .windows(4)
            .map(|q| (q[3] - 3.0 * q[2] + 3.0 * q[1] - q[0]).abs() / (h * h * h))
            .fold(0.0, f64::max);
        let tol = 1e-6 + h * (pq.s + third);
        let sup = discrete_sup_curvature(w, &data)?;
        if sup < report.min_trial_sup {
            report.min_trial_sup = sup;
            report.worst_trial = index;
            report.tolerance = tol;
        }
        if sup < pq.s - tol {
            report.pass = false;
        }
    }
    Ok(report)
}
