//! p-continuation: minimize the penalized L^p energy over a ladder of
//! exponents, warm-starting every stage from the previous one.

use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::characterization::nodal_set;
use crate::grid::{weighted_lp_norm, ScalarField};
use crate::linalg::{dot, LinalgError, SymBand};
use crate::lp_energy::{
    evaluate, extract_duals, gradient_at, hessian_at, DualFields, Evaluation, LpEnergyConfig,
    LpError, DEGENERATE_EP,
};
use crate::problem::Problem;

#[derive(Debug, Clone)]
pub enum PenaltyPolicy {
    /// `ε = 0`: plain L^p minimization.
    None,
    /// Fixed `ε` and anchor (zero field when absent).
    Fixed { eps: f64, anchor: Option<ScalarField> },
    /// Anchor moved to the previous stage's solution (the initial field for
    /// the first stage).
    Recentered { eps: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerMethod {
    /// Newton with exact Hessian, Levenberg shift and Armijo backtracking.
    Newton,
    /// BFGS on the inverse Hessian with Armijo backtracking.
    Bfgs,
}

#[derive(Debug, Clone)]
pub struct ContinuationSchedule {
    pub ladder: Vec<f64>,
    /// Stage tolerance: gradient norm `≤ tol_factor · (1 + e_p)`.
    pub tol_factor: f64,
    pub max_iter: usize,
    pub penalty: PenaltyPolicy,
    pub inner: InnerMethod,
    pub early_stop: bool,
    /// Slack `δ` of the coercivity bound.
    pub delta: f64,
}

impl Default for ContinuationSchedule {
    fn default() -> Self {
        ContinuationSchedule {
            ladder: doubling_ladder(256.0),
            tol_factor: 1e-8,
            max_iter: 500,
            penalty: PenaltyPolicy::None,
            inner: InnerMethod::Newton,
            early_stop: true,
            delta: 1.0,
        }
    }
}

/// `2, 4, 8, …` up to and including the largest power of two `≤ p_max`.
pub fn doubling_ladder(p_max: f64) -> Vec<f64> {
    let mut out = vec![2.0];
    while out.last().unwrap() * 2.0 <= p_max {
        let next = out.last().unwrap() * 2.0;
        out.push(next);
    }
    out
}

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("ladder is empty")]
    Empty,
    #[error("ladder must start at p >= 2, got {0}")]
    Start(f64),
    #[error("ladder must be strictly increasing and finite (entry {0})")]
    NotIncreasing(usize),
    #[error("invalid {name}: {value}")]
    Parameter { name: &'static str, value: f64 },
}

impl ContinuationSchedule {
    pub fn validate(&self) -> Result<(), ScheduleError> {
        let l = &self.ladder;
        if l.is_empty() {
            return Err(ScheduleError::Empty);
        }
        if !(l[0] >= 2.0) {
            return Err(ScheduleError::Start(l[0]));
        }
        for k in 0..l.len() {
            if !l[k].is_finite() || (k > 0 && !(l[k] > l[k - 1])) {
                return Err(ScheduleError::NotIncreasing(k));
            }
        }
        if !(self.tol_factor > 0.0) {
            return Err(ScheduleError::Parameter {
                name: "tol_factor",
                value: self.tol_factor,
            });
        }
        if self.max_iter == 0 {
            return Err(ScheduleError::Parameter {
                name: "max_iter",
                value: 0.0,
            });
        }
        if !(self.delta >= 0.0) {
            return Err(ScheduleError::Parameter {
                name: "delta",
                value: self.delta,
            });
        }
        match self.penalty {
            PenaltyPolicy::Fixed { eps, .. } | PenaltyPolicy::Recentered { eps }
                if !(eps >= 0.0 && eps.is_finite()) =>
            {
                Err(ScheduleError::Parameter { name: "eps", value: eps })
            }
            _ => Ok(()),
        }
    }
}

/// Outcome of the coercivity check
/// `‖A:D²u‖_q ≤ (1 + δ + F_∞(ū) + ‖u‖_{W^{1,q}}^α) / c`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GuardReport {
    pub passed: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub q: f64,
}

/// Coercivity bound at `u` for exponent `q = cfg.p`, with reference field
/// `u_bar` (the anchor under a penalty, otherwise the starting field).
pub fn coercivity_guard(
    u: &ScalarField,
    u_bar: &ScalarField,
    cfg: &LpEnergyConfig,
    delta: f64,
) -> GuardReport {
    let pb = &cfg.problem;
    let g = pb.grid();
    let w = g.weights();
    let q = cfg.p;
    let jets = pb.jets(u);
    let xi = jets.xi_values();
    let lhs = weighted_lp_norm(pb.supremand_weights(), &xi, q);
    let grad: Vec<f64> = (0..jets.node_count())
        .map(|i| jets.grad(i).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let w1q = weighted_lp_norm(w, u.values(), q) + weighted_lp_norm(w, &grad, q);
    let spec = pb.inner_spec();
    let rhs = (1.0 + delta + pb.f_inf(u_bar) + w1q.powf(spec.alpha())) / spec.c();
    GuardReport {
        passed: lhs <= rhs,
        lhs,
        rhs,
        q,
    }
}

/// Per-stage trace entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageStats {
    pub p: f64,
    pub e_p: f64,
    pub energy_initial: f64,
    pub energy_final: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub tolerance: f64,
    pub stop: StopReason,
    /// Discrete `max |F(J²u_p)|`.
    pub f_max: f64,
    /// Sign-law residual of `(u_p, f_p)`; absent when `f_p` is unavailable.
    pub sign_law_residual: Option<f64>,
    pub nodal_count: Option<usize>,
    /// `max |u_p - ū|` under a penalty.
    pub anchor_distance: Option<f64>,
    pub guard: GuardReport,
    #[serde(skip)]
    pub elapsed: Duration,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuationReport {
    pub stages: Vec<StageStats>,
    pub early_stopped: bool,
    /// `e_p` trace nondecreasing within [`MONOTONE_SLACK`] per stage.
    pub monotone: bool,
    pub guards_passed: bool,
    #[serde(skip)]
    pub u: ScalarField,
    #[serde(skip)]
    pub stage_fields: Vec<ScalarField>,
    #[serde(skip)]
    pub duals: Option<DualFields>,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl ContinuationReport {
    pub fn e_trace(&self) -> Vec<f64> {
        self.stages.iter().map(|s| s.e_p).collect()
    }

    pub fn final_stage(&self) -> Option<&StageStats> {
        self.stages.last()
    }
}

/// Absolute slack on the per-stage `e_p` monotonicity check.
pub const MONOTONE_SLACK: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Energy(#[from] LpError),
    #[error("line search failed at iteration {iteration} (gradient norm {grad_norm:e})")]
    LineSearch {
        iteration: usize,
        grad_norm: f64,
        last: Vec<f64>,
    },
    #[error("no convergence in {iteration} iterations (gradient norm {grad_norm:e})")]
    MaxIterations {
        iteration: usize,
        grad_norm: f64,
        last: Vec<f64>,
    },
    #[error("coercivity guard failed: {lhs:e} > {rhs:e}", lhs = .0.lhs, rhs = .0.rhs)]
    Guard(GuardReport),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("initial field violates the clamped data by {0:e}")]
    Infeasible(f64),
}

#[derive(Debug, Error)]
#[error("stage {stage} (p = {p}) failed: {source}")]
pub struct ContinuationError {
    pub stage: usize,
    pub p: f64,
    #[source]
    pub source: StageError,
    pub partial: Box<ContinuationReport>,
}

/// Result of one inner solve.
#[derive(Debug, Clone)]
pub struct StageOutcome {
    pub interior: Vec<f64>,
    pub evaluation: Evaluation,
    pub iterations: usize,
    pub grad_norm: f64,
    pub tolerance: f64,
    pub energy_initial: f64,
    /// Energies of accepted iterates, starting with the initial one.
    pub energy_trace: Vec<f64>,
    pub stop: StopReason,
}

/// Why a stage ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Gradient norm below tolerance.
    Gradient,
    /// Newton decrement at rounding level.
    Decrement,
    /// `F ≡ 0` reached without penalty.
    Degenerate,
    /// An accepted Newton step left the energy unchanged in floating point.
    Stalled,
}

/// `sqrt(Σ g_k² / w_k)`: the weighted L² norm of the gradient's Riesz
/// representative.
pub fn gradient_norm(g: &[f64], cfg: &LpEnergyConfig) -> f64 {
    let grid = cfg.problem.grid();
    let w = grid.weights();
    grid.interior_nodes()
        .iter()
        .zip(g)
        .map(|(&i, gk)| gk * gk / w[i])
        .sum::<f64>()
        .sqrt()
}

const ARMIJO: f64 = 1e-4;
/// Relative Newton decrement below which further progress is lost in
/// rounding; a stage also converges when this is reached.
pub const DECREMENT_FLOOR: f64 = 1e-16;
const MAX_HALVINGS: usize = 60;

fn try_eval(x: &[f64], cfg: &LpEnergyConfig) -> Option<Evaluation> {
    evaluate(x, cfg).ok().filter(|e| e.energy.is_finite())
}

/// Backtracking along `d`; returns the accepted point and its evaluation.
fn armijo(
    x: &[f64],
    e0: f64,
    slope: f64,
    d: &[f64],
    cfg: &LpEnergyConfig,
) -> Option<(Vec<f64>, Evaluation, f64)> {
    let mut alpha = 1.0;
    for _ in 0..MAX_HALVINGS {
        let xn: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + alpha * b).collect();
        if let Some(ev) = try_eval(&xn, cfg) {
            if ev.energy <= e0 + ARMIJO * alpha * slope {
                return Some((xn, ev, alpha));
            }
        }
        alpha *= 0.5;
    }
    None
}

/// Levenberg-shifted Newton direction for `H = M - v vᵀ`, via banded
/// Cholesky of `M + λI` and a Sherman–Morrison correction.
fn newton_direction(m: &SymBand, v: &[f64], g: &[f64], lambda: f64) -> Option<Vec<f64>> {
    let mut b = m.clone();
    if lambda > 0.0 {
        b.add_diag(&vec![lambda; g.len()]);
    }
    let chol = b.cholesky().ok()?;
    let ng: Vec<f64> = g.iter().map(|x| -x).collect();
    let y = chol.solve(&ng);
    let d = if v.iter().any(|x| *x != 0.0) {
        let z = chol.solve(v);
        let den = 1.0 - dot(v, &z);
        if !(den > 1e-10) {
            return None;
        }
        let c = dot(v, &y) / den;
        y.iter().zip(&z).map(|(a, b)| a + c * b).collect()
    } else {
        y
    };
    if d.iter().all(|x| x.is_finite()) && dot(g, &d) < 0.0 {
        Some(d)
    } else {
        None
    }
}

fn newton(x0: Vec<f64>, cfg: &LpEnergyConfig, sched: &ContinuationSchedule) -> Result<StageOutcome, StageError> {
    let mut x = x0;
    let mut ev = evaluate(&x, cfg)?;
    let energy_initial = ev.energy;
    let mut trace = vec![ev.energy];
    let mut lambda = 0.0_f64;
    for it in 0..=sched.max_iter {
        let tol = sched.tol_factor * (1.0 + ev.e_p);
        if ev.e_p <= DEGENERATE_EP && cfg.eps == 0.0 {
            return Ok(done(x, ev, it, 0.0, tol, energy_initial, trace));
        }
        let g = gradient_at(&x, &ev, cfg)?;
        let gn = gradient_norm(&g, cfg);
        if gn <= tol {
            return Ok(done(x, ev, it, gn, tol, energy_initial, trace));
        }
        if it == sched.max_iter {
            return Err(StageError::MaxIterations {
                iteration: it,
                grad_norm: gn,
                last: x,
            });
        }
        let (m, v) = hessian_at(&ev, cfg);
        let floor = 1e-14 * m.diag_max().max(1e-300);
        let mut lam = lambda;
        let mut step = None;
        for _ in 0..40 {
            if let Some(d) = newton_direction(&m, &v, &g, lam) {
                let slope = dot(&g, &d);
                if lam <= floor && -slope <= DECREMENT_FLOOR * (1.0 + ev.energy) {
                    let mut out = done(x, ev, it, gn, tol, energy_initial, trace);
                    out.stop = StopReason::Decrement;
                    return Ok(out);
                }
                if let Some(acc) = armijo(&x, ev.energy, slope, &d, cfg) {
                    step = Some(acc);
                    break;
                }
            }
            lam = if lam == 0.0 { floor } else { lam * 10.0 };
        }
        let Some((xn, evn, alpha)) = step else {
            // last resort: steepest descent
            let d: Vec<f64> = g.iter().map(|v| -v).collect();
            match armijo(&x, ev.energy, -dot(&g, &g), &d, cfg) {
                Some((_, evn, _)) if !(evn.energy < ev.energy) => {
                    let mut out = done(x, ev, it, gn, tol, energy_initial, trace);
                    out.stop = StopReason::Stalled;
                    return Ok(out);
                }
                Some((xn, evn, _)) => {
                    x = xn;
                    ev = evn;
                    trace.push(ev.energy);
                    continue;
                }
                None => {
                    return Err(StageError::LineSearch {
                        iteration: it,
                        grad_norm: gn,
                        last: x,
                    })
                }
            }
        };
        if !(evn.energy < ev.energy) {
            let mut out = done(x, ev, it, gn, tol, energy_initial, trace);
            out.stop = StopReason::Stalled;
            return Ok(out);
        }
        lambda = if alpha == 1.0 { lam * 0.1 } else { lam };
        if lambda < floor {
            lambda = 0.0;
        }
        x = xn;
        ev = evn;
        trace.push(ev.energy);
    }
    unreachable!()
}

fn bfgs(x0: Vec<f64>, cfg: &LpEnergyConfig, sched: &ContinuationSchedule) -> Result<StageOutcome, StageError> {
    let n = x0.len();
    let mut x = x0;
    let mut ev = evaluate(&x, cfg)?;
    let energy_initial = ev.energy;
    let mut trace = vec![ev.energy];
    // inverse Hessian, row-major; initialized from the lumped weights
    let grid = cfg.problem.grid().clone();
    let w: Vec<f64> = grid.interior_nodes().iter().map(|&i| grid.weights()[i]).collect();
    let mut hinv = vec![0.0; n * n];
    let mut g = if ev.e_p <= DEGENERATE_EP && cfg.eps == 0.0 {
        vec![0.0; n]
    } else {
        gradient_at(&x, &ev, cfg)?
    };
    let mut initialized = false;
    for it in 0..=sched.max_iter {
        let tol = sched.tol_factor * (1.0 + ev.e_p);
        if ev.e_p <= DEGENERATE_EP && cfg.eps == 0.0 {
            return Ok(done(x, ev, it, 0.0, tol, energy_initial, trace));
        }
        let gn = gradient_norm(&g, cfg);
        if gn <= tol {
            return Ok(done(x, ev, it, gn, tol, energy_initial, trace));
        }
        if it == sched.max_iter {
            return Err(StageError::MaxIterations {
                iteration: it,
                grad_norm: gn,
                last: x,
            });
        }
        if !initialized {
            // scaled so the first step is a unit-size move in the weighted norm
            let s = 1.0 / gn.max(1e-300);
            hinv.iter_mut().for_each(|v| *v = 0.0);
            for k in 0..n {
                hinv[k * n + k] = s / w[k];
            }
            initialized = true;
        }
        let d: Vec<f64> = (0..n)
            .map(|r| -(0..n).map(|c| hinv[r * n + c] * g[c]).sum::<f64>())
            .collect();
        let slope = dot(&g, &d);
        let acc = if slope < 0.0 { armijo(&x, ev.energy, slope, &d, cfg) } else { None };
        let Some((xn, evn, _)) = acc else {
            if it > 0 && initialized {
                initialized = false;
                continue;
            }
            return Err(StageError::LineSearch {
                iteration: it,
                grad_norm: gn,
                last: x,
            });
        };
        let gn_vec = if evn.e_p <= DEGENERATE_EP && cfg.eps == 0.0 {
            vec![0.0; n]
        } else {
            gradient_at(&xn, &evn, cfg)?
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn_vec.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..n)
                .map(|r| (0..n).map(|c| hinv[r * n + c] * y[c]).sum::<f64>())
                .collect();
            let yhy = dot(&y, &hy);
            for r in 0..n {
                for c in 0..n {
                    hinv[r * n + c] += -rho * (hy[r] * s[c] + s[r] * hy[c])
                        + (rho * rho * yhy + rho) * s[r] * s[c];
                }
            }
        }
        x = xn;
        ev = evn;
        g = gn_vec;
        trace.push(ev.energy);
    }
    unreachable!()
}

fn done(
    interior: Vec<f64>,
    evaluation: Evaluation,
    iterations: usize,
    grad_norm: f64,
    tolerance: f64,
    energy_initial: f64,
    energy_trace: Vec<f64>,
) -> StageOutcome {
    let stop = if evaluation.e_p <= DEGENERATE_EP && grad_norm == 0.0 {
        StopReason::Degenerate
    } else {
        StopReason::Gradient
    };
    StageOutcome {
        interior,
        evaluation,
        iterations,
        grad_norm,
        tolerance,
        energy_initial,
        energy_trace,
        stop,
    }
}

/// Minimizes one penalized stage from a clamped starting field.
pub fn solve_stage(
    u_init: &ScalarField,
    cfg: &LpEnergyConfig,
    sched: &ContinuationSchedule,
) -> Result<StageOutcome, StageError> {
    let mism = cfg.problem.data().boundary_mismatch(u_init);
    if mism > 1e-12 * (1.0 + u_init.max_abs()) {
        return Err(StageError::Infeasible(mism));
    }
    let x0 = u_init.interior_values();
    match sched.inner {
        InnerMethod::Newton => newton(x0, cfg, sched),
        InnerMethod::Bfgs => bfgs(x0, cfg, sched),
    }
}

/// Clamped starting field: weighted least-squares solution of
/// `A:D²u = c` with `c` the mean of the zero level `ξ̄(x, 0, 0)`.
pub fn initial_field(problem: &Problem) -> ScalarField {
    let g = problem.grid();
    let dim = g.dim();
    let w = g.weights();
    let spec = problem.inner_spec();
    let levels: Vec<f64> = (0..g.node_count())
        .map(|i| {
            spec.zero_level(&g.coords(i)[..dim], 0.0, &[0.0; 2][..dim])
                .unwrap_or(0.0)
        })
        .collect();
    let c = g.mean(&levels);
    let op = problem.jet_operator();
    let n = op.unknown_count();
    let m = op.width();
    let offset = op.apply(&vec![0.0; n]);
    let rows = op.rows();
    let mut normal = SymBand::zeros(n, op.node_span());
    let mut rhs = vec![0.0; n];
    for i in 0..g.node_count() {
        let row: Vec<(usize, f64)> = rows.row(i * m + m - 1).collect();
        let r = c - offset.xi(i);
        for (a, &(ca, va)) in row.iter().enumerate() {
            rhs[ca] += w[i] * va * r;
            for &(cb, vb) in &row[..=a] {
                normal.add(ca, cb, w[i] * va * vb);
            }
        }
    }
    let interior = match normal.cholesky() {
        Ok(ch) => ch.solve(&rhs),
        Err(_) => vec![0.0; n],
    };
    problem.field(&interior)
}

fn stage_config(
    problem: &Arc<Problem>,
    p: f64,
    sched: &ContinuationSchedule,
    previous: &ScalarField,
) -> Result<LpEnergyConfig, LpError> {
    match &sched.penalty {
        PenaltyPolicy::None => LpEnergyConfig::new(problem.clone(), p, 0.0, None),
        PenaltyPolicy::Fixed { eps, anchor } => {
            LpEnergyConfig::new(problem.clone(), p, *eps, anchor.clone())
        }
        PenaltyPolicy::Recentered { eps } => {
            LpEnergyConfig::new(problem.clone(), p, *eps, Some(previous.clone()))
        }
    }
}

/// Sign-law residual of `(u, f_p)` with the default 2h band, and the nodal
/// count of `f_p`.
fn stage_sign_law(u: &ScalarField, cfg: &LpEnergyConfig) -> (Option<f64>, Option<usize>, Option<DualFields>) {
    match extract_duals(u, cfg) {
        Ok(d) => {
            let nodal = nodal_set(&d.f).count();
            let r = crate::characterization::check_sign_law(u, &d.f, &cfg.problem, 2.0)
                .ok()
                .map(|r| r.residual);
            (r, Some(nodal), Some(d))
        }
        Err(_) => (None, None, None),
    }
}

/// Runs the ladder. `initial` defaults to [`initial_field`].
pub fn continuation_solve(
    problem: Arc<Problem>,
    sched: &ContinuationSchedule,
    initial: Option<ScalarField>,
) -> Result<ContinuationReport, ContinuationError> {
    let start = Instant::now();
    let u0 = initial.unwrap_or_else(|| initial_field(&problem));
    let mut report = ContinuationReport {
        stages: Vec::new(),
        early_stopped: false,
        monotone: true,
        guards_passed: true,
        u: u0.clone(),
        stage_fields: Vec::new(),
        duals: None,
        elapsed: Duration::ZERO,
    };
    if let Err(e) = sched.validate() {
        return Err(ContinuationError {
            stage: 0,
            p: sched.ladder.first().copied().unwrap_or(f64::NAN),
            source: StageError::Energy(LpError::Parameter(e.to_string())),
            partial: Box::new(report),
        });
    }
    let fail = |report: &mut ContinuationReport, k: usize, p: f64, e: StageError| {
        report.elapsed = start.elapsed();
        ContinuationError {
            stage: k,
            p,
            source: e,
            partial: Box::new(report.clone()),
        }
    };
    let mut current = u0.clone();
    let mut last_duals = None;
    for (k, &p) in sched.ladder.iter().enumerate() {
        let t0 = Instant::now();
        let cfg = match stage_config(&problem, p, sched, &current) {
            Ok(c) => c,
            Err(e) => return Err(fail(&mut report, k, p, e.into())),
        };
        let outcome = match solve_stage(&current, &cfg, sched) {
            Ok(o) => o,
            Err(e) => return Err(fail(&mut report, k, p, e)),
        };
        let u = problem.field(&outcome.interior);
        let u_bar = if cfg.eps > 0.0 { &cfg.anchor } else { &u0 };
        let guard = coercivity_guard(&u, u_bar, &cfg, sched.delta);
        if !guard.passed {
            report.guards_passed = false;
            return Err(fail(&mut report, k, p, StageError::Guard(guard)));
        }
        let (residual, nodal, duals) = stage_sign_law(&u, &cfg);
        let anchor_distance = (cfg.eps > 0.0).then(|| {
            u.values()
                .iter()
                .zip(cfg.anchor.values())
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
        });
        let ev = &outcome.evaluation;
        let stats = StageStats {
            p,
            e_p: ev.e_p,
            energy_initial: outcome.energy_initial,
            energy_final: ev.energy,
            iterations: outcome.iterations,
            grad_norm: outcome.grad_norm,
            tolerance: outcome.tolerance,
            stop: outcome.stop,
            f_max: ev.f_max,
            sign_law_residual: residual,
            nodal_count: nodal,
            anchor_distance,
            guard,
            elapsed: t0.elapsed(),
        };
        let stop = sched.early_stop
            && report.stages.last().is_some_and(|prev: &StageStats| {
                let flat = (stats.e_p - prev.e_p).abs() <= 1e-4 * prev.e_p;
                let stalled = match (stats.sign_law_residual, prev.sign_law_residual) {
                    (Some(r), Some(q)) => r >= q,
                    _ => false,
                };
                flat && stalled
            });
        if let Some(prev) = report.stages.last() {
            if stats.e_p < prev.e_p - MONOTONE_SLACK {
                report.monotone = false;
            }
        }
        report.stages.push(stats);
        report.stage_fields.push(u.clone());
        if duals.is_some() {
            last_duals = duals;
        } else if ev.e_p <= DEGENERATE_EP {
            last_duals = None;
        }
        current = u;
        if stop {
            report.early_stopped = k + 1 < sched.ladder.len();
            break;
        }
    }
    report.u = current;
    report.duals = last_duals;
    report.elapsed = start.elapsed();
    Ok(report)
}
