//! Penalized L^p energy
//!
//! ```text
//! E(u) = (Σ w_i |F(J²u)_i|^p)^{1/p} + (ε/2) Σ w_i (u_i - ū_i)²
//! ```
//!
//! over clamped fields, its exact gradient and Hessian with respect to the
//! interior values, and the dual quantities `e_p`, `f_p`, `K_p`, `L_p` at a
//! stage solution. The root is kept so magnitudes stay comparable to
//! `max |F|` for every `p`; powers are taken relative to `e_p`.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::grid::{weighted_lp_norm, ScalarField};
use crate::jet::Jet2Field;
use crate::linalg::SymBand;
use crate::problem::Problem;
use crate::supremand::{Derivs, MAX_JET};

/// Below this `e_p` a stage counts as having reached `F ≡ 0`.
pub const DEGENERATE_EP: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("non-finite supremand value at node {node}")]
    NonFinite { node: usize },
    #[error("field violates the clamped data by {0:e}")]
    Infeasible(f64),
    #[error("field is on a different grid")]
    GridMismatch,
    #[error("e_p = {0:e} with no penalty: the root is not differentiable at a zero minimum")]
    Degenerate(f64),
    #[error("dual overflow at node {node}: log-magnitude {log_mag}")]
    Overflow { node: usize, log_mag: f64 },
}

/// Parameters of one penalized stage.
#[derive(Debug, Clone)]
pub struct LpEnergyConfig {
    pub problem: Arc<Problem>,
    pub p: f64,
    pub eps: f64,
    pub anchor: ScalarField,
}

impl LpEnergyConfig {
    /// `anchor` defaults to the zero field; it is only read when `eps > 0`.
    pub fn new(
        problem: Arc<Problem>,
        p: f64,
        eps: f64,
        anchor: Option<ScalarField>,
    ) -> Result<Self, LpError> {
        if !(p >= 2.0) || !p.is_finite() {
            return Err(LpError::Parameter(format!("p must be finite and >= 2, got {p}")));
        }
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(LpError::Parameter(format!("eps must be finite and >= 0, got {eps}")));
        }
        let anchor = match anchor {
            Some(a) => {
                if !a.same_grid(&ScalarField::zeros(problem.grid().clone())) {
                    return Err(LpError::GridMismatch);
                }
                a
            }
            None => ScalarField::zeros(problem.grid().clone()),
        };
        Ok(LpEnergyConfig {
            problem,
            p,
            eps,
            anchor,
        })
    }

    pub fn with_p(&self, p: f64) -> Result<Self, LpError> {
        LpEnergyConfig::new(self.problem.clone(), p, self.eps, Some(self.anchor.clone()))
    }
}

/// Everything computed at one iterate.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub energy: f64,
    pub e_p: f64,
    /// Discrete `max |F(J²u)|`.
    pub f_max: f64,
    pub jets: Jet2Field,
    pub derivs: Vec<Derivs>,
    /// `sgn(F)(|F|/e_p)^{p-1}` per node (zero when `e_p` vanishes).
    pub t: Vec<f64>,
    pub penalty: f64,
}

fn check_feasible(u: &ScalarField, cfg: &LpEnergyConfig) -> Result<(), LpError> {
    let pb = &cfg.problem;
    if !u.same_grid(&cfg.anchor) {
        return Err(LpError::GridMismatch);
    }
    let mism = pb.data().boundary_mismatch(u);
    let scale = 1.0 + pb.data().values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if mism > 1e-12 * scale {
        return Err(LpError::Infeasible(mism));
    }
    Ok(())
}

/// Evaluates the stage energy at the clamped field with these interior
/// values.
pub fn evaluate(interior: &[f64], cfg: &LpEnergyConfig) -> Result<Evaluation, LpError> {
    let pb = &cfg.problem;
    let jets = pb.jet_operator().apply(interior);
    let derivs = pb.node_derivs(&jets);
    let values: Vec<f64> = derivs.iter().map(|d| d.value).collect();
    if let Some(node) = values.iter().position(|v| !v.is_finite()) {
        return Err(LpError::NonFinite { node });
    }
    let w = pb.grid().weights();
    let e_p = weighted_lp_norm(pb.supremand_weights(), &values, cfg.p);
    let f_max = pb.active_max_abs(&values);
    let t = if e_p > 0.0 {
        values
            .iter()
            .zip(pb.active_mask())
            .map(|(v, a)| {
                if *a {
                    v.signum() * (v.abs() / e_p).powf(cfg.p - 1.0)
                } else {
                    0.0
                }
            })
            .collect()
    } else {
        vec![0.0; values.len()]
    };
    let mut penalty = 0.0;
    if cfg.eps > 0.0 {
        let u = pb.field(interior);
        penalty = 0.5
            * cfg.eps
            * w.iter()
                .zip(u.values().iter().zip(cfg.anchor.values()))
                .map(|(wi, (a, b))| wi * (a - b) * (a - b))
                .sum::<f64>();
    }
    Ok(Evaluation {
        energy: e_p + penalty,
        e_p,
        f_max,
        jets,
        derivs,
        t,
        penalty,
    })
}

/// Gradient with respect to the interior values.
pub fn gradient_at(interior: &[f64], ev: &Evaluation, cfg: &LpEnergyConfig) -> Result<Vec<f64>, LpError> {
    let pb = &cfg.problem;
    let w = pb.grid().weights();
    let sw = pb.supremand_weights();
    let m = ev.jets.width();
    let mut g = if ev.e_p > DEGENERATE_EP || (ev.e_p > 0.0 && cfg.eps == 0.0) {
        let mut jw = vec![0.0; w.len() * m];
        for (i, d) in ev.derivs.iter().enumerate() {
            let s = sw[i] * ev.t[i];
            if s == 0.0 {
                continue;
            }
            for k in 0..m {
                jw[i * m + k] = s * d.grad[k];
            }
        }
        pb.jet_operator().transpose(&jw)
    } else if cfg.eps > 0.0 {
        vec![0.0; interior.len()]
    } else {
        return Err(LpError::Degenerate(ev.e_p));
    };
    if cfg.eps > 0.0 {
        for (k, &idx) in pb.grid().interior_nodes().iter().enumerate() {
            g[k] += cfg.eps * w[idx] * (interior[k] - cfg.anchor.values()[idx]);
        }
    }
    Ok(g)
}

/// Stage energy of a clamped field.
pub fn energy(u: &ScalarField, cfg: &LpEnergyConfig) -> Result<f64, LpError> {
    check_feasible(u, cfg)?;
    Ok(evaluate(&u.interior_values(), cfg)?.energy)
}

/// Exact gradient of [`energy`] with respect to the interior values,
/// returned as a field that vanishes on the boundary.
pub fn gradient(u: &ScalarField, cfg: &LpEnergyConfig) -> Result<ScalarField, LpError> {
    check_feasible(u, cfg)?;
    let x = u.interior_values();
    let ev = evaluate(&x, cfg)?;
    let g = gradient_at(&x, &ev, cfg)?;
    let grid = cfg.problem.grid().clone();
    let mut out = ScalarField::zeros(grid.clone());
    for (k, &idx) in grid.interior_nodes().iter().enumerate() {
        out.values_mut()[idx] = g[k];
    }
    Ok(out)
}

/// Hessian of the stage energy as `M - v vᵀ`: `M` banded (node blocks plus
/// penalty), `v` the rank-one correction from the root.
pub fn hessian_at(ev: &Evaluation, cfg: &LpEnergyConfig) -> (SymBand, Vec<f64>) {
    let pb = &cfg.problem;
    let op = pb.jet_operator();
    let grid = pb.grid();
    let w = grid.weights();
    let sw = pb.supremand_weights();
    let m = ev.jets.width();
    let n = op.unknown_count();
    let mut hm = SymBand::zeros(n, op.node_span());
    let p = cfg.p;
    let e = ev.e_p;
    let rows = op.rows();
    let mut jw = vec![0.0; w.len() * m];
    if e > DEGENERATE_EP {
        let c = (p - 1.0) / e;
        for (i, d) in ev.derivs.iter().enumerate() {
            if sw[i] == 0.0 {
                continue;
            }
            let r = (d.value.abs() / e).powf(p - 2.0);
            let ti = ev.t[i];
            let mut b = [[0.0; MAX_JET]; MAX_JET];
            let mut any = false;
            for k in 0..m {
                jw[i * m + k] = sw[i] * ti * d.grad[k];
                for l in 0..m {
                    b[k][l] = sw[i] * (ti * d.hess[k][l] + c * r * d.grad[k] * d.grad[l]);
                    any |= b[k][l] != 0.0;
                }
            }
            if !any {
                continue;
            }
            // local block: unknowns touched by this node's jet rows
            let mut cols: Vec<usize> = Vec::new();
            for k in 0..m {
                for (col, _) in rows.row(i * m + k) {
                    if !cols.contains(&col) {
                        cols.push(col);
                    }
                }
            }
            let mut jl = vec![0.0; m * cols.len()];
            for k in 0..m {
                for (col, v) in rows.row(i * m + k) {
                    let pos = cols.iter().position(|c| *c == col).unwrap();
                    jl[k * cols.len() + pos] = v;
                }
            }
            for (a, &ca) in cols.iter().enumerate() {
                for (bb, &cb) in cols.iter().enumerate().take(a + 1) {
                    let mut s = 0.0;
                    for k in 0..m {
                        let jka = jl[k * cols.len() + a];
                        if jka == 0.0 {
                            continue;
                        }
                        for l in 0..m {
                            s += jka * b[k][l] * jl[l * cols.len() + bb];
                        }
                    }
                    if s != 0.0 {
                        hm.add(ca, cb, s);
                    }
                }
            }
        }
    }
    if cfg.eps > 0.0 {
        let d: Vec<f64> = grid
            .interior_nodes()
            .iter()
            .map(|&idx| cfg.eps * w[idx])
            .collect();
        hm.add_diag(&d);
    }
    let v = if e > DEGENERATE_EP {
        let s = ((p - 1.0) / e).sqrt();
        op.transpose(&jw).into_iter().map(|g| s * g).collect()
    } else {
        vec![0.0; n]
    };
    (hm, v)
}

/// Inactive nodes carry no quadrature weight, so the multiplier is not
/// determined there; it is extended by the mean over active axis
/// neighbours.
fn fill_inactive(pb: &Problem, f: &mut [f64]) {
    let g = pb.grid();
    let n = g.nodes_per_axis();
    for idx in 0..f.len() {
        if pb.is_active(idx) {
            continue;
        }
        let (i, j) = g.multi_index(idx);
        let mut sum = 0.0;
        let mut count = 0;
        for (di, dj) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)] {
            let (ni, nj) = (i as isize + di, j as isize + dj);
            let ny = if g.dim() == 2 { n[1] } else { 1 };
            if ni < 0 || nj < 0 || ni as usize >= n[0] || nj as usize >= ny {
                continue;
            }
            let k = g.index(ni as usize, nj as usize);
            if pb.is_active(k) {
                sum += f[k];
                count += 1;
            }
        }
        if count > 0 {
            f[idx] = sum / count as f64;
        }
    }
}

/// `e_p`, `f_p`, `K_p`, `L_p` at a stage solution, on every node.
#[derive(Debug, Clone)]
pub struct DualFields {
    pub p: f64,
    pub e_p: f64,
    pub f: ScalarField,
    pub k: ScalarField,
    pub l: Vec<[f64; 2]>,
}

/// JSON summary of extracted duals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualSummary {
    pub p: f64,
    pub e_p: f64,
    pub min_f: f64,
    pub max_f: f64,
    pub nodal_count: usize,
}

impl DualFields {
    pub fn summary(&self, nodal_count: usize) -> DualSummary {
        let v = self.f.values();
        DualSummary {
            p: self.p,
            e_p: self.e_p,
            min_f: v.iter().cloned().fold(f64::INFINITY, f64::min),
            max_f: v.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            nodal_count,
        }
    }
}

/// Largest log-magnitude accepted before `exp` overflows.
const LOG_MAX: f64 = 700.0;

/// Dual fields at `u`, with
/// `f_p = sgn F · exp((p-1)(ln|F| - ln e_p) + ln ∂_ξF)`.
pub fn extract_duals(u: &ScalarField, cfg: &LpEnergyConfig) -> Result<DualFields, LpError> {
    check_feasible(u, cfg)?;
    let pb = &cfg.problem;
    let ev = evaluate(&u.interior_values(), cfg)?;
    if !(ev.e_p > 0.0) {
        return Err(LpError::Degenerate(ev.e_p));
    }
    let grid = pb.grid().clone();
    let dim = grid.dim();
    let le = ev.e_p.ln();
    let mut f = Vec::with_capacity(ev.derivs.len());
    let mut k = Vec::with_capacity(ev.derivs.len());
    let mut l = Vec::with_capacity(ev.derivs.len());
    for (node, d) in ev.derivs.iter().enumerate() {
        let dxi = d.d_xi();
        if d.value == 0.0 || !pb.is_active(node) {
            f.push(0.0);
        } else {
            let log_mag = (cfg.p - 1.0) * (d.value.abs().ln() - le) + dxi.ln();
            if !(log_mag < LOG_MAX) {
                return Err(LpError::Overflow { node, log_mag });
            }
            f.push(d.value.signum() * log_mag.exp());
        }
        k.push(d.d_eta() / dxi);
        let mut lv = [0.0; 2];
        for (a, v) in d.d_p().iter().enumerate().take(dim) {
            lv[a] = v / dxi;
        }
        l.push(lv);
    }
    fill_inactive(pb, &mut f);
    Ok(DualFields {
        p: cfg.p,
        e_p: ev.e_p,
        f: ScalarField::new(grid.clone(), f).map_err(|_| LpError::NonFinite { node: 0 })?,
        k: ScalarField::new(grid, k).map_err(|_| LpError::NonFinite { node: 0 })?,
        l,
    })
}
