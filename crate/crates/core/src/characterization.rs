//! Certification of a candidate pair `(u, f)`.
//!
//! * sign law: `F(J²u) = F_∞ · sgn f` away from a band around `{f = 0}`;
//! * weak residual of `div(A Df - L f) + K f = 0` against smooth bumps;
//! * constancy of `|F(J²u)|`;
//! * the positivity probe `Θ_∞(ψ) = max sgn(f) (∂F · J²ψ)`;
//! * directional minimality probes `F_∞(u + tψ) ≥ F_∞(u)`;
//! * the nodal set of `f`.
//!
//! Every maximum is a discrete maximum over grid nodes.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::grid::{Grid, ScalarField};
use crate::jet::Jet2Field;
use crate::problem::Problem;

#[derive(Debug, Error)]
pub enum CertError {
    #[error("dual field vanishes identically")]
    ZeroDual,
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("empty test family")]
    EmptyFamily,
    #[error("variation {index} is not clamped to zero (boundary value {value:e})")]
    NotClamped { index: usize, value: f64 },
    #[error("variation {index} vanishes identically")]
    ZeroVariation { index: usize },
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Zero set of a nodal field: linear-interpolation crossings in 1D,
/// marching-squares segments in 2D.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodalSet {
    /// Crossing points (1D) or segment endpoints (2D), as coordinate lists.
    pub points: Vec<Vec<f64>>,
    /// Contour segments (2D only).
    pub segments: Vec<[[f64; 2]; 2]>,
    /// Nodes where the field is exactly zero.
    pub zero_nodes: Vec<usize>,
    pub crossing_cells: usize,
    /// `crossing_cells · h^dim`, an upper bound proxy for the band measure.
    pub measure_proxy: f64,
}

impl NodalSet {
    /// Number of distinct sign-change locations.
    pub fn count(&self) -> usize {
        if self.segments.is_empty() {
            self.points.len()
        } else {
            self.segments.len()
        }
    }
}

fn lerp_zero(a: [f64; 2], fa: f64, b: [f64; 2], fb: f64) -> [f64; 2] {
    let t = fa / (fa - fb);
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

pub fn nodal_set(f: &ScalarField) -> NodalSet {
    let g = f.grid();
    let v = f.values();
    let dim = g.dim();
    let h_vol: f64 = g.spacing().iter().product();
    let zero_nodes: Vec<usize> = (0..v.len()).filter(|&i| v[i] == 0.0).collect();
    let mut points = Vec::new();
    let mut segments = Vec::new();
    let mut cells = 0;
    if dim == 1 {
        for i in 0..v.len() - 1 {
            if (v[i] < 0.0 && v[i + 1] > 0.0) || (v[i] > 0.0 && v[i + 1] < 0.0) {
                let p = lerp_zero(g.coords(i), v[i], g.coords(i + 1), v[i + 1]);
                points.push(vec![p[0]]);
                cells += 1;
            }
        }
        for &i in &zero_nodes {
            points.push(vec![g.coords(i)[0]]);
        }
        points.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
        cells += zero_nodes.len();
    } else {
        let n = g.nodes_per_axis();
        let pos = |x: f64| x >= 0.0;
        for j in 0..n[1] - 1 {
            for i in 0..n[0] - 1 {
                let c = [
                    g.index(i, j),
                    g.index(i + 1, j),
                    g.index(i + 1, j + 1),
                    g.index(i, j + 1),
                ];
                let mut cross = Vec::new();
                for e in 0..4 {
                    let (a, b) = (c[e], c[(e + 1) % 4]);
                    if pos(v[a]) != pos(v[b]) {
                        cross.push(lerp_zero(g.coords(a), v[a], g.coords(b), v[b]));
                    }
                }
                if cross.is_empty() {
                    continue;
                }
                cells += 1;
                if cross.len() == 2 {
                    segments.push([cross[0], cross[1]]);
                } else if cross.len() == 4 {
                    // saddle: pair by the sign of the cell average
                    let mean = c.iter().map(|&k| v[k]).sum::<f64>() / 4.0;
                    if pos(mean) == pos(v[c[0]]) {
                        segments.push([cross[0], cross[3]]);
                        segments.push([cross[1], cross[2]]);
                    } else {
                        segments.push([cross[0], cross[1]]);
                        segments.push([cross[2], cross[3]]);
                    }
                }
            }
        }
        for s in &segments {
            points.push(s[0].to_vec());
            points.push(s[1].to_vec());
        }
    }
    NodalSet {
        points,
        segments,
        zero_nodes,
        crossing_cells: cells,
        measure_proxy: cells as f64 * h_vol,
    }
}

fn dist_to_segment(p: [f64; 2], s: &[[f64; 2]; 2]) -> f64 {
    let d = [s[1][0] - s[0][0], s[1][1] - s[0][1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 {
        (((p[0] - s[0][0]) * d[0] + (p[1] - s[0][1]) * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = [s[0][0] + t * d[0], s[0][1] + t * d[1]];
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

/// Nodes within `width` of the zero set of `f` (plus nodes where `f = 0`).
pub fn nodal_band(f: &ScalarField, width: f64) -> Vec<bool> {
    let g = f.grid();
    let ns = nodal_set(f);
    let mut band = vec![false; g.node_count()];
    for &z in &ns.zero_nodes {
        band[z] = true;
    }
    for (idx, b) in band.iter_mut().enumerate() {
        let x = g.coords(idx);
        if g.dim() == 1 {
            *b |= ns.points.iter().any(|p| (p[0] - x[0]).abs() <= width);
        } else {
            *b |= ns.segments.iter().any(|s| dist_to_segment(x, s) <= width);
        }
    }
    band
}

/// Sign-law check result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignLawReport {
    pub f_inf: f64,
    pub residual: f64,
    pub sign_violations: usize,
    pub worst_node: Option<usize>,
    pub worst_point: Vec<f64>,
    pub band_nodes: usize,
    pub band_width: f64,
}

fn sign_law_from_values(
    problem: &Problem,
    values: &[f64],
    f: &ScalarField,
    band_width: f64,
) -> SignLawReport {
    let g = problem.grid();
    let f_inf = problem.active_max_abs(values);
    let band = nodal_band(f, band_width);
    let mut rep = SignLawReport {
        f_inf,
        residual: 0.0,
        sign_violations: 0,
        worst_node: None,
        worst_point: Vec::new(),
        band_nodes: band.iter().filter(|b| **b).count(),
        band_width,
    };
    for (i, (&fv, &dv)) in values.iter().zip(f.values()).enumerate() {
        if band[i] || !problem.is_active(i) {
            continue;
        }
        let r = (fv - f_inf * sign(dv)).abs();
        if fv != 0.0 && sign(fv) != sign(dv) {
            rep.sign_violations += 1;
        }
        if r > rep.residual || rep.worst_node.is_none() {
            rep.residual = rep.residual.max(r);
            rep.worst_node = Some(i);
            rep.worst_point = g.coords(i)[..g.dim()].to_vec();
        }
    }
    rep
}

/// `max |F(J²u) - F_∞ sgn f|` over nodes outside the band of half-width
/// `band_h · h` around the zero set of `f`.
pub fn check_sign_law(
    u: &ScalarField,
    f: &ScalarField,
    problem: &Problem,
    band_h: f64,
) -> Result<SignLawReport, CertError> {
    if !u.same_grid(f) || !u.same_grid(&ScalarField::zeros(problem.grid().clone())) {
        return Err(CertError::GridMismatch);
    }
    if f.values().iter().all(|v| *v == 0.0) {
        return Err(CertError::ZeroDual);
    }
    let values = problem.supremand_values(u);
    Ok(sign_law_from_values(
        problem,
        &values,
        f,
        band_h * problem.grid().h_max(),
    ))
}

/// Smooth compactly supported test function with analytic derivatives at
/// grid nodes.
#[derive(Debug, Clone)]
pub struct TestBump {
    pub center: [f64; 2],
    pub radius: f64,
    /// `(node, ψ, Dψ, D²ψ)` over the support.
    pub samples: Vec<(usize, f64, [f64; 2], [[f64; 2]; 2])>,
    pub c2_norm: f64,
}

/// Profile `(1 - r²)⁶` and its derivatives in `r`. It is C⁵ across
/// `|r| = 1`, which keeps the trapezoid error of `Σ w b''` small even with
/// only eight cells per radius.
fn bump_profile(r: f64) -> (f64, f64, f64) {
    if r.abs() >= 1.0 {
        (0.0, 0.0, 0.0)
    } else {
        let q = 1.0 - r * r;
        let q4 = q * q * q * q;
        (q4 * q * q, -12.0 * r * q4 * q, q4 * (132.0 * r * r - 12.0))
    }
}

/// Tensor-product bumps of radius `k·h`, `k ∈ radii_h`, centred on
/// every `stride`-th node with support inside the domain.
pub fn bump_family(grid: &Arc<Grid>, radii_h: &[usize], stride: usize) -> Vec<TestBump> {
    let dim = grid.dim();
    let h = grid.spacing();
    let n = grid.nodes_per_axis();
    let stride = stride.max(1);
    let mut out = Vec::new();
    for &k in radii_h {
        // radius in index units along each axis (same multiple of h)
        let ny = if dim == 2 { n[1] } else { 1 };
        let jr: Vec<usize> = if dim == 2 {
            (k..ny.saturating_sub(k)).step_by(stride).collect()
        } else {
            vec![0]
        };
        for &cj in &jr {
            for ci in (k..n[0].saturating_sub(k)).step_by(stride) {
                let center_idx = grid.index(ci, cj);
                let c = grid.coords(center_idx);
                let mut samples = Vec::new();
                let (mut m0, mut m1, mut m2) = (0.0_f64, 0.0_f64, 0.0_f64);
                let jrange = if dim == 2 { cj - k..=cj + k } else { 0..=0 };
                for j in jrange {
                    for i in ci - k..=ci + k {
                        let idx = grid.index(i, j);
                        let x = grid.coords(idx);
                        let mut prof = [(1.0, 0.0, 0.0); 2];
                        for a in 0..dim {
                            let rho = k as f64 * h[a];
                            let (b, b1, b2) = bump_profile((x[a] - c[a]) / rho);
                            prof[a] = (b, b1 / rho, b2 / (rho * rho));
                        }
                        let val = prof[0].0 * prof[1].0;
                        let mut d = [0.0; 2];
                        let mut d2 = [[0.0; 2]; 2];
                        d[0] = prof[0].1 * prof[1].0;
                        d2[0][0] = prof[0].2 * prof[1].0;
                        if dim == 2 {
                            d[1] = prof[0].0 * prof[1].1;
                            d2[1][1] = prof[0].0 * prof[1].2;
                            d2[0][1] = prof[0].1 * prof[1].1;
                            d2[1][0] = d2[0][1];
                        }
                        m0 = m0.max(val.abs());
                        m1 = m1.max(d[0].abs().max(d[1].abs()));
                        m2 = m2.max(
                            d2.iter()
                                .flatten()
                                .fold(0.0_f64, |m, v| m.max(v.abs())),
                        );
                        samples.push((idx, val, d, d2));
                    }
                }
                out.push(TestBump {
                    center: c,
                    radius: k as f64 * h[0],
                    samples,
                    c2_norm: m0 + m1 + m2,
                });
            }
        }
    }
    out
}

/// Default weak-form family: radii 4h, 6h and 8h on every other node.
pub fn default_bump_family(grid: &Arc<Grid>) -> Vec<TestBump> {
    bump_family(grid, &[4, 6, 8], 2)
}

/// Weak-form residual report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakResidualReport {
    pub residual: f64,
    pub worst_center: Vec<f64>,
    pub worst_radius: f64,
    pub family_size: usize,
}

/// `max_j |Σ w f (A:D²ψ_j + L·Dψ_j + Kψ_j)| / (‖f‖_{L¹} ‖ψ_j‖_{C²})`
/// with `K = ∂_ηF/∂_ξF`, `L = ∂_pF/∂_ξF` at `J²u`.
pub fn weak_residual(
    u: &ScalarField,
    f: &ScalarField,
    problem: &Problem,
    family: &[TestBump],
) -> Result<WeakResidualReport, CertError> {
    if family.is_empty() {
        return Err(CertError::EmptyFamily);
    }
    if !u.same_grid(f) {
        return Err(CertError::GridMismatch);
    }
    let g = problem.grid();
    let dim = g.dim();
    let a = problem.matrix();
    let w = g.weights();
    let l1 = f.l1_norm();
    if l1 == 0.0 {
        return Err(CertError::ZeroDual);
    }
    let derivs = problem.node_derivs(&problem.jets(u));
    let fv = f.values();
    let mut rep = WeakResidualReport {
        residual: 0.0,
        worst_center: Vec::new(),
        worst_radius: 0.0,
        family_size: family.len(),
    };
    for b in family {
        let mut s = 0.0;
        for &(idx, val, d, d2) in &b.samples {
            let dr = &derivs[idx];
            let dxi = dr.d_xi();
            let mut op = 0.0;
            for r in 0..dim {
                for c in 0..dim {
                    op += a.get(r, c) * d2[r][c];
                }
                op += dr.d_p()[r] / dxi * d[r];
            }
            op += dr.d_eta() / dxi * val;
            s += w[idx] * fv[idx] * op;
        }
        let r = s.abs() / (l1 * b.c2_norm);
        if r > rep.residual || rep.worst_center.is_empty() {
            rep.residual = rep.residual.max(r);
            rep.worst_center = b.center[..dim].to_vec();
            rep.worst_radius = b.radius;
        }
    }
    Ok(rep)
}

/// Constancy of `|F(J²u)|`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AronssonReport {
    /// `max - min` of `|F(J²u)|` over all nodes.
    pub oscillation: f64,
    /// Discrete `max |D|F(J²u)||` (central differences, one-sided at the
    /// boundary).
    pub gradient_max: f64,
}

pub fn aronsson_constancy(u: &ScalarField, problem: &Problem) -> AronssonReport {
    let g = problem.grid();
    let vals: Vec<f64> = problem
        .supremand_values(u)
        .iter()
        .map(|v| v.abs())
        .collect();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for (v, _) in vals.iter().zip(problem.active_mask()).filter(|(_, a)| **a) {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    let n = g.nodes_per_axis();
    let h = g.spacing();
    let mut gmax = 0.0_f64;
    for idx in 0..vals.len() {
        if !problem.is_active(idx) {
            continue;
        }
        let (i, j) = g.multi_index(idx);
        let ij = [i, j];
        for a in 0..g.dim() {
            let step = |k: usize| if a == 0 { g.index(k, j) } else { g.index(i, k) };
            let k = ij[a];
            let (lo_k, hi_k) = (k.saturating_sub(1), (k + 1).min(n[a] - 1));
            if !problem.is_active(step(lo_k)) || !problem.is_active(step(hi_k)) {
                continue;
            }
            let d = (vals[step(hi_k)] - vals[step(lo_k)]) / ((hi_k - lo_k) as f64 * h[a]);
            gmax = gmax.max(d.abs());
        }
    }
    AronssonReport {
        oscillation: if vals.is_empty() { 0.0 } else { hi - lo },
        gradient_max: gmax,
    }
}

fn check_clamped(psi: &ScalarField, index: usize) -> Result<(), CertError> {
    let g = psi.grid();
    for i in 0..g.node_count() {
        if g.is_boundary(i) && psi.values()[i] != 0.0 {
            return Err(CertError::NotClamped {
                index,
                value: psi.values()[i],
            });
        }
    }
    if psi.values().iter().all(|v| *v == 0.0) {
        return Err(CertError::ZeroVariation { index });
    }
    Ok(())
}

/// `Θ_∞(ψ) = max_i sgn(f_i) (∂F · J²ψ)_i` for one clamped-zero variation.
/// Jets of `ψ` use the homogeneous clamped stencils.
pub fn theta_value(u_jets: &Jet2Field, f: &ScalarField, problem: &Problem, psi: &ScalarField) -> f64 {
    let derivs = problem.node_derivs(u_jets);
    let pj = problem
        .jet_operator()
        .homogeneous()
        .apply_linear(&psi.interior_values());
    let m = pj.width();
    let mut best = f64::NEG_INFINITY;
    for (i, d) in derivs.iter().enumerate() {
        if !problem.is_active(i) {
            continue;
        }
        let lin: f64 = (0..m).map(|k| d.grad[k] * pj.at(i)[k]).sum();
        best = best.max(sign(f.values()[i]) * lin);
    }
    best
}

/// Minimum of `Θ_∞` over a family of clamped-zero variations.
pub fn theta_probe(
    u: &ScalarField,
    f: &ScalarField,
    problem: &Problem,
    variations: &[ScalarField],
) -> Result<f64, CertError> {
    if variations.is_empty() {
        return Err(CertError::EmptyFamily);
    }
    let jets = problem.jets(u);
    let mut best = f64::INFINITY;
    for (index, psi) in variations.iter().enumerate() {
        check_clamped(psi, index)?;
        best = best.min(theta_value(&jets, f, problem, psi));
    }
    Ok(best)
}

/// Random clamped-zero variations for the minimality probe.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeFamilyConfig {
    pub count: usize,
    /// Bound on the discrete third derivative after normalization.
    pub theta: f64,
    /// Radius range as a fraction of the shortest side.
    pub radius_range: (f64, f64),
    pub seed: u64,
}

impl Default for ProbeFamilyConfig {
    fn default() -> Self {
        ProbeFamilyConfig {
            count: 100,
            theta: 200.0,
            radius_range: (0.1, 0.45),
            seed: 0,
        }
    }
}

fn sextic_bump(grid: &Arc<Grid>, center: [f64; 2], radius: f64) -> ScalarField {
    let dim = grid.dim();
    ScalarField::from_fn(grid.clone(), |x| {
        let r2: f64 = (0..dim).map(|k| (x[k] - center[k]).powi(2)).sum::<f64>() / (radius * radius);
        if r2 >= 1.0 {
            0.0
        } else {
            (1.0 - r2).powi(3)
        }
    })
}

fn third_difference_max(psi: &ScalarField) -> f64 {
    let g = psi.grid();
    let v = psi.values();
    let n = g.nodes_per_axis();
    let h = g.spacing();
    let mut m = 0.0_f64;
    for idx in 0..v.len() {
        let (i, j) = g.multi_index(idx);
        for a in 0..g.dim() {
            let k = if a == 0 { i } else { j };
            if k + 3 >= n[a] {
                continue;
            }
            let at = |s: usize| if a == 0 { v[g.index(i + s, j)] } else { v[g.index(i, j + s)] };
            let d3 = (at(3) - 3.0 * at(2) + 3.0 * at(1) - at(0)) / h[a].powi(3);
            m = m.max(d3.abs());
        }
    }
    m
}

/// C² bumps `±(1 - r²)³` with random centres and radii, scaled so that
/// `max |A:D²ψ| = 1` and kept only when the third differences stay below
/// `theta`.
pub fn probe_family(problem: &Problem, cfg: &ProbeFamilyConfig) -> Vec<ScalarField> {
    let g = problem.grid();
    let dim = g.dim();
    let hom = problem.jet_operator().homogeneous();
    let side = (0..dim)
        .map(|k| g.upper()[k] - g.lower()[k])
        .fold(f64::INFINITY, f64::min);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.count);
    let mut attempts = 0;
    while out.len() < cfg.count && attempts < 50 * cfg.count.max(1) {
        attempts += 1;
        let radius = side * rng.gen_range(cfg.radius_range.0..=cfg.radius_range.1);
        let mut center = [0.0; 2];
        let mut ok = true;
        for k in 0..dim {
            let (lo, hi) = (g.lower()[k] + radius, g.upper()[k] - radius);
            if !(hi > lo) {
                ok = false;
                break;
            }
            center[k] = rng.gen_range(lo..hi);
        }
        let sgn = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        if !ok {
            continue;
        }
        let psi = sextic_bump(g, center, radius);
        let jets = hom.apply_linear(&psi.interior_values());
        let scale = jets.xi_values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if !(scale > 0.0) {
            continue;
        }
        let psi = psi.scaled(sgn / scale);
        if third_difference_max(&psi) > cfg.theta {
            continue;
        }
        out.push(psi);
    }
    out
}

/// One strict decrease found by the minimality probe.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeViolation {
    pub index: usize,
    pub t: f64,
    pub f_inf_perturbed: f64,
    pub decrease: f64,
}

/// Default step multipliers, scaled by `F_∞(u)`.
pub const DEFAULT_T_MULTIPLIERS: [f64; 6] = [-1e-1, -1e-2, -1e-3, 1e-3, 1e-2, 1e-1];

/// Evaluates `F_∞(u + tψ)` for every variation and every
/// `t = τ · F_∞(u)`, `τ ∈ t_multipliers`, recording decreases below
/// `F_∞(u) - slack`.
pub fn minimality_probe(
    u: &ScalarField,
    problem: &Problem,
    family: &[ScalarField],
    t_multipliers: &[f64],
    slack: f64,
) -> Result<Vec<ProbeViolation>, CertError> {
    let base = problem.jets(u);
    let f0 = problem.active_max_abs(&problem.values_from_jets(&base));
    let hom = problem.jet_operator().homogeneous();
    let mut out = Vec::new();
    for (index, psi) in family.iter().enumerate() {
        check_clamped(psi, index)?;
        let pj = hom.apply_linear(&psi.interior_values());
        for &tau in t_multipliers {
            let t = tau * f0.max(f64::MIN_POSITIVE);
            let vals = problem.values_from_jets(&base.axpy(t, &pj));
            let ft = problem.active_max_abs(&vals);
            if ft < f0 - slack {
                out.push(ProbeViolation {
                    index,
                    t,
                    f_inf_perturbed: ft,
                    decrease: f0 - ft,
                });
            }
        }
    }
    Ok(out)
}

/// Three-valued outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Inconclusive,
    Fail,
}

impl Verdict {
    fn grade(value: f64, tol: f64) -> Verdict {
        if value <= tol {
            Verdict::Pass
        } else if value <= 10.0 * tol {
            Verdict::Inconclusive
        } else {
            Verdict::Fail
        }
    }

    fn worst(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Fail, _) | (_, Fail) => Fail,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Pass,
        }
    }
}

/// Settings of [`certify`].
#[derive(Debug, Clone, PartialEq)]
pub struct CertificationConfig {
    /// Nodal band half-width in units of `h`.
    pub band_h: f64,
    /// Sign-law tolerance relative to `F_∞`.
    pub sign_law_tol: f64,
    pub weak_tol: f64,
    pub probes: ProbeFamilyConfig,
    pub t_multipliers: Vec<f64>,
    pub slack: f64,
    /// Number of variations for the positivity probe.
    pub theta_count: usize,
}

impl Default for CertificationConfig {
    fn default() -> Self {
        CertificationConfig {
            band_h: 2.0,
            sign_law_tol: 0.05,
            weak_tol: 1e-3,
            probes: ProbeFamilyConfig::default(),
            t_multipliers: DEFAULT_T_MULTIPLIERS.to_vec(),
            slack: 1e-9,
            theta_count: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificationReport {
    /// Discrete `max |F(J²u)|` of the minimized supremand.
    pub f_inf: f64,
    /// `Φ(F_∞)` for wrapped supremands, otherwise `f_inf`.
    pub reported_f_inf: f64,
    pub sign_law_residual: f64,
    pub sign_violations: usize,
    pub sign_law_worst_point: Vec<f64>,
    pub weak_residual: f64,
    pub weak_worst_center: Vec<f64>,
    pub aronsson_osc: f64,
    pub aronsson_gradient: f64,
    pub nodal: NodalSet,
    pub band_width: f64,
    pub theta_min: f64,
    pub probe_count: usize,
    pub probe_violations: Vec<ProbeViolation>,
    pub degenerate: bool,
    pub sign_law_verdict: Verdict,
    pub weak_verdict: Verdict,
    pub verdict: Verdict,
}

/// Runs every check on `(u, f)`. A vanishing `F_∞` passes trivially and
/// skips the dual-dependent checks.
pub fn certify(
    u: &ScalarField,
    f: &ScalarField,
    problem: &Problem,
    cfg: &CertificationConfig,
) -> Result<CertificationReport, CertError> {
    if !u.same_grid(f) {
        return Err(CertError::GridMismatch);
    }
    let g = problem.grid();
    let values = problem.supremand_values(u);
    let f_inf = problem.active_max_abs(&values);
    let aron = aronsson_constancy(u, problem);
    let nodal = nodal_set(f);
    let band_width = cfg.band_h * g.h_max();
    let family = probe_family(problem, &cfg.probes);
    let violations = minimality_probe(u, problem, &family, &cfg.t_multipliers, cfg.slack)?;
    let degenerate = f_inf == 0.0;
    let mut rep = CertificationReport {
        f_inf,
        reported_f_inf: problem.spec().report_value(f_inf),
        sign_law_residual: 0.0,
        sign_violations: 0,
        sign_law_worst_point: Vec::new(),
        weak_residual: 0.0,
        weak_worst_center: Vec::new(),
        aronsson_osc: aron.oscillation,
        aronsson_gradient: aron.gradient_max,
        nodal,
        band_width,
        theta_min: f64::INFINITY,
        probe_count: family.len(),
        probe_violations: violations,
        degenerate,
        sign_law_verdict: Verdict::Pass,
        weak_verdict: Verdict::Pass,
        verdict: Verdict::Pass,
    };
    if degenerate {
        rep.theta_min = 0.0;
        if !rep.probe_violations.is_empty() {
            rep.verdict = Verdict::Fail;
        }
        return Ok(rep);
    }
    if f.values().iter().all(|v| *v == 0.0) {
        return Err(CertError::ZeroDual);
    }
    let sl = sign_law_from_values(problem, &values, f, band_width);
    rep.sign_law_residual = sl.residual;
    rep.sign_violations = sl.sign_violations;
    rep.sign_law_worst_point = sl.worst_point;
    let weak = weak_residual(u, f, problem, &default_bump_family(g))?;
    rep.weak_residual = weak.residual;
    rep.weak_worst_center = weak.worst_center;
    let theta_family: Vec<ScalarField> = family.iter().take(cfg.theta_count).cloned().collect();
    if !theta_family.is_empty() {
        rep.theta_min = theta_probe(u, f, problem, &theta_family)?;
    }
    rep.sign_law_verdict = Verdict::grade(rep.sign_law_residual, cfg.sign_law_tol * f_inf);
    rep.weak_verdict = Verdict::grade(rep.weak_residual, cfg.weak_tol);
    let mut v = rep.sign_law_verdict.worst(rep.weak_verdict);
    if !rep.probe_violations.is_empty() {
        v = Verdict::Fail;
    } else if !(rep.theta_min > 0.0) {
        v = v.worst(Verdict::Inconclusive);
    }
    rep.verdict = v;
    Ok(rep)
}
