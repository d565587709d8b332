//! Linear solver for the dual field: `div(A Df - L f) + K f = 0`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;
use thiserror::Error;

use crate::grid::{elliptic_weights, gradient_weights, EllipticMatrix, Grid, ScalarField};
use crate::linalg::{norm2, Csr, LinalgError, SymBand};
use crate::problem::Problem;

#[derive(Debug, Error)]
pub enum DualError {
    #[error("coefficient {name} is not finite at node {node}")]
    NonFinite { name: &'static str, node: usize },
    #[error("coefficient length {got} does not match node count {expected}")]
    Length { expected: usize, got: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("unit-boundary system is singular (pivot ratio {0:e})")]
    Singular(f64),
    #[error("null-vector iteration failed: {0}")]
    Linalg(#[from] LinalgError),
    #[error("solution vanishes identically")]
    Trivial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DualMode {
    /// `f = 1` on boundary nodes, interior equations solved exactly.
    UnitBoundary,
    /// Smallest singular vector of the interior rows, plus interface rows
    /// forcing `f = 0` where the supremand changes sign.
    NullVector,
    /// Null-vector mode when the supremand changes sign, otherwise
    /// unit-boundary mode (with fallback when singular).
    Auto,
}

/// Coefficients of the dual equation on a grid.
#[derive(Debug, Clone)]
pub struct DualProblem {
    grid: Arc<Grid>,
    a: EllipticMatrix,
    k: Vec<f64>,
    l: Vec<[f64; 2]>,
    /// Supremand values at the nodes; their sign changes define interface
    /// rows in null-vector mode and orient the result.
    hint: Option<Vec<f64>>,
}

impl DualProblem {
    pub fn from_coefficients(
        grid: Arc<Grid>,
        a: EllipticMatrix,
        k: Vec<f64>,
        l: Vec<[f64; 2]>,
        hint: Option<Vec<f64>>,
    ) -> Result<Self, DualError> {
        let n = grid.node_count();
        for len in [k.len(), l.len(), hint.as_ref().map_or(n, |h| h.len())] {
            if len != n {
                return Err(DualError::Length { expected: n, got: len });
            }
        }
        for i in 0..n {
            if !k[i].is_finite() {
                return Err(DualError::NonFinite { name: "K", node: i });
            }
            if !(l[i][0].is_finite() && l[i][1].is_finite()) {
                return Err(DualError::NonFinite { name: "L", node: i });
            }
        }
        Ok(DualProblem { grid, a, k, l, hint })
    }

    /// `K = ∂_ηF/∂_ξF`, `L = ∂_pF/∂_ξF` at `J²u`, with `F(J²u)` as hint.
    pub fn from_state(problem: &Problem, u: &ScalarField) -> Result<Self, DualError> {
        if u.grid().node_count() != problem.grid().node_count() {
            return Err(DualError::GridMismatch);
        }
        let derivs = problem.node_derivs(&problem.jets(u));
        let dim = problem.grid().dim();
        let mut k = Vec::with_capacity(derivs.len());
        let mut l = Vec::with_capacity(derivs.len());
        let mut hint = Vec::with_capacity(derivs.len());
        for d in &derivs {
            let dxi = d.d_xi();
            k.push(d.d_eta() / dxi);
            let mut lv = [0.0; 2];
            for a in 0..dim {
                lv[a] = d.d_p()[a] / dxi;
            }
            l.push(lv);
            hint.push(d.value);
        }
        DualProblem::from_coefficients(
            problem.grid().clone(),
            problem.matrix().clone(),
            k,
            l,
            Some(hint),
        )
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn k(&self) -> &[f64] {
        &self.k
    }

    pub fn l(&self) -> &[[f64; 2]] {
        &self.l
    }

    pub fn hint(&self) -> Option<&[f64]> {
        self.hint.as_deref()
    }

    /// Interface constraints `(1 - θ) f_i + θ f_j = 0` between neighbours
    /// where the hint changes sign, `θ` from linear interpolation.
    pub fn interface_rows(&self) -> Vec<(usize, usize, f64)> {
        let Some(hint) = &self.hint else {
            return Vec::new();
        };
        let g = &self.grid;
        let scale = hint.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let sgn = |v: f64| {
            if v.abs() <= 1e-8 * scale {
                0
            } else if v > 0.0 {
                1
            } else {
                -1
            }
        };
        let n = g.nodes_per_axis();
        let mut rows = Vec::new();
        for idx in 0..g.node_count() {
            let (i, j) = g.multi_index(idx);
            let mut neighbours = vec![];
            if i + 1 < n[0] {
                neighbours.push(g.index(i + 1, j));
            }
            if g.dim() == 2 && j + 1 < n[1] {
                neighbours.push(g.index(i, j + 1));
            }
            for nb in neighbours {
                if sgn(hint[idx]) * sgn(hint[nb]) == -1 {
                    let theta = hint[idx] / (hint[idx] - hint[nb]);
                    rows.push((idx, nb, theta));
                }
            }
            if scale > 0.0 && sgn(hint[idx]) == 0 {
                // a vanishing node between opposite signs carries the zero
                let mut seen = [false; 2];
                for a in 0..g.dim() {
                    let k = if a == 0 { i } else { j };
                    for (d, ok) in [(-1isize, k > 0), (1, k + 1 < n[a])] {
                        if !ok {
                            continue;
                        }
                        let nb = if a == 0 {
                            g.index((i as isize + d) as usize, j)
                        } else {
                            g.index(i, (j as isize + d) as usize)
                        };
                        match sgn(hint[nb]) {
                            1 => seen[0] = true,
                            -1 => seen[1] = true,
                            _ => {}
                        }
                    }
                }
                if seen[0] && seen[1] {
                    rows.push((idx, idx, 0.0));
                }
            }
        }
        rows
    }
}

/// Interior rows of `f ↦ div(A Df) - div(L f) + K f` over all node values:
/// symmetric second differences for the `A` part, centred differences of
/// the product `L f`, and `K` on the diagonal.
pub fn assemble(dp: &DualProblem) -> Csr {
    let g = &dp.grid;
    let aw = elliptic_weights(g, &dp.a);
    let gw: Vec<_> = (0..g.dim()).map(|ax| gradient_weights(g, ax)).collect();
    let mut m = Csr::new(g.node_count());
    for &idx in g.interior_nodes() {
        let (i, j) = g.multi_index(idx);
        let at = |di: isize, dj: isize| g.index((i as isize + di) as usize, (j as isize + dj) as usize);
        let mut terms: Vec<(usize, f64)> = aw.iter().map(|&(di, dj, c)| (at(di, dj), c)).collect();
        for (ax, w) in gw.iter().enumerate() {
            for &(di, dj, c) in w {
                let nb = at(di, dj);
                terms.push((nb, -c * dp.l[nb][ax]));
            }
        }
        terms.push((idx, dp.k[idx]));
        m.push_row(terms);
    }
    m
}

#[derive(Debug, Clone)]
pub struct DualSolution {
    /// Normalized field: weighted L¹ norm 1.
    pub f: ScalarField,
    pub mode: DualMode,
    /// Unit-boundary mode was singular and null-vector mode was used.
    pub fell_back: bool,
    /// Numerical null-space dimension among the computed singular values
    /// (null-vector mode only).
    pub null_dim: usize,
    /// Smallest singular values of the row-scaled system, ascending.
    pub singular_values: Vec<f64>,
    /// Factor applied to the raw solution to reach unit L¹ norm.
    pub normalization: f64,
    pub interface_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualReport {
    pub mode: DualMode,
    pub fell_back: bool,
    pub normalization: f64,
    pub null_dim: usize,
    pub singular_values: Vec<f64>,
    pub interface_rows: usize,
    pub nodal_count: usize,
}

impl DualSolution {
    pub fn report(&self, nodal_count: usize) -> DualReport {
        DualReport {
            mode: self.mode,
            fell_back: self.fell_back,
            normalization: self.normalization,
            null_dim: self.null_dim,
            singular_values: self.singular_values.clone(),
            interface_rows: self.interface_rows,
            nodal_count,
        }
    }
}

/// Pivot ratio below which the unit-boundary system counts as singular.
pub const SINGULAR_PIVOT_RATIO: f64 = 1e-13;
/// Relative singular-value threshold for the null-space dimension.
pub const NULL_THRESHOLD: f64 = 1e-7;
const BLOCK: usize = 4;
const ITERATIONS: usize = 60;

/// Solves the interior equations with prescribed boundary values (one per
/// node; interior entries ignored). Returns the raw field.
pub fn solve_boundary_value(dp: &DualProblem, boundary: &[f64]) -> Result<ScalarField, DualError> {
    let g = &dp.grid;
    if boundary.len() != g.node_count() {
        return Err(DualError::Length {
            expected: g.node_count(),
            got: boundary.len(),
        });
    }
    let m = assemble(dp);
    let interior = g.interior_nodes();
    let mut col = vec![usize::MAX; g.node_count()];
    for (k, &i) in interior.iter().enumerate() {
        col[i] = k;
    }
    let n = interior.len();
    let mut mat = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for r in 0..n {
        for (c, v) in m.row(r) {
            if col[c] == usize::MAX {
                rhs[r] -= v * boundary[c];
            } else {
                mat[(r, col[c])] += v;
            }
        }
    }
    let lu = mat.lu();
    let u = lu.u();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for i in 0..n {
        lo = lo.min(u[(i, i)].abs());
        hi = hi.max(u[(i, i)].abs());
    }
    let ratio = if hi > 0.0 { lo / hi } else { 0.0 };
    if !(ratio >= SINGULAR_PIVOT_RATIO) {
        return Err(DualError::Singular(ratio));
    }
    let x = lu.solve(&rhs).ok_or(DualError::Singular(ratio))?;
    let mut vals = boundary.to_vec();
    for (k, &i) in interior.iter().enumerate() {
        vals[i] = x[k];
    }
    ScalarField::new(g.clone(), vals).map_err(|_| DualError::NonFinite { name: "f", node: 0 })
}

/// Row-scaled system: interior rows and interface rows, each scaled to unit
/// max-abs entry.
fn null_system(dp: &DualProblem) -> Csr {
    let m = assemble(dp);
    let mut out = Csr::new(m.ncols());
    for r in 0..m.nrows() {
        let row: Vec<(usize, f64)> = m.row(r).collect();
        let s = row.iter().fold(0.0_f64, |a, t| a.max(t.1.abs()));
        out.push_row(row.into_iter().map(|(c, v)| (c, v / s)).collect());
    }
    for (i, j, theta) in dp.interface_rows() {
        if i == j {
            out.push_row(vec![(i, 1.0)]);
        } else {
            let s = (1.0 - theta).max(theta);
            out.push_row(vec![(i, (1.0 - theta) / s), (j, theta / s)]);
        }
    }
    out
}

fn orthonormalize(vs: &mut [Vec<f64>]) {
    for k in 0..vs.len() {
        for _ in 0..2 {
            for j in 0..k {
                let d: f64 = vs[k].iter().zip(&vs[j]).map(|(a, b)| a * b).sum();
                let (head, tail) = vs.split_at_mut(k);
                for (x, y) in tail[0].iter_mut().zip(&head[j]) {
                    *x -= d * y;
                }
            }
        }
        let n = norm2(&vs[k]);
        for x in vs[k].iter_mut() {
            *x /= n;
        }
    }
}

/// Smallest right singular vectors of `m` by block inverse iteration on
/// `MᵀM + σI` followed by Rayleigh–Ritz. Returns vectors and `‖M v‖`.
fn smallest_singular(m: &Csr) -> Result<(Vec<Vec<f64>>, Vec<f64>, f64), DualError> {
    let n = m.ncols();
    let mut bw = 0;
    for r in 0..m.nrows() {
        let cols: Vec<usize> = m.row(r).map(|t| t.0).collect();
        if let (Some(a), Some(b)) = (cols.first(), cols.last()) {
            bw = bw.max(b - a);
        }
    }
    let mut b = SymBand::zeros(n, bw);
    for r in 0..m.nrows() {
        let row: Vec<(usize, f64)> = m.row(r).collect();
        for (x, &(i, vi)) in row.iter().enumerate() {
            for &(j, vj) in &row[x..] {
                b.add(i, j, vi * vj);
            }
        }
    }
    // Gershgorin bound on the largest eigenvalue of MᵀM
    let mut gersh = 0.0_f64;
    for i in 0..n {
        let lo = i.saturating_sub(bw);
        let hi = (i + bw).min(n - 1);
        gersh = gersh.max((lo..=hi).map(|j| b.get(i, j).abs()).sum());
    }
    let shift = 1e-12 * b.diag_max().max(f64::MIN_POSITIVE);
    let mut shifted = b.clone();
    shifted.add_diag(&vec![shift; n]);
    let chol = shifted.cholesky()?;
    let k = BLOCK.min(n);
    let mut vs: Vec<Vec<f64>> = (0..k)
        .map(|c| {
            (0..n)
                .map(|i| (((i + 1) * (c + 2)) as f64 * 0.618_033_988_75).fract() - 0.5)
                .collect()
        })
        .collect();
    orthonormalize(&mut vs);
    for _ in 0..ITERATIONS {
        for v in vs.iter_mut() {
            *v = chol.solve(v);
        }
        orthonormalize(&mut vs);
    }
    let bv: Vec<Vec<f64>> = vs.iter().map(|v| b.mul_vec(v)).collect();
    let h = DMatrix::from_fn(k, k, |i, j| {
        let a: f64 = vs[i].iter().zip(&bv[j]).map(|(x, y)| x * y).sum();
        let c: f64 = vs[j].iter().zip(&bv[i]).map(|(x, y)| x * y).sum();
        0.5 * (a + c)
    });
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].partial_cmp(&eig.eigenvalues[y]).unwrap());
    let mut ritz = Vec::with_capacity(k);
    let mut sv = Vec::with_capacity(k);
    for &c in &order {
        let mut v = vec![0.0; n];
        for (i, vi) in vs.iter().enumerate() {
            let w = eig.eigenvectors[(i, c)];
            for (x, y) in v.iter_mut().zip(vi) {
                *x += w * y;
            }
        }
        let nv = norm2(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        sv.push(norm2(&m.mul_vec(&v)));
        ritz.push(v);
    }
    Ok((ritz, sv, gersh.sqrt()))
}

fn normalize(g: &Arc<Grid>, raw: Vec<f64>, hint: Option<&[f64]>) -> Result<(ScalarField, f64), DualError> {
    let w = g.weights();
    let l1: f64 = raw.iter().zip(w).map(|(v, w)| v.abs() * w).sum();
    if !(l1 > 0.0) {
        return Err(DualError::Trivial);
    }
    let mut s = 1.0 / l1;
    let oriented = hint.map_or(0.0, |h| {
        raw.iter()
            .zip(h)
            .zip(w)
            .map(|((v, h), w)| v * h.signum() * (*h != 0.0) as i32 as f64 * w)
            .sum::<f64>()
    });
    if oriented != 0.0 {
        s *= oriented.signum();
    } else {
        let imax = (0..raw.len())
            .max_by(|&a, &b| raw[a].abs().partial_cmp(&raw[b].abs()).unwrap())
            .unwrap();
        s *= raw[imax].signum();
    }
    let vals = raw.iter().map(|v| v * s).collect();
    let f = ScalarField::new(g.clone(), vals).map_err(|_| DualError::NonFinite { name: "f", node: 0 })?;
    Ok((f, s))
}

fn solve_null(dp: &DualProblem, fell_back: bool) -> Result<DualSolution, DualError> {
    let m = null_system(dp);
    let (vs, sv, smax) = smallest_singular(&m)?;
    let null_dim = sv.iter().filter(|s| **s <= NULL_THRESHOLD * smax).count();
    let (f, normalization) = normalize(&dp.grid, vs[0].clone(), dp.hint())?;
    Ok(DualSolution {
        f,
        mode: DualMode::NullVector,
        fell_back,
        null_dim,
        singular_values: sv,
        normalization,
        interface_rows: dp.interface_rows().len(),
    })
}

/// Nontrivial dual field, normalized to weighted L¹ norm 1.
///
/// Orientation: in null-vector mode, `Σ w f sgn F > 0` when a hint is
/// present; otherwise the node of largest `|f|` is positive.
pub fn solve_dual(dp: &DualProblem, mode: DualMode) -> Result<DualSolution, DualError> {
    let mode = match mode {
        DualMode::Auto if !dp.interface_rows().is_empty() => DualMode::NullVector,
        DualMode::Auto => DualMode::UnitBoundary,
        m => m,
    };
    match mode {
        DualMode::NullVector => solve_null(dp, false),
        _ => {
            let ones = vec![1.0; dp.grid.node_count()];
            match solve_boundary_value(dp, &ones) {
                Ok(raw) => {
                    let (f, normalization) = normalize(&dp.grid, raw.into_values(), None)?;
                    Ok(DualSolution {
                        f,
                        mode: DualMode::UnitBoundary,
                        fell_back: false,
                        null_dim: 0,
                        singular_values: Vec::new(),
                        normalization,
                        interface_rows: 0,
                    })
                }
                Err(DualError::Singular(_)) => solve_null(dp, true),
                Err(e) => Err(e),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    fn line(n: usize) -> Arc<Grid> {
        Arc::new(build_grid(1, &[0.0], &[1.0], &[n]).unwrap())
    }

    fn constant(g: &Arc<Grid>, k: f64, l: f64, hint: Option<Vec<f64>>) -> DualProblem {
        let n = g.node_count();
        DualProblem::from_coefficients(
            g.clone(),
            EllipticMatrix::identity(g.dim()),
            vec![k; n],
            vec![[l, 0.0]; n],
            hint,
        )
        .unwrap()
    }

    #[test]
    fn laplacian_rows_and_affine_kernel() {
        let g = line(11);
        let m = assemble(&constant(&g, 0.0, 0.0, None));
        let h2 = 0.01;
        let d = m.to_dense();
        assert_eq!(d.len(), 9);
        assert!((d[0][0] - 1.0 / h2).abs() < 1e-9 && (d[0][1] + 2.0 / h2).abs() < 1e-9);
        let aff: Vec<f64> = (0..11).map(|i| 3.0 - 2.0 * i as f64 * 0.1).collect();
        assert!(m.mul_vec(&aff).iter().all(|r| r.abs() < 1e-10));
    }

    #[test]
    fn exponential_kernel_second_order() {
        let ell = 1.5;
        let mut prev = f64::INFINITY;
        for n in [41, 81, 161] {
            let g = line(n);
            let m = assemble(&constant(&g, 0.0, ell, None));
            let e: Vec<f64> = (0..n).map(|i| (ell * g.coords(i)[0]).exp()).collect();
            let r = m.mul_vec(&e).iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            assert!(r < prev / 3.5, "{r} {prev}");
            prev = r;
        }
    }

    #[test]
    fn unit_boundary_harmonic_is_constant() {
        let g = line(51);
        let s = solve_dual(&constant(&g, 0.0, 0.0, None), DualMode::Auto).unwrap();
        assert_eq!(s.mode, DualMode::UnitBoundary);
        assert!(s.f.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn null_mode_finds_affine_through_interface() {
        let g = line(101);
        let xbar = 0.3;
        let hint: Vec<f64> = (0..101).map(|i| if g.coords(i)[0] < xbar { -2.0 } else { 2.0 }).collect();
        let s = solve_dual(&constant(&g, 0.0, 0.0, Some(hint)), DualMode::Auto).unwrap();
        assert_eq!(s.mode, DualMode::NullVector);
        assert_eq!(s.null_dim, 1);
        // zero between the two nodes around 0.3, f increasing
        let v = s.f.values();
        assert!(v[0] < 0.0 && v[100] > 0.0);
        let slope = v[100] - v[99];
        for i in 1..101 {
            assert!(((v[i] - v[i - 1]) - slope).abs() < 1e-8);
        }
        assert!((s.f.l1_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singular_unit_boundary_falls_back() {
        // f'' + π² f = 0 on (0,1) has the kernel sin(πx); the discrete
        // analogue uses the exact discrete eigenvalue.
        let n = 41;
        let g = line(n);
        let h = 1.0 / (n - 1) as f64;
        let lam = 4.0 / (h * h) * (std::f64::consts::PI * h / 2.0).sin().powi(2);
        let dp = constant(&g, lam, 0.0, None);
        let s = solve_dual(&dp, DualMode::UnitBoundary).unwrap();
        assert!(s.fell_back);
        assert_eq!(s.mode, DualMode::NullVector);
    }
}
