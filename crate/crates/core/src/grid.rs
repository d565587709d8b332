//! Tensor grids on intervals and rectangles, nodal fields, clamped boundary
//! data with a ghost layer, and the finite-difference stencils for `Du` and
//! `A:D²u`.
//!
//! Nodes are numbered with the first axis fastest: `index = i + nx * j`.
//! Quadrature weights are the tensor trapezoid rule normalized to sum to one,
//! so every integral in the crate is an average over the domain.

use std::io::{Read, Write};
use std::sync::Arc;

use thiserror::Error;

/// Smallest admissible number of nodes along an axis.
pub const MIN_NODES: usize = 5;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("dimension must be 1 or 2, got {0}")]
    Dimension(usize),
    #[error("expected {expected} entries for {what}, got {got}")]
    Length {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("degenerate interval on axis {axis}: upper {upper} <= lower {lower}")]
    Degenerate { axis: usize, lower: f64, upper: f64 },
    #[error("axis {axis} has {nodes} nodes, need at least {MIN_NODES}")]
    TooFewNodes { axis: usize, nodes: usize },
    #[error("matrix is not symmetric (|a12 - a21| = {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is not positive definite (smallest eigenvalue {0:e})")]
    NotPositive(f64),
    #[error("non-finite value at node {0}")]
    NonFinite(usize),
    #[error("missing slope data on face {0}")]
    MissingSlopes(usize),
    #[error("field belongs to a different grid")]
    GridMismatch,
    #[error("field file: {0}")]
    Format(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Uniform tensor grid on `[lower, upper]` (one or two axes).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    lower: [f64; 2],
    upper: [f64; 2],
    nodes: [usize; 2],
    spacing: [f64; 2],
    boundary: Vec<bool>,
    weights: Vec<f64>,
    interior: Vec<usize>,
}

/// Builds a grid. `nodes_per_axis[k] >= 5` on every axis.
pub fn build_grid(
    dim: usize,
    lower: &[f64],
    upper: &[f64],
    nodes_per_axis: &[usize],
) -> Result<Grid, GridError> {
    if dim != 1 && dim != 2 {
        return Err(GridError::Dimension(dim));
    }
    for (what, got) in [
        ("lower corner", lower.len()),
        ("upper corner", upper.len()),
        ("nodes per axis", nodes_per_axis.len()),
    ] {
        if got != dim {
            return Err(GridError::Length {
                what,
                expected: dim,
                got,
            });
        }
    }
    let mut lo = [0.0; 2];
    let mut hi = [0.0; 2];
    let mut n = [1usize; 2];
    let mut h = [1.0; 2];
    for k in 0..dim {
        if !(upper[k] > lower[k]) || !lower[k].is_finite() || !upper[k].is_finite() {
            return Err(GridError::Degenerate {
                axis: k,
                lower: lower[k],
                upper: upper[k],
            });
        }
        if nodes_per_axis[k] < MIN_NODES {
            return Err(GridError::TooFewNodes {
                axis: k,
                nodes: nodes_per_axis[k],
            });
        }
        lo[k] = lower[k];
        hi[k] = upper[k];
        n[k] = nodes_per_axis[k];
        h[k] = (upper[k] - lower[k]) / (n[k] - 1) as f64;
    }

    let total = n[0] * n[1];
    let mut boundary = vec![false; total];
    let mut weights = vec![0.0; total];
    let axis_weight = |k: usize, i: usize| -> f64 {
        if k >= dim {
            return 1.0;
        }
        let interior = (n[k] - 1) as f64;
        if i == 0 || i == n[k] - 1 {
            0.5 / interior
        } else {
            1.0 / interior
        }
    };
    let mut interior = Vec::new();
    for j in 0..n[1] {
        for i in 0..n[0] {
            let idx = i + n[0] * j;
            let on_x = i == 0 || i == n[0] - 1;
            let on_y = dim == 2 && (j == 0 || j == n[1] - 1);
            boundary[idx] = on_x || on_y;
            weights[idx] = axis_weight(0, i) * axis_weight(1, j);
            if !boundary[idx] {
                interior.push(idx);
            }
        }
    }
    Ok(Grid {
        dim,
        lower: lo,
        upper: hi,
        nodes: n,
        spacing: h,
        boundary,
        weights,
        interior,
    })
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower[..self.dim]
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper[..self.dim]
    }

    pub fn nodes_per_axis(&self) -> &[usize] {
        &self.nodes[..self.dim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dim]
    }

    /// Largest mesh width.
    pub fn h_max(&self) -> f64 {
        self.spacing().iter().cloned().fold(0.0, f64::max)
    }

    pub fn node_count(&self) -> usize {
        self.nodes[0] * self.nodes[1]
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.nodes[0] * j
    }

    pub fn multi_index(&self, idx: usize) -> (usize, usize) {
        (idx % self.nodes[0], idx / self.nodes[0])
    }

    /// Coordinates of a node; the second entry is 0 in 1D.
    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let (i, j) = self.multi_index(idx);
        let mut x = [0.0; 2];
        x[0] = self.lower[0] + i as f64 * self.spacing[0];
        if self.dim == 2 {
            x[1] = self.lower[1] + j as f64 * self.spacing[1];
        }
        x
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        self.boundary[idx]
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    /// Interior node indices in increasing order. These are the unknowns of
    /// every clamped problem on the grid.
    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weighted average `Σ w_i v_i`.
    pub fn mean(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Number of nodes along each face, in the face order used by
    /// [`ClampedData`]: x-lower, x-upper, then (2D) y-lower, y-upper.
    pub fn face_lengths(&self) -> Vec<usize> {
        if self.dim == 1 {
            vec![1, 1]
        } else {
            vec![self.nodes[1], self.nodes[1], self.nodes[0], self.nodes[0]]
        }
    }
}

/// Symmetric positive definite coefficient matrix of `A:D²u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticMatrix {
    dim: usize,
    a: [[f64; 2]; 2],
}

impl EllipticMatrix {
    /// `entries` is row-major, `dim * dim` long.
    pub fn new(dim: usize, entries: &[f64]) -> Result<Self, GridError> {
        if dim != 1 && dim != 2 {
            return Err(GridError::Dimension(dim));
        }
        if entries.len() != dim * dim {
            return Err(GridError::Length {
                what: "matrix entries",
                expected: dim * dim,
                got: entries.len(),
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(0));
        }
        let mut a = [[0.0; 2]; 2];
        for r in 0..dim {
            for c in 0..dim {
                a[r][c] = entries[r * dim + c];
            }
        }
        if dim == 2 {
            let asym = (a[0][1] - a[1][0]).abs();
            if asym > 1e-12 {
                return Err(GridError::NotSymmetric(asym));
            }
            let off = 0.5 * (a[0][1] + a[1][0]);
            a[0][1] = off;
            a[1][0] = off;
        }
        let m = EllipticMatrix { dim, a };
        let lmin = m.min_eigenvalue();
        if !(lmin > 0.0) {
            return Err(GridError::NotPositive(lmin));
        }
        Ok(m)
    }

    pub fn identity(dim: usize) -> Self {
        let mut a = [[0.0; 2]; 2];
        a[0][0] = 1.0;
        a[1][1] = 1.0;
        EllipticMatrix { dim, a }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.a[r][c]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.dim == 1 {
            return self.a[0][0];
        }
        let tr = self.a[0][0] + self.a[1][1];
        let det = self.a[0][0] * self.a[1][1] - self.a[0][1] * self.a[1][0];
        let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
        0.5 * tr - disc
    }
}

/// One finite value per grid node.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.node_count() {
            return Err(GridError::Length {
                what: "field values",
                expected: grid.node_count(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(i));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.node_count();
        ScalarField {
            grid,
            values: vec![0.0; n],
        }
    }

    /// Samples `f` at the node coordinates. `f` must be finite on the grid.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Self {
        let dim = grid.dim();
        let values = (0..grid.node_count())
            .map(|i| f(&grid.coords(i)[..dim]))
            .collect();
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn same_grid(&self, other: &ScalarField) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    /// Values at the interior nodes, in [`Grid::interior_nodes`] order.
    pub fn interior_values(&self) -> Vec<f64> {
        self.grid
            .interior_nodes()
            .iter()
            .map(|&i| self.values[i])
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `self + t * other`.
    pub fn axpy(&self, t: f64, other: &ScalarField) -> ScalarField {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + t * b)
            .collect();
        ScalarField {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn scaled(&self, t: f64) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| t * v).collect(),
        }
    }

    /// Weighted L¹ norm (average of |v|).
    pub fn l1_norm(&self) -> f64 {
        self.grid
            .weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v.abs())
            .sum()
    }

    /// Weighted Lᵖ norm for finite `p >= 1`.
    pub fn lp_norm(&self, p: f64) -> f64 {
        weighted_lp_norm(self.grid.weights(), &self.values, p)
    }
}

/// Normalized Lᵖ norm `(Σ w_i |v_i|^p)^(1/p)`, evaluated with the maximum
/// factored out so that large `p` does not overflow.
pub fn weighted_lp_norm(weights: &[f64], values: &[f64], p: f64) -> f64 {
    let m = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if m == 0.0 {
        return 0.0;
    }
    let s: f64 = weights
        .iter()
        .zip(values)
        .map(|(w, v)| w * (v.abs() / m).powf(p))
        .sum();
    m * s.powf(1.0 / p)
}

/// Central-difference gradient at the interior nodes, in
/// [`Grid::interior_nodes`] order. Unused components are zero in 1D.
pub fn apply_gradient(field: &ScalarField) -> Vec<[f64; 2]> {
    let g = field.grid();
    let v = field.values();
    let nx = g.nodes[0];
    g.interior_nodes()
        .iter()
        .map(|&idx| {
            let mut d = [0.0; 2];
            d[0] = (v[idx + 1] - v[idx - 1]) / (2.0 * g.spacing[0]);
            if g.dim == 2 {
                d[1] = (v[idx + nx] - v[idx - nx]) / (2.0 * g.spacing[1]);
            }
            d
        })
        .collect()
}

/// `A:D²u` at the interior nodes, in [`Grid::interior_nodes`] order.
pub fn apply_elliptic(field: &ScalarField, a: &EllipticMatrix) -> Vec<f64> {
    let g = field.grid();
    let v = field.values();
    g.interior_nodes()
        .iter()
        .map(|&idx| {
            let (i, j) = g.multi_index(idx);
            elliptic_stencil(g, a, |di, dj| {
                v[g.index((i as isize + di) as usize, (j as isize + dj) as usize)]
            })
        })
        .collect()
}

/// Second-order stencil for `A:D²u` around a node, reading neighbours
/// through `at(di, dj)`.
pub(crate) fn elliptic_stencil(
    g: &Grid,
    a: &EllipticMatrix,
    at: impl Fn(isize, isize) -> f64,
) -> f64 {
    elliptic_weights(g, a)
        .iter()
        .map(|&(di, dj, c)| c * at(di, dj))
        .sum()
}

/// Offsets and coefficients of the `A:D²` stencil.
pub(crate) fn elliptic_weights(g: &Grid, a: &EllipticMatrix) -> Vec<(isize, isize, f64)> {
    let hx = g.spacing[0];
    let cx = a.get(0, 0) / (hx * hx);
    let mut w = vec![(-1, 0, cx), (0, 0, -2.0 * cx), (1, 0, cx)];
    if g.dim == 2 {
        let hy = g.spacing[1];
        let cy = a.get(1, 1) / (hy * hy);
        w[1].2 -= 2.0 * cy;
        w.push((0, -1, cy));
        w.push((0, 1, cy));
        let a12 = a.get(0, 1);
        if a12 != 0.0 {
            let cxy = 2.0 * a12 / (4.0 * hx * hy);
            w.push((1, 1, cxy));
            w.push((-1, -1, cxy));
            w.push((1, -1, -cxy));
            w.push((-1, 1, -cxy));
        }
    }
    w
}

/// Offsets and coefficients of the central difference along `axis`.
pub(crate) fn gradient_weights(g: &Grid, axis: usize) -> [(isize, isize, f64); 2] {
    let c = 1.0 / (2.0 * g.spacing[axis]);
    if axis == 0 {
        [(-1, 0, -c), (1, 0, c)]
    } else {
        [(0, -1, -c), (0, 1, c)]
    }
}

/// Clamped Dirichlet data: boundary values and outward normal slopes.
///
/// `values` has one entry per grid node (only boundary entries are read).
/// `slopes[face]` holds the outward normal derivative along a face, with
/// faces ordered x-lower, x-upper, y-lower, y-upper and entries ordered by
/// the running index along the face.
#[derive(Debug, Clone, PartialEq)]
pub struct ClampedData {
    values: Vec<f64>,
    slopes: Vec<Vec<f64>>,
}

impl ClampedData {
    pub fn new(grid: &Grid, values: Vec<f64>, slopes: Vec<Vec<f64>>) -> Result<Self, GridError> {
        if values.len() != grid.node_count() {
            return Err(GridError::Length {
                what: "boundary values",
                expected: grid.node_count(),
                got: values.len(),
            });
        }
        let faces = grid.face_lengths();
        if slopes.len() < faces.len() {
            return Err(GridError::MissingSlopes(slopes.len()));
        }
        if slopes.len() > faces.len() {
            return Err(GridError::Length {
                what: "slope faces",
                expected: faces.len(),
                got: slopes.len(),
            });
        }
        for (f, (s, &len)) in slopes.iter().zip(&faces).enumerate() {
            if s.is_empty() {
                return Err(GridError::MissingSlopes(f));
            }
            if s.len() != len {
                return Err(GridError::Length {
                    what: "face slopes",
                    expected: len,
                    got: s.len(),
                });
            }
        }
        for (i, v) in values.iter().enumerate() {
            if grid.is_boundary(i) && !v.is_finite() {
                return Err(GridError::NonFinite(i));
            }
        }
        if slopes.iter().flatten().any(|s| !s.is_finite()) {
            return Err(GridError::NonFinite(0));
        }
        Ok(ClampedData { values, slopes })
    }

    /// Homogeneous data: zero values and zero slopes.
    pub fn zero(grid: &Grid) -> Self {
        ClampedData {
            values: vec![0.0; grid.node_count()],
            slopes: grid.face_lengths().iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// Interval data `u(a)`, `u'(a)`, `u(b)`, `u'(b)` (derivatives along x,
    /// not normal derivatives).
    pub fn interval(grid: &Grid, ua: f64, dua: f64, ub: f64, dub: f64) -> Result<Self, GridError> {
        if grid.dim() != 1 {
            return Err(GridError::Dimension(grid.dim()));
        }
        let mut values = vec![0.0; grid.node_count()];
        values[0] = ua;
        let last = grid.node_count() - 1;
        values[last] = ub;
        ClampedData::new(grid, values, vec![vec![-dua], vec![dub]])
    }

    /// Data traced from a function `u0` and its gradient.
    pub fn from_function(
        grid: &Grid,
        u0: impl Fn(&[f64]) -> f64,
        grad: impl Fn(&[f64]) -> [f64; 2],
    ) -> Self {
        let dim = grid.dim();
        let values = (0..grid.node_count())
            .map(|i| {
                if grid.is_boundary(i) {
                    u0(&grid.coords(i)[..dim])
                } else {
                    0.0
                }
            })
            .collect();
        let [nx, ny] = grid.nodes;
        let slope = |i: usize, j: usize, axis: usize, sign: f64| {
            let x = grid.coords(grid.index(i, j));
            sign * grad(&x[..dim])[axis]
        };
        let slopes = if dim == 1 {
            vec![vec![slope(0, 0, 0, -1.0)], vec![slope(nx - 1, 0, 0, 1.0)]]
        } else {
            vec![
                (0..ny).map(|j| slope(0, j, 0, -1.0)).collect(),
                (0..ny).map(|j| slope(nx - 1, j, 0, 1.0)).collect(),
                (0..nx).map(|i| slope(i, 0, 1, -1.0)).collect(),
                (0..nx).map(|i| slope(i, ny - 1, 1, 1.0)).collect(),
            ]
        };
        ClampedData { values, slopes }
    }

    pub fn value(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slopes(&self, face: usize) -> &[f64] {
        &self.slopes[face]
    }

    /// True when every value and slope is exactly zero.
    pub fn is_homogeneous(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0) && self.slopes.iter().flatten().all(|s| *s == 0.0)
    }

    /// Field with the boundary values of the data and `interior` values at
    /// the interior nodes.
    pub fn assemble(&self, grid: &Arc<Grid>, interior: &[f64]) -> ScalarField {
        let mut values: Vec<f64> = (0..grid.node_count())
            .map(|i| if grid.is_boundary(i) { self.values[i] } else { 0.0 })
            .collect();
        for (&idx, v) in grid.interior_nodes().iter().zip(interior) {
            values[idx] = *v;
        }
        ScalarField {
            grid: grid.clone(),
            values,
        }
    }

    /// Largest boundary-value mismatch between a field and the data.
    pub fn boundary_mismatch(&self, field: &ScalarField) -> f64 {
        let g = field.grid();
        (0..g.node_count())
            .filter(|&i| g.is_boundary(i))
            .map(|i| (field.values()[i] - self.values[i]).abs())
            .fold(0.0, f64::max)
    }
}

/// Affine combination `c + Σ coef_k · unknown_k` of interior unknowns.
#[derive(Debug, Clone, Default)]
pub(crate) struct Affine {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Affine {
    fn unknown(k: usize) -> Self {
        Affine {
            terms: vec![(k, 1.0)],
            constant: 0.0,
        }
    }

    fn constant(c: f64) -> Self {
        Affine {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn add_scaled(&mut self, s: f64, other: &Affine) {
        self.constant += s * other.constant;
        for &(k, c) in &other.terms {
            match self.terms.iter_mut().find(|(kk, _)| *kk == k) {
                Some(t) => t.1 += s * c,
                None => self.terms.push((k, s * c)),
            }
        }
    }

    fn shifted(&self, c: f64) -> Affine {
        let mut a = self.clone();
        a.constant += c;
        a
    }
}

/// A grid field extended by one ghost layer on every face.
///
/// Ghost values realize the clamped slope by second-order reflection:
/// `ghost = u(interior neighbour) + 2h · (outward normal slope)`.
#[derive(Debug, Clone)]
pub struct GhostedField<T = f64> {
    grid: Arc<Grid>,
    ext: Vec<T>,
    ext_nx: usize,
}

impl<T: Clone> GhostedField<T> {
    fn ext_index(&self, i: isize, j: isize) -> usize {
        let jj = if self.grid.dim == 2 { j + 1 } else { 0 };
        (i + 1) as usize + self.ext_nx * jj as usize
    }

    /// Value at grid offset `(i, j)`; `-1` and `n` address the ghost layer.
    pub fn at(&self, i: isize, j: isize) -> &T {
        &self.ext[self.ext_index(i, j)]
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
}

/// Builds the ghost layer of `field` from clamped `data`. Boundary node
/// values are overwritten with the data values.
pub fn clamp_boundary(field: &ScalarField, data: &ClampedData) -> Result<GhostedField, GridError> {
    let g = field.grid().clone();
    if data.values.len() != g.node_count() {
        return Err(GridError::Length {
            what: "boundary values",
            expected: g.node_count(),
            got: data.values.len(),
        });
    }
    if data.slopes.len() != g.face_lengths().len() {
        return Err(GridError::MissingSlopes(data.slopes.len()));
    }
    let nodes: Vec<f64> = (0..g.node_count())
        .map(|i| {
            if g.is_boundary(i) {
                data.values[i]
            } else {
                field.values()[i]
            }
        })
        .collect();
    Ok(ghost_extend(&g, data, &nodes, |v, c| v + c))
}

/// Affine ghosted representation: every extended entry as an affine
/// function of the interior unknowns.
pub(crate) fn ghost_extend_affine(g: &Arc<Grid>, data: &ClampedData) -> GhostedField<Affine> {
    let mut pos = vec![usize::MAX; g.node_count()];
    for (k, &idx) in g.interior_nodes().iter().enumerate() {
        pos[idx] = k;
    }
    let nodes: Vec<Affine> = (0..g.node_count())
        .map(|i| {
            if g.is_boundary(i) {
                Affine::constant(data.values[i])
            } else {
                Affine::unknown(pos[i])
            }
        })
        .collect();
    ghost_extend(g, data, &nodes, |v: &Affine, c| v.shifted(c))
}

fn ghost_extend<T: Clone + Default>(
    g: &Arc<Grid>,
    data: &ClampedData,
    nodes: &[T],
    shift: impl Fn(&T, f64) -> T,
) -> GhostedField<T> {
    let [nx, ny] = g.nodes;
    let ext_nx = nx + 2;
    let ext_ny = if g.dim == 2 { ny + 2 } else { 1 };
    let mut out = GhostedField {
        grid: g.clone(),
        ext: vec![T::default(); ext_nx * ext_ny],
        ext_nx,
    };
    let (hx, hy) = (g.spacing[0], g.spacing[1]);
    let rows: Vec<isize> = if g.dim == 2 {
        (0..ny as isize).collect()
    } else {
        vec![0]
    };
    for &j in &rows {
        for i in 0..nx as isize {
            let e = out.ext_index(i, j);
            out.ext[e] = nodes[g.index(i as usize, j as usize)].clone();
        }
        let face_pos = j as usize;
        let left = shift(out.at(1, j), 2.0 * hx * data.slopes[0][face_pos]);
        let right = shift(out.at(nx as isize - 2, j), 2.0 * hx * data.slopes[1][face_pos]);
        let (el, er) = (out.ext_index(-1, j), out.ext_index(nx as isize, j));
        out.ext[el] = left;
        out.ext[er] = right;
    }
    if g.dim == 2 {
        // corner ghosts extrapolate the face slope linearly
        let face_slope = |s: &[f64], i: isize| -> f64 {
            if i < 0 {
                2.0 * s[0] - s[1]
            } else if i as usize >= nx {
                2.0 * s[nx - 1] - s[nx - 2]
            } else {
                s[i as usize]
            }
        };
        for i in -1..=nx as isize {
            let bottom = shift(out.at(i, 1), 2.0 * hy * face_slope(&data.slopes[2], i));
            let top = shift(out.at(i, ny as isize - 2), 2.0 * hy * face_slope(&data.slopes[3], i));
            let (eb, et) = (out.ext_index(i, -1), out.ext_index(i, ny as isize));
            out.ext[eb] = bottom;
            out.ext[et] = top;
        }
    }
    out
}

impl GhostedField<f64> {
    /// Central-difference gradient at any grid node (boundary nodes read
    /// the ghost layer).
    pub fn gradient_at(&self, idx: usize) -> [f64; 2] {
        let g = &self.grid;
        let (i, j) = g.multi_index(idx);
        let (i, j) = (i as isize, j as isize);
        let mut d = [0.0; 2];
        d[0] = (self.at(i + 1, j) - self.at(i - 1, j)) / (2.0 * g.spacing[0]);
        if g.dim == 2 {
            d[1] = (self.at(i, j + 1) - self.at(i, j - 1)) / (2.0 * g.spacing[1]);
        }
        d
    }

    /// `A:D²u` at any grid node.
    pub fn elliptic_at(&self, idx: usize, a: &EllipticMatrix) -> f64 {
        let g = &self.grid;
        let (i, j) = g.multi_index(idx);
        let (i, j) = (i as isize, j as isize);
        elliptic_stencil(g, a, |di, dj| *self.at(i + di, j + dj))
    }

    pub fn value(&self, idx: usize) -> f64 {
        let (i, j) = self.grid.multi_index(idx);
        *self.at(i as isize, j as isize)
    }
}

/// Writes a field as CSV with header `x[,y],value`, one row per node in
/// index order. Values carry 17 significant digits.
pub fn write_field_csv<W: Write>(field: &ScalarField, writer: W) -> Result<(), GridError> {
    let g = field.grid();
    let mut w = csv::Writer::from_writer(writer);
    if g.dim() == 1 {
        w.write_record(["x", "value"])?;
    } else {
        w.write_record(["x", "y", "value"])?;
    }
    for (i, v) in field.values().iter().enumerate() {
        let x = g.coords(i);
        let mut rec = vec![fmt17(x[0])];
        if g.dim() == 2 {
            rec.push(fmt17(x[1]));
        }
        rec.push(fmt17(*v));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a field written by [`write_field_csv`]. The row count must equal
/// the node count and coordinates must match the grid.
pub fn read_field_csv<R: Read>(grid: &Arc<Grid>, reader: R) -> Result<ScalarField, GridError> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    let expected: &[&str] = if grid.dim() == 1 {
        &["x", "value"]
    } else {
        &["x", "y", "value"]
    };
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(GridError::Format(format!(
            "expected header {:?}, found {:?}",
            expected,
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut values = Vec::with_capacity(grid.node_count());
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        if row >= grid.node_count() {
            return Err(GridError::Format(format!(
                "more rows than the {} grid nodes",
                grid.node_count()
            )));
        }
        let parse = |k: usize| -> Result<f64, GridError> {
            rec.get(k)
                .ok_or_else(|| GridError::Format(format!("row {row}: missing column {k}")))?
                .trim()
                .parse::<f64>()
                .map_err(|e| GridError::Format(format!("row {row}: {e}")))
        };
        let x = grid.coords(row);
        for k in 0..grid.dim() {
            let c = parse(k)?;
            let tol = 1e-9 * (1.0 + x[k].abs());
            if (c - x[k]).abs() > tol {
                return Err(GridError::Format(format!(
                    "row {row}: coordinate {c} does not match grid node {}",
                    x[k]
                )));
            }
        }
        values.push(parse(grid.dim())?);
    }
    if values.len() != grid.node_count() {
        return Err(GridError::Length {
            what: "field rows",
            expected: grid.node_count(),
            got: values.len(),
        });
    }
    ScalarField::new(grid.clone(), values)
}

pub(crate) fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> Arc<Grid> {
        Arc::new(build_grid(1, &[0.0], &[1.0], &[n]).unwrap())
    }

    #[test]
    fn five_node_interval() {
        let g = line(5);
        let xs: Vec<f64> = (0..5).map(|i| g.coords(i)[0]).collect();
        assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(g.spacing(), &[0.25]);
        let expect = [0.125, 0.25, 0.25, 0.25, 0.125];
        for (w, e) in g.weights().iter().zip(expect) {
            assert!((w - e).abs() < 1e-15);
        }
        assert_eq!(g.interior_nodes(), &[1, 2, 3]);
    }

    #[test]
    fn square_counts() {
        let g = build_grid(2, &[0.0, 0.0], &[1.0, 1.0], &[5, 5]).unwrap();
        assert_eq!(g.node_count(), 25);
        assert_eq!(g.interior_nodes().len(), 9);
        assert_eq!(g.boundary_mask().iter().filter(|b| **b).count(), 16);
        let s: f64 = g.weights().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(
            build_grid(1, &[0.0], &[1.0], &[3]),
            Err(GridError::TooFewNodes { .. })
        ));
        assert!(matches!(
            build_grid(1, &[1.0], &[1.0], &[9]),
            Err(GridError::Degenerate { .. })
        ));
        assert!(matches!(
            build_grid(3, &[0.0; 3], &[1.0; 3], &[5; 3]),
            Err(GridError::Dimension(3))
        ));
    }

    #[test]
    fn matrix_validation() {
        assert!(EllipticMatrix::new(2, &[1.0, 0.5, 0.5, 1.0]).is_ok());
        assert!(matches!(
            EllipticMatrix::new(2, &[1.0, 0.5, 0.4, 1.0]),
            Err(GridError::NotSymmetric(_))
        ));
        assert!(matches!(
            EllipticMatrix::new(2, &[1.0, 2.0, 2.0, 1.0]),
            Err(GridError::NotPositive(_))
        ));
        assert!(EllipticMatrix::new(1, &[-1.0]).is_err());
    }

    #[test]
    fn gradient_examples() {
        let g = line(5);
        let c = ScalarField::from_fn(g.clone(), |_| 3.0);
        assert!(apply_gradient(&c).iter().all(|d| d[0] == 0.0));
        let lin = ScalarField::from_fn(g.clone(), |x| x[0]);
        assert!(apply_gradient(&lin).iter().all(|d| (d[0] - 1.0).abs() < 1e-14));
        let q = ScalarField::from_fn(g.clone(), |x| x[0] * x[0]);
        for (d, &idx) in apply_gradient(&q).iter().zip(g.interior_nodes()) {
            assert!((d[0] - 2.0 * g.coords(idx)[0]).abs() < 1e-14);
        }
    }

    #[test]
    fn elliptic_examples() {
        let g = line(9);
        let a = EllipticMatrix::identity(1);
        let q = ScalarField::from_fn(g.clone(), |x| x[0] * x[0]);
        assert!(apply_elliptic(&q, &a).iter().all(|v| (v - 2.0).abs() < 1e-12));
        let cub = ScalarField::from_fn(g.clone(), |x| x[0].powi(3));
        for (v, &idx) in apply_elliptic(&cub, &a).iter().zip(g.interior_nodes()) {
            assert!((v - 6.0 * g.coords(idx)[0]).abs() < 1e-11);
        }
        let g2 = Arc::new(build_grid(2, &[0.0, 0.0], &[1.0, 1.0], &[7, 6]).unwrap());
        let r2 = ScalarField::from_fn(g2.clone(), |x| x[0] * x[0] + x[1] * x[1]);
        assert!(apply_elliptic(&r2, &EllipticMatrix::identity(2))
            .iter()
            .all(|v| (v - 4.0).abs() < 1e-11));
        // cross term: A:D²(xy) = 2 a12
        let a2 = EllipticMatrix::new(2, &[2.0, 0.3, 0.3, 1.0]).unwrap();
        let xy = ScalarField::from_fn(g2.clone(), |x| x[0] * x[1]);
        assert!(apply_elliptic(&xy, &a2).iter().all(|v| (v - 0.6).abs() < 1e-11));
    }

    #[test]
    fn zero_slope_ghost_mirrors_interior() {
        let g = line(6);
        let f = ScalarField::from_fn(g.clone(), |x| (3.0 * x[0]).sin());
        let gh = clamp_boundary(&f, &ClampedData::zero(&g)).unwrap();
        assert_eq!(*gh.at(-1, 0), f.values()[1]);
        assert_eq!(*gh.at(6, 0), f.values()[4]);
        assert_eq!(gh.value(0), 0.0);
    }

    #[test]
    fn clamped_quadratic_is_exact_to_the_boundary() {
        let g = line(11);
        let u = ScalarField::from_fn(g.clone(), |x| x[0] * x[0]);
        let data = ClampedData::interval(&g, 0.0, 0.0, 1.0, 2.0).unwrap();
        let gh = clamp_boundary(&u, &data).unwrap();
        let a = EllipticMatrix::identity(1);
        for idx in 0..g.node_count() {
            assert!((gh.elliptic_at(idx, &a) - 2.0).abs() < 1e-10, "node {idx}");
            assert!((gh.gradient_at(idx)[0] - 2.0 * g.coords(idx)[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn clamped_quadratic_2d() {
        let g = Arc::new(build_grid(2, &[0.0, -1.0], &[2.0, 1.0], &[9, 7]).unwrap());
        let q = |x: &[f64]| 0.5 * x[0] * x[0] + 0.25 * x[0] * x[1] - x[1] * x[1] + x[0];
        let dq = |x: &[f64]| [x[0] + 0.25 * x[1] + 1.0, 0.25 * x[0] - 2.0 * x[1]];
        let data = ClampedData::from_function(&g, q, dq);
        let u = ScalarField::from_fn(g.clone(), q);
        let gh = clamp_boundary(&u, &data).unwrap();
        let a = EllipticMatrix::new(2, &[1.0, 0.2, 0.2, 2.0]).unwrap();
        let exact = 1.0 * 1.0 + 2.0 * 0.2 * 0.25 + 2.0 * (-2.0);
        for idx in 0..g.node_count() {
            assert!((gh.elliptic_at(idx, &a) - exact).abs() < 1e-9, "node {idx}");
        }
    }

    #[test]
    fn inconsistent_data_is_rejected() {
        let g = line(5);
        assert!(ClampedData::new(&g, vec![0.0; 4], vec![vec![0.0], vec![0.0]]).is_err());
        assert!(matches!(
            ClampedData::new(&g, vec![0.0; 5], vec![vec![0.0]]),
            Err(GridError::MissingSlopes(_))
        ));
        assert!(matches!(
            ClampedData::new(&g, vec![0.0; 5], vec![vec![0.0], vec![]]),
            Err(GridError::MissingSlopes(1))
        ));
    }

    #[test]
    fn csv_roundtrip_and_rejection() {
        let g = Arc::new(build_grid(2, &[0.0, 0.0], &[1.0, 2.0], &[5, 6]).unwrap());
        let f = ScalarField::from_fn(g.clone(), |x| (x[0] + 0.1).ln() * x[1]);
        let mut buf = Vec::new();
        write_field_csv(&f, &mut buf).unwrap();
        let back = read_field_csv(&g, buf.as_slice()).unwrap();
        assert_eq!(back.values(), f.values());
        let other = Arc::new(build_grid(2, &[0.0, 0.0], &[1.0, 2.0], &[5, 7]).unwrap());
        assert!(read_field_csv(&other, buf.as_slice()).is_err());
    }
}
