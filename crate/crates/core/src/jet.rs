//! Reduced second-order jets `(u, Du, A:D²u)` at every grid node.
//!
//! Boundary nodes carry jets too: their stencils read the ghost layer, which
//! is how the prescribed slopes enter the discrete problem. The map from the
//! interior unknowns to the stacked jets is affine and is stored once as a
//! sparse matrix plus an offset.

use std::sync::Arc;

use crate::grid::{
    clamp_boundary, elliptic_weights, ghost_extend_affine, gradient_weights, Affine, ClampedData,
    EllipticMatrix, Grid, GridError, ScalarField,
};
use crate::linalg::Csr;

/// Jet slots in a reduced jet vector: `[η, p_1, .., p_n, ξ]`.
pub fn jet_len(dim: usize) -> usize {
    dim + 2
}

/// Per-node reduced jets of a field.
#[derive(Debug, Clone)]
pub struct Jet2Field {
    grid: Arc<Grid>,
    m: usize,
    data: Vec<f64>,
}

impl Jet2Field {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Number of slots per node.
    pub fn width(&self) -> usize {
        self.m
    }

    pub fn node_count(&self) -> usize {
        self.data.len() / self.m
    }

    /// Reduced jet `[η, p.., ξ]` at a node.
    pub fn at(&self, idx: usize) -> &[f64] {
        &self.data[idx * self.m..(idx + 1) * self.m]
    }

    pub fn eta(&self, idx: usize) -> f64 {
        self.data[idx * self.m]
    }

    pub fn grad(&self, idx: usize) -> &[f64] {
        &self.data[idx * self.m + 1..idx * self.m + self.m - 1]
    }

    pub fn xi(&self, idx: usize) -> f64 {
        self.data[idx * self.m + self.m - 1]
    }

    /// Stacked jets, node-major.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn xi_values(&self) -> Vec<f64> {
        (0..self.node_count()).map(|i| self.xi(i)).collect()
    }

    /// Linear combination `self + t * other` (jets are affine in the field).
    pub fn axpy(&self, t: f64, other: &Jet2Field) -> Jet2Field {
        Jet2Field {
            grid: self.grid.clone(),
            m: self.m,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + t * b)
                .collect(),
        }
    }
}

/// Affine map from interior unknowns to stacked nodal jets.
#[derive(Debug, Clone)]
pub struct JetOperator {
    grid: Arc<Grid>,
    a: EllipticMatrix,
    m: usize,
    rows: Csr,
    offset: Vec<f64>,
}

impl JetOperator {
    pub fn new(grid: &Arc<Grid>, a: &EllipticMatrix, data: &ClampedData) -> Result<Self, GridError> {
        if a.dim() != grid.dim() {
            return Err(GridError::Dimension(a.dim()));
        }
        if data.values().len() != grid.node_count() {
            return Err(GridError::Length {
                what: "boundary values",
                expected: grid.node_count(),
                got: data.values().len(),
            });
        }
        let dim = grid.dim();
        let m = jet_len(dim);
        let ext = ghost_extend_affine(grid, data);
        let ew = elliptic_weights(grid, a);
        let nu = grid.interior_nodes().len();
        let mut rows = Csr::new(nu);
        let mut offset = Vec::with_capacity(grid.node_count() * m);
        let mut emit = |aff: Affine, rows: &mut Csr| {
            offset.push(aff.constant);
            rows.push_row(aff.terms);
        };
        for idx in 0..grid.node_count() {
            let (i, j) = grid.multi_index(idx);
            let (i, j) = (i as isize, j as isize);
            emit(ext.at(i, j).clone(), &mut rows);
            for axis in 0..dim {
                let mut acc = Affine::default();
                for (di, dj, c) in gradient_weights(grid, axis) {
                    acc.add_scaled(c, ext.at(i + di, j + dj));
                }
                emit(acc, &mut rows);
            }
            let mut acc = Affine::default();
            for &(di, dj, c) in &ew {
                acc.add_scaled(c, ext.at(i + di, j + dj));
            }
            emit(acc, &mut rows);
        }
        Ok(JetOperator {
            grid: grid.clone(),
            a: *a,
            m,
            rows,
            offset,
        })
    }

    /// Operator with homogeneous data, for clamped-zero variations.
    pub fn homogeneous(&self) -> JetOperator {
        JetOperator {
            grid: self.grid.clone(),
            a: self.a,
            m: self.m,
            rows: self.rows.clone(),
            offset: vec![0.0; self.offset.len()],
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn matrix(&self) -> &EllipticMatrix {
        &self.a
    }

    pub fn width(&self) -> usize {
        self.m
    }

    pub fn unknown_count(&self) -> usize {
        self.rows.ncols()
    }

    pub(crate) fn rows(&self) -> &Csr {
        &self.rows
    }

    /// Largest distance between two unknowns read by a single node's jet.
    pub fn node_span(&self) -> usize {
        let mut span = 0;
        for node in 0..self.grid.node_count() {
            let (mut lo, mut hi) = (usize::MAX, 0);
            for r in node * self.m..(node + 1) * self.m {
                for (c, _) in self.rows.row(r) {
                    lo = lo.min(c);
                    hi = hi.max(c);
                }
            }
            if hi >= lo {
                span = span.max(hi - lo);
            }
        }
        span
    }

    /// Jets of the clamped field with the given interior values.
    pub fn apply(&self, interior: &[f64]) -> Jet2Field {
        let mut data = self.rows.mul_vec(interior);
        for (d, o) in data.iter_mut().zip(&self.offset) {
            *d += o;
        }
        Jet2Field {
            grid: self.grid.clone(),
            m: self.m,
            data,
        }
    }

    /// Jets of a field; only its interior values are read.
    pub fn apply_field(&self, field: &ScalarField) -> Jet2Field {
        self.apply(&field.interior_values())
    }

    /// Jets with the data offset removed (the linear part).
    pub fn apply_linear(&self, interior: &[f64]) -> Jet2Field {
        Jet2Field {
            grid: self.grid.clone(),
            m: self.m,
            data: self.rows.mul_vec(interior),
        }
    }

    /// Adjoint of the linear part: maps stacked per-node jet weights to the
    /// interior unknowns.
    pub fn transpose(&self, jet_weights: &[f64]) -> Vec<f64> {
        self.rows.mul_t_vec(jet_weights)
    }
}

/// Jets of `field` computed through the ghosted field (an independent path
/// to the same numbers as [`JetOperator::apply_field`]).
pub fn jets_via_ghosts(
    field: &ScalarField,
    a: &EllipticMatrix,
    data: &ClampedData,
) -> Result<Jet2Field, GridError> {
    let gh = clamp_boundary(field, data)?;
    let g = field.grid().clone();
    let dim = g.dim();
    let m = jet_len(dim);
    let mut out = Vec::with_capacity(g.node_count() * m);
    for idx in 0..g.node_count() {
        out.push(gh.value(idx));
        let d = gh.gradient_at(idx);
        out.extend_from_slice(&d[..dim]);
        out.push(gh.elliptic_at(idx, a));
    }
    Ok(Jet2Field { grid: g, m, data: out })
}
