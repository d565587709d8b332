//! A clamped problem: grid, elliptic matrix, boundary data and supremand,
//! with the jet operator assembled once.

use std::sync::Arc;

use thiserror::Error;

use crate::grid::{ClampedData, EllipticMatrix, Grid, GridError, ScalarField};
use crate::jet::{Jet2Field, JetOperator};
use crate::supremand::{Derivs, SupremandSpec};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("matrix dimension {matrix} does not match grid dimension {grid}")]
    Dimension { matrix: usize, grid: usize },
}

#[derive(Debug, Clone)]
pub struct Problem {
    grid: Arc<Grid>,
    a: EllipticMatrix,
    data: ClampedData,
    spec: SupremandSpec,
    inner: SupremandSpec,
    op: JetOperator,
    active: Vec<bool>,
    weights: Vec<f64>,
}

/// Nodes where the supremand counts. In 2D the four corners are excluded:
/// every entry of their jets comes from boundary values and ghosts, so
/// `F` there is fixed by the data alone.
fn active_mask(grid: &Grid) -> Vec<bool> {
    (0..grid.node_count())
        .map(|idx| {
            if grid.dim() < 2 {
                return true;
            }
            let (i, j) = grid.multi_index(idx);
            let n = grid.nodes_per_axis();
            let edge_x = i == 0 || i + 1 == n[0];
            let edge_y = j == 0 || j + 1 == n[1];
            !(edge_x && edge_y)
        })
        .collect()
}

impl Problem {
    pub fn new(
        grid: Arc<Grid>,
        a: EllipticMatrix,
        data: ClampedData,
        spec: SupremandSpec,
    ) -> Result<Self, ProblemError> {
        if a.dim() != grid.dim() {
            return Err(ProblemError::Dimension {
                matrix: a.dim(),
                grid: grid.dim(),
            });
        }
        let op = JetOperator::new(&grid, &a, &data)?;
        let inner = spec.inner();
        let active = active_mask(&grid);
        let mut weights: Vec<f64> = grid
            .weights()
            .iter()
            .zip(&active)
            .map(|(w, a)| if *a { *w } else { 0.0 })
            .collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Problem {
            grid,
            a,
            data,
            spec,
            inner,
            op,
            active,
            weights,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn matrix(&self) -> &EllipticMatrix {
        &self.a
    }

    pub fn data(&self) -> &ClampedData {
        &self.data
    }

    /// The supremand as configured (possibly `Φ`-wrapped).
    pub fn spec(&self) -> &SupremandSpec {
        &self.spec
    }

    /// The supremand actually minimized (wrapper removed).
    pub fn inner_spec(&self) -> &SupremandSpec {
        &self.inner
    }

    pub fn jet_operator(&self) -> &JetOperator {
        &self.op
    }

    /// Whether node `idx` enters the supremand terms.
    pub fn is_active(&self, idx: usize) -> bool {
        self.active[idx]
    }

    pub fn active_mask(&self) -> &[bool] {
        &self.active
    }

    /// Quadrature weights for the supremand terms: the grid weights with
    /// inactive nodes removed, renormalized to sum to one.
    pub fn supremand_weights(&self) -> &[f64] {
        &self.weights
    }

    /// `max |v_i|` over active nodes.
    pub fn active_max_abs(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .zip(&self.active)
            .filter(|(_, a)| **a)
            .fold(0.0, |m, (v, _)| m.max(v.abs()))
    }

    pub fn unknown_count(&self) -> usize {
        self.op.unknown_count()
    }

    /// Clamped field with the given interior values.
    pub fn field(&self, interior: &[f64]) -> ScalarField {
        self.data.assemble(&self.grid, interior)
    }

    pub fn jets(&self, u: &ScalarField) -> Jet2Field {
        self.op.apply_field(u)
    }

    fn coords(&self, idx: usize) -> [f64; 2] {
        self.grid.coords(idx)
    }

    /// Partials of the inner supremand at every node.
    pub fn node_derivs(&self, jets: &Jet2Field) -> Vec<Derivs> {
        let dim = self.grid.dim();
        (0..jets.node_count())
            .map(|i| self.inner.derivs(&self.coords(i)[..dim], jets.at(i)))
            .collect()
    }

    /// `F(J²u)` at every node (inner supremand).
    pub fn supremand_values(&self, u: &ScalarField) -> Vec<f64> {
        self.values_from_jets(&self.jets(u))
    }

    pub fn values_from_jets(&self, jets: &Jet2Field) -> Vec<f64> {
        let dim = self.grid.dim();
        (0..jets.node_count())
            .map(|i| self.inner.value(&self.coords(i)[..dim], jets.at(i)))
            .collect()
    }

    /// Discrete `max |F(J²u)|` over active nodes.
    pub fn f_inf(&self, u: &ScalarField) -> f64 {
        self.active_max_abs(&self.supremand_values(u))
    }
}
