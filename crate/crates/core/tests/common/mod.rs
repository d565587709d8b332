#![allow(dead_code)]

use std::io::Write;
use std::sync::Arc;

use linf_core::grid::{build_grid, ClampedData, EllipticMatrix, Grid, ScalarField};
use linf_core::problem::Problem;
use linf_core::supremand::SupremandSpec;

pub fn interval(n: usize) -> Arc<Grid> {
    Arc::new(build_grid(1, &[0.0], &[1.0], &[n]).unwrap())
}

/// `F = ξ`, `A = [1]` on `[0, 1]` with clamped data `(u(0), u'(0), u(1), u'(1))`.
pub fn line_problem(n: usize, data: [f64; 4]) -> Arc<Problem> {
    line_problem_with(n, data, SupremandSpec::pure_xi())
}

pub fn line_problem_with(n: usize, data: [f64; 4], spec: SupremandSpec) -> Arc<Problem> {
    let g = interval(n);
    let d = ClampedData::interval(&g, data[0], data[1], data[2], data[3]).unwrap();
    Arc::new(Problem::new(g, EllipticMatrix::identity(1), d, spec).unwrap())
}

pub fn sup_diff(a: &ScalarField, b: &ScalarField) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

pub fn l1_normalized(f: &ScalarField) -> ScalarField {
    f.scaled(1.0 / f.l1_norm())
}

/// Closed form for the data (0, 0, 0, 1): `s* = 1 + √2`, `x̄ = 1 - 1/√2`,
/// `u″ = -s*` before `x̄` and `+s*` after.
pub fn golden_s() -> f64 {
    1.0 + 2f64.sqrt()
}

pub fn golden_xbar() -> f64 {
    1.0 - 1.0 / 2f64.sqrt()
}

/// Writes straight to the stderr handle so the line shows up even when the
/// test harness captures output.
pub fn report(criterion: u32, pass: bool, detail: &str) {
    let line = format!(
        "criterion {criterion:>2}: {} | {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
}
