//! Solver and verifier for second-order supremal variational problems
//! `min ‖F(x, u, Du, A:D²u)‖_∞` under clamped Dirichlet data.

pub mod grid;
pub mod jet;
pub mod linalg;
pub mod supremand;
pub mod lp_energy;
pub mod oracle_1d;
pub mod problem;
pub mod characterization;
pub mod pde_solver;
pub mod minimizer;
