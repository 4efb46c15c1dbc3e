//! Steady dead-oil isotherm system on a uniform rectangular grid: state
//! solvers for the coupled saturation/pressure equations and adjoint-based
//! optimal control of the injection source.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, configuration
//! and the command-line driver live in the companion `deadoil` crate.
//!
//! ```text
//!   -Δφ(u) - div(g(u)∇p) = 0      in Ω,   u = 0 on ∂Ω
//!   -div(d(u)∇p)  - f    = 0      in Ω,   p = 0 on ∂Ω
//! ```

#![no_std]

extern crate alloc;

pub mod adjoint;
pub mod coefficients;
pub mod error;
pub mod grid;
pub mod operators;
pub mod sparse;
pub mod state;

pub use adjoint::{
    eval_cost, optimize, reduced_cost, reduced_gradient, solve_adjoint, AdjointMode,
    AdjointSolution, ControlProblem, OptimizeOptions, OptimizeOutcome, OuterRecord, Termination,
};
pub use coefficients::{
    builtin_model, validate_bounds, BoundCheck, BoundsReport, CoefficientModel, DeclaredBounds,
    DerivativeCheck, ScalarFn,
};
pub use error::{Error, Result};
pub use grid::{create_grid, inner_product, lp_power_norm, Field, Grid};
pub use operators::{
    assemble_adjoint_continuous, assemble_laplacian, assemble_linearized,
    assemble_pressure_operator, residual_with_source, state_residual, LinearizedOperator,
    StateSolution,
};
pub use sparse::{
    solve_bicgstab, solve_cg, solve_dense, LinearSolve, SparseMatrix, TripletBuilder,
};
pub use state::{
    residual_norm, solve_pressure, solve_saturation, solve_state, solve_state_newton,
    solve_state_newton_with_source, solve_state_picard, solve_state_picard_with_source,
    solve_state_with_source, IterRecord, SolveLog, SolverSettings,
};
