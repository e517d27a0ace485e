//! Galerkin discretization of linear second-order evolution equations
//! `(C u′)′ + B u′ + (A + Q) u = f` on a Gelfand triple, with tools to
//! compute and verify higher time derivatives of the solution.

pub mod error;
pub mod experiment;
pub mod expr;
pub mod galerkin;
pub mod linalg;
pub mod regularity;
pub mod time;
pub mod triple;
pub mod waveq1d;

pub use error::{Error, Result};
pub use galerkin::{assemble_block_system, integrate, solve_forward, AuxiliaryForm, BlockSystem, Solution};
pub use regularity::{
    build_auxiliary, compatible_initial_values, energy_report, inductive_residual, solve_derivative, CompatibleIVs,
    EnergyReport,
};
pub use time::{antiderivative, compose_antiderivatives, fd_time_derivative, TimeGrid, Trajectory};
pub use triple::{
    estimate_coercivity, shift_garding, validate_problem, OperatorFamily, OperatorKind, ProblemData, RhsFunction,
    SpaceDiscretization,
};
