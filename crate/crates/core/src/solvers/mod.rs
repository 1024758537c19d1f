//! Desk-scale reference solvers. They produce the fields and series the
//! audits, probes and bounds are exercised on, and double as generators for
//! fault fixtures (unstable or entropy-violating runs). All of them are
//! deterministic.

mod burgers;
mod convergence;
mod heat;
pub mod linalg;
mod ode;
mod poisson;

use thiserror::Error;

use crate::opgraph::TimeScheme;

pub use burgers::{solve_burgers_central, solve_burgers_lf, square_entropy};
pub use convergence::{fit_order, measure_convergence_order, ConvergenceFit, ConvergenceProblem};
pub use heat::{heat_grid, semidiscrete_sine_mode, solve_heat_1d, HeatBc, HeatRun};
pub use ode::{pitchfork_max_dt, solve_pitchfork, solve_stiff_linear, StiffRun};
pub use poisson::{poisson_residual, solve_poisson_2d, PoissonSolution, POISSON_RESIDUAL_TOL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid solver input: {0}")]
    InvalidInput(String),
    #[error("scheme `{0}` is not available for this solver")]
    UnsupportedScheme(TimeScheme),
    #[error("linear system is singular")]
    SingularSystem,
    #[error("CFL number {courant} exceeds 1")]
    CflViolation { courant: f64 },
    #[error("linear solve stalled at residual {residual:e}")]
    ResidualNotReached { residual: f64 },
}
