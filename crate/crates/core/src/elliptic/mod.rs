//! Dirichlet Poisson solver, Green and Robin functions.

pub mod disk;
mod field;
pub mod green;
mod multigrid;
mod poisson;

pub use disk::{DiskOracle, RadialPatch};
pub use field::ScalarField;
pub use green::{green_function, GreenError, GreenProvider, GridGreen, Mat2};
pub use poisson::{solve_poisson, PoissonSolver, Preconditioner, SolveStats, SolverSettings};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("solver stopped after {iterations} iterations at relative residual {relative_residual:e}")]
    NotConverged {
        iterations: usize,
        relative_residual: f64,
    },
    #[error("field belongs to a different grid")]
    GridMismatch,
}
