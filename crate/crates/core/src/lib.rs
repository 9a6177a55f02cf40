//! Numerical laboratory for steady planar vortex patches with prescribed
//! vorticity strength.
//!
//! The pipeline is: a [`geometry::DomainSpec`] is rasterized to a
//! [`geometry::Grid`]; [`elliptic`] solves Dirichlet Poisson problems and
//! provides Green, regular-part and Robin functions; [`kirchhoff_routh`]
//! locates critical points of the Kirchhoff–Routh function; [`patch_solver`]
//! computes vortex patches by vorticity rearrangement; [`ansatz`] builds the
//! explicit approximate solution and [`diagnostics`] compares the two against
//! the asymptotic laws.

pub mod ansatz;
pub mod diagnostics;
pub mod elliptic;
pub mod geometry;
pub mod kirchhoff_routh;
pub mod patch_solver;

pub use geometry::{DomainSpec, Grid, Point};
