//! Flow domains and their Cartesian discretization.

mod domain;
mod grid;
mod point;

pub use domain::{
    contains, convexity_check, make_domain, DomainDescription, DomainKind, DomainSpec, StarShape,
};
pub use grid::{rasterize, Dir, Grid, NONE};
pub use point::Point;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("parameter `{name}` must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("star radius function must stay positive (min sampled r = {min})")]
    StarRadius { min: f64 },
    #[error("domain declared convex={declared} but boundary curvature says convex={measured}")]
    ConvexityMismatch { declared: bool, measured: bool },
    #[error("grid spacing h = {h} leaves no interior cells")]
    GridTooCoarse { h: f64 },
    #[error("grid spacing h = {h} produces too many nodes")]
    GridTooLarge { h: f64 },
}
