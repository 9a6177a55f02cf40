//! Closed forms on the unit disk, used both as a [`GreenProvider`] and as an
//! independent oracle for the grid-based paths.

use std::f64::consts::PI;

use super::green::{GreenError, GreenProvider, Mat2};
use crate::geometry::{DomainSpec, Point};

/// Closed-form Green, regular-part and Robin functions of the unit disk.
///
/// With `y* = y/|y|²`, `H(x, y) = (1/2π) ln 1/(|y||x − y*|)`, which is
/// evaluated as `−(1/4π) ln(1 + |x|²|y|² − 2x·y)` so that `y = 0` needs no
/// special case.
#[derive(Clone, Debug)]
pub struct DiskOracle {
    domain: DomainSpec,
    step: f64,
}

impl DiskOracle {
    pub fn new() -> Self {
        Self {
            domain: DomainSpec::unit_disk(),
            step: 1e-5,
        }
    }

    /// Fails unless `domain` is the unit disk.
    pub fn for_domain(domain: &DomainSpec) -> Result<Self, GreenError> {
        if domain.is_unit_disk() {
            Ok(Self::new())
        } else {
            Err(GreenError::NotDisk)
        }
    }

    fn check(&self, p: Point) -> Result<(), GreenError> {
        if p.norm_sq() < 1.0 {
            Ok(())
        } else {
            Err(GreenError::Outside(p))
        }
    }

    fn reflect_term(x: Point, y: Point) -> f64 {
        1.0 + x.norm_sq() * y.norm_sq() - 2.0 * x.dot(y)
    }

    pub fn robin_value(x: Point) -> f64 {
        -(1.0 - x.norm_sq()).ln() / (2.0 * PI)
    }

    pub fn green_value(x: Point, y: Point) -> f64 {
        -(x.dist(y)).ln() / (2.0 * PI) + Self::reflect_term(x, y).ln() / (4.0 * PI)
    }
}

impl Default for DiskOracle {
    fn default() -> Self {
        Self::new()
    }
}

impl GreenProvider for DiskOracle {
    fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    fn fd_step(&self) -> f64 {
        self.step
    }

    fn admissible(&self, x: Point) -> bool {
        x.norm() < 1.0 - 4.0 * self.step
    }

    fn regular(&self, x: Point, y: Point) -> Result<f64, GreenError> {
        self.check(x)?;
        self.check(y)?;
        Ok(-Self::reflect_term(x, y).ln() / (4.0 * PI))
    }

    fn regular_grad_x(&self, x: Point, y: Point) -> Result<Point, GreenError> {
        self.check(x)?;
        self.check(y)?;
        let d = Self::reflect_term(x, y);
        let dd = x * (2.0 * y.norm_sq()) - y * 2.0;
        Ok(dd * (-1.0 / (4.0 * PI * d)))
    }

    fn regular_hess_x(&self, x: Point, y: Point) -> Result<Mat2, GreenError> {
        self.check(x)?;
        self.check(y)?;
        let d = Self::reflect_term(x, y);
        let y2 = y.norm_sq();
        let g = x * (2.0 * y2) - y * 2.0;
        let c = -1.0 / (4.0 * PI);
        Ok([
            [
                c * (2.0 * y2 / d - g.x * g.x / (d * d)),
                c * (-g.x * g.y / (d * d)),
            ],
            [
                c * (-g.x * g.y / (d * d)),
                c * (2.0 * y2 / d - g.y * g.y / (d * d)),
            ],
        ])
    }

    fn robin(&self, x: Point) -> Result<f64, GreenError> {
        self.check(x)?;
        Ok(Self::robin_value(x))
    }

    fn robin_grad(&self, x: Point) -> Result<Point, GreenError> {
        self.check(x)?;
        Ok(x * (1.0 / (PI * (1.0 - x.norm_sq()))))
    }

    fn robin_hess(&self, x: Point) -> Result<Mat2, GreenError> {
        self.check(x)?;
        let q = 1.0 - x.norm_sq();
        let a = 1.0 / (PI * q);
        let b = 2.0 / (PI * q * q);
        Ok([
            [a + b * x.x * x.x, b * x.x * x.y],
            [b * x.x * x.y, a + b * x.y * x.y],
        ])
    }
}

/// Exact radially symmetric patch on the unit disk: `−Δψ = λ·1_{B_r(0)}`,
/// `ψ = 0` on the unit circle, with `πr²λ = κ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialPatch {
    pub lambda: f64,
    pub kappa: f64,
    pub radius: f64,
}

impl RadialPatch {
    pub fn new(lambda: f64, kappa: f64) -> Self {
        Self {
            lambda,
            kappa,
            radius: (kappa / (PI * lambda)).sqrt(),
        }
    }

    pub fn psi(&self, rho: f64) -> f64 {
        let (l, r) = (self.lambda, self.radius);
        let outer = 0.5 * l * r * r;
        if rho <= r {
            0.25 * l * (r * r - rho * rho) + outer * (1.0 / r).ln()
        } else {
            outer * (1.0 / rho).ln()
        }
    }

    /// `dψ/dρ`.
    pub fn psi_prime(&self, rho: f64) -> f64 {
        let (l, r) = (self.lambda, self.radius);
        if rho <= r {
            -0.5 * l * rho
        } else {
            -0.5 * l * r * r / rho
        }
    }

    /// Level of `ψ` on the patch boundary, `(κ/2π) ln(1/r)`.
    pub fn threshold(&self) -> f64 {
        self.kappa / (2.0 * PI) * (1.0 / self.radius).ln()
    }

    /// `(1/2)∫ωψ = (κ²/2π)(1/8 + ln(1/r)/2)`.
    pub fn energy(&self) -> f64 {
        self.kappa * self.kappa / (2.0 * PI) * (0.125 + 0.5 * (1.0 / self.radius).ln())
    }

    /// Speed `|∇ψ|` at distance `rho` from the centre.
    pub fn speed(&self, rho: f64) -> f64 {
        self.psi_prime(rho).abs()
    }
}
