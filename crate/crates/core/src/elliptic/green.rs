use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use super::{PoissonSolver, ScalarField, SolveError};
use crate::geometry::{DomainSpec, Grid, Point};

pub type Mat2 = [[f64; 2]; 2];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GreenError {
    #[error("point ({}, {}) is outside the domain", .0.x, .0.y)]
    Outside(Point),
    #[error("point ({}, {}) is too close to the boundary for this evaluation", .0.x, .0.y)]
    NearBoundary(Point),
    #[error("closed forms are only available on the unit disk")]
    NotDisk,
    #[error("source and evaluation points coincide")]
    Coincident,
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Free-space kernel `(1/2π) ln(1/|x − y|)`.
pub fn log_kernel(x: Point, y: Point) -> f64 {
    -(x.dist(y)).ln() / (2.0 * PI)
}

/// Source of the regular part `H(x, y)` of the Dirichlet Green function,
/// `G(x, y) = (1/2π) ln(1/|x − y|) − H(x, y)`, and everything derived from it.
pub trait GreenProvider: Sync {
    fn domain(&self) -> &DomainSpec;

    /// Step for centred differences.
    fn fd_step(&self) -> f64;

    /// True if values, gradients and Hessians may be requested at `x`.
    fn admissible(&self, x: Point) -> bool;

    fn regular(&self, x: Point, y: Point) -> Result<f64, GreenError>;

    /// `∇ₓH(x, y)` by centred differences.
    fn regular_grad_x(&self, x: Point, y: Point) -> Result<Point, GreenError> {
        let s = self.fd_step();
        let dx = Point::new(s, 0.0);
        let dy = Point::new(0.0, s);
        Ok(Point::new(
            (self.regular(x + dx, y)? - self.regular(x - dx, y)?) / (2.0 * s),
            (self.regular(x + dy, y)? - self.regular(x - dy, y)?) / (2.0 * s),
        ))
    }

    /// `∇ₓ²H(x, y)` by centred second differences.
    fn regular_hess_x(&self, x: Point, y: Point) -> Result<Mat2, GreenError> {
        let s = self.fd_step();
        let f = |p: Point| self.regular(p, y);
        let e1 = Point::new(s, 0.0);
        let e2 = Point::new(0.0, s);
        let c = f(x)?;
        let xx = (f(x + e1)? - 2.0 * c + f(x - e1)?) / (s * s);
        let yy = (f(x + e2)? - 2.0 * c + f(x - e2)?) / (s * s);
        let xy = (f(x + e1 + e2)? - f(x + e1 - e2)? - f(x - e1 + e2)? + f(x - e1 - e2)?)
            / (4.0 * s * s);
        Ok([[xx, xy], [xy, yy]])
    }

    fn green(&self, x: Point, y: Point) -> Result<f64, GreenError> {
        if x == y {
            return Err(GreenError::Coincident);
        }
        Ok(log_kernel(x, y) - self.regular(x, y)?)
    }

    /// `∇ₓG(x, y)`.
    fn green_grad_x(&self, x: Point, y: Point) -> Result<Point, GreenError> {
        let d = x - y;
        let r2 = d.norm_sq();
        if r2 == 0.0 {
            return Err(GreenError::Coincident);
        }
        Ok(d * (-1.0 / (2.0 * PI * r2)) - self.regular_grad_x(x, y)?)
    }

    /// Robin function `φ(x) = H(x, x)`.
    fn robin(&self, x: Point) -> Result<f64, GreenError> {
        self.regular(x, x)
    }

    /// `∇φ(x) = 2 (∇ₓH)(x, x)`, using the symmetry of `H`.
    fn robin_grad(&self, x: Point) -> Result<Point, GreenError> {
        Ok(self.regular_grad_x(x, x)? * 2.0)
    }

    /// Symmetrized centred differences of [`GreenProvider::robin_grad`].
    fn robin_hess(&self, x: Point) -> Result<Mat2, GreenError> {
        let s = self.fd_step();
        let gxp = self.robin_grad(x + Point::new(s, 0.0))?;
        let gxm = self.robin_grad(x - Point::new(s, 0.0))?;
        let gyp = self.robin_grad(x + Point::new(0.0, s))?;
        let gym = self.robin_grad(x - Point::new(0.0, s))?;
        let xx = (gxp.x - gxm.x) / (2.0 * s);
        let yx = (gxp.y - gxm.y) / (2.0 * s);
        let xy = (gyp.x - gym.x) / (2.0 * s);
        let yy = (gyp.y - gym.y) / (2.0 * s);
        let off = 0.5 * (xy + yx);
        Ok([[xx, off], [off, yy]])
    }

    /// `H(·, y)` sampled at the cell centres of `grid`.
    fn regular_field(&self, grid: &Arc<Grid>, y: Point) -> Result<ScalarField, GreenError> {
        let mut values = Vec::with_capacity(grid.len());
        for c in 0..grid.len() {
            values.push(self.regular(grid.cell_center(c), y)?);
        }
        Ok(ScalarField::new(grid.clone(), values))
    }
}

/// Requested derivative order for [`regular_part`] and [`robin`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Order {
    Value,
    Gradient,
    Hessian,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Evaluated {
    Value(f64),
    Gradient(Point),
    Hessian(Mat2),
}

/// `H(x, y)` or its first/second derivatives in `x`.
pub fn regular_part(
    provider: &impl GreenProvider,
    x: Point,
    y: Point,
    order: Order,
) -> Result<Evaluated, GreenError> {
    Ok(match order {
        Order::Value => Evaluated::Value(provider.regular(x, y)?),
        Order::Gradient => Evaluated::Gradient(provider.regular_grad_x(x, y)?),
        Order::Hessian => Evaluated::Hessian(provider.regular_hess_x(x, y)?),
    })
}

/// `φ(x)` or its gradient/Hessian.
pub fn robin(provider: &impl GreenProvider, x: Point, order: Order) -> Result<Evaluated, GreenError> {
    Ok(match order {
        Order::Value => Evaluated::Value(provider.robin(x)?),
        Order::Gradient => Evaluated::Gradient(provider.robin_grad(x)?),
        Order::Hessian => Evaluated::Hessian(provider.robin_hess(x)?),
    })
}

const CACHE_LIMIT: usize = 64;

/// Grid-based regular part: `H(·, y)` is the discrete harmonic extension of
/// the boundary trace of `(1/2π) ln(1/|· − y|)`, evaluated off-grid by cubic
/// (near the boundary, bilinear) interpolation.
pub struct GridGreen {
    solver: PoissonSolver,
    step: f64,
    cache: Mutex<HashMap<(u64, u64), Arc<ScalarField>>>,
}

impl std::fmt::Debug for GridGreen {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GridGreen")
            .field("solver", &self.solver)
            .field("step", &self.step)
            .finish()
    }
}

impl GridGreen {
    pub fn new(grid: Arc<Grid>) -> Self {
        Self::with_solver(PoissonSolver::new(grid))
    }

    pub fn with_solver(solver: PoissonSolver) -> Self {
        let step = solver.grid().h().max(1e-4);
        Self {
            solver,
            step,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.solver.grid()
    }

    pub fn solver(&self) -> &PoissonSolver {
        &self.solver
    }

    /// The discrete field `H(·, y)`.
    pub fn harmonic_field(&self, y: Point) -> Result<Arc<ScalarField>, GreenError> {
        if !self.grid().domain().contains(y) {
            return Err(GreenError::Outside(y));
        }
        let key = (y.x.to_bits(), y.y.to_bits());
        if let Some(f) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(f.clone());
        }
        let trace = move |b: Point| log_kernel(b, y);
        let (field, _) = self.solver.solve_with(None, Some(&trace), None)?;
        let field = Arc::new(field);
        let mut cache = self.cache.lock().expect("cache lock");
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(key, field.clone());
        Ok(field)
    }

    fn stencil_interior(&self, x: Point, reach: i64) -> bool {
        let g = self.grid();
        let (i, j) = g.floor_ij(x);
        (i - reach..=i + reach + 1).all(|a| (j - reach..=j + reach + 1).all(|b| g.cell_at(a, b).is_some()))
    }
}

impl GreenProvider for GridGreen {
    fn domain(&self) -> &DomainSpec {
        self.grid().domain()
    }

    fn fd_step(&self) -> f64 {
        self.step
    }

    fn admissible(&self, x: Point) -> bool {
        let reach = 2 + (2.0 * self.step / self.grid().h()).ceil() as i64;
        self.grid().domain().contains(x) && self.stencil_interior(x, reach)
    }

    fn regular(&self, x: Point, y: Point) -> Result<f64, GreenError> {
        if !self.grid().domain().contains(x) {
            return Err(GreenError::Outside(x));
        }
        let field = self.harmonic_field(y)?;
        field.interp(x).ok_or(GreenError::NearBoundary(x))
    }

    fn regular_field(&self, grid: &Arc<Grid>, y: Point) -> Result<ScalarField, GreenError> {
        if grid.same_as(self.grid()) {
            Ok((*self.harmonic_field(y)?).clone())
        } else {
            let mut values = Vec::with_capacity(grid.len());
            for c in 0..grid.len() {
                values.push(self.regular(grid.cell_center(c), y)?);
            }
            Ok(ScalarField::new(grid.clone(), values))
        }
    }
}

/// Mean of `ln|z|` over the square cell of side `h` centred at the source:
/// `(1/2)(ln(h²/2) − 3 + π/2)`.
fn cell_mean_log(h: f64) -> f64 {
    0.5 * ((0.5 * h * h).ln() - 3.0 + 0.5 * PI)
}

/// `G(·, source)` on the grid, built by subtracting the discrete harmonic
/// correction from the free-space logarithm. A cell centred exactly on the
/// source takes the cell average of the logarithm.
pub fn green_function(green: &GridGreen, source: Point) -> Result<ScalarField, GreenError> {
    let grid = green.grid().clone();
    let domain = grid.domain();
    if !domain.contains(source) {
        return Err(GreenError::Outside(source));
    }
    if domain.boundary_distance(source) < 2.0 * grid.h() {
        return Err(GreenError::NearBoundary(source));
    }
    let harmonic = green.harmonic_field(source)?;
    let h = grid.h();
    let values = (0..grid.len())
        .map(|c| {
            let p = grid.cell_center(c);
            let free = if p.dist(source) < 1e-12 * h {
                -cell_mean_log(h) / (2.0 * PI)
            } else {
                log_kernel(p, source)
            };
            free - harmonic.values()[c]
        })
        .collect();
    Ok(ScalarField::new(grid, values))
}
