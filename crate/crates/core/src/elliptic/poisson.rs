use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::multigrid::Multigrid;
use super::{ScalarField, SolveError};
use crate::geometry::{Dir, Grid, Point, NONE};

/// Five-point discretization of `−Δ` with Shortley–Weller boundary legs,
/// written in flux form so the matrix is symmetric: a leg of fraction `θ`
/// contributes `(u_P − u_nb)/(θ h²)`, with `u_nb` the Dirichlet value on
/// boundary legs.
#[derive(Clone, Debug)]
pub(crate) struct Operator {
    diag: Vec<f64>,
    nbr: Vec<[u32; 4]>,
    inv_h2: f64,
}

impl Operator {
    pub(crate) fn new(grid: &Grid) -> Self {
        let inv_h2 = 1.0 / (grid.h() * grid.h());
        let diag = grid
            .leg_table()
            .iter()
            .map(|legs| inv_h2 * legs.iter().map(|t| 1.0 / t).sum::<f64>())
            .collect();
        Self {
            diag,
            nbr: grid.neighbor_table().to_vec(),
            inv_h2,
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.diag.len()
    }

    #[inline]
    fn off_sum(&self, p: usize, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for &q in &self.nbr[p] {
            if q != NONE {
                s += x[q as usize];
            }
        }
        s
    }

    pub(crate) fn apply(&self, x: &[f64], y: &mut [f64]) {
        for p in 0..self.len() {
            y[p] = self.diag[p] * x[p] - self.inv_h2 * self.off_sum(p, x);
        }
    }

    pub(crate) fn residual(&self, b: &[f64], x: &[f64], r: &mut [f64]) {
        for p in 0..self.len() {
            r[p] = b[p] - self.diag[p] * x[p] + self.inv_h2 * self.off_sum(p, x);
        }
    }

    pub(crate) fn gauss_seidel_forward(&self, b: &[f64], x: &mut [f64]) {
        for p in 0..self.len() {
            x[p] = (b[p] + self.inv_h2 * self.off_sum(p, x)) / self.diag[p];
        }
    }

    pub(crate) fn gauss_seidel_backward(&self, b: &[f64], x: &mut [f64]) {
        for p in (0..self.len()).rev() {
            x[p] = (b[p] + self.inv_h2 * self.off_sum(p, x)) / self.diag[p];
        }
    }

    /// Dense row-major copy, for small coarse levels.
    pub(crate) fn dense(&self) -> Vec<f64> {
        let n = self.len();
        let mut a = vec![0.0; n * n];
        for p in 0..n {
            a[p * n + p] = self.diag[p];
            for &q in &self.nbr[p] {
                if q != NONE {
                    a[p * n + q as usize] -= self.inv_h2;
                }
            }
        }
        a
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preconditioner {
    /// Diagonal scaling.
    Jacobi,
    /// One symmetric geometric-multigrid V-cycle.
    Multigrid,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    /// Stop when `‖b − A x‖₂ ≤ rel_tol·‖b‖₂`.
    pub rel_tol: f64,
    pub preconditioner: Preconditioner,
    /// Iteration cap; defaults to ten times the number of unknowns.
    pub max_iter: Option<usize>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            preconditioner: Preconditioner::Multigrid,
            max_iter: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Reusable preconditioned-CG solver for the Dirichlet problem on one grid.
pub struct PoissonSolver {
    grid: Arc<Grid>,
    op: Operator,
    mg: Option<Multigrid>,
    settings: SolverSettings,
}

impl std::fmt::Debug for PoissonSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PoissonSolver")
            .field("cells", &self.grid.len())
            .field("h", &self.grid.h())
            .field("settings", &self.settings)
            .finish()
    }
}

impl PoissonSolver {
    pub fn new(grid: Arc<Grid>) -> Self {
        Self::with_settings(grid, SolverSettings::default())
    }

    pub fn with_settings(grid: Arc<Grid>, settings: SolverSettings) -> Self {
        let op = Operator::new(&grid);
        let mg = match settings.preconditioner {
            Preconditioner::Multigrid => Some(Multigrid::new(&grid, op.clone())),
            Preconditioner::Jacobi => None,
        };
        Self {
            grid,
            op,
            mg,
            settings,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn settings(&self) -> &SolverSettings {
        &self.settings
    }

    /// Number of multigrid levels (1 for Jacobi).
    pub fn levels(&self) -> usize {
        self.mg.as_ref().map_or(1, Multigrid::depth)
    }

    /// `−Δ_h u` with zero boundary data.
    pub fn apply(&self, u: &ScalarField) -> ScalarField {
        let mut y = vec![0.0; u.len()];
        self.op.apply(u.values(), &mut y);
        ScalarField::new(self.grid.clone(), y)
    }

    /// Solves `−Δψ = source`, `ψ = 0` on the boundary.
    pub fn solve(&self, source: &ScalarField) -> Result<ScalarField, SolveError> {
        self.solve_with(Some(source), None, None).map(|(u, _)| u)
    }

    /// Solves with a warm start.
    pub fn solve_from(
        &self,
        source: &ScalarField,
        guess: &ScalarField,
    ) -> Result<(ScalarField, SolveStats), SolveError> {
        self.solve_with(Some(source), None, Some(guess))
    }

    /// Solves `−Δu = source` with `u = boundary(·)` at the leg intersection points.
    pub fn solve_with(
        &self,
        source: Option<&ScalarField>,
        boundary: Option<&dyn Fn(Point) -> f64>,
        guess: Option<&ScalarField>,
    ) -> Result<(ScalarField, SolveStats), SolveError> {
        for f in source.into_iter().chain(guess) {
            if !f.grid().same_as(&self.grid) {
                return Err(SolveError::GridMismatch);
            }
        }
        let n = self.grid.len();
        let mut b = match source {
            Some(s) => s.values().to_vec(),
            None => vec![0.0; n],
        };
        if let Some(g) = boundary {
            let inv_h2 = self.op.inv_h2;
            for (c, bc) in b.iter_mut().enumerate() {
                let nb = self.grid.neighbors(c);
                if !nb.contains(&NONE) {
                    continue;
                }
                let legs = self.grid.legs(c);
                for d in Dir::ALL {
                    if nb[d as usize] == NONE {
                        *bc += inv_h2 * g(self.grid.boundary_point(c, d)) / legs[d as usize];
                    }
                }
            }
        }
        let x0 = guess.map(|g| g.values().to_vec());
        let (x, stats) = self.pcg(&b, x0)?;
        Ok((ScalarField::new(self.grid.clone(), x), stats))
    }

    fn precondition(&self, r: &[f64], z: &mut [f64]) {
        match &self.mg {
            Some(mg) => mg.apply(r, z),
            None => {
                for ((zi, ri), d) in z.iter_mut().zip(r).zip(&self.op.diag) {
                    *zi = ri / d;
                }
            }
        }
    }

    fn pcg(&self, b: &[f64], x0: Option<Vec<f64>>) -> Result<(Vec<f64>, SolveStats), SolveError> {
        let n = b.len();
        let bnorm = norm(b);
        if bnorm == 0.0 {
            return Ok((
                vec![0.0; n],
                SolveStats {
                    iterations: 0,
                    relative_residual: 0.0,
                },
            ));
        }
        let tol = self.settings.rel_tol * bnorm;
        let max_iter = self.settings.max_iter.unwrap_or(10 * n).max(1);
        let mut x = x0.unwrap_or_else(|| vec![0.0; n]);
        let mut r = vec![0.0; n];
        self.op.residual(b, &x, &mut r);
        let mut rnorm = norm(&r);
        if rnorm <= tol {
            return Ok((
                x,
                SolveStats {
                    iterations: 0,
                    relative_residual: rnorm / bnorm,
                },
            ));
        }
        let mut z = vec![0.0; n];
        self.precondition(&r, &mut z);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![0.0; n];
        for it in 1..=max_iter {
            self.op.apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                break;
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            rnorm = norm(&r);
            if rnorm <= tol {
                // Confirm against the true residual to guard against drift.
                self.op.residual(b, &x, &mut r);
                rnorm = norm(&r);
                if rnorm <= tol {
                    return Ok((
                        x,
                        SolveStats {
                            iterations: it,
                            relative_residual: rnorm / bnorm,
                        },
                    ));
                }
            }
            self.precondition(&r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(SolveError::NotConverged {
            iterations: max_iter,
            relative_residual: rnorm / bnorm,
        })
    }
}

/// One-shot solve of `−Δψ = source`, `ψ = 0` on the boundary.
pub fn solve_poisson(grid: &Arc<Grid>, source: &ScalarField) -> Result<ScalarField, SolveError> {
    PoissonSolver::new(grid.clone()).solve(source)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
