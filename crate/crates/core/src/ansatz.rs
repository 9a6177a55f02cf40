//! Explicit approximate solution in the rescaled variables
//! `u = 4πψ/ln λ`, `λ̄ = 4πλ/ln λ`: a superposition of projected radial
//! profiles `PU_{λ,x,a}` with parameters fixed by a small nonlinear system.

use std::f64::consts::{E, PI};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::elliptic::{GreenError, GreenProvider, ScalarField};
use crate::geometry::{Grid, Point};
use crate::kirchhoff_routh::VortexSpec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnsatzError {
    #[error("no core radius below R/e for a = {a}, scaled intensity {lambda_bar}")]
    NoRoot { a: f64, lambda_bar: f64 },
    #[error("evaluation radius {rho} exceeds R = {r}")]
    BeyondR { rho: f64, r: f64 },
    #[error("parameter iteration did not settle after {sweeps} sweeps (last change {change:e})")]
    NotConverged { sweeps: usize, change: f64 },
    #[error("{targets} threshold targets and {guesses} centre guesses for {k} vortices")]
    CountMismatch { k: usize, targets: usize, guesses: usize },
    #[error("vortex intensity must exceed 1, got {0}")]
    Lambda(f64),
    #[error("strength parameter a = {0} is not positive")]
    Strength(f64),
    #[error(transparent)]
    Green(#[from] GreenError),
}

/// `λ̄ = 4πλ/ln λ`.
pub fn lambda_bar(lambda: f64) -> f64 {
    4.0 * PI * lambda / lambda.ln()
}

/// Radial profile `w(y) = (1 − |y|²)/4` for `|y| ≤ 1`, `(1/2)ln(1/|y|)` outside.
pub fn radial_profile_w(y: Point) -> f64 {
    let rho = y.norm();
    if rho <= 1.0 {
        0.25 * (1.0 - rho * rho)
    } else {
        -0.5 * rho.ln()
    }
}

/// Root `s < R/e` of `s·√(ln(R/s)) = √(2a/λ̄)`, by bisection on `[1e-14·R, R/e]`.
pub fn solve_scale(a: f64, lambda_bar: f64, r: f64) -> Result<f64, AnsatzError> {
    let target = (2.0 * a / lambda_bar).sqrt();
    let f = |s: f64| s * (r / s).ln().sqrt() - target;
    let mut lo = 1e-14 * r;
    let mut hi = r / E;
    if !(a > 0.0) || !(f(lo) < 0.0) || !(f(hi) >= 0.0) {
        return Err(AnsatzError::NoRoot { a, lambda_bar });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if f(lo).abs() <= f(hi).abs() { lo } else { hi })
}

/// `U_{λ,a}` at distance `rho` from its centre.
pub fn free_profile_u(a: f64, lambda_bar: f64, s: f64, r: f64, rho: f64) -> Result<f64, AnsatzError> {
    if rho > r {
        return Err(AnsatzError::BeyondR { rho, r });
    }
    Ok(if rho <= s {
        a + 0.25 * lambda_bar * (s * s - rho * rho)
    } else {
        a * (rho / r).ln() / (s / r).ln()
    })
}

/// `dU/dρ`.
pub fn free_profile_slope(a: f64, lambda_bar: f64, s: f64, r: f64, rho: f64) -> f64 {
    if rho <= s {
        -0.5 * lambda_bar * rho
    } else {
        a / (rho * (s / r).ln())
    }
}

/// `PU = U − (a/ln(R/s))·g(y, x)` with `g = ln R + 2πH(y, x)`.
#[allow(clippy::too_many_arguments)]
pub fn project_pu(
    green: &impl GreenProvider,
    center: Point,
    a: f64,
    lambda_bar: f64,
    s: f64,
    r: f64,
    y: Point,
) -> Result<f64, AnsatzError> {
    if !green.domain().contains(y) {
        return Err(GreenError::Outside(y).into());
    }
    let u = free_profile_u(a, lambda_bar, s, r, y.dist(center))?;
    let g = r.ln() + 2.0 * PI * green.regular(y, center)?;
    Ok(u - a / (r / s).ln() * g)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnsatzPatch {
    pub center: Point,
    pub a: f64,
    pub s: f64,
    /// Scaled threshold `κ_{λ,j}` the parameters were fitted to.
    pub kappa: f64,
    /// Reference point `p_{λ,j}` (the guess).
    pub anchor: Point,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnsatzParams {
    pub r: f64,
    pub lambda: f64,
    pub lambda_bar: f64,
    pub patches: Vec<AnsatzPatch>,
    pub sweeps: usize,
}

impl AnsatzParams {
    /// Largest residual of the strength equation and the core-radius relation.
    pub fn residual(&self, green: &impl GreenProvider) -> Result<f64, AnsatzError> {
        let mut worst = 0.0f64;
        for (i, p) in self.patches.iter().enumerate() {
            let li = (self.r / p.s).ln();
            let gii = self.r.ln() + 2.0 * PI * green.robin(p.center)?;
            let mut rhs = p.kappa + p.a / li * gii;
            for (j, q) in self.patches.iter().enumerate() {
                if i != j {
                    let gbar = 2.0 * PI * green.green(p.center, q.center)?;
                    rhs -= q.a / (self.r / q.s).ln() * gbar;
                }
            }
            worst = worst.max((p.a - rhs).abs());
            let scale = p.s * li.sqrt() - (2.0 * p.a / self.lambda_bar).sqrt();
            worst = worst.max(scale.abs());
        }
        Ok(worst)
    }
}

const MAX_SWEEPS: usize = 200;
const SWEEP_TOL: f64 = 1e-10;

/// Fixed-point sweeps `a → s → x` for the ansatz parameters.
///
/// `kappa` holds the scaled thresholds `κ_{λ,j}` (use the strengths `κ_j`
/// for a standalone ansatz); `anchors` are the reference points `p_{λ,j}`.
pub fn solve_ansatz_params(
    green: &impl GreenProvider,
    spec: &VortexSpec,
    lambda: f64,
    kappa: &[f64],
    anchors: &[Point],
) -> Result<AnsatzParams, AnsatzError> {
    let k = spec.k();
    if kappa.len() != k || anchors.len() != k {
        return Err(AnsatzError::CountMismatch {
            k,
            targets: kappa.len(),
            guesses: anchors.len(),
        });
    }
    if !(lambda > 1.0) {
        return Err(AnsatzError::Lambda(lambda));
    }
    let r = green.domain().enclosing_radius();
    let lb = lambda_bar(lambda);
    let mut a: Vec<f64> = kappa.to_vec();
    let mut s = a
        .iter()
        .map(|&ai| solve_scale(ai, lb, r))
        .collect::<Result<Vec<_>, _>>()?;
    let mut x: Vec<Point> = anchors.to_vec();
    let mut change = f64::INFINITY;
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        change = 0.0;
        for i in 0..k {
            let li = (r / s[i]).ln();
            let gii = r.ln() + 2.0 * PI * green.robin(x[i])?;
            let mut num = kappa[i];
            for j in 0..k {
                if j != i {
                    num -= a[j] / (r / s[j]).ln() * 2.0 * PI * green.green(x[i], x[j])?;
                }
            }
            let ai = num / (1.0 - gii / li);
            if !(ai > 0.0) {
                return Err(AnsatzError::Strength(ai));
            }
            change = change.max((ai - a[i]).abs());
            a[i] = ai;
        }
        for i in 0..k {
            let si = solve_scale(a[i], lb, r)?;
            change = change.max((si - s[i]).abs());
            s[i] = si;
        }
        let mut next = x.clone();
        for i in 0..k {
            let li = (r / s[i]).ln();
            let mut force = green.robin_grad(x[i])? * (PI * a[i] / li);
            for j in 0..k {
                if j != i {
                    let lj = (r / s[j]).ln();
                    force = force - green.green_grad_x(x[i], x[j])? * (2.0 * PI * a[j] / lj);
                }
            }
            next[i] = anchors[i] + force * (2.0 / lb);
            change = change.max(next[i].dist(x[i]));
        }
        x = next;
        if change < SWEEP_TOL {
            break;
        }
    }
    if change >= SWEEP_TOL {
        return Err(AnsatzError::NotConverged { sweeps, change });
    }
    let patches = (0..k)
        .map(|i| AnsatzPatch {
            center: x[i],
            a: a[i],
            s: s[i],
            kappa: kappa[i],
            anchor: anchors[i],
        })
        .collect();
    Ok(AnsatzParams {
        r,
        lambda,
        lambda_bar: lb,
        patches,
        sweeps,
    })
}

/// `𝒰 = Σⱼ PU_{λ,xⱼ,aⱼ}` sampled at the cell centres of `grid`.
pub fn build_ansatz(
    green: &impl GreenProvider,
    grid: &Arc<Grid>,
    params: &AnsatzParams,
) -> Result<ScalarField, AnsatzError> {
    let mut total = ScalarField::zeros(grid.clone());
    for p in &params.patches {
        let harmonic = green.regular_field(grid, p.center)?;
        let coef = p.a / (params.r / p.s).ln();
        for (c, v) in total.values_mut().iter_mut().enumerate() {
            let y = grid.cell_center(c);
            let u = free_profile_u(p.a, params.lambda_bar, p.s, params.r, y.dist(p.center))?;
            *v += u - coef * (params.r.ln() + 2.0 * PI * harmonic.values()[c]);
        }
    }
    Ok(total)
}
