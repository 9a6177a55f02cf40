//! Quantitative checks of numeric patch solutions against the asymptotic
//! laws: Pohozaev residuals, location, radius and threshold laws,
//! circularity, ansatz error and the derived velocity/pressure fields.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::ansatz::{build_ansatz, AnsatzError, AnsatzParams};
use crate::elliptic::{GreenProvider, ScalarField};
use crate::geometry::{Dir, Point, NONE};
use crate::kirchhoff_routh::CriticalPoint;
use crate::patch_solver::{mask_boundary, PatchSolution};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DiagnosticsError {
    #[error("circle of radius {radius} about ({}, {}) leaves the resolved domain", .center.x, .center.y)]
    CircleExits { center: Point, radius: f64 },
    #[error("patch {0} touches the edge of its window")]
    TouchesWindow(usize),
    #[error("patch index {0} out of range")]
    NoPatch(usize),
    #[error("ansatz was built for lambda = {ansatz} but the solution has lambda = {solution}")]
    LambdaMismatch { ansatz: f64, solution: f64 },
    #[error("need at least {needed} resolved entries, got {got}")]
    TooFewEntries { needed: usize, got: usize },
    #[error(transparent)]
    Ansatz(#[from] AnsatzError),
}

/// Number of quadrature nodes on a Pohozaev circle.
pub const CIRCLE_SAMPLES: usize = 720;
/// Number of angular bins for circularity.
pub const ANGLE_BINS: usize = 64;
/// Core radius in grid spacings below which a row is flagged as under-resolved.
pub const RESOLVED: f64 = 8.0;

/// Zero-boundary gradient of `field` at an arbitrary point, by bilinear
/// interpolation of the cell-centre gradients.
pub fn gradient_interp(field: &ScalarField, p: Point) -> Option<Point> {
    let grid = field.grid();
    let h = grid.h();
    let (i, j) = grid.floor_ij(p);
    let tx = p.x / h - i as f64;
    let ty = p.y / h - j as f64;
    let zero = |_: Point| 0.0;
    let g = |a: i64, b: i64| grid.cell_at(a, b).map(|c| field.gradient_at(c, &zero));
    let (g00, g10, g01, g11) = (g(i, j)?, g(i + 1, j)?, g(i, j + 1)?, g(i + 1, j + 1)?);
    Some((g00 * (1.0 - tx) + g10 * tx) * (1.0 - ty) + (g01 * (1.0 - tx) + g11 * tx) * ty)
}

/// `∮ [−∂_νψ ∂ᵢψ + (1/2)|∇ψ|² νᵢ] ds`, `i = 1, 2`, over the circle of
/// radius `radius` about `center`.
pub fn pohozaev_residual(
    psi: &ScalarField,
    center: Point,
    radius: f64,
) -> Result<[f64; 2], DiagnosticsError> {
    let exits = DiagnosticsError::CircleExits { center, radius };
    let ds = 2.0 * PI * radius / CIRCLE_SAMPLES as f64;
    let mut acc = [0.0; 2];
    for k in 0..CIRCLE_SAMPLES {
        let t = 2.0 * PI * (k as f64 + 0.5) / CIRCLE_SAMPLES as f64;
        let nu = Point::new(t.cos(), t.sin());
        let y = center + nu * radius;
        if !psi.grid().domain().contains(y) {
            return Err(exits);
        }
        let g = gradient_interp(psi, y).ok_or_else(|| exits.clone())?;
        let dn = g.dot(nu);
        let half = 0.5 * g.norm_sq();
        acc[0] += (-dn * g.x + half * nu.x) * ds;
        acc[1] += (-dn * g.y + half * nu.y) * ds;
    }
    Ok(acc)
}

/// Distance from each patch centroid to the nearest location among the
/// given critical points (`∞` if there are none).
pub fn centroid_vs_critical(solution: &PatchSolution, critical: &[CriticalPoint]) -> Vec<f64> {
    solution
        .patches
        .iter()
        .map(|p| {
            critical
                .iter()
                .flat_map(|c| c.locations.iter())
                .map(|x| x.dist(p.centroid))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub lambda: f64,
    pub radius: f64,
    pub predicted_radius: f64,
    /// `r/√(κ/(πλ))`.
    pub radius_ratio: f64,
    pub threshold: f64,
    pub predicted_threshold: f64,
    /// `4πκ̃/(κ ln λ)`.
    pub threshold_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    /// Sorted by λ.
    pub rows: Vec<ScalingRow>,
    /// λ values left out as under-resolved.
    pub excluded: Vec<f64>,
    /// `|ratio − 1|` is nonincreasing along the sweep.
    pub radius_drifts_to_one: bool,
    pub threshold_drifts_to_one: bool,
}

fn drifts_to_one(values: impl Iterator<Item = f64>) -> bool {
    let v: Vec<f64> = values.map(|x| (x - 1.0).abs()).collect();
    v.windows(2).all(|w| w[1] <= w[0])
}

/// Radius and threshold laws for patch `patch` across a λ-sweep.
pub fn scaling_laws(
    solutions: &[PatchSolution],
    patch: usize,
    min_resolution: f64,
) -> Result<ScalingReport, DiagnosticsError> {
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    for sol in solutions {
        let p = sol.patches.get(patch).ok_or(DiagnosticsError::NoPatch(patch))?;
        let kappa = sol.kappa[patch];
        let h = sol.psi.grid().h();
        let predicted_radius = (kappa / (PI * sol.lambda)).sqrt();
        if predicted_radius / h < min_resolution {
            log::warn!("lambda = {} is under-resolved; left out of the scaling fit", sol.lambda);
            excluded.push(sol.lambda);
            continue;
        }
        let predicted_threshold = kappa * sol.lambda.ln() / (4.0 * PI);
        rows.push(ScalingRow {
            lambda: sol.lambda,
            radius: p.radius,
            predicted_radius,
            radius_ratio: p.radius / predicted_radius,
            threshold: p.threshold,
            predicted_threshold,
            threshold_ratio: p.threshold / predicted_threshold,
        });
    }
    rows.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    Ok(ScalingReport {
        radius_drifts_to_one: drifts_to_one(rows.iter().map(|r| r.radius_ratio)),
        threshold_drifts_to_one: drifts_to_one(rows.iter().map(|r| r.threshold_ratio)),
        rows,
        excluded,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circularity {
    /// Mean crossing distance from the centroid.
    pub mean_radius: f64,
    /// `max |ρ(θ) − 1|` over the occupied bins, `ρ` rescaled by the effective radius.
    pub max_deviation: f64,
    /// `max_deviation / s` with `s = √(κ/(πλ))`.
    pub ratio_to_core: f64,
    /// Rescaled radius per angular bin (`NaN` for empty bins).
    pub profile: Vec<f64>,
    /// Level-crossing points used for the fit.
    pub boundary: Vec<Point>,
}

/// Shape of patch `index`: crossings of `ψ = κ̃` located by linear
/// interpolation between each mask-boundary cell and its outside
/// 4-neighbours, binned by angle about the centroid.
pub fn circularity(solution: &PatchSolution, index: usize) -> Result<Circularity, DiagnosticsError> {
    let patch = solution
        .patches
        .get(index)
        .ok_or(DiagnosticsError::NoPatch(index))?;
    let psi = &solution.psi;
    let grid = psi.grid();
    let h = grid.h();
    let level = patch.threshold;
    let in_window = |c: usize| match patch.window.radius {
        None => true,
        Some(r) => grid.cell_center(c).dist(patch.window.center) < r,
    };
    let mut points = Vec::new();
    for c in mask_boundary(grid, &patch.cells) {
        let c = c as usize;
        let nb = grid.neighbors(c);
        let pc = grid.cell_center(c);
        for d in Dir::ALL {
            let n = nb[d as usize];
            if n == NONE || !in_window(n as usize) {
                return Err(DiagnosticsError::TouchesWindow(index));
            }
            if patch.cells.binary_search(&n).is_ok() {
                continue;
            }
            let (a, b) = (psi.values()[c], psi.values()[n as usize]);
            let t = if a != b { ((a - level) / (a - b)).clamp(0.0, 1.0) } else { 0.5 };
            points.push(pc + d.unit() * (t * h));
        }
    }
    let mut sums = vec![0.0; ANGLE_BINS];
    let mut counts = vec![0usize; ANGLE_BINS];
    let mut mean = 0.0;
    for p in &points {
        let d = *p - patch.centroid;
        let ang = d.y.atan2(d.x).rem_euclid(2.0 * PI);
        let bin = ((ang / (2.0 * PI) * ANGLE_BINS as f64) as usize).min(ANGLE_BINS - 1);
        sums[bin] += d.norm();
        counts[bin] += 1;
        mean += d.norm();
    }
    let mean_radius = mean / points.len().max(1) as f64;
    let profile: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &n)| if n > 0 { s / n as f64 / patch.radius } else { f64::NAN })
        .collect();
    let max_deviation = profile
        .iter()
        .filter(|v| v.is_finite())
        .fold(0.0f64, |m, v| m.max((v - 1.0).abs()));
    let s = (solution.kappa[index] / (PI * solution.lambda)).sqrt();
    Ok(Circularity {
        mean_radius,
        max_deviation,
        ratio_to_core: max_deviation / s,
        profile,
        boundary: points,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnsatzErrorReport {
    /// `max |u − 𝒰|` over all cells.
    pub max_error: f64,
    /// The same restricted to `|y − xⱼ| ≤ 2sⱼ`.
    pub core_error: f64,
    /// `max_j sⱼ/|ln sⱼ|`.
    pub scale: f64,
    pub ratio: f64,
}

/// `‖u − 𝒰‖_∞` with `u = 4πψ/ln λ`.
pub fn ansatz_error(
    solution: &PatchSolution,
    params: &AnsatzParams,
    green: &impl GreenProvider,
) -> Result<AnsatzErrorReport, DiagnosticsError> {
    if params.lambda != solution.lambda {
        return Err(DiagnosticsError::LambdaMismatch {
            ansatz: params.lambda,
            solution: solution.lambda,
        });
    }
    let grid = solution.psi.grid();
    let ansatz = build_ansatz(green, grid, params)?;
    let u = solution.u();
    let mut max_error = 0.0f64;
    let mut core_error = 0.0f64;
    for c in 0..grid.len() {
        let e = (u.values()[c] - ansatz.values()[c]).abs();
        max_error = max_error.max(e);
        let y = grid.cell_center(c);
        if params.patches.iter().any(|p| y.dist(p.center) <= 2.0 * p.s) {
            core_error = core_error.max(e);
        }
    }
    let scale = params
        .patches
        .iter()
        .map(|p| p.s / p.s.ln().abs())
        .fold(0.0f64, f64::max);
    Ok(AnsatzErrorReport {
        max_error,
        core_error,
        scale,
        ratio: max_error / scale,
    })
}

/// Velocity `v = (∂₂ψ, −∂₁ψ)` and pressure `P = λ Σⱼ 1_windowⱼ (ψ − κ̃ⱼ)₊ − |∇ψ|²/2`.
#[derive(Clone, Debug)]
pub struct Flow {
    pub vx: ScalarField,
    pub vy: ScalarField,
    pub pressure: ScalarField,
}

pub fn velocity_pressure(solution: &PatchSolution) -> Flow {
    let psi = &solution.psi;
    let grid = psi.grid();
    let (gx, gy) = psi.gradient_field();
    let vx = gy.clone();
    let vy = gx.scaled(-1.0);
    let pressure = ScalarField::from_fn(grid.clone(), |_| 0.0);
    let mut pressure = pressure;
    for (c, pv) in pressure.values_mut().iter_mut().enumerate() {
        let y = grid.cell_center(c);
        let mut p = 0.0;
        for patch in &solution.patches {
            let inside = match patch.window.radius {
                None => true,
                Some(r) => y.dist(patch.window.center) < r,
            };
            if inside {
                p += solution.lambda * (psi.values()[c] - patch.threshold).max(0.0);
            }
        }
        let g2 = gx.values()[c].powi(2) + gy.values()[c].powi(2);
        *pv = p - 0.5 * g2;
    }
    Flow { vx, vy, pressure }
}

/// `max |v·ν|` over boundary-adjacent cells, `ν` the outward normal at the
/// nearest boundary point.
pub fn boundary_normal_velocity(solution: &PatchSolution, flow: &Flow) -> f64 {
    let grid = solution.psi.grid();
    let domain = grid.domain();
    (0..grid.len())
        .filter(|&c| grid.is_boundary_adjacent(c))
        .map(|c| {
            let (_, nu) = domain.nearest_boundary(grid.cell_center(c));
            (flow.vx.values()[c] * nu.x + flow.vy.values()[c] * nu.y).abs()
        })
        .fold(0.0, f64::max)
}

/// Spread of `P + |v|²/2` over cells outside every patch mask, relative to
/// `max|v|²/2`.
pub fn bernoulli_variation(solution: &PatchSolution, flow: &Flow) -> f64 {
    let grid = solution.psi.grid();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut vmax = 0.0f64;
    for c in 0..grid.len() {
        let v2 = flow.vx.values()[c].powi(2) + flow.vy.values()[c].powi(2);
        vmax = vmax.max(v2);
        if solution
            .patches
            .iter()
            .any(|p| p.cells.binary_search(&(c as u32)).is_ok())
        {
            continue;
        }
        let b = flow.pressure.values()[c] + 0.5 * v2;
        lo = lo.min(b);
        hi = hi.max(b);
    }
    if vmax == 0.0 {
        0.0
    } else {
        (hi - lo) / (0.5 * vmax)
    }
}

/// Least-squares slope of `ln error` against `ln h`.
pub fn fit_exponent(h: &[f64], error: &[f64]) -> f64 {
    let n = h.len().min(error.len()) as f64;
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = error.iter().map(|v| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// One row of the per-λ diagnostics table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub lambda: f64,
    pub patch: usize,
    pub centroid_x: f64,
    pub centroid_y: f64,
    pub critical_distance: f64,
    pub radius: f64,
    pub predicted_radius: f64,
    /// Stream-function scaling (`ψ`).
    pub threshold: f64,
    pub predicted_threshold: f64,
    pub circularity: f64,
    pub pohozaev_radius: f64,
    pub pohozaev_norm: f64,
    /// Rescaled (`u`) scaling.
    pub ansatz_error: f64,
    pub ansatz_scale: f64,
    /// Predicted core radius in grid spacings.
    pub resolution: f64,
    pub resolved: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    /// Sorted by λ, then patch.
    pub rows: Vec<DiagnosticsRow>,
    /// Slope of `ln(ansatz error)` against `ln(s/|ln s|)` across the sweep.
    pub ansatz_exponent: Option<f64>,
    /// Slope of `ln(centroid distance)` against `ln(1/ln λ)`.
    pub location_exponent: Option<f64>,
}

/// Per-patch diagnostics row. Failed sub-diagnostics are reported as `NaN`.
pub fn diagnose(
    solution: &PatchSolution,
    critical: &[CriticalPoint],
    params: Option<&AnsatzParams>,
    green: &impl GreenProvider,
) -> Vec<DiagnosticsRow> {
    let distances = centroid_vs_critical(solution, critical);
    let ansatz = params.and_then(|p| ansatz_error(solution, p, green).ok());
    let domain = solution.psi.grid().domain();
    let h = solution.psi.grid().h();
    solution
        .patches
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let kappa = solution.kappa[j];
            let predicted_radius = (kappa / (PI * solution.lambda)).sqrt();
            let mut d = (0.5 * domain.boundary_distance(p.centroid)).min(0.25);
            if let Some(r) = p.window.radius {
                d = d.min(0.9 * r);
            }
            let poh = pohozaev_residual(&solution.psi, p.centroid, d)
                .map(|r| r[0].hypot(r[1]))
                .unwrap_or(f64::NAN);
            DiagnosticsRow {
                lambda: solution.lambda,
                patch: j,
                centroid_x: p.centroid.x,
                centroid_y: p.centroid.y,
                critical_distance: distances[j],
                radius: p.radius,
                predicted_radius,
                threshold: p.threshold,
                predicted_threshold: kappa * solution.lambda.ln() / (4.0 * PI),
                circularity: circularity(solution, j).map_or(f64::NAN, |c| c.max_deviation),
                pohozaev_radius: d,
                pohozaev_norm: poh,
                ansatz_error: ansatz.as_ref().map_or(f64::NAN, |a| a.max_error),
                ansatz_scale: ansatz.as_ref().map_or(f64::NAN, |a| a.scale),
                resolution: predicted_radius / h,
                resolved: predicted_radius / h >= RESOLVED,
            }
        })
        .collect()
}

/// Sorts rows and fits the trend exponents where at least two finite
/// entries exist.
pub fn assemble_report(mut rows: Vec<DiagnosticsRow>) -> DiagnosticsReport {
    rows.sort_by(|a, b| a.lambda.total_cmp(&b.lambda).then(a.patch.cmp(&b.patch)));
    let fit = |x: Vec<f64>, y: Vec<f64>| {
        let (x, y): (Vec<f64>, Vec<f64>) = x
            .into_iter()
            .zip(y)
            .filter(|(a, b)| a.is_finite() && b.is_finite() && *a > 0.0 && *b > 0.0)
            .unzip();
        (x.len() >= 2).then(|| fit_exponent(&x, &y))
    };
    let ansatz_exponent = fit(
        rows.iter().map(|r| r.ansatz_scale).collect(),
        rows.iter().map(|r| r.ansatz_error).collect(),
    );
    let location_exponent = fit(
        rows.iter().map(|r| 1.0 / r.lambda.ln()).collect(),
        rows.iter().map(|r| r.critical_distance).collect(),
    );
    DiagnosticsReport {
        rows,
        ansatz_exponent,
        location_exponent,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::RadialPatch;
    use crate::geometry::{DomainSpec, Grid};
    use std::sync::Arc;

    #[test]
    fn exact_radial_field_has_no_pohozaev_residual() {
        let grid = Arc::new(Grid::new(&DomainSpec::unit_disk(), 1.0 / 128.0).unwrap());
        let exact = RadialPatch::new(1000.0, 1.0);
        let psi = ScalarField::from_fn(grid, |p| exact.psi(p.norm()));
        let r = pohozaev_residual(&psi, Point::ORIGIN, 0.25).unwrap();
        assert!(r[0].hypot(r[1]) <= 1e-10, "{r:?}");
    }

    #[test]
    fn harmonic_annulus_residual_is_radius_independent() {
        // ψ = G(·, y0) for a point vortex off the circle centre: the
        // residual only sees the enclosed singularity.
        let grid = Arc::new(Grid::new(&DomainSpec::unit_disk(), 1.0 / 256.0).unwrap());
        let y0 = Point::new(0.05, 0.02);
        let psi = ScalarField::from_fn(grid, |p| crate::elliptic::DiskOracle::green_value(p, y0));
        let a = pohozaev_residual(&psi, Point::ORIGIN, 0.2).unwrap();
        let b = pohozaev_residual(&psi, Point::ORIGIN, 0.3).unwrap();
        assert!((a[0] - b[0]).abs() < 1e-3 * a[0].abs().max(1e-3), "{a:?} {b:?}");
        assert!((a[1] - b[1]).abs() < 1e-3 * a[0].abs().max(1e-3), "{a:?} {b:?}");
    }

    #[test]
    fn circle_outside_domain_is_an_error() {
        let grid = Arc::new(Grid::new(&DomainSpec::unit_disk(), 1.0 / 32.0).unwrap());
        let psi = ScalarField::zeros(grid);
        assert!(matches!(
            pohozaev_residual(&psi, Point::new(0.5, 0.0), 0.6),
            Err(DiagnosticsError::CircleExits { .. })
        ));
    }

    #[test]
    fn exponent_fit_recovers_power() {
        let h = [0.1, 0.05, 0.025];
        let e: Vec<f64> = h.iter().map(|x: &f64| 3.0 * x.powi(2)).collect();
        assert!((fit_exponent(&h, &e) - 2.0).abs() < 1e-12);
    }
}
