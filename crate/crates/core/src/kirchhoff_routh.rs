//! The Kirchhoff–Routh function
//! `𝒲(x₁..x_k) = −Σ_{i≠j} κᵢκⱼ G(xᵢ, xⱼ) + Σᵢ κᵢ² φ(xᵢ)`
//! and a Newton search for its critical points.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elliptic::{GreenError, GreenProvider};
use crate::geometry::{DomainSpec, Point};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KrError {
    #[error("strength {index} must be positive, got {value}")]
    Strength { index: usize, value: f64 },
    #[error("{points} points given for {strengths} strengths")]
    CountMismatch { strengths: usize, points: usize },
    #[error("points {0} and {1} coincide")]
    Coincident(usize, usize),
    #[error("point {0} lies outside the domain")]
    Outside(usize),
    #[error("vortex windows {0} and {1} overlap")]
    WindowsOverlap(usize, usize),
    #[error("vortex window {0} is not contained in the domain")]
    WindowOutside(usize),
    #[error("window radius must be positive, got {0}")]
    Radius(f64),
    #[error(transparent)]
    Green(#[from] GreenError),
}

/// Prescribed strengths and window centres of a k-vortex configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VortexSpec {
    pub strengths: Vec<f64>,
    pub centers: Vec<Point>,
    pub delta: f64,
}

impl VortexSpec {
    /// Validates positivity and that the windows `B_δ(x₀ⱼ)` are disjoint and inside `domain`.
    pub fn new(
        domain: &DomainSpec,
        strengths: Vec<f64>,
        centers: Vec<Point>,
        delta: f64,
    ) -> Result<Self, KrError> {
        check_strengths(&strengths, centers.len())?;
        if !(delta > 0.0) {
            return Err(KrError::Radius(delta));
        }
        for (i, c) in centers.iter().enumerate() {
            if !domain.contains(*c) || domain.boundary_distance(*c) <= delta {
                return Err(KrError::WindowOutside(i));
            }
            for (j, d) in centers.iter().enumerate().skip(i + 1) {
                if c.dist(*d) <= 2.0 * delta {
                    return Err(KrError::WindowsOverlap(i, j));
                }
            }
        }
        Ok(Self {
            strengths,
            centers,
            delta,
        })
    }

    pub fn k(&self) -> usize {
        self.strengths.len()
    }
}

/// A point where `∇𝒲` (nearly) vanishes, with its Hessian spectrum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub locations: Vec<Point>,
    pub value: f64,
    pub grad_norm: f64,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub nondegenerate: bool,
    pub converged: bool,
    pub iterations: usize,
}

impl CriticalPoint {
    /// Morse index (number of negative Hessian eigenvalues).
    pub fn index(&self) -> usize {
        self.eigenvalues.iter().filter(|e| **e < 0.0).count()
    }

    pub fn is_minimum(&self) -> bool {
        self.nondegenerate && self.index() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonSettings {
    /// Convergence threshold on `‖∇𝒲‖`.
    pub tol: f64,
    pub max_iter: usize,
    pub max_backtracks: usize,
    /// Smallest pairwise distance a step may produce.
    pub min_separation: f64,
    /// Nondegenerate iff `min|eig| > degeneracy·max|eig|`.
    pub degeneracy: f64,
    /// Give up after this many consecutive steps that shrink `‖∇𝒲‖` by less than 1%.
    pub stall_limit: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100,
            max_backtracks: 20,
            min_separation: 1e-3,
            degeneracy: 1e-3,
            stall_limit: 8,
        }
    }
}

fn check_strengths(strengths: &[f64], points: usize) -> Result<(), KrError> {
    if strengths.len() != points {
        return Err(KrError::CountMismatch {
            strengths: strengths.len(),
            points,
        });
    }
    for (index, &value) in strengths.iter().enumerate() {
        if !(value > 0.0) || !value.is_finite() {
            return Err(KrError::Strength { index, value });
        }
    }
    Ok(())
}

fn check_points(
    provider: &impl GreenProvider,
    strengths: &[f64],
    points: &[Point],
) -> Result<(), KrError> {
    check_strengths(strengths, points.len())?;
    for (i, p) in points.iter().enumerate() {
        if !provider.domain().contains(*p) {
            return Err(KrError::Outside(i));
        }
        for (j, q) in points.iter().enumerate().skip(i + 1) {
            if p == q {
                return Err(KrError::Coincident(i, j));
            }
        }
    }
    Ok(())
}

/// `𝒲(x₁..x_k)`.
pub fn kr_value(
    provider: &impl GreenProvider,
    strengths: &[f64],
    points: &[Point],
) -> Result<f64, KrError> {
    check_points(provider, strengths, points)?;
    let mut w = 0.0;
    for (i, (&ki, &xi)) in strengths.iter().zip(points).enumerate() {
        w += ki * ki * provider.robin(xi)?;
        for (j, (&kj, &xj)) in strengths.iter().zip(points).enumerate() {
            if i != j {
                w -= ki * kj * provider.green(xi, xj)?;
            }
        }
    }
    Ok(w)
}

/// `∇𝒲` as `[∂x₁, ∂y₁, ∂x₂, ...]`.
pub fn kr_grad(
    provider: &impl GreenProvider,
    strengths: &[f64],
    points: &[Point],
) -> Result<Vec<f64>, KrError> {
    check_points(provider, strengths, points)?;
    let mut g = Vec::with_capacity(2 * points.len());
    for (i, (&ki, &xi)) in strengths.iter().zip(points).enumerate() {
        let mut gi = provider.robin_grad(xi)? * (ki * ki);
        for (j, (&kj, &xj)) in strengths.iter().zip(points).enumerate() {
            if i != j {
                gi = gi - provider.green_grad_x(xi, xj)? * (2.0 * ki * kj);
            }
        }
        g.push(gi.x);
        g.push(gi.y);
    }
    Ok(g)
}

/// Symmetrized centred differences of [`kr_grad`].
pub fn kr_hessian(
    provider: &impl GreenProvider,
    strengths: &[f64],
    points: &[Point],
) -> Result<DMatrix<f64>, KrError> {
    check_points(provider, strengths, points)?;
    let n = 2 * points.len();
    let s = provider.fd_step();
    let mut h = DMatrix::zeros(n, n);
    let mut shifted = points.to_vec();
    for c in 0..n {
        let e = if c % 2 == 0 {
            Point::new(s, 0.0)
        } else {
            Point::new(0.0, s)
        };
        shifted[c / 2] = points[c / 2] + e;
        let gp = kr_grad(provider, strengths, &shifted)?;
        shifted[c / 2] = points[c / 2] - e;
        let gm = kr_grad(provider, strengths, &shifted)?;
        shifted[c / 2] = points[c / 2];
        for r in 0..n {
            h[(r, c)] = (gp[r] - gm[r]) / (2.0 * s);
        }
    }
    Ok(0.5 * (&h + h.transpose()))
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn admissible(provider: &impl GreenProvider, points: &[Point], min_sep: f64) -> bool {
    points.iter().enumerate().all(|(i, p)| {
        p.is_finite()
            && provider.admissible(*p)
            && points[i + 1..].iter().all(|q| p.dist(*q) >= min_sep)
    })
}

fn displaced(points: &[Point], d: &[f64], t: f64) -> Vec<Point> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| *p + Point::new(d[2 * i], d[2 * i + 1]) * t)
        .collect()
}

/// Damped Newton on `∇𝒲 = 0` from one start.
pub fn newton(
    provider: &impl GreenProvider,
    strengths: &[f64],
    start: &[Point],
    settings: &NewtonSettings,
) -> Result<CriticalPoint, KrError> {
    let mut x = start.to_vec();
    let mut g = kr_grad(provider, strengths, &x)?;
    let mut gn = norm(&g);
    let mut iterations = 0;
    let mut stalled = 0;
    while gn > settings.tol && iterations < settings.max_iter && stalled < settings.stall_limit {
        iterations += 1;
        let hess = kr_hessian(provider, strengths, &x)?;
        let gv = DVector::from_column_slice(&g);
        let newton_dir = hess.clone().lu().solve(&(-&gv));
        let fallback = -(&hess * &gv);
        let mut accepted = None;
        for dir in newton_dir.into_iter().chain(std::iter::once(fallback)) {
            if !dir.iter().all(|v| v.is_finite()) {
                continue;
            }
            let d: Vec<f64> = dir.iter().copied().collect();
            let mut t = 1.0;
            for _ in 0..=settings.max_backtracks {
                let trial = displaced(&x, &d, t);
                if admissible(provider, &trial, settings.min_separation) {
                    if let Ok(gt) = kr_grad(provider, strengths, &trial) {
                        let gtn = norm(&gt);
                        if gtn < gn {
                            accepted = Some((trial, gt, gtn));
                            break;
                        }
                    }
                }
                t *= 0.5;
            }
            if accepted.is_some() {
                break;
            }
        }
        match accepted {
            Some((xt, gt, gtn)) => {
                if gtn > 0.99 * gn {
                    stalled += 1;
                } else {
                    stalled = 0;
                }
                x = xt;
                g = gt;
                gn = gtn;
            }
            None => break,
        }
    }
    let value = kr_value(provider, strengths, &x)?;
    let eigenvalues = sorted_eigenvalues(&kr_hessian(provider, strengths, &x)?);
    let max_abs = eigenvalues.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let min_abs = eigenvalues.iter().fold(f64::INFINITY, |m, e| m.min(e.abs()));
    Ok(CriticalPoint {
        locations: x,
        value,
        grad_norm: gn,
        nondegenerate: min_abs > settings.degeneracy * max_abs,
        eigenvalues,
        converged: gn <= settings.tol,
        iterations,
    })
}

/// True if `a` and `b` are within `radius` of each other up to relabelling
/// vortices of equal strength.
fn same_configuration(strengths: &[f64], a: &[Point], b: &[Point], radius: f64) -> bool {
    let mut used = vec![false; b.len()];
    a.iter().enumerate().all(|(i, p)| {
        let hit = (0..b.len()).find(|&j| {
            !used[j] && strengths[j] == strengths[i] && p.dist(b[j]) < radius
        });
        match hit {
            Some(j) => {
                used[j] = true;
                true
            }
            None => false,
        }
    })
}

/// Newton from every start (in parallel). Converged results come first,
/// each list deduplicated within `10·tol`; failed or invalid starts are
/// reported with `converged = false`.
pub fn find_critical_points(
    provider: &(impl GreenProvider + Sync),
    strengths: &[f64],
    starts: &[Vec<Point>],
    settings: &NewtonSettings,
) -> Vec<CriticalPoint> {
    let runs: Vec<CriticalPoint> = starts
        .par_iter()
        .map(|s| {
            newton(provider, strengths, s, settings).unwrap_or_else(|_| CriticalPoint {
                locations: s.clone(),
                value: f64::NAN,
                grad_norm: f64::INFINITY,
                eigenvalues: Vec::new(),
                nondegenerate: false,
                converged: false,
                iterations: 0,
            })
        })
        .collect();
    let radius = 10.0 * settings.tol;
    let mut out: Vec<CriticalPoint> = Vec::new();
    for want in [true, false] {
        let start = out.len();
        for r in runs.iter().filter(|r| r.converged == want) {
            if !out[start..]
                .iter()
                .any(|o| same_configuration(strengths, &o.locations, &r.locations, radius))
            {
                out.push(r.clone());
            }
        }
    }
    out
}

/// Radical-inverse (Halton) value of `i` in base `b`.
fn halton(mut i: usize, b: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= b as f64;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}

/// Deterministic quasi-random start configurations of `k` points, each at
/// least `margin` from the boundary and `2·margin` from one another.
pub fn quasi_random_starts(
    domain: &DomainSpec,
    k: usize,
    count: usize,
    margin: f64,
) -> Vec<Vec<Point>> {
    let (lo, hi) = domain.bounding_box();
    let mut out = Vec::with_capacity(count);
    let mut idx = 1;
    let mut current = Vec::with_capacity(k);
    while out.len() < count && idx < 1_000_000 {
        let p = Point::new(
            lo.x + (hi.x - lo.x) * halton(idx, 2),
            lo.y + (hi.y - lo.y) * halton(idx, 3),
        );
        idx += 1;
        if !domain.contains(p)
            || domain.boundary_distance(p) < margin
            || current.iter().any(|q: &Point| q.dist(p) < 2.0 * margin)
        {
            continue;
        }
        current.push(p);
        if current.len() == k {
            out.push(std::mem::take(&mut current));
        }
    }
    out
}

/// Single-point starts on an `n × n` lattice over the bounding box, keeping
/// those at least `margin` inside the domain.
pub fn lattice_starts(domain: &DomainSpec, n: usize, margin: f64) -> Vec<Vec<Point>> {
    let (lo, hi) = domain.bounding_box();
    let mut out = Vec::new();
    for a in 0..n {
        for b in 0..n {
            let p = Point::new(
                lo.x + (hi.x - lo.x) * (a as f64 + 0.5) / n as f64,
                lo.y + (hi.y - lo.y) * (b as f64 + 0.5) / n as f64,
            );
            if domain.contains(p) && domain.boundary_distance(p) >= margin {
                out.push(vec![p]);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::DiskOracle;
    use std::f64::consts::PI;

    #[test]
    fn single_vortex_reduces_to_robin() {
        let o = DiskOracle::new();
        assert_eq!(kr_value(&o, &[1.0], &[Point::ORIGIN]).unwrap(), 0.0);
        let x = Point::new(0.5, 0.0);
        let g = kr_grad(&o, &[1.0], &[x]).unwrap();
        assert!((g[0] - 0.5 / (PI * 0.75)).abs() < 1e-14);
        assert!((g[0] - 0.2122).abs() < 1e-4);
        assert_eq!(g[1], 0.0);
        let w = kr_value(&o, &[3.0], &[x]).unwrap();
        assert!((w - 9.0 * DiskOracle::robin_value(x)).abs() < 1e-14);
    }

    #[test]
    fn symmetric_pair_on_disk() {
        let o = DiskOracle::new();
        let d: f64 = 0.4;
        let pts = [Point::new(d, 0.0), Point::new(-d, 0.0)];
        let g = ((d * d + 1.0) / (2.0 * d)).ln() / (2.0 * PI);
        let phi = -(1.0 - d * d).ln() / (2.0 * PI);
        let expected = -2.0 * g + 2.0 * phi;
        let w = kr_value(&o, &[1.0, 1.0], &pts).unwrap();
        assert!((w - expected).abs() < 1e-14);
        assert!((w + 0.062_774).abs() < 1e-6, "{w}");
    }

    #[test]
    fn hessian_at_centre() {
        let o = DiskOracle::new();
        let h = kr_hessian(&o, &[1.0], &[Point::ORIGIN]).unwrap();
        let ev = sorted_eigenvalues(&h);
        for e in ev {
            assert!((e - 1.0 / PI).abs() < 1e-8);
        }
        assert!((&h - h.transpose()).norm() <= 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let o = DiskOracle::new();
        assert!(matches!(
            kr_value(&o, &[1.0, 1.0], &[Point::ORIGIN, Point::ORIGIN]),
            Err(KrError::Coincident(0, 1))
        ));
        assert!(matches!(
            kr_value(&o, &[1.0], &[Point::new(1.5, 0.0)]),
            Err(KrError::Outside(0))
        ));
        assert!(matches!(
            kr_value(&o, &[-1.0], &[Point::ORIGIN]),
            Err(KrError::Strength { .. })
        ));
        let d = DomainSpec::unit_disk();
        assert!(VortexSpec::new(&d, vec![1.0, 1.0], vec![Point::new(0.3, 0.0), Point::new(-0.3, 0.0)], 0.2).is_ok());
        assert!(matches!(
            VortexSpec::new(&d, vec![1.0, 1.0], vec![Point::new(0.1, 0.0), Point::new(-0.1, 0.0)], 0.2),
            Err(KrError::WindowsOverlap(0, 1))
        ));
        assert!(matches!(
            VortexSpec::new(&d, vec![1.0], vec![Point::new(0.9, 0.0)], 0.2),
            Err(KrError::WindowOutside(0))
        ));
    }

    #[test]
    fn newton_finds_disk_centre() {
        let o = DiskOracle::new();
        let d = DomainSpec::unit_disk();
        let starts = quasi_random_starts(&d, 1, 12, 0.05);
        assert_eq!(starts.len(), 12);
        let found = find_critical_points(&o, &[1.0], &starts, &NewtonSettings::default());
        assert_eq!(found.len(), 1, "{found:?}");
        let cp = &found[0];
        assert!(cp.converged);
        assert!(cp.locations[0].norm() < 1e-8);
        assert!(cp.is_minimum());
    }

    #[test]
    fn no_pair_equilibrium_on_disk() {
        let o = DiskOracle::new();
        let d = DomainSpec::unit_disk();
        let starts = quasi_random_starts(&d, 2, 16, 0.05);
        assert_eq!(starts.len(), 16);
        let found = find_critical_points(&o, &[1.0, 1.0], &starts, &NewtonSettings::default());
        assert!(found.iter().all(|c| !c.converged));
    }
}
