use proptest::prelude::*;
use vortex_core::elliptic::{DiskOracle, GreenProvider};
use vortex_core::kirchhoff_routh::{
    find_critical_points, kr_grad, kr_hessian, kr_value, quasi_random_starts, NewtonSettings,
};
use vortex_core::{DomainSpec, Point};

fn config() -> impl Strategy<Value = (Vec<f64>, Vec<Point>)> {
    (1usize..=3).prop_flat_map(|k| {
        (
            prop::collection::vec(0.2f64..3.0, k),
            prop::collection::vec((0.0f64..0.8, 0.0f64..6.283), k),
        )
            .prop_map(|(s, polar)| {
                let pts = polar.into_iter().map(|(r, t)| Point::from_polar(r, t)).collect();
                (s, pts)
            })
    })
}

fn well_separated(points: &[Point]) -> bool {
    points
        .iter()
        .enumerate()
        .all(|(i, a)| points[i + 1..].iter().all(|b| a.dist(*b) > 0.1))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_matches_differences_of_value((strengths, points) in config()) {
        prop_assume!(well_separated(&points));
        let o = DiskOracle::new();
        let g = kr_grad(&o, &strengths, &points).unwrap();
        let e = 1e-6;
        for i in 0..points.len() {
            for axis in 0..2 {
                let shift = if axis == 0 { Point::new(e, 0.0) } else { Point::new(0.0, e) };
                let mut plus = points.clone();
                plus[i] = plus[i] + shift;
                let mut minus = points.clone();
                minus[i] = minus[i] - shift;
                let fd = (kr_value(&o, &strengths, &plus).unwrap()
                    - kr_value(&o, &strengths, &minus).unwrap()) / (2.0 * e);
                let scale = 1.0 + fd.abs();
                prop_assert!((g[2 * i + axis] - fd).abs() <= 1e-5 * scale, "{} vs {}", g[2 * i + axis], fd);
            }
        }
    }

    #[test]
    fn hessian_matches_differences_of_gradient((strengths, points) in config()) {
        prop_assume!(well_separated(&points));
        let o = DiskOracle::new();
        let hess = kr_hessian(&o, &strengths, &points).unwrap();
        let e = 1e-5;
        for i in 0..points.len() {
            for axis in 0..2 {
                let shift = if axis == 0 { Point::new(e, 0.0) } else { Point::new(0.0, e) };
                let mut plus = points.clone();
                plus[i] = plus[i] + shift;
                let mut minus = points.clone();
                minus[i] = minus[i] - shift;
                let gp = kr_grad(&o, &strengths, &plus).unwrap();
                let gm = kr_grad(&o, &strengths, &minus).unwrap();
                for row in 0..gp.len() {
                    let fd = (gp[row] - gm[row]) / (2.0 * e);
                    let col = 2 * i + axis;
                    prop_assert!((hess[(row, col)] - fd).abs() <= 1e-3 * (1.0 + fd.abs()));
                }
            }
        }
    }

    #[test]
    fn single_vortex_is_robin_for_any_strength(kappa in 0.1f64..10.0, r in 0.0f64..0.9, t in 0.0f64..6.283) {
        let o = DiskOracle::new();
        let p = Point::from_polar(r, t);
        let w = kr_value(&o, &[kappa], &[p]).unwrap();
        prop_assert!((w - kappa * kappa * o.robin(p).unwrap()).abs() <= 1e-12 * (1.0 + w.abs()));
    }
}

#[test]
fn converged_points_have_small_gradient() {
    let o = DiskOracle::new();
    let settings = NewtonSettings::default();
    let starts = quasi_random_starts(&DomainSpec::unit_disk(), 1, 16, 0.1);
    let found = find_critical_points(&o, &[2.0], &starts, &settings);
    assert!(!found.is_empty());
    for cp in found.iter().filter(|c| c.converged) {
        let g = kr_grad(&o, &[2.0], &cp.locations).unwrap();
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm <= settings.tol, "{norm}");
    }
}

#[test]
fn critical_points_are_invariant_under_strength_scaling() {
    let o = DiskOracle::new();
    let settings = NewtonSettings::default();
    let domain = DomainSpec::unit_disk();
    for strengths in [vec![1.0], vec![1.0, 2.0]] {
        let starts = quasi_random_starts(&domain, strengths.len(), 8, 0.1);
        let base = find_critical_points(&o, &strengths, &starts, &settings);
        let scaled: Vec<f64> = strengths.iter().map(|k| 3.5 * k).collect();
        let other = find_critical_points(&o, &scaled, &starts, &settings);
        let conv = |v: &[vortex_core::kirchhoff_routh::CriticalPoint]| {
            v.iter().filter(|c| c.converged).map(|c| c.locations.clone()).collect::<Vec<_>>()
        };
        let (a, b) = (conv(&base), conv(&other));
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            for (p, q) in x.iter().zip(y) {
                assert!(p.dist(*q) < 1e-6);
            }
        }
    }
}
