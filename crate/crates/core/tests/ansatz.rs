use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use vortex_core::ansatz::{
    build_ansatz, free_profile_slope, lambda_bar, project_pu, solve_ansatz_params, solve_scale,
    AnsatzParams,
};
use vortex_core::elliptic::DiskOracle;
use vortex_core::kirchhoff_routh::VortexSpec;
use vortex_core::{DomainSpec, Grid, Point};

fn ansatz_at(o: &DiskOracle, params: &AnsatzParams, y: Point) -> f64 {
    params
        .patches
        .iter()
        .map(|p| project_pu(o, p.center, p.a, params.lambda_bar, p.s, params.r, y).unwrap())
        .sum()
}

fn params_for(centers: Vec<Point>, lambda: f64) -> AnsatzParams {
    let domain = DomainSpec::unit_disk();
    let k = centers.len();
    let spec = VortexSpec::new(&domain, vec![1.0; k], centers.clone(), 0.1).unwrap();
    solve_ansatz_params(&DiskOracle::new(), &spec, lambda, &vec![1.0; k], &centers).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn scale_root_residual_is_tiny(a in 0.05f64..5.0, log_lambda in 4.0f64..14.0, r in 1.0f64..8.0) {
        let lb = lambda_bar(log_lambda.exp());
        let s = solve_scale(a, lb, r).unwrap();
        let residual = s * (r / s).ln().sqrt() - (2.0 * a / lb).sqrt();
        prop_assert!(residual.abs() <= 1e-12, "{residual}");
    }

    #[test]
    fn free_profile_is_c1_at_the_core_edge(a in 0.05f64..5.0, log_lambda in 4.0f64..14.0, r in 1.0f64..8.0) {
        let lb = lambda_bar(log_lambda.exp());
        let s = solve_scale(a, lb, r).unwrap();
        let inner = -0.5 * lb * s;
        let outer = a / (s * (s / r).ln());
        prop_assert!((inner - outer).abs() <= 1e-10 * inner.abs().max(1.0), "{inner} vs {outer}");
        let at = free_profile_slope(a, lb, s, r, s);
        prop_assert!((at - inner).abs() <= 1e-10 * inner.abs().max(1.0));
    }
}

#[test]
fn parameter_residuals_are_small() {
    let o = DiskOracle::new();
    for centers in [
        vec![Point::ORIGIN],
        vec![Point::new(0.3, 0.1)],
        vec![Point::new(-0.4, 0.0), Point::new(0.4, 0.1)],
    ] {
        let params = params_for(centers, 1e4);
        assert!(params.residual(&o).unwrap() <= 1e-9);
    }
}

#[test]
fn level_set_is_sandwiched_on_rays() {
    let o = DiskOracle::new();
    let params = params_for(vec![Point::new(0.3, 0.1), Point::new(-0.4, -0.2)], 1e5);
    for p in &params.patches {
        let s = p.s;
        let l2 = 0.25 / s;
        let mut worst = 0.0f64;
        for k in 0..16 {
            let theta = 2.0 * PI * k as f64 / 16.0;
            let dir = Point::from_polar(1.0, theta);
            let value = |t: f64| ansatz_at(&o, &params, p.center + dir * (t * s)) - p.kappa;
            // Locate the single crossing by bisection and check the sign pattern.
            let (mut lo, mut hi) = (0.0, l2);
            assert!(value(lo) > 0.0 && value(hi) < 0.0);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if value(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let crossing = 0.5 * (lo + hi);
            worst = worst.max((crossing - 1.0).abs());
            for i in 0..400 {
                let t = l2 * (i as f64 + 0.5) / 400.0;
                if (t - crossing).abs() > 1e-9 {
                    assert_eq!(value(t) > 0.0, t < crossing, "ray {k}, t = {t}");
                }
            }
        }
        let l1 = worst / s;
        assert!(l1.is_finite() && l1 < 50.0, "L1 = {l1}");
    }
}

#[test]
fn discrete_laplacian_in_core_is_lambda_bar() {
    let o = DiskOracle::new();
    let lambda = 300.0;
    let params = params_for(vec![Point::new(0.2, 0.0)], lambda);
    let grid = Arc::new(Grid::new(&DomainSpec::unit_disk(), 1.0 / 512.0).unwrap());
    let u = build_ansatz(&o, &grid, &params).unwrap();
    let h = grid.h();
    let p = &params.patches[0];
    let mut checked = 0;
    for c in 0..grid.len() {
        let y = grid.cell_center(c);
        if y.dist(p.center) >= p.s - 2.0 * h {
            continue;
        }
        let nb = grid.neighbors(c);
        let lap = (nb.iter().map(|&n| u.values()[n as usize]).sum::<f64>() - 4.0 * u.values()[c]) / (h * h);
        assert!((lap + params.lambda_bar).abs() <= 1e-6 * params.lambda_bar, "{lap}");
        checked += 1;
    }
    assert!(checked > 20);
}
