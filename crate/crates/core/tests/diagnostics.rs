use std::sync::Arc;

use vortex_core::diagnostics::{
    assemble_report, bernoulli_variation, boundary_normal_velocity, circularity, diagnose,
    pohozaev_residual, scaling_laws, velocity_pressure,
};
use vortex_core::elliptic::{DiskOracle, PoissonSolver, RadialPatch};
use vortex_core::kirchhoff_routh::{find_critical_points, lattice_starts, NewtonSettings, VortexSpec};
use vortex_core::patch_solver::{solve_patch, Init, PatchSettings, PatchSolution};
use vortex_core::{DomainSpec, Grid, Point};

fn disk_solution(lambda: f64, kappa: f64, h: f64) -> PatchSolution {
    let grid = Arc::new(Grid::new(&DomainSpec::unit_disk(), h).unwrap());
    let solver = PoissonSolver::new(grid.clone());
    let spec = VortexSpec::new(grid.domain(), vec![kappa], vec![Point::ORIGIN], 0.2).unwrap();
    solve_patch(&solver, &spec, lambda, &Init::PointVortex(vec![Point::ORIGIN]), &PatchSettings::default())
        .unwrap()
}

#[test]
fn far_field_speed_matches_radial_solution() {
    let sol = disk_solution(1000.0, 1.0, 1.0 / 256.0);
    let flow = velocity_pressure(&sol);
    let grid = sol.psi.grid();
    let exact = RadialPatch::new(1000.0, 1.0).speed(0.5);
    assert!((exact - 0.3183).abs() < 1e-4);
    for p in [Point::new(0.5, 0.0), Point::new(0.0, -0.5), Point::new(-0.3, 0.4)] {
        let c = grid.nearest_cell(p).unwrap();
        let speed = flow.vx.values()[c].hypot(flow.vy.values()[c]);
        let rho = grid.cell_center(c).norm();
        let expected = RadialPatch::new(1000.0, 1.0).speed(rho);
        assert!((speed - expected).abs() <= 0.01 * expected, "{speed} vs {expected}");
    }
}

#[test]
fn flow_is_divergence_free_and_tangential() {
    let sol = disk_solution(300.0, 1.0, 1.0 / 128.0);
    let flow = velocity_pressure(&sol);
    let grid = sol.psi.grid();
    let h = grid.h();
    let (gx, gy) = sol.psi.gradient_field();
    let grad_max = gx.values().iter().zip(gy.values()).map(|(a, b)| a.hypot(*b)).fold(0.0, f64::max);
    let normal = boundary_normal_velocity(&sol, &flow);
    assert!(normal <= 2.0 * h * grad_max, "{normal} vs {}", h * grad_max);

    for c in 0..grid.len() {
        let nb = grid.neighbors(c);
        if grid.is_boundary_adjacent(c) || nb.iter().any(|&n| grid.is_boundary_adjacent(n as usize)) {
            continue;
        }
        let div = (flow.vx.values()[nb[0] as usize] - flow.vx.values()[nb[1] as usize]
            + flow.vy.values()[nb[2] as usize]
            - flow.vy.values()[nb[3] as usize])
            / (2.0 * h);
        assert!(div.abs() <= 1e-6 * grad_max / h, "{div}");
    }
    assert!(bernoulli_variation(&sol, &flow) <= 0.05);
}

#[test]
fn radius_ratios_are_exact_up_to_pixels() {
    let h = 1.0 / 128.0;
    let sols: Vec<PatchSolution> = [150.0, 300.0, 600.0].iter().map(|&l| disk_solution(l, 1.0, h)).collect();
    let report = scaling_laws(&sols, 0, 2.0).unwrap();
    assert_eq!(report.rows.len(), 3);
    assert!(report.threshold_drifts_to_one);
    for row in &report.rows {
        let band = 3.0 * h / row.predicted_radius;
        assert!((row.radius_ratio - 1.0).abs() <= band, "{row:?}");
    }
}

#[test]
fn doubling_strength_scales_radius_by_root_two() {
    let a = disk_solution(400.0, 1.0, 1.0 / 128.0);
    let b = disk_solution(400.0, 2.0, 1.0 / 128.0);
    let ratio = b.patches[0].radius / a.patches[0].radius;
    assert!((ratio / 2f64.sqrt() - 1.0).abs() <= 0.05, "{ratio}");
}

#[test]
fn disk_patch_is_round() {
    let sol = disk_solution(1000.0, 1.0, 1.0 / 256.0);
    let c = circularity(&sol, 0).unwrap();
    let bound = 2.0 * sol.psi.grid().h() / sol.patches[0].radius;
    assert!(c.max_deviation <= bound, "{} vs {bound}", c.max_deviation);
}

#[test]
fn pohozaev_residual_shrinks_under_refinement() {
    let coarse = disk_solution(300.0, 1.0, 1.0 / 128.0);
    let fine = disk_solution(300.0, 1.0, 1.0 / 256.0);
    let norm = |s: &PatchSolution| {
        let r = pohozaev_residual(&s.psi, Point::ORIGIN, 0.25).unwrap();
        r[0].hypot(r[1])
    };
    assert!(norm(&fine) < norm(&coarse), "{} vs {}", norm(&fine), norm(&coarse));
}

#[test]
fn report_is_reproducible_and_finite() {
    let o = DiskOracle::new();
    let critical = find_critical_points(&o, &[1.0], &lattice_starts(&DomainSpec::unit_disk(), 3, 0.2), &NewtonSettings::default());
    let run = || {
        let rows: Vec<_> = [200.0, 400.0]
            .iter()
            .flat_map(|&l| diagnose(&disk_solution(l, 1.0, 1.0 / 96.0), &critical, None, &o))
            .collect();
        assemble_report(rows)
    };
    let (a, b) = (run(), run());
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert!(a.rows.windows(2).all(|w| w[0].lambda <= w[1].lambda));
    for row in &a.rows {
        assert!(row.critical_distance.is_finite() && row.pohozaev_norm.is_finite());
        assert!(row.critical_distance <= 1.0 / 96.0);
    }
}
