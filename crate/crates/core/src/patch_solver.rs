//! Vortex patches by vorticity rearrangement.
//!
//! Each iteration solves `−Δψ = ω` and replaces `ω` by `λ` on the cells of
//! largest `ψ` in each window, holding exactly `κⱼ/λ` of area (the last cell
//! is filled fractionally). The kinetic energy never decreases; when the
//! masks stop changing, whole-patch translations are tried and kept only if
//! they raise the energy further.

use std::collections::hash_map::DefaultHasher;
use std::collections::VecDeque;
use std::f64::consts::PI;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{build_ansatz, solve_ansatz_params, AnsatzError};
use crate::elliptic::{GridGreen, PoissonSolver, ScalarField, SolveError};
use crate::geometry::{DomainSpec, Grid, Point, NONE};
use crate::kirchhoff_routh::VortexSpec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PatchError {
    #[error("window {0} contains no grid cells")]
    EmptyWindow(usize),
    #[error("window {index} holds area {available} but the patch needs {needed}")]
    WindowTooSmall {
        index: usize,
        needed: f64,
        available: f64,
    },
    #[error("core radius {s} is only {ratio:.2} grid spacings (need {required})")]
    UnderResolved { s: f64, ratio: f64, required: f64 },
    #[error("core radius {s} does not fit window {index} of radius {delta}")]
    CoreTooLarge { index: usize, s: f64, delta: f64 },
    #[error("masks cycle with period {length} after {iterations} iterations")]
    Cycle { length: usize, iterations: usize },
    #[error("masks still changing after {0} iterations")]
    NotConverged(usize),
    #[error("initial vorticity must live on the solver grid")]
    GridMismatch,
    #[error("lambda must be positive and finite, got {0}")]
    Lambda(f64),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Ansatz(#[from] AnsatzError),
}

/// Cells selected by [`threshold_for_area`].
#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    /// Smallest selected value.
    pub threshold: f64,
    /// Selected cells in decreasing value order; the last one carries
    /// `fraction` of a full cell.
    pub cells: Vec<u32>,
    pub fraction: f64,
}

impl Selection {
    /// Area held by the mask (whole cells).
    pub fn mask_area(&self, h: f64) -> f64 {
        self.cells.len() as f64 * h * h
    }

    /// Area carried by the selection (last cell fractional).
    pub fn filled_area(&self, h: f64) -> f64 {
        (self.cells.len() as f64 - 1.0 + self.fraction) * h * h
    }

    fn sorted_cells(&self) -> Vec<u32> {
        let mut c = self.cells.clone();
        c.sort_unstable();
        c
    }
}

/// Selects the cells of largest value in `window` holding `target_area`.
///
/// Whole cells are taken in decreasing order of value (ties by cell index)
/// until the remaining area is less than one cell; the next cell is
/// included with the leftover fraction. The mask therefore exceeds the
/// target by less than one cell.
pub fn threshold_for_area(
    field: &ScalarField,
    window: &[u32],
    target_area: f64,
) -> Result<Selection, PatchError> {
    if window.is_empty() {
        return Err(PatchError::EmptyWindow(0));
    }
    let h = field.grid().h();
    let quantum = h * h;
    let needed = target_area / quantum;
    let available = window.len() as f64;
    if needed > available * (1.0 + 1e-12) {
        return Err(PatchError::WindowTooSmall {
            index: 0,
            needed: target_area,
            available: available * quantum,
        });
    }
    let values = field.values();
    let mut order: Vec<u32> = window.to_vec();
    order.sort_unstable_by(|&a, &b| {
        values[b as usize]
            .total_cmp(&values[a as usize])
            .then(a.cmp(&b))
    });
    let mut whole = needed.floor();
    let mut fraction = needed - whole;
    if fraction < 1e-9 {
        fraction = 0.0;
    } else if fraction > 1.0 - 1e-9 {
        whole += 1.0;
        fraction = 0.0;
    }
    let mut n = (whole as usize).min(order.len());
    if fraction > 0.0 && n < order.len() {
        n += 1;
    } else {
        fraction = 1.0;
    }
    let n = n.max(1);
    order.truncate(n);
    let threshold = values[order[n - 1] as usize];
    Ok(Selection {
        threshold,
        cells: order,
        fraction,
    })
}

/// Disk-shaped window `B_δ(center)`; `radius = None` means the whole domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub center: Point,
    pub radius: Option<f64>,
}

impl Window {
    pub fn cells(&self, grid: &Grid) -> Vec<u32> {
        (0..grid.len() as u32)
            .filter(|&c| match self.radius {
                None => true,
                Some(r) => grid.cell_center(c as usize).dist(self.center) < r,
            })
            .collect()
    }
}

/// Half the smallest of the pairwise centre distances and the centre
/// distances to the boundary.
pub fn default_delta(domain: &DomainSpec, centers: &[Point]) -> f64 {
    let mut m = f64::INFINITY;
    for (i, c) in centers.iter().enumerate() {
        m = m.min(domain.boundary_distance(*c));
        for d in &centers[i + 1..] {
            m = m.min(c.dist(*d));
        }
    }
    0.5 * m
}

/// Rearrangement of `ψ`: `λ` on the top-area cells of each window.
pub fn turkington_step(
    psi: &ScalarField,
    windows: &[Vec<u32>],
    strengths: &[f64],
    lambda: f64,
) -> Result<(ScalarField, Vec<Selection>), PatchError> {
    let mut selections = Vec::with_capacity(windows.len());
    for (j, (w, &kappa)) in windows.iter().zip(strengths).enumerate() {
        let sel = threshold_for_area(psi, w, kappa / lambda).map_err(|e| match e {
            PatchError::EmptyWindow(_) => PatchError::EmptyWindow(j),
            PatchError::WindowTooSmall {
                needed, available, ..
            } => PatchError::WindowTooSmall {
                index: j,
                needed,
                available,
            },
            other => other,
        })?;
        selections.push(sel);
    }
    Ok((vorticity_of(psi.grid(), &selections, lambda), selections))
}

fn vorticity_of(grid: &Arc<Grid>, selections: &[Selection], lambda: f64) -> ScalarField {
    let mut w = ScalarField::zeros(grid.clone());
    let values = w.values_mut();
    for sel in selections {
        let last = sel.cells.len() - 1;
        for (n, &c) in sel.cells.iter().enumerate() {
            values[c as usize] = if n == last { lambda * sel.fraction } else { lambda };
        }
    }
    w
}

/// `E = (1/2)·Σ ω ψ h²`.
pub fn kinetic_energy(vorticity: &ScalarField, psi: &ScalarField) -> Result<f64, PatchError> {
    if !vorticity.grid().same_as(psi.grid()) {
        return Err(PatchError::GridMismatch);
    }
    Ok(0.5 * vorticity.integral_product(psi))
}

/// Starting vorticity for [`solve_patch`].
#[derive(Clone, Debug)]
pub enum Init {
    /// Each patch starts as the `κⱼ/λ` of area nearest its point.
    PointVortex(Vec<Point>),
    /// Rearrangement of the explicit approximate solution centred at the
    /// window centres.
    Ansatz,
    Vorticity(ScalarField),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatchSettings {
    pub max_iter: usize,
    /// Smallest accepted core radius in grid spacings.
    pub min_resolution: f64,
    /// Try whole-patch translations once the masks settle.
    pub relocate: bool,
    /// Use the whole domain as the window when there is a single vortex.
    pub global_single_window: bool,
}

impl Default for PatchSettings {
    fn default() -> Self {
        Self {
            max_iter: 500,
            min_resolution: 2.0,
            relocate: true,
            global_single_window: true,
        }
    }
}

/// One converged patch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    /// `κ̃_{λ,j}`: stream-function level on the patch edge.
    pub threshold: f64,
    /// Mask cells, ascending.
    pub cells: Vec<u32>,
    /// Area of the mask (whole cells).
    pub area: f64,
    /// Vorticity-weighted centroid.
    pub centroid: Point,
    /// Maximum point of `ψ` in the window (sub-cell refined).
    pub max_point: Point,
    /// `√(area/π)`.
    pub radius: f64,
    pub window: Window,
}

#[derive(Clone, Debug)]
pub struct PatchSolution {
    pub lambda: f64,
    pub lambda_bar: f64,
    pub kappa: Vec<f64>,
    pub psi: ScalarField,
    pub vorticity: ScalarField,
    pub patches: Vec<Patch>,
    pub iterations: usize,
    /// Cells that changed in the last rearrangement (0 at a fixed point).
    pub gap: usize,
    /// Energy of every accepted state.
    pub energy_history: Vec<f64>,
    pub relocations: usize,
}

impl PatchSolution {
    /// `u = 4πψ/ln λ`.
    pub fn u(&self) -> ScalarField {
        self.psi.scaled(4.0 * PI / self.lambda.ln())
    }

    pub fn energy(&self) -> f64 {
        *self.energy_history.last().unwrap_or(&0.0)
    }

    /// Scaled thresholds `κ_{λ,j} = 4πκ̃_{λ,j}/ln λ`.
    pub fn scaled_thresholds(&self) -> Vec<f64> {
        self.patches
            .iter()
            .map(|p| 4.0 * PI * p.threshold / self.lambda.ln())
            .collect()
    }

    pub fn summary(&self) -> SolutionSummary {
        SolutionSummary {
            lambda: self.lambda,
            iterations: self.iterations,
            relocations: self.relocations,
            energy: self.energy(),
            patches: self
                .patches
                .iter()
                .zip(&self.kappa)
                .map(|(p, &kappa)| PatchSummary {
                    kappa,
                    threshold: p.threshold,
                    area: p.area,
                    centroid: p.centroid,
                    max_point: p.max_point,
                    radius: p.radius,
                    cells: p.cells.len(),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchSummary {
    pub kappa: f64,
    pub threshold: f64,
    pub area: f64,
    pub centroid: Point,
    pub max_point: Point,
    pub radius: f64,
    pub cells: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionSummary {
    pub lambda: f64,
    pub iterations: usize,
    pub relocations: usize,
    pub energy: f64,
    pub patches: Vec<PatchSummary>,
}

fn masks_hash(selections: &[Selection]) -> u64 {
    let mut hasher = DefaultHasher::new();
    for s in selections {
        s.sorted_cells().hash(&mut hasher);
    }
    hasher.finish()
}

fn same_masks(a: &[Selection], b: &[Selection]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| x.sorted_cells() == y.sorted_cells())
}

fn mask_difference(a: &[Selection], b: &[Selection]) -> usize {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let xs = x.sorted_cells();
            let ys = y.sorted_cells();
            xs.iter().filter(|c| ys.binary_search(c).is_err()).count()
                + ys.iter().filter(|c| xs.binary_search(c).is_err()).count()
        })
        .sum()
}

fn windows_for(
    grid: &Grid,
    spec: &VortexSpec,
    settings: &PatchSettings,
) -> Vec<Window> {
    if spec.k() == 1 && settings.global_single_window {
        vec![Window {
            center: spec.centers[0],
            radius: None,
        }]
    } else {
        let _ = grid;
        spec.centers
            .iter()
            .map(|&c| Window {
                center: c,
                radius: Some(spec.delta),
            })
            .collect()
    }
}

/// Translates a selection by whole cells; `None` if a cell leaves the window.
fn shifted(
    grid: &Grid,
    sel: &Selection,
    window: &[u32],
    di: i64,
    dj: i64,
) -> Option<Selection> {
    let mut cells = Vec::with_capacity(sel.cells.len());
    for &c in &sel.cells {
        let (i, j) = grid.cell_ij(c as usize);
        let m = grid.cell_at(i + di, j + dj)? as u32;
        window.binary_search(&m).ok()?;
        cells.push(m);
    }
    Some(Selection {
        threshold: sel.threshold,
        cells,
        fraction: sel.fraction,
    })
}

struct State {
    selections: Vec<Selection>,
    vorticity: ScalarField,
    psi: ScalarField,
    energy: f64,
}

/// Solves the free-boundary problem by rearrangement from `init`.
pub fn solve_patch(
    solver: &PoissonSolver,
    spec: &VortexSpec,
    lambda: f64,
    init: &Init,
    settings: &PatchSettings,
) -> Result<PatchSolution, PatchError> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(PatchError::Lambda(lambda));
    }
    let grid = solver.grid().clone();
    let h = grid.h();
    let windows = windows_for(&grid, spec, settings);
    for (j, &kappa) in spec.strengths.iter().enumerate() {
        let s = (kappa / (PI * lambda)).sqrt();
        if s / h < settings.min_resolution {
            return Err(PatchError::UnderResolved {
                s,
                ratio: s / h,
                required: settings.min_resolution,
            });
        }
        if let Some(delta) = windows[j].radius {
            if s >= 0.25 * delta {
                return Err(PatchError::CoreTooLarge { index: j, s, delta });
            }
        }
    }
    let window_cells: Vec<Vec<u32>> = windows.iter().map(|w| w.cells(&grid)).collect();

    let (mut vorticity, mut selections) = match init {
        Init::PointVortex(points) => {
            let mut sels = Vec::with_capacity(points.len());
            for (j, p) in points.iter().enumerate() {
                let closeness = ScalarField::from_fn(grid.clone(), |y| -y.dist(*p));
                let (_, mut s) = turkington_step(
                    &closeness,
                    &window_cells[j..=j],
                    &spec.strengths[j..=j],
                    lambda,
                )
                .map_err(|e| match e {
                    PatchError::EmptyWindow(_) => PatchError::EmptyWindow(j),
                    other => other,
                })?;
                sels.append(&mut s);
            }
            (vorticity_of(&grid, &sels, lambda), sels)
        }
        Init::Ansatz => {
            let green = GridGreen::new(grid.clone());
            let params = solve_ansatz_params(&green, spec, lambda, &spec.strengths, &spec.centers)?;
            let u = build_ansatz(&green, &grid, &params)?;
            turkington_step(&u, &window_cells, &spec.strengths, lambda)?
        }
        Init::Vorticity(w) => {
            if !w.grid().same_as(&grid) {
                return Err(PatchError::GridMismatch);
            }
            let psi = solver.solve(w)?;
            turkington_step(&psi, &window_cells, &spec.strengths, lambda)?
        }
    };

    let mut psi = solver.solve(&vorticity)?;
    let mut energy = kinetic_energy(&vorticity, &psi)?;
    let mut history = vec![energy];
    let mut seen: VecDeque<u64> = VecDeque::new();
    seen.push_back(masks_hash(&selections));
    let mut iterations = 0;
    let mut relocations = 0;
    let mut reach = vec![1.0f64; spec.k()];
    let mut gap;
    loop {
        if iterations >= settings.max_iter {
            return Err(PatchError::NotConverged(iterations));
        }
        iterations += 1;
        let (next_w, next_sel) = turkington_step(&psi, &window_cells, &spec.strengths, lambda)?;
        gap = mask_difference(&selections, &next_sel);
        if same_masks(&selections, &next_sel) {
            selections = next_sel;
            if !settings.relocate {
                break;
            }
            let current = State {
                selections: selections.clone(),
                vorticity: vorticity.clone(),
                psi: psi.clone(),
                energy,
            };
            match relocate(solver, &grid, &window_cells, current, &mut reach, lambda)? {
                Some(moved) => {
                    relocations += 1;
                    selections = moved.selections;
                    vorticity = moved.vorticity;
                    psi = moved.psi;
                    energy = moved.energy;
                    history.push(energy);
                    seen.clear();
                    seen.push_back(masks_hash(&selections));
                    continue;
                }
                None => break,
            }
        }
        let hash = masks_hash(&next_sel);
        if let Some(pos) = seen.iter().rposition(|&x| x == hash) {
            let length = seen.len() - pos;
            return Err(PatchError::Cycle { length, iterations });
        }
        seen.push_back(hash);
        if seen.len() > 64 {
            seen.pop_front();
        }
        let (next_psi, _) = solver.solve_from(&next_w, &psi)?;
        energy = kinetic_energy(&next_w, &next_psi)?;
        history.push(energy);
        vorticity = next_w;
        selections = next_sel;
        psi = next_psi;
    }

    let patches = selections
        .iter()
        .zip(&windows)
        .zip(&window_cells)
        .map(|((sel, window), cells)| describe_patch(&psi, &vorticity, sel, window, cells))
        .collect();
    Ok(PatchSolution {
        lambda,
        lambda_bar: crate::ansatz::lambda_bar(lambda),
        kappa: spec.strengths.clone(),
        psi,
        vorticity,
        patches,
        iterations,
        gap,
        energy_history: history,
        relocations,
    })
}

/// Tries one whole-cell translation per patch along the force `Σω∇ψh²`;
/// returns the first that raises the energy.
fn relocate(
    solver: &PoissonSolver,
    grid: &Arc<Grid>,
    windows: &[Vec<u32>],
    state: State,
    reach: &mut [f64],
    lambda: f64,
) -> Result<Option<State>, PatchError> {
    let zero = |_: Point| 0.0;
    for j in 0..state.selections.len() {
        let sel = &state.selections[j];
        let mut force = Point::ORIGIN;
        for &c in &sel.cells {
            force += state.psi.gradient_at(c as usize, &zero) * state.vorticity.values()[c as usize];
        }
        let fnorm = force.norm();
        if !(fnorm > 0.0) {
            continue;
        }
        let dir = force * (1.0 / fnorm);
        loop {
            let step = dir * reach[j];
            let (di, dj) = (step.x.round() as i64, step.y.round() as i64);
            let (di, dj) = if di == 0 && dj == 0 {
                (dir.x.round() as i64, dir.y.round() as i64)
            } else {
                (di, dj)
            };
            let candidate = shifted(grid, sel, &windows[j], di, dj);
            let mut accepted = None;
            if let Some(moved) = candidate {
                let mut sels = state.selections.clone();
                sels[j] = moved;
                let w = vorticity_of(grid, &sels, lambda);
                let (psi, _) = solver.solve_from(&w, &state.psi)?;
                let e = kinetic_energy(&w, &psi)?;
                if e > state.energy + 1e-10 * state.energy.abs() {
                    accepted = Some(State {
                        selections: sels,
                        vorticity: w,
                        psi,
                        energy: e,
                    });
                }
            }
            match accepted {
                Some(s) => {
                    reach[j] = (2.0 * reach[j]).min(64.0);
                    return Ok(Some(s));
                }
                None if reach[j] > 1.0 => reach[j] = (0.5 * reach[j]).max(1.0),
                None => break,
            }
        }
    }
    Ok(None)
}

fn describe_patch(
    psi: &ScalarField,
    vorticity: &ScalarField,
    sel: &Selection,
    window: &Window,
    window_cells: &[u32],
) -> Patch {
    let grid = psi.grid();
    let h = grid.h();
    let mut cells = sel.cells.clone();
    cells.sort_unstable();
    let mut mass = 0.0;
    let mut moment = Point::ORIGIN;
    for &c in &cells {
        let w = vorticity.values()[c as usize];
        mass += w;
        moment += grid.cell_center(c as usize) * w;
    }
    let area = cells.len() as f64 * h * h;
    let best = window_cells
        .iter()
        .copied()
        .max_by(|&a, &b| {
            psi.values()[a as usize]
                .total_cmp(&psi.values()[b as usize])
                .then(b.cmp(&a))
        })
        .expect("nonempty window") as usize;
    Patch {
        threshold: sel.threshold,
        cells,
        area,
        centroid: moment * (1.0 / mass),
        max_point: refine_max(psi, best),
        radius: (area / PI).sqrt(),
        window: window.clone(),
    }
}

/// One Newton step on the local quadratic model of `ψ` at `cell`, clipped
/// to the cell.
fn refine_max(psi: &ScalarField, cell: usize) -> Point {
    let grid = psi.grid();
    let h = grid.h();
    let p = grid.cell_center(cell);
    let (i, j) = grid.cell_ij(cell);
    let v = |a: i64, b: i64| grid.cell_at(i + a, j + b).map(|c| psi.values()[c]);
    let (Some(c), Some(e), Some(w), Some(n), Some(s), Some(ne), Some(nw), Some(se), Some(sw)) = (
        v(0, 0),
        v(1, 0),
        v(-1, 0),
        v(0, 1),
        v(0, -1),
        v(1, 1),
        v(-1, 1),
        v(1, -1),
        v(-1, -1),
    ) else {
        return p;
    };
    let gx = (e - w) / (2.0 * h);
    let gy = (n - s) / (2.0 * h);
    let hxx = (e - 2.0 * c + w) / (h * h);
    let hyy = (n - 2.0 * c + s) / (h * h);
    let hxy = (ne - nw - se + sw) / (4.0 * h * h);
    let det = hxx * hyy - hxy * hxy;
    if !(det > 0.0) || !(hxx < 0.0) {
        return p;
    }
    let dx = -(hyy * gx - hxy * gy) / det;
    let dy = -(hxx * gy - hxy * gx) / det;
    let clip = |t: f64| t.clamp(-0.5 * h, 0.5 * h);
    p + Point::new(clip(dx), clip(dy))
}

/// Number of 4-connected components of a mask and the number of holes
/// (bounded 8-connected components of its complement).
pub fn mask_topology(grid: &Grid, cells: &[u32]) -> (usize, usize) {
    if cells.is_empty() {
        return (0, 0);
    }
    let ij: Vec<(i64, i64)> = cells.iter().map(|&c| grid.cell_ij(c as usize)).collect();
    let imin = ij.iter().map(|p| p.0).min().unwrap() - 1;
    let imax = ij.iter().map(|p| p.0).max().unwrap() + 1;
    let jmin = ij.iter().map(|p| p.1).min().unwrap() - 1;
    let jmax = ij.iter().map(|p| p.1).max().unwrap() + 1;
    let w = (imax - imin + 1) as usize;
    let hgt = (jmax - jmin + 1) as usize;
    let mut inside = vec![false; w * hgt];
    for (i, j) in &ij {
        inside[(*j - jmin) as usize * w + (*i - imin) as usize] = true;
    }
    let count = |want: bool, diagonal: bool| -> usize {
        let mut seen = vec![false; w * hgt];
        let mut comps = 0;
        for start in 0..w * hgt {
            if inside[start] != want || seen[start] {
                continue;
            }
            comps += 1;
            seen[start] = true;
            let mut stack = vec![start];
            while let Some(q) = stack.pop() {
                let (x, y) = ((q % w) as i64, (q / w) as i64);
                for dy in -1..=1i64 {
                    for dx in -1..=1i64 {
                        if (dx == 0 && dy == 0) || (!diagonal && dx != 0 && dy != 0) {
                            continue;
                        }
                        let (nx, ny) = (x + dx, y + dy);
                        if nx < 0 || ny < 0 || nx >= w as i64 || ny >= hgt as i64 {
                            continue;
                        }
                        let r = ny as usize * w + nx as usize;
                        if inside[r] == want && !seen[r] {
                            seen[r] = true;
                            stack.push(r);
                        }
                    }
                }
            }
        }
        comps
    };
    (count(true, false), count(false, true) - 1)
}

/// Converged solutions grouped by centroid (within `5h`) and threshold
/// (within 1% relative plus one cell of edge slope, `κh/(2πr)`).
#[derive(Clone, Debug)]
pub struct Cluster {
    pub representative: PatchSolution,
    /// Indices of the starts that landed here.
    pub members: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct Survey {
    pub clusters: Vec<Cluster>,
    /// `(start index, error)` for every start that failed.
    pub failures: Vec<(usize, PatchError)>,
}

fn same_solution(a: &PatchSolution, b: &PatchSolution, h: f64) -> bool {
    let mut used = vec![false; b.patches.len()];
    a.patches.iter().enumerate().all(|(i, p)| {
        let hit = (0..b.patches.len()).find(|&j| {
            !used[j]
                && a.kappa[i] == b.kappa[j]
                && p.centroid.dist(b.patches[j].centroid) < 5.0 * h
                && (p.threshold - b.patches[j].threshold).abs()
                    < 0.01 * p.threshold.abs().max(b.patches[j].threshold.abs())
                        + a.kappa[i] * h / (2.0 * PI * p.radius)
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

/// Runs [`solve_patch`] from point-vortex starts in parallel and clusters
/// the converged results. Windows for `k ≥ 2` are centred at each start
/// with the default radius.
pub fn multistart_survey(
    solver: &PoissonSolver,
    strengths: &[f64],
    lambda: f64,
    starts: &[Vec<Point>],
    settings: &PatchSettings,
) -> Survey {
    let domain = solver.grid().domain().clone();
    let results: Vec<Result<PatchSolution, PatchError>> = starts
        .par_iter()
        .map(|start| {
            let delta = default_delta(&domain, start);
            let spec = VortexSpec::new(&domain, strengths.to_vec(), start.clone(), delta)
                .map_err(|_| PatchError::EmptyWindow(0))?;
            solve_patch(solver, &spec, lambda, &Init::PointVortex(start.clone()), settings)
        })
        .collect();
    let h = solver.grid().h();
    let mut clusters: Vec<Cluster> = Vec::new();
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(sol) => match clusters
                .iter_mut()
                .find(|c| same_solution(&c.representative, &sol, h))
            {
                Some(c) => c.members.push(i),
                None => clusters.push(Cluster {
                    representative: sol,
                    members: vec![i],
                }),
            },
            Err(e) => failures.push((i, e)),
        }
    }
    Survey { clusters, failures }
}

/// Cells of `grid` where a mask cell has a 4-neighbour outside the mask.
pub fn mask_boundary(grid: &Grid, cells: &[u32]) -> Vec<u32> {
    cells
        .iter()
        .copied()
        .filter(|&c| {
            grid.neighbors(c as usize)
                .iter()
                .any(|&n| n == NONE || cells.binary_search(&n).is_err())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::RadialPatch;
    use rand::{Rng, SeedableRng};

    fn disk_grid(h: f64) -> Arc<Grid> {
        Arc::new(Grid::new(&DomainSpec::unit_disk(), h).unwrap())
    }

    #[test]
    fn threshold_matches_sort_oracle() {
        let grid = Arc::new(Grid::new(&DomainSpec::rectangle(1.0, 1.0).unwrap(), 1.0 / 8.0).unwrap());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let field = ScalarField::new(grid.clone(), (0..grid.len()).map(|_| rng.gen()).collect());
        let window: Vec<u32> = (0..grid.len() as u32).collect();
        let h2 = grid.h() * grid.h();
        let sel = threshold_for_area(&field, &window, 5.0 * h2).unwrap();
        let mut vals: Vec<f64> = field.values().to_vec();
        vals.sort_by(|a, b| b.total_cmp(a));
        assert_eq!(sel.cells.len(), 5);
        assert_eq!(sel.threshold, vals[4]);
        let full = threshold_for_area(&field, &window, window.len() as f64 * h2).unwrap();
        assert_eq!(full.threshold, field.min());
        assert!(matches!(
            threshold_for_area(&field, &window, 2.0 * window.len() as f64 * h2),
            Err(PatchError::WindowTooSmall { .. })
        ));
        assert!(matches!(threshold_for_area(&field, &[], h2), Err(PatchError::EmptyWindow(_))));
        let part = threshold_for_area(&field, &window, 5.25 * h2).unwrap();
        assert_eq!(part.cells.len(), 6);
        assert!((part.fraction - 0.25).abs() < 1e-12);
        assert!((part.filled_area(grid.h()) - 5.25 * h2).abs() < 1e-15);
    }

    #[test]
    fn step_on_radial_field_is_centred() {
        let grid = disk_grid(1.0 / 64.0);
        let psi = ScalarField::from_fn(grid.clone(), |p| 1.0 - p.norm_sq());
        let window: Vec<u32> = (0..grid.len() as u32).collect();
        let (w, sels) = turkington_step(&psi, &[window], &[1.0], 100.0).unwrap();
        assert!((w.integral() - 1.0).abs() < 1e-12);
        let mut m = Point::ORIGIN;
        for &c in &sels[0].cells {
            m += grid.cell_center(c as usize) * w.values()[c as usize];
        }
        let centroid = m * (1.0 / w.values().iter().sum::<f64>());
        assert!(centroid.norm() < grid.h());
    }

    #[test]
    fn energy_is_bilinear() {
        let grid = disk_grid(1.0 / 32.0);
        let solver = PoissonSolver::new(grid.clone());
        let w = ScalarField::from_fn(grid.clone(), |p| if p.norm() < 0.3 { 2.0 } else { 0.0 });
        let psi = solver.solve(&w).unwrap();
        let e = kinetic_energy(&w, &psi).unwrap();
        let psi2 = solver.solve(&w.scaled(2.0)).unwrap();
        let e2 = kinetic_energy(&w.scaled(2.0), &psi2).unwrap();
        assert!((e2 - 4.0 * e).abs() < 1e-9 * e);
        let zero = ScalarField::zeros(grid);
        assert_eq!(kinetic_energy(&zero, &zero).unwrap(), 0.0);
    }

    #[test]
    fn topology_counts() {
        let grid = Arc::new(Grid::new(&DomainSpec::rectangle(2.0, 2.0).unwrap(), 0.25).unwrap());
        let ring: Vec<u32> = (0..grid.len() as u32)
            .filter(|&c| {
                let p = grid.cell_center(c as usize);
                p.x.abs().max(p.y.abs()) > 0.2 && p.x.abs().max(p.y.abs()) < 0.6
            })
            .collect();
        assert_eq!(mask_topology(&grid, &ring), (1, 1));
        let mut block: Vec<u32> = (0..grid.len() as u32)
            .filter(|&c| grid.cell_center(c as usize).norm() < 0.3)
            .collect();
        block.sort_unstable();
        assert_eq!(mask_topology(&grid, &block), (1, 0));
        assert_eq!(mask_boundary(&grid, &block).len(), 4);
    }

    #[test]
    fn disk_patch_from_off_centre_start() {
        let grid = disk_grid(1.0 / 128.0);
        let solver = PoissonSolver::new(grid.clone());
        let d = grid.domain().clone();
        let start = Point::new(0.3, 0.2);
        let spec = VortexSpec::new(&d, vec![1.0], vec![start], 0.3).unwrap();
        let lambda = 300.0;
        let sol = solve_patch(&solver, &spec, lambda, &Init::PointVortex(vec![start]), &PatchSettings::default()).unwrap();
        let p = &sol.patches[0];
        assert!(p.centroid.norm() < 2.0 * grid.h(), "{:?}", p.centroid);
        assert!((sol.vorticity.integral() - 1.0).abs() < 1e-10);
        for pair in sol.energy_history.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-9 * pair[0].abs());
        }
        assert_eq!(mask_topology(&grid, &p.cells), (1, 0));
        let exact = RadialPatch::new(lambda, 1.0);
        assert!((p.threshold / exact.threshold() - 1.0).abs() < 0.05);
    }

    #[test]
    fn under_resolution_is_rejected() {
        let grid = disk_grid(1.0 / 32.0);
        let solver = PoissonSolver::new(grid.clone());
        let spec = VortexSpec::new(grid.domain(), vec![1.0], vec![Point::ORIGIN], 0.5).unwrap();
        let r = solve_patch(&solver, &spec, 1e5, &Init::PointVortex(vec![Point::ORIGIN]), &PatchSettings::default());
        assert!(matches!(r, Err(PatchError::UnderResolved { .. })));
    }
}
