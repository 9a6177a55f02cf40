//! Pipeline stages and the run report.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use vortex_core::ansatz::{solve_ansatz_params, AnsatzParams};
use vortex_core::diagnostics::{
    assemble_report, circularity, diagnose, scaling_laws, DiagnosticsReport, DiagnosticsRow,
    ScalingReport, RESOLVED,
};
use vortex_core::elliptic::{
    DiskOracle, GreenError, GreenProvider, GridGreen, Mat2, PoissonSolver, ScalarField,
};
use vortex_core::kirchhoff_routh::{find_critical_points, CriticalPoint, NewtonSettings, VortexSpec};
use vortex_core::patch_solver::{
    default_delta, multistart_survey, solve_patch, Init, PatchSolution, SolutionSummary,
};
use vortex_core::{DomainSpec, Grid, Point};

use crate::config::{Centers, Delta, ExperimentConfig, InitMode};
use crate::field_io::encode_field;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Robin,
    KrCritical,
    Solve,
    Survey,
    Sweep,
    Export,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("cannot write {path}: {message}")]
    Output { path: PathBuf, message: String },
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(_) => 3,
            RunError::Output { .. } => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Config(_) => "config",
            RunError::Numerical(_) => "numerical",
            RunError::Output { .. } => "output",
        }
    }
}

/// Closed forms on the unit disk, grid solves elsewhere.
pub enum Provider {
    Disk(DiskOracle),
    Grid(GridGreen),
}

impl Provider {
    pub fn for_domain(domain: &DomainSpec, green_h: f64) -> Result<Self, RunError> {
        if domain.is_unit_disk() {
            return Ok(Provider::Disk(DiskOracle::new()));
        }
        let grid = Grid::new(domain, green_h).map_err(|e| RunError::Config(e.to_string()))?;
        Ok(Provider::Grid(GridGreen::new(Arc::new(grid))))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Provider::Disk(_) => "closed-form-disk",
            Provider::Grid(_) => "grid",
        }
    }

    fn spacing(&self) -> Option<f64> {
        match self {
            Provider::Disk(_) => None,
            Provider::Grid(g) => Some(g.grid().h()),
        }
    }
}

macro_rules! delegate {
    ($self:ident, $g:ident => $e:expr) => {
        match $self {
            Provider::Disk($g) => $e,
            Provider::Grid($g) => $e,
        }
    };
}

impl GreenProvider for Provider {
    fn domain(&self) -> &DomainSpec {
        delegate!(self, g => g.domain())
    }
    fn fd_step(&self) -> f64 {
        delegate!(self, g => g.fd_step())
    }
    fn admissible(&self, x: Point) -> bool {
        delegate!(self, g => g.admissible(x))
    }
    fn regular(&self, x: Point, y: Point) -> Result<f64, GreenError> {
        delegate!(self, g => g.regular(x, y))
    }
    fn regular_grad_x(&self, x: Point, y: Point) -> Result<Point, GreenError> {
        delegate!(self, g => g.regular_grad_x(x, y))
    }
    fn regular_hess_x(&self, x: Point, y: Point) -> Result<Mat2, GreenError> {
        delegate!(self, g => g.regular_hess_x(x, y))
    }
    fn green(&self, x: Point, y: Point) -> Result<f64, GreenError> {
        delegate!(self, g => g.green(x, y))
    }
    fn green_grad_x(&self, x: Point, y: Point) -> Result<Point, GreenError> {
        delegate!(self, g => g.green_grad_x(x, y))
    }
    fn robin(&self, x: Point) -> Result<f64, GreenError> {
        delegate!(self, g => g.robin(x))
    }
    fn robin_grad(&self, x: Point) -> Result<Point, GreenError> {
        delegate!(self, g => g.robin_grad(x))
    }
    fn robin_hess(&self, x: Point) -> Result<Mat2, GreenError> {
        delegate!(self, g => g.robin_hess(x))
    }
    fn regular_field(&self, grid: &Arc<Grid>, y: Point) -> Result<ScalarField, GreenError> {
        delegate!(self, g => g.regular_field(grid, y))
    }
}

/// Writes every output file and remembers its name for the report.
pub struct Emitter {
    dir: PathBuf,
    files: Vec<String>,
}

impl Emitter {
    pub fn new(dir: &Path) -> Result<Self, RunError> {
        std::fs::create_dir_all(dir).map_err(|e| RunError::Output {
            path: dir.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn fail(&self, name: &str, e: impl ToString) -> RunError {
        RunError::Output {
            path: self.dir.join(name),
            message: e.to_string(),
        }
    }

    pub fn bytes(&mut self, name: &str, data: &[u8]) -> Result<(), RunError> {
        std::fs::write(self.dir.join(name), data).map_err(|e| self.fail(name, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn csv<T: Serialize>(&mut self, name: &str, rows: &[T], header: &[&str]) -> Result<(), RunError> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(rows.is_empty())
            .from_writer(Vec::new());
        if rows.is_empty() {
            w.write_record(header).map_err(|e| self.fail(name, e))?;
        }
        for r in rows {
            w.serialize(r).map_err(|e| self.fail(name, e))?;
        }
        let data = w.into_inner().map_err(|e| self.fail(name, e))?;
        let mut data = data;
        if !rows.is_empty() {
            let mut with_header = csv::Writer::from_writer(Vec::new());
            with_header.write_record(header).map_err(|e| self.fail(name, e))?;
            let mut head = with_header.into_inner().map_err(|e| self.fail(name, e))?;
            head.extend_from_slice(&data);
            data = head;
        }
        self.bytes(name, &data)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), RunError> {
        let mut data = serde_json::to_vec_pretty(value).map_err(|e| self.fail(name, e))?;
        data.push(b'\n');
        self.bytes(name, &data)
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RobinRow {
    pub x: f64,
    pub y: f64,
    pub phi: f64,
    pub grad_x: f64,
    pub grad_y: f64,
}
const ROBIN_HEADER: &[&str] = &["x", "y", "phi", "grad_x", "grad_y"];

#[derive(Clone, Debug, Serialize)]
pub struct SolutionRow {
    pub lambda: f64,
    pub status: &'static str,
    pub patch: Option<usize>,
    pub kappa: Option<f64>,
    pub threshold: Option<f64>,
    pub scaled_threshold: Option<f64>,
    pub area: Option<f64>,
    pub radius: Option<f64>,
    pub centroid_x: Option<f64>,
    pub centroid_y: Option<f64>,
    pub max_x: Option<f64>,
    pub max_y: Option<f64>,
    pub iterations: Option<usize>,
    pub relocations: Option<usize>,
    pub energy: Option<f64>,
    pub error: Option<String>,
}
const SOLUTION_HEADER: &[&str] = &[
    "lambda", "status", "patch", "kappa", "threshold", "scaled_threshold", "area", "radius",
    "centroid_x", "centroid_y", "max_x", "max_y", "iterations", "relocations", "energy", "error",
];

#[derive(Clone, Debug, Serialize)]
pub struct BoundaryRow {
    pub lambda: f64,
    pub patch: usize,
    pub angle: f64,
    pub x: f64,
    pub y: f64,
}
const BOUNDARY_HEADER: &[&str] = &["lambda", "patch", "angle", "x", "y"];

const DIAGNOSTICS_HEADER: &[&str] = &[
    "lambda", "patch", "centroid_x", "centroid_y", "critical_distance", "radius",
    "predicted_radius", "threshold", "predicted_threshold", "circularity", "pohozaev_radius",
    "pohozaev_norm", "ansatz_error", "ansatz_scale", "resolution", "resolved",
];

#[derive(Clone, Debug, Serialize)]
pub struct ScalingCsvRow {
    pub patch: usize,
    pub lambda: f64,
    pub radius: f64,
    pub predicted_radius: f64,
    pub radius_ratio: f64,
    pub threshold: f64,
    pub predicted_threshold: f64,
    pub threshold_ratio: f64,
}
const SCALING_HEADER: &[&str] = &[
    "patch", "lambda", "radius", "predicted_radius", "radius_ratio", "threshold",
    "predicted_threshold", "threshold_ratio",
];

#[derive(Clone, Debug, Serialize)]
pub struct SurveyRow {
    pub lambda: f64,
    pub cluster: usize,
    pub size: usize,
    pub members: String,
    pub patch: usize,
    pub centroid_x: f64,
    pub centroid_y: f64,
    pub threshold: f64,
    pub energy: f64,
}
const SURVEY_HEADER: &[&str] = &[
    "lambda", "cluster", "size", "members", "patch", "centroid_x", "centroid_y", "threshold", "energy",
];

const CRITICAL_FIXED: &[&str] = &[
    "id", "value", "grad_norm", "iterations", "converged", "nondegenerate", "morse_index",
    "min_eigenvalue", "max_eigenvalue",
];

#[derive(Clone, Debug, Serialize)]
pub struct EntryReport {
    pub lambda: f64,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solution: Option<SolutionSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ansatz: Option<AnsatzParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clusters: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub start_failures: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub files: Vec<String>,
}

impl EntryReport {
    fn ok(lambda: f64) -> Self {
        Self {
            lambda,
            status: "ok",
            error: None,
            solution: None,
            ansatz: None,
            clusters: None,
            start_failures: Vec::new(),
            files: Vec::new(),
        }
    }

    fn failed(lambda: f64, error: String) -> Self {
        Self {
            status: "failed",
            error: Some(error),
            ..Self::ok(lambda)
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Resolved {
    pub green_provider: &'static str,
    pub centers: Option<Vec<Point>>,
    pub delta: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: Command,
    pub status: &'static str,
    pub config: ExperimentConfig,
    pub resolved: Resolved,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub critical_points: Vec<CriticalPoint>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub entries: Vec<EntryReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<DiagnosticsSummary>,
    pub notes: Vec<String>,
    pub files: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DiagnosticsSummary {
    pub ansatz_exponent: Option<f64>,
    pub location_exponent: Option<f64>,
    pub scaling: Vec<ScalingReport>,
    /// λ values whose rows are under-resolved (`s/h` below the flag level).
    pub flagged: Vec<f64>,
}

pub const REPORT: &str = "report.json";

/// Uniform scatter of `count` start tuples inside `domain`, each point at
/// least `margin` from the boundary and from the other points of its tuple.
pub fn scatter_starts(domain: &DomainSpec, k: usize, count: usize, margin: f64, seed: u64) -> Vec<Vec<Point>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = domain.bounding_box();
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count && attempts < 100_000 * count.max(1) {
        attempts += 1;
        let mut tuple = Vec::with_capacity(k);
        while tuple.len() < k && attempts < 100_000 * count.max(1) {
            attempts += 1;
            let p = Point::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y));
            if domain.contains(p)
                && domain.boundary_distance(p) > margin
                && tuple.iter().all(|q: &Point| q.dist(p) > margin)
            {
                tuple.push(p);
            }
        }
        if tuple.len() == k {
            out.push(tuple);
        }
    }
    out
}

struct Context {
    config: ExperimentConfig,
    provider: Provider,
    newton: NewtonSettings,
}

impl Context {
    fn new(config: ExperimentConfig) -> Result<Self, RunError> {
        let provider = Provider::for_domain(&config.domain, config.critical.green_h)?;
        let mut newton = config.tolerances.newton.clone();
        if let Some(h) = provider.spacing() {
            newton.min_separation = newton.min_separation.max(4.0 * h);
        }
        Ok(Self {
            config,
            provider,
            newton,
        })
    }

    fn critical_points(&self) -> Vec<CriticalPoint> {
        let c = &self.config;
        let starts = scatter_starts(&c.domain, c.k(), c.critical.starts, c.critical.margin, c.seed);
        let mut found = find_critical_points(&self.provider, &c.vortices.strengths, &starts, &self.newton);
        found.sort_by(|a, b| {
            b.converged
                .cmp(&a.converged)
                .then(b.nondegenerate.cmp(&a.nondegenerate))
                .then(a.value.total_cmp(&b.value))
        });
        found
    }

    fn centers(&self, critical: &[CriticalPoint]) -> Result<Vec<Point>, RunError> {
        match &self.config.vortices.centers {
            Centers::Explicit(c) => Ok(c.clone()),
            Centers::Auto(_) => critical
                .iter()
                .find(|c| c.converged && c.nondegenerate)
                .map(|c| c.locations.clone())
                .ok_or_else(|| {
                    RunError::Numerical(
                        "no converged nondegenerate critical point of the Kirchhoff-Routh function to centre the windows on"
                            .into(),
                    )
                }),
        }
    }

    fn needs_critical(&self, command: Command) -> bool {
        command == Command::KrCritical
            || command == Command::Sweep
            || (matches!(self.config.vortices.centers, Centers::Auto(_))
                && matches!(command, Command::Solve | Command::Export))
    }

    fn solver(&self) -> Result<PoissonSolver, RunError> {
        let grid = Grid::new(&self.config.domain, self.config.h).map_err(|e| RunError::Config(e.to_string()))?;
        Ok(PoissonSolver::with_settings(Arc::new(grid), self.config.tolerances.solver))
    }

    fn spec(&self, centers: &[Point]) -> Result<VortexSpec, RunError> {
        let delta = match self.config.vortices.delta {
            Delta::Value(d) => d,
            Delta::Auto(_) => default_delta(&self.config.domain, centers),
        };
        VortexSpec::new(&self.config.domain, self.config.vortices.strengths.clone(), centers.to_vec(), delta)
            .map_err(|e| RunError::Config(e.to_string()))
    }

    fn solve_all(&self, solver: &PoissonSolver, spec: &VortexSpec) -> Vec<Result<PatchSolution, String>> {
        let init = match self.config.init {
            InitMode::PointVortex => Init::PointVortex(spec.centers.clone()),
            InitMode::Ansatz => Init::Ansatz,
        };
        self.config
            .lambdas
            .par_iter()
            .map(|&l| solve_patch(solver, spec, l, &init, &self.config.tolerances.patch).map_err(|e| e.to_string()))
            .collect()
    }
}

fn solution_rows(lambda: f64, result: &Result<PatchSolution, String>) -> Vec<SolutionRow> {
    match result {
        Err(e) => vec![SolutionRow {
            lambda,
            status: "failed",
            patch: None,
            kappa: None,
            threshold: None,
            scaled_threshold: None,
            area: None,
            radius: None,
            centroid_x: None,
            centroid_y: None,
            max_x: None,
            max_y: None,
            iterations: None,
            relocations: None,
            energy: None,
            error: Some(e.clone()),
        }],
        Ok(sol) => {
            let scaled = sol.scaled_thresholds();
            sol.patches
                .iter()
                .enumerate()
                .map(|(j, p)| SolutionRow {
                    lambda,
                    status: "ok",
                    patch: Some(j),
                    kappa: Some(sol.kappa[j]),
                    threshold: Some(p.threshold),
                    scaled_threshold: Some(scaled[j]),
                    area: Some(p.area),
                    radius: Some(p.radius),
                    centroid_x: Some(p.centroid.x),
                    centroid_y: Some(p.centroid.y),
                    max_x: Some(p.max_point.x),
                    max_y: Some(p.max_point.y),
                    iterations: Some(sol.iterations),
                    relocations: Some(sol.relocations),
                    energy: Some(sol.energy()),
                    error: None,
                })
                .collect()
        }
    }
}

fn boundary_rows(sol: &PatchSolution) -> Vec<BoundaryRow> {
    let mut rows = Vec::new();
    for (j, p) in sol.patches.iter().enumerate() {
        if let Ok(c) = circularity(sol, j) {
            let mut pts: Vec<(f64, Point)> = c
                .boundary
                .iter()
                .map(|q| {
                    let d = *q - p.centroid;
                    (d.y.atan2(d.x), *q)
                })
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            rows.extend(pts.into_iter().map(|(angle, q)| BoundaryRow {
                lambda: sol.lambda,
                patch: j,
                angle,
                x: q.x,
                y: q.y,
            }));
        }
    }
    rows
}

fn critical_csv(emit: &mut Emitter, critical: &[CriticalPoint], k: usize) -> Result<(), RunError> {
    let mut header: Vec<String> = CRITICAL_FIXED.iter().map(|s| s.to_string()).collect();
    for j in 1..=k {
        header.push(format!("x{j}"));
        header.push(format!("y{j}"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| RunError::Output {
        path: PathBuf::from("critical_points.csv"),
        message: e.to_string(),
    };
    w.write_record(&header).map_err(fail)?;
    for (i, c) in critical.iter().enumerate() {
        let mut rec = vec![
            i.to_string(),
            c.value.to_string(),
            c.grad_norm.to_string(),
            c.iterations.to_string(),
            c.converged.to_string(),
            c.nondegenerate.to_string(),
            c.index().to_string(),
            c.eigenvalues.first().copied().unwrap_or(f64::NAN).to_string(),
            c.eigenvalues.last().copied().unwrap_or(f64::NAN).to_string(),
        ];
        for p in &c.locations {
            rec.push(p.x.to_string());
            rec.push(p.y.to_string());
        }
        w.write_record(&rec).map_err(fail)?;
    }
    let data = w.into_inner().map_err(|e| RunError::Output {
        path: PathBuf::from("critical_points.csv"),
        message: e.to_string(),
    })?;
    emit.bytes("critical_points.csv", &data)
}

fn robin_rows(provider: &Provider, samples: usize) -> Vec<RobinRow> {
    let (lo, hi) = provider.domain().bounding_box();
    let pts: Vec<Point> = (0..samples)
        .flat_map(|b| {
            (0..samples).map(move |a| {
                Point::new(
                    lo.x + (hi.x - lo.x) * a as f64 / (samples - 1) as f64,
                    lo.y + (hi.y - lo.y) * b as f64 / (samples - 1) as f64,
                )
            })
        })
        .collect();
    let rows: Vec<Option<RobinRow>> = pts
        .par_iter()
        .map(|&p| {
            if !provider.domain().contains(p) || !provider.admissible(p) {
                return None;
            }
            let phi = provider.robin(p).ok()?;
            let g = provider.robin_grad(p).ok()?;
            Some(RobinRow {
                x: p.x,
                y: p.y,
                phi,
                grad_x: g.x,
                grad_y: g.y,
            })
        })
        .collect();
    rows.into_iter().flatten().collect()
}

fn label(lambda: f64) -> String {
    format!("{lambda}").replace('.', "p")
}

/// Runs one subcommand. Returns the report on success or partial success;
/// the report is also written to `report.json` in the output directory.
pub fn run_experiment(config: ExperimentConfig, command: Command) -> Result<RunReport, RunError> {
    config.validate().map_err(|e| RunError::Config(e.to_string()))?;
    let ctx = Context::new(config)?;
    let mut emit = Emitter::new(&ctx.config.output_dir)?;
    let mut report = RunReport {
        tool: "vortexlab",
        version: env!("CARGO_PKG_VERSION"),
        command,
        status: "ok",
        config: ctx.config.clone(),
        resolved: Resolved {
            green_provider: ctx.provider.name(),
            centers: None,
            delta: None,
        },
        critical_points: Vec::new(),
        entries: Vec::new(),
        diagnostics: None,
        notes: Vec::new(),
        files: Vec::new(),
    };

    let critical = if ctx.needs_critical(command) {
        ctx.critical_points()
    } else {
        Vec::new()
    };
    if command == Command::KrCritical {
        critical_csv(&mut emit, &critical, ctx.config.k())?;
    }
    report.critical_points = critical.clone();

    match command {
        Command::Robin => {
            let rows = robin_rows(&ctx.provider, ctx.config.robin.samples);
            emit.csv("robin.csv", &rows, ROBIN_HEADER)?;
        }
        Command::KrCritical => {}
        Command::Solve | Command::Sweep | Command::Export => {
            let centers = ctx.centers(&critical)?;
            let spec = ctx.spec(&centers)?;
            report.resolved.centers = Some(spec.centers.clone());
            report.resolved.delta = Some(spec.delta);
            let solver = ctx.solver()?;
            let results = ctx.solve_all(&solver, &spec);
            let mut solution_csv = Vec::new();
            let mut boundary_csv = Vec::new();
            let mut diag_rows: Vec<DiagnosticsRow> = Vec::new();
            let mut solved = Vec::new();
            for (&lambda, result) in ctx.config.lambdas.iter().zip(&results) {
                solution_csv.extend(solution_rows(lambda, result));
                let mut entry = match result {
                    Err(e) => {
                        log::warn!("lambda = {lambda}: {e}");
                        EntryReport::failed(lambda, e.clone())
                    }
                    Ok(sol) => {
                        let mut entry = EntryReport::ok(lambda);
                        entry.solution = Some(sol.summary());
                        boundary_csv.extend(boundary_rows(sol));
                        entry
                    }
                };
                if let Ok(sol) = result {
                    if command == Command::Export {
                        for (name, field) in [("psi", &sol.psi), ("vorticity", &sol.vorticity)] {
                            let file = format!("{name}_lambda{}.bin", label(lambda));
                            emit.bytes(&file, &encode_field(field, name))?;
                            entry.files.push(file);
                        }
                    }
                    if command == Command::Sweep {
                        let anchors: Vec<Point> = sol.patches.iter().map(|p| p.centroid).collect();
                        let params =
                            solve_ansatz_params(&ctx.provider, &spec, lambda, &sol.scaled_thresholds(), &anchors);
                        let rows = match &params {
                            Ok(p) => diagnose(sol, &critical, Some(p), &ctx.provider),
                            Err(e) => {
                                entry.error = Some(format!("ansatz: {e}"));
                                diagnose(sol, &critical, None, &ctx.provider)
                            }
                        };
                        entry.ansatz = params.ok();
                        diag_rows.extend(rows);
                        solved.push(sol);
                    }
                }
                report.entries.push(entry);
            }
            emit.csv("solutions.csv", &solution_csv, SOLUTION_HEADER)?;
            emit.csv("boundary.csv", &boundary_csv, BOUNDARY_HEADER)?;
            if command == Command::Sweep {
                let diag: DiagnosticsReport = assemble_report(diag_rows);
                let flagged: Vec<f64> = diag.rows.iter().filter(|r| !r.resolved).map(|r| r.lambda).collect();
                let owned: Vec<PatchSolution> = solved.into_iter().cloned().collect();
                let mut scaling = Vec::new();
                let mut scaling_csv = Vec::new();
                for j in 0..ctx.config.k() {
                    if let Ok(s) = scaling_laws(&owned, j, RESOLVED) {
                        scaling_csv.extend(s.rows.iter().map(|r| ScalingCsvRow {
                            patch: j,
                            lambda: r.lambda,
                            radius: r.radius,
                            predicted_radius: r.predicted_radius,
                            radius_ratio: r.radius_ratio,
                            threshold: r.threshold,
                            predicted_threshold: r.predicted_threshold,
                            threshold_ratio: r.threshold_ratio,
                        }));
                        scaling.push(s);
                    }
                }
                emit.csv("diagnostics.csv", &diag.rows, DIAGNOSTICS_HEADER)?;
                emit.csv("scaling.csv", &scaling_csv, SCALING_HEADER)?;
                report.diagnostics = Some(DiagnosticsSummary {
                    ansatz_exponent: diag.ansatz_exponent,
                    location_exponent: diag.location_exponent,
                    scaling,
                    flagged,
                });
                report.notes.push(
                    "Limit configurations on the boundary or with coincident points are excluded by construction (disjoint interior windows) and are not tested."
                        .into(),
                );
            }
        }
        Command::Survey => {
            let c = &ctx.config;
            let starts = match &c.survey.points {
                Some(p) => p.clone(),
                None => scatter_starts(&c.domain, c.k(), c.survey.starts, c.survey.margin, c.seed),
            };
            let solver = ctx.solver()?;
            let mut rows = Vec::new();
            for &lambda in &c.lambdas {
                let survey = multistart_survey(&solver, &c.vortices.strengths, lambda, &starts, &c.tolerances.patch);
                let mut entry = if survey.clusters.is_empty() {
                    EntryReport::failed(lambda, "every start failed".into())
                } else {
                    EntryReport::ok(lambda)
                };
                entry.clusters = Some(survey.clusters.len());
                entry.start_failures = survey
                    .failures
                    .iter()
                    .map(|(i, e)| format!("start {i}: {e}"))
                    .collect();
                for (ci, cl) in survey.clusters.iter().enumerate() {
                    let members = cl.members.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(";");
                    for (j, p) in cl.representative.patches.iter().enumerate() {
                        rows.push(SurveyRow {
                            lambda,
                            cluster: ci,
                            size: cl.members.len(),
                            members: members.clone(),
                            patch: j,
                            centroid_x: p.centroid.x,
                            centroid_y: p.centroid.y,
                            threshold: p.threshold,
                            energy: cl.representative.energy(),
                        });
                    }
                }
                report.entries.push(entry);
            }
            emit.csv("survey.csv", &rows, SURVEY_HEADER)?;
        }
    }

    if !report.entries.is_empty() && report.entries.iter().all(|e| e.status == "failed") {
        report.status = "failed";
    } else if report.entries.iter().any(|e| e.status == "failed") {
        report.status = "partial";
    }
    let mut files = emit.files().to_vec();
    files.push(REPORT.to_string());
    report.files = files;
    emit.json(REPORT, &report)?;
    if report.status == "failed" {
        return Err(RunError::Numerical("every entry failed".into()));
    }
    Ok(report)
}
