//! Experiment configuration.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use vortex_core::elliptic::SolverSettings;
use vortex_core::kirchhoff_routh::NewtonSettings;
use vortex_core::patch_solver::PatchSettings;
use vortex_core::{DomainSpec, Point};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AutoCenters {
    AutoFromCriticalPoints,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Centers {
    Auto(AutoCenters),
    Explicit(Vec<Point>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AutoDelta {
    Auto,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Delta {
    Auto(AutoDelta),
    Value(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VortexConfig {
    pub strengths: Vec<f64>,
    #[serde(default = "auto_centers")]
    pub centers: Centers,
    #[serde(default = "auto_delta")]
    pub delta: Delta,
}

fn auto_centers() -> Centers {
    Centers::Auto(AutoCenters::AutoFromCriticalPoints)
}

fn auto_delta() -> Delta {
    Delta::Auto(AutoDelta::Auto)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    PointVortex,
    Ansatz,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurveyConfig {
    /// Number of scattered starts when `points` is absent.
    pub starts: usize,
    /// Minimum distance of scattered starts from the boundary and from each other.
    pub margin: f64,
    /// Explicit start tuples (one point per vortex).
    pub points: Option<Vec<Vec<Point>>>,
}

impl Default for SurveyConfig {
    fn default() -> Self {
        Self {
            starts: 8,
            margin: 0.2,
            points: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CriticalConfig {
    /// Newton starts for the Kirchhoff–Routh search.
    pub starts: usize,
    pub margin: f64,
    /// Grid spacing of the Green function solves on non-disk domains.
    pub green_h: f64,
}

impl Default for CriticalConfig {
    fn default() -> Self {
        Self {
            starts: 16,
            margin: 0.1,
            green_h: 1.0 / 64.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobinConfig {
    /// Samples per axis of the bounding box.
    pub samples: usize,
}

impl Default for RobinConfig {
    fn default() -> Self {
        Self { samples: 33 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub newton: NewtonSettings,
    pub patch: PatchSettings,
    pub solver: SolverSettings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainSpec,
    pub h: f64,
    pub vortices: VortexConfig,
    pub lambdas: Vec<f64>,
    #[serde(default = "default_init")]
    pub init: InitMode,
    #[serde(default)]
    pub survey: SurveyConfig,
    #[serde(default)]
    pub critical: CriticalConfig,
    #[serde(default)]
    pub robin: RobinConfig,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_init() -> InitMode {
    InitMode::PointVortex
}

fn default_output() -> PathBuf {
    PathBuf::from("vortexlab-out")
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn k(&self) -> usize {
        self.vortices.strengths.len()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(self.h > 0.0 && self.h.is_finite()) {
            return bad(format!("h must be positive, got {}", self.h));
        }
        if self.lambdas.is_empty() {
            return bad("lambda list is empty".into());
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(**l > 1.0 && l.is_finite())) {
            return bad(format!("lambda must be finite and greater than 1, got {l}"));
        }
        if self.vortices.strengths.is_empty() {
            return bad("at least one vortex strength is required".into());
        }
        if let Some(k) = self.vortices.strengths.iter().find(|k| !(**k > 0.0 && k.is_finite())) {
            return bad(format!("vortex strengths must be positive, got {k}"));
        }
        if let Centers::Explicit(c) = &self.vortices.centers {
            if c.len() != self.k() {
                return bad(format!("{} centers for {} strengths", c.len(), self.k()));
            }
            if let Some(p) = c.iter().find(|p| !self.domain.contains(**p)) {
                return bad(format!("center ({}, {}) lies outside the domain", p.x, p.y));
            }
        }
        if let Delta::Value(d) = self.vortices.delta {
            if !(d > 0.0 && d.is_finite()) {
                return bad(format!("delta must be positive, got {d}"));
            }
        }
        if let Some(points) = &self.survey.points {
            if let Some(s) = points.iter().find(|s| s.len() != self.k()) {
                return bad(format!("survey start has {} points, expected {}", s.len(), self.k()));
            }
        }
        if !(self.critical.green_h > 0.0) {
            return bad("critical.green_h must be positive".into());
        }
        if self.robin.samples < 2 {
            return bad("robin.samples must be at least 2".into());
        }
        Ok(())
    }
}
