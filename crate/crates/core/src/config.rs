//! JSON run configuration: parsing with field paths, defaults, semantic checks.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conformal::{ArcKind, ExteriorMap};
use crate::fields::{Bump, BumpVorticity, CutoffProfile, FieldError, FlowData};
use crate::lab::{reference_test_fields, ProbePatch, Rung, StudyConfig, Tolerances};
use crate::solver::{AdvectionScheme, RunSettings, SolverConfig, WallClosure};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    /// Malformed JSON or a schema violation, located by field path and line.
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    /// A well-formed value that violates a module precondition.
    #[error("{field}: {message}")]
    Semantic { field: String, message: String },
}

fn semantic(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Semantic {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpConfig {
    pub center: [f64; 2],
    pub radius: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n_sigma: usize,
    pub n_theta: usize,
    pub r_max: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n_sigma: 128,
            n_theta: 256,
            r_max: 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_dt: f64,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig {
            dt: 2e-3,
            t_end: 0.5,
            snapshot_dt: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchConfig {
    /// `[[x1_min, x1_max], [x2_min, x2_max]]`.
    pub bounds: [[f64; 2]; 2],
    pub delta: f64,
    pub n: usize,
}

impl From<ProbePatch> for PatchConfig {
    fn from(p: ProbePatch) -> Self {
        PatchConfig {
            bounds: [p.x1, p.x2],
            delta: p.delta,
            n: p.n,
        }
    }
}

impl From<PatchConfig> for ProbePatch {
    fn from(p: PatchConfig) -> Self {
        ProbePatch {
            x1: p.bounds[0],
            x2: p.bounds[1],
            delta: p.delta,
            n: p.n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudySection {
    /// Defaults to the second ε of the list.
    pub reference_epsilon: Option<f64>,
    /// Defaults to the grid and `dt`, then twice and four times finer.
    pub ladder: Option<Vec<Rung>>,
    pub t_conservation: f64,
    pub t_uniqueness: f64,
    pub cfl_safety: f64,
    pub wall: WallClosure,
    pub advection: AdvectionScheme,
    pub diffusion_tolerance: f64,
    pub far_patch: PatchConfig,
}

impl Default for StudySection {
    fn default() -> Self {
        let solver = SolverConfig::default();
        StudySection {
            reference_epsilon: None,
            ladder: None,
            t_conservation: 1.0,
            t_uniqueness: 0.1,
            cfl_safety: 0.8,
            wall: solver.wall,
            advection: solver.advection,
            diffusion_tolerance: solver.diffusion_tolerance,
            far_patch: ProbePatch::far().into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub curve: ArcKind,
    #[serde(default)]
    pub omega0: Vec<BumpConfig>,
    pub gamma: f64,
    pub nu: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_eps")]
    pub eps_list: Vec<f64>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default = "default_patch")]
    pub patch: PatchConfig,
    #[serde(default = "default_output")]
    pub output: String,
    #[serde(default)]
    pub study: StudySection,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_lambda() -> f64 {
    4.0
}

fn default_eps() -> Vec<f64> {
    vec![0.2, 0.1, 0.05, 0.025]
}

fn default_patch() -> PatchConfig {
    ProbePatch::near().into()
}

fn default_output() -> String {
    "thinflow-out".into()
}

/// Parses and validates a JSON configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Schema {
        path: match e.path().to_string().as_str() {
            "." => "<root>".to_string(),
            p => p.to_string(),
        },
        message: e.inner().to_string(),
    })?;
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    /// The opposite-sign bump pair above the plate with `γ = 1`, `ν = 0.01`.
    pub fn reference() -> Self {
        RunConfig {
            curve: ArcKind::Segment,
            omega0: vec![
                BumpConfig {
                    center: [-0.5, 0.6],
                    radius: 0.3,
                    amplitude: 2.0,
                },
                BumpConfig {
                    center: [0.5, 0.6],
                    radius: 0.3,
                    amplitude: -2.0,
                },
            ],
            gamma: 1.0,
            nu: 0.01,
            lambda: default_lambda(),
            eps_list: default_eps(),
            grid: GridConfig::default(),
            time: TimeConfig::default(),
            patch: default_patch(),
            output: default_output(),
            study: StudySection::default(),
            tolerances: Tolerances::default(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn base(&self) -> ExteriorMap {
        ExteriorMap { kind: self.curve }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let pos = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(semantic(field, format!("must be positive and finite, got {v}")))
            }
        };
        pos("nu", self.nu)?;
        if !self.gamma.is_finite() {
            return Err(semantic("gamma", "must be finite"));
        }
        CutoffProfile::new(self.lambda).map_err(|e| semantic("lambda", e.to_string()))?;
        if self.eps_list.is_empty() {
            return Err(semantic("eps_list", "needs at least one value"));
        }
        for (i, &e) in self.eps_list.iter().enumerate() {
            pos(&format!("eps_list[{i}]"), e)?;
            if i > 0 && e >= self.eps_list[i - 1] {
                return Err(semantic(
                    format!("eps_list[{i}]"),
                    format!("list must be strictly decreasing, {e} follows {}", self.eps_list[i - 1]),
                ));
            }
        }
        if self.grid.n_sigma < 8 || self.grid.n_theta < 8 {
            return Err(semantic("grid", format!("need at least 8x8 nodes, got {}x{}", self.grid.n_sigma, self.grid.n_theta)));
        }
        pos("grid.r_max", self.grid.r_max)?;
        pos("time.dt", self.time.dt)?;
        pos("time.t_end", self.time.t_end)?;
        pos("time.snapshot_dt", self.time.snapshot_dt)?;
        self.solver_config(self.eps_list[0])
            .steps_per_snapshot()
            .map_err(|e| semantic("time", e.to_string()))?;
        let limit = 0.5 * self.grid.r_max;
        for (i, b) in self.omega0.iter().enumerate() {
            let reach = Complex64::new(b.center[0], b.center[1]).norm() + b.radius;
            if reach >= limit {
                return Err(semantic(format!("omega0[{i}]"), format!("support reaches |x| = {reach:.4}, beyond r_max/2 = {limit}")));
            }
        }
        self.flow().map_err(|e| match e {
            FieldError::Support { index, message } => semantic(format!("omega0[{index}]"), message),
            other => semantic("omega0", other.to_string()),
        })?;
        let validate_patch = |field: &str, p: PatchConfig| {
            ProbePatch::from(p).validate().map_err(|e| semantic(field, e.to_string()))
        };
        validate_patch("patch", self.patch)?;
        validate_patch("study.far_patch", self.study.far_patch)?;
        if let Some(e) = self.study.reference_epsilon {
            pos("study.reference_epsilon", e)?;
        }
        if !(self.study.cfl_safety > 0.0 && self.study.cfl_safety <= 1.0) {
            return Err(semantic("study.cfl_safety", format!("must lie in (0, 1], got {}", self.study.cfl_safety)));
        }
        pos("study.t_conservation", self.study.t_conservation)?;
        pos("study.t_uniqueness", self.study.t_uniqueness)?;
        pos("study.diffusion_tolerance", self.study.diffusion_tolerance)?;
        Ok(())
    }

    /// Bump supports are checked against the curve and against the thickest obstacle.
    pub fn flow(&self) -> Result<FlowData, FieldError> {
        let bumps = self
            .omega0
            .iter()
            .map(|b| Bump::new(Complex64::new(b.center[0], b.center[1]), b.radius, b.amplitude))
            .collect();
        let omega = BumpVorticity::new(bumps, self.base(), self.eps_list.first().copied().unwrap_or(0.0))?;
        FlowData::new(self.gamma, self.nu, omega)
    }

    pub fn settings(&self) -> RunSettings {
        RunSettings {
            profile: CutoffProfile { lambda: self.lambda },
            ..RunSettings::default()
        }
    }

    pub fn solver_config(&self, _epsilon: f64) -> SolverConfig {
        SolverConfig {
            nu: self.nu,
            dt: self.time.dt,
            t_end: self.time.t_end,
            snapshot_dt: self.time.snapshot_dt,
            advection: self.study.advection,
            wall: self.study.wall,
            diffusion_tolerance: self.study.diffusion_tolerance,
            ..SolverConfig::default()
        }
    }

    pub fn ladder(&self) -> Vec<Rung> {
        self.study.ladder.clone().unwrap_or_else(|| {
            [1usize, 2, 4]
                .iter()
                .map(|&m| Rung {
                    n_sigma: self.grid.n_sigma * m,
                    n_theta: self.grid.n_theta * m,
                    dt: self.time.dt / m as f64,
                })
                .collect()
        })
    }

    pub fn study_config(&self) -> Result<StudyConfig, ConfigError> {
        let flow = self.flow().map_err(|e| semantic("omega0", e.to_string()))?;
        let reference_epsilon = self
            .study
            .reference_epsilon
            .unwrap_or_else(|| self.eps_list.get(1).copied().unwrap_or(self.eps_list[0]));
        let study = StudyConfig {
            eps: self.eps_list.clone(),
            ladder: self.ladder(),
            reference_epsilon,
            t_study: self.time.t_end,
            t_conservation: self.study.t_conservation,
            t_uniqueness: self.study.t_uniqueness,
            snapshot_dt: self.time.snapshot_dt,
            r_max: self.grid.r_max,
            patch: self.patch.into(),
            far_patch: self.study.far_patch.into(),
            flow,
            base: self.base(),
            solver: self.solver_config(reference_epsilon),
            settings: self.settings(),
            test_fields: reference_test_fields(),
            cfl_safety: self.study.cfl_safety,
        };
        study.validate().map_err(|e| semantic("study", e.to_string()))?;
        Ok(study)
    }
}
