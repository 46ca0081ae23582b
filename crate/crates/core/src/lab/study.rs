use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::atomic::AtomicBool;
use std::time::Instant;

use super::{strictly_decreasing, time_integrated_distance, LabError, ProbePatch};
use crate::conformal::{ComplexPoint, ExteriorMap};
use crate::fields::{Bump, BumpVorticity, FlowData};
use crate::solver::{
    build_grid, simulate, weak_residual, GridSpec, MappedGrid, RunRecord, RunSettings, Solver, SolverConfig, SolverError, TestField,
    WallClosure,
};

/// One grid/time-step pair of a refinement ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rung {
    pub n_sigma: usize,
    pub n_theta: usize,
    /// Largest step; halved until it sits below `cfl_safety` times the initial CFL limit.
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    /// Strictly decreasing, at least three entries.
    pub eps: Vec<f64>,
    /// At least two rungs, coarsest first.
    pub ladder: Vec<Rung>,
    /// ε used for the single-ε probes (conservation, weak residual, uniqueness).
    pub reference_epsilon: f64,
    pub t_study: f64,
    /// Length of the conservation run.
    pub t_conservation: f64,
    /// Window of the uniqueness probe.
    pub t_uniqueness: f64,
    pub snapshot_dt: f64,
    pub r_max: f64,
    pub patch: ProbePatch,
    pub far_patch: ProbePatch,
    pub flow: FlowData,
    pub base: ExteriorMap,
    /// Template for every run; `dt`, `t_end` and `wall` are set per run.
    pub solver: SolverConfig,
    pub settings: RunSettings,
    pub test_fields: Vec<TestField>,
    pub cfl_safety: f64,
}

pub const NEAR_GROUP: &str = "patch";
pub const FAR_GROUP: &str = "far";

impl StudyConfig {
    /// The reference pair study: opposite bumps above the plate, `γ = 1`, `ν = 0.01`.
    pub fn reference() -> Result<Self, LabError> {
        let base = ExteriorMap::segment();
        let omega = BumpVorticity::new(
            vec![
                Bump::new(Complex64::new(-0.5, 0.6), 0.3, 2.0),
                Bump::new(Complex64::new(0.5, 0.6), 0.3, -2.0),
            ],
            base,
            0.2,
        )?;
        Ok(StudyConfig {
            eps: vec![0.2, 0.1, 0.05, 0.025],
            ladder: vec![
                Rung { n_sigma: 128, n_theta: 256, dt: 2e-3 },
                Rung { n_sigma: 256, n_theta: 512, dt: 1e-3 },
                Rung { n_sigma: 512, n_theta: 1024, dt: 5e-4 },
            ],
            reference_epsilon: 0.1,
            t_study: 0.5,
            t_conservation: 1.0,
            t_uniqueness: 0.1,
            snapshot_dt: 0.01,
            r_max: 100.0,
            patch: ProbePatch::near(),
            far_patch: ProbePatch::far(),
            flow: FlowData::new(1.0, 0.01, omega)?,
            base,
            solver: SolverConfig {
                dt: 2e-3,
                ..SolverConfig::default()
            },
            settings: RunSettings::default(),
            test_fields: reference_test_fields(),
            cfl_safety: 0.8,
        })
    }

    pub fn validate(&self) -> Result<(), LabError> {
        if self.eps.len() < 3 || !strictly_decreasing(&self.eps) || self.eps.iter().any(|&e| !(e > 0.0)) {
            return Err(LabError::Invalid(format!("eps must hold >= 3 strictly decreasing positive values, got {:?}", self.eps)));
        }
        if self.ladder.len() < 2 {
            return Err(LabError::Invalid("the refinement ladder needs at least two rungs".into()));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(LabError::Invalid(format!("cfl_safety must lie in (0, 1], got {}", self.cfl_safety)));
        }
        if !(self.t_study > 0.0 && self.t_conservation > 0.0 && self.t_uniqueness > 0.0) {
            return Err(LabError::Invalid("study times must be positive".into()));
        }
        self.patch.validate()?;
        self.far_patch.validate()?;
        let arc = self.base.arc();
        for f in &self.test_fields {
            f.validate(&arc, self.patch.delta, self.t_study)?;
        }
        Ok(())
    }

    /// Probe groups recorded by every run.
    pub fn groups(&self) -> Result<Vec<(String, Vec<ComplexPoint>)>, LabError> {
        let arc = self.base.arc();
        let mut out = vec![
            (NEAR_GROUP.to_string(), self.patch.nodes(&arc)?),
            (FAR_GROUP.to_string(), self.far_patch.nodes(&arc)?),
        ];
        for f in &self.test_fields {
            out.push((f.name.clone(), f.points()));
        }
        Ok(out)
    }
}

/// Three test fields around the bumps and below the plate, active on `[0.05, 0.45]`.
pub fn reference_test_fields() -> Vec<TestField> {
    vec![
        TestField::new("left", Complex64::new(-0.6, 0.8), 0.4, 10, 0.05, 0.45),
        TestField::new("right", Complex64::new(0.6, 0.8), 0.4, 10, 0.05, 0.45),
        TestField::new("below", Complex64::new(0.0, -0.9), 0.5, 10, 0.05, 0.45),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunKey {
    pub epsilon: f64,
    pub rung: usize,
    pub wall: WallClosure,
}

impl RunKey {
    pub fn new(epsilon: f64, rung: usize, wall: WallClosure) -> Self {
        RunKey { epsilon, rung, wall }
    }

    pub fn id(&self) -> String {
        format!("eps={}/rung={}/{:?}", self.epsilon, self.rung, self.wall).to_lowercase()
    }
}

/// One finished (or failed) run of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub key: RunKey,
    pub dt: f64,
    pub t_end: f64,
    pub seconds: f64,
    pub record: Option<RunRecord>,
    pub error: Option<String>,
}

/// Runs keyed by [`RunKey::id`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunBank {
    pub runs: BTreeMap<String, RunEntry>,
}

impl RunBank {
    pub fn record(&self, key: &RunKey) -> Result<&RunRecord, LabError> {
        let entry = self.runs.get(&key.id()).ok_or_else(|| LabError::MissingRun(key.id()))?;
        match (&entry.record, &entry.error) {
            (Some(r), None) if r.complete => Ok(r),
            (_, Some(e)) => Err(LabError::RunFailed(format!("{}: {e}", key.id()))),
            _ => Err(LabError::RunFailed(format!("{}: incomplete", key.id()))),
        }
    }

    /// Keys not yet present with at least `t_end` of history.
    fn missing(&self, plan: &[(RunKey, f64)]) -> Vec<(RunKey, f64)> {
        let mut want: BTreeMap<String, (RunKey, f64)> = BTreeMap::new();
        for &(k, t) in plan {
            let e = want.entry(k.id()).or_insert((k, t));
            e.1 = e.1.max(t);
        }
        want.into_values()
            .filter(|(k, t)| !self.runs.get(&k.id()).is_some_and(|e| e.t_end >= *t - 1e-12))
            .collect()
    }

    /// Runs every planned key that is not already here, in parallel.
    pub fn execute(&mut self, study: &StudyConfig, plan: &[(RunKey, f64)], stop: Option<&AtomicBool>) -> Result<(), LabError> {
        let groups = study.groups()?;
        let todo = self.missing(plan);
        let done: Vec<RunEntry> = todo
            .par_iter()
            .map(|&(key, t_end)| run_entry(study, &groups, key, t_end, stop))
            .collect();
        for e in done {
            self.runs.insert(e.key.id(), e);
        }
        Ok(())
    }
}

fn run_entry(study: &StudyConfig, groups: &[(String, Vec<ComplexPoint>)], key: RunKey, t_end: f64, stop: Option<&AtomicBool>) -> RunEntry {
    let start = Instant::now();
    let mut entry = RunEntry {
        key,
        dt: f64::NAN,
        t_end,
        seconds: 0.0,
        record: None,
        error: None,
    };
    match run_key(study, groups, key, t_end, stop) {
        Ok((dt, rec)) => {
            entry.dt = dt;
            entry.record = Some(rec);
        }
        Err((dt, msg, partial)) => {
            entry.dt = dt;
            entry.error = Some(msg);
            entry.record = partial;
        }
    }
    entry.seconds = start.elapsed().as_secs_f64();
    log::info!("run {} finished in {:.1} s (dt = {:e})", key.id(), entry.seconds, entry.dt);
    entry
}

type RunResult = Result<(f64, RunRecord), (f64, String, Option<RunRecord>)>;

fn run_key(study: &StudyConfig, groups: &[(String, Vec<ComplexPoint>)], key: RunKey, t_end: f64, stop: Option<&AtomicBool>) -> RunResult {
    let rung = *study
        .ladder
        .get(key.rung)
        .ok_or((f64::NAN, format!("no rung {}", key.rung), None))?;
    let spec = GridSpec {
        epsilon: key.epsilon,
        n_sigma: rung.n_sigma,
        n_theta: rung.n_theta,
        r_max: study.r_max,
    };
    let err = |dt: f64| move |e: crate::solver::SolverError| (dt, e.to_string(), None);
    let grid = build_grid(spec).map_err(err(rung.dt))?;
    let mut config = SolverConfig {
        dt: rung.dt,
        t_end,
        snapshot_dt: study.snapshot_dt,
        wall: key.wall,
        nu: study.flow.nu,
        ..study.solver
    };
    config.dt = safe_dt(&grid, config, &study.flow, study.cfl_safety).map_err(err(config.dt))?;
    // a CFL abort restarts the run at half the step
    let mut retries = 0;
    loop {
        let mut solver = Solver::new(grid.clone(), config).map_err(err(config.dt))?;
        match simulate(&mut solver, &study.flow, groups, &study.settings, stop) {
            Ok(r) => return Ok((config.dt, r)),
            Err(f) if matches!(f.error, SolverError::Cfl { .. }) && retries < CFL_RETRIES => {
                log::info!("{}: {}; restarting at dt = {:e}", key.id(), f.error, 0.5 * config.dt);
                config.dt *= 0.5;
                retries += 1;
            }
            Err(f) => return Err((config.dt, f.error.to_string(), Some(f.partial))),
        }
    }
}

/// Restarts at half the step allowed after a CFL abort.
pub const CFL_RETRIES: usize = 2;

/// `config.dt` halved until it sits below `safety` times the CFL limit of the initial state.
pub fn safe_dt(grid: &MappedGrid, config: SolverConfig, flow: &FlowData, safety: f64) -> Result<f64, SolverError> {
    let mut probe = Solver::new(grid.clone(), config)?;
    let state = probe.init(flow)?;
    let limit = probe.cfl_limit(&state);
    let mut dt = config.dt;
    while dt > safety * limit {
        dt *= 0.5;
    }
    Ok(dt)
}

fn near_far(study: &StudyConfig, a: &RunRecord, b: &RunRecord, t_end: f64, stride: usize) -> Result<(f64, f64), LabError> {
    let series = |r: &RunRecord, g: &str| -> Result<Vec<(f64, Vec<ComplexPoint>)>, LabError> {
        Ok(r.group_series(g)?
            .into_iter()
            .step_by(stride)
            .map(|(t, u)| (t, u.to_vec()))
            .collect())
    };
    let near = time_integrated_distance(&study.patch, &series(a, NEAR_GROUP)?, &series(b, NEAR_GROUP)?, t_end)?;
    let far = time_integrated_distance(&study.far_patch, &series(a, FAR_GROUP)?, &series(b, FAR_GROUP)?, t_end)?;
    Ok((near, far))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDistance {
    pub eps_a: f64,
    pub eps_b: f64,
    /// Time-integrated L² distance on the near patch.
    pub near: f64,
    pub far: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConvergenceTable {
    pub rung: Rung,
    pub t_end: f64,
    pub pairs: Vec<PairDistance>,
    /// `d(ε_{i+1}, ε_{i+2}) / d(ε_i, ε_{i+1})`.
    pub ratios: Vec<f64>,
    pub strictly_decreasing: bool,
    /// Smallest `near / far` over the pairs.
    pub locality: f64,
    /// Verdict recomputed with every second snapshot.
    pub strictly_decreasing_coarse_cadence: bool,
    pub missing: Vec<String>,
}

/// Plan for the flow-convergence study on one rung.
pub fn flow_convergence_plan(study: &StudyConfig, eps: &[f64], rung: usize) -> Vec<(RunKey, f64)> {
    eps.iter()
        .map(|&e| (RunKey::new(e, rung, study.solver.wall), study.t_study))
        .collect()
}

/// Pairwise distances between successive ε at a fixed rung.
pub fn flow_convergence(study: &StudyConfig, bank: &RunBank, eps: &[f64], rung: usize) -> Result<FlowConvergenceTable, LabError> {
    let rung_spec = *study.ladder.get(rung).ok_or_else(|| LabError::Invalid(format!("no rung {rung}")))?;
    let mut pairs = Vec::new();
    let mut coarse = Vec::new();
    let mut missing = Vec::new();
    for w in eps.windows(2) {
        let ka = RunKey::new(w[0], rung, study.solver.wall);
        let kb = RunKey::new(w[1], rung, study.solver.wall);
        match (bank.record(&ka), bank.record(&kb)) {
            (Ok(a), Ok(b)) => {
                let (near, far) = near_far(study, a, b, study.t_study, 1)?;
                pairs.push(PairDistance {
                    eps_a: w[0],
                    eps_b: w[1],
                    near,
                    far,
                });
                coarse.push(near_far(study, a, b, study.t_study, 2)?.0);
            }
            (ra, rb) => {
                for r in [ra.err(), rb.err()].into_iter().flatten() {
                    missing.push(r.to_string());
                }
            }
        }
    }
    let near: Vec<f64> = pairs.iter().map(|p| p.near).collect();
    Ok(FlowConvergenceTable {
        rung: rung_spec,
        t_end: study.t_study,
        ratios: near.windows(2).map(|w| w[1] / w[0]).collect(),
        strictly_decreasing: missing.is_empty() && near.len() + 1 == eps.len() && strictly_decreasing(&near),
        locality: pairs.iter().map(|p| p.near / p.far).fold(f64::INFINITY, f64::min),
        strictly_decreasing_coarse_cadence: missing.is_empty() && strictly_decreasing(&coarse),
        pairs,
        missing,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessTable {
    pub epsilon: f64,
    pub t_end: f64,
    /// Rungs 0 and 1 against rung 2.
    pub coarse_to_reference: f64,
    pub fine_to_reference: f64,
    pub coarse_to_fine: f64,
    pub refinement_factor: f64,
    /// Thom against Jensen at rung 1.
    pub closure_distance: f64,
    /// `fine_to_reference`, the refinement error at rung 1.
    pub closure_scale: f64,
    pub decreasing: bool,
    pub closure_within_scale: bool,
}

pub fn uniqueness_plan(study: &StudyConfig, epsilon: f64) -> Vec<(RunKey, f64)> {
    let t = study.t_uniqueness;
    vec![
        (RunKey::new(epsilon, 0, WallClosure::Thom), t),
        (RunKey::new(epsilon, 1, WallClosure::Thom), t),
        (RunKey::new(epsilon, 2, WallClosure::Thom), t),
        (RunKey::new(epsilon, 1, WallClosure::Jensen), t),
    ]
}

/// Distances between discretizations of one ε-problem; needs three rungs.
pub fn uniqueness_probe(study: &StudyConfig, bank: &RunBank, epsilon: f64, min_factor: f64) -> Result<UniquenessTable, LabError> {
    if study.ladder.len() < 3 {
        return Err(LabError::Invalid("the uniqueness probe needs three rungs".into()));
    }
    let t = study.t_uniqueness;
    let r0 = bank.record(&RunKey::new(epsilon, 0, WallClosure::Thom))?;
    let r1 = bank.record(&RunKey::new(epsilon, 1, WallClosure::Thom))?;
    let r2 = bank.record(&RunKey::new(epsilon, 2, WallClosure::Thom))?;
    let j1 = bank.record(&RunKey::new(epsilon, 1, WallClosure::Jensen))?;
    let (c, _) = near_far(study, r0, r2, t, 1)?;
    let (f, _) = near_far(study, r1, r2, t, 1)?;
    let (cf, _) = near_far(study, r0, r1, t, 1)?;
    let (cl, _) = near_far(study, r1, j1, t, 1)?;
    Ok(UniquenessTable {
        epsilon,
        t_end: t,
        coarse_to_reference: c,
        fine_to_reference: f,
        coarse_to_fine: cf,
        refinement_factor: c / f,
        closure_distance: cl,
        closure_scale: f,
        decreasing: c / f >= min_factor,
        closure_within_scale: cl <= f,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakRow {
    pub name: String,
    pub coarse: f64,
    pub fine: f64,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakTable {
    pub epsilon: f64,
    pub rows: Vec<WeakRow>,
    pub min_factor: f64,
}

pub fn weak_plan(study: &StudyConfig, epsilon: f64) -> Vec<(RunKey, f64)> {
    (0..2)
        .map(|r| (RunKey::new(epsilon, r, study.solver.wall), study.t_study))
        .collect()
}

/// Weak-form residuals of each test field on rungs 0 and 1.
pub fn weak_refinement(study: &StudyConfig, bank: &RunBank, epsilon: f64) -> Result<WeakTable, LabError> {
    let a = bank.record(&RunKey::new(epsilon, 0, study.solver.wall))?;
    let b = bank.record(&RunKey::new(epsilon, 1, study.solver.wall))?;
    let rows = study
        .test_fields
        .iter()
        .map(|f| {
            let (coarse, fine) = (weak_residual(a, f)?, weak_residual(b, f)?);
            Ok(WeakRow {
                name: f.name.clone(),
                coarse,
                fine,
                factor: coarse / fine,
            })
        })
        .collect::<Result<Vec<_>, LabError>>()?;
    Ok(WeakTable {
        epsilon,
        min_factor: rows.iter().map(|r| r.factor).fold(f64::INFINITY, f64::min),
        rows,
    })
}

/// `‖W‖_{L⁴} / (‖W‖^{1/2}‖∇W‖^{1/2})` at every recorded time.
pub fn ladyzhenskaya_ratios(run: &RunRecord) -> Vec<(f64, f64)> {
    run.diagnostics
        .iter()
        .map(|d| (d.t, d.l4_fourth.powf(0.25) / (d.energy.powf(0.25) * d.grad_energy.powf(0.25))))
        .collect()
}
