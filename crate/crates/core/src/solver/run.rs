use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::atomic::{AtomicBool, Ordering};

use super::sample::stream_gradients;
use super::{
    Diagnostics, EnergyMonitor, ProbeSampler, RunRecord, Snapshot, Solver, SolverError, SolverState,
};
use crate::conformal::ComplexPoint;
use crate::fields::{CutoffProfile, FlowData};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub profile: CutoffProfile,
    /// `C₁` of the energy envelope.
    pub c1: f64,
    /// `C = (1 + margin)‖W(0)‖²`.
    pub margin: f64,
    /// Trapezoid points on the far circle `|x| = R_max/2`.
    pub far_points: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            profile: CutoffProfile { lambda: 4.0 },
            c1: 2.0,
            margin: 0.01,
            far_points: 512,
        }
    }
}

/// A run that stopped on an error, with everything recorded up to that point.
#[derive(Debug, Clone)]
pub struct RunFailure {
    pub error: SolverError,
    pub partial: RunRecord,
}

struct Recorder {
    probes: ProbeSampler,
    far: ProbeSampler,
    far_points: Vec<ComplexPoint>,
    monitor: EnergyMonitor,
}

impl Recorder {
    fn circulation(&self, velocities: &[ComplexPoint]) -> f64 {
        let n = self.far_points.len() as f64;
        // dz = i z dφ on the circle
        velocities
            .iter()
            .zip(&self.far_points)
            .map(|(u, z)| (u.conj() * Complex64::new(0.0, 1.0) * z).re)
            .sum::<f64>()
            * 2.0
            * PI
            / n
    }

    fn diagnostics(&mut self, solver: &Solver, state: &SolverState) -> Diagnostics {
        let e = self.monitor.record(state, &solver.grid);
        let (ps, pt) = stream_gradients(&solver.grid, &state.psi);
        let far = self.far.sample_gradients(solver.grid.n_theta(), &ps, &pt);
        Diagnostics {
            t: state.t,
            energy: e.energy,
            grad_energy: e.grad_energy,
            l4_fourth: e.l4_fourth,
            beta: state.beta,
            circ_far: self.circulation(&far),
            stokes_defect: state.stokes_defect(&solver.grid),
            envelope_lhs: e.envelope_lhs,
            envelope_rhs: e.envelope_rhs,
            envelope_ok: e.envelope_ok,
        }
    }
}

/// Runs from `u₀^ε` to `t_end`, sampling the probe groups every `snapshot_dt`.
///
/// Setting `stop` ends the run early with `complete = false`.
pub fn simulate(
    solver: &mut Solver,
    flow: &FlowData,
    groups: &[(String, Vec<ComplexPoint>)],
    settings: &RunSettings,
    stop: Option<&AtomicBool>,
) -> Result<RunRecord, RunFailure> {
    let config = solver.config;
    let mut record = RunRecord::new(solver.grid.spec, config, flow.alpha(), groups);
    let fail = |error: SolverError, partial: &RunRecord| RunFailure {
        error,
        partial: partial.clone(),
    };
    if (config.nu - flow.nu).abs() > 1e-15 * flow.nu {
        return Err(fail(
            SolverError::Config(format!("solver nu {} differs from flow nu {}", config.nu, flow.nu)),
            &record,
        ));
    }
    let every = config.steps_per_snapshot().map_err(|e| fail(e, &record))?;
    let radius = 0.5 * solver.grid.spec.r_max;
    let far_points: Vec<ComplexPoint> = (0..settings.far_points)
        .map(|k| Complex64::from_polar(radius, 2.0 * PI * k as f64 / settings.far_points as f64))
        .collect();
    let mut rec = Recorder {
        probes: ProbeSampler::new(&solver.grid, &record.points).map_err(|e| fail(e, &record))?,
        far: ProbeSampler::new(&solver.grid, &far_points).map_err(|e| fail(e, &record))?,
        far_points,
        monitor: EnergyMonitor::new(settings.c1, settings.margin, flow.nu, settings.profile),
    };
    let mut state = solver.init(flow).map_err(|e| fail(e, &record))?;
    let alpha_scale = flow.alpha().abs().max(1e-300);

    let snap = |solver: &Solver, state: &SolverState, rec: &Recorder| Snapshot {
        t: state.t,
        velocities: rec.probes.sample(&solver.grid, &state.psi),
    };
    let d = rec.diagnostics(solver, &state);
    record.diagnostics.push(d);
    record.push_snapshot(snap(solver, &state, &rec)).map_err(|e| fail(e, &record))?;

    let total = config.total_steps();
    for step in 1..=total {
        if stop.is_some_and(|s| s.load(Ordering::Relaxed)) {
            return Ok(record);
        }
        if let Err(e) = solver.advance(&mut state) {
            return Err(fail(e, &record));
        }
        record.steps = step;
        record.worst_stokes_defect = record
            .worst_stokes_defect
            .max(state.stokes_defect(&solver.grid).abs() / alpha_scale);
        if step % every == 0 || step == total {
            let d = rec.diagnostics(solver, &state);
            record.diagnostics.push(d);
            record.push_snapshot(snap(solver, &state, &rec)).map_err(|e| fail(e, &record))?;
        } else {
            rec.monitor.record(&state, &solver.grid);
        }
        log::debug!(
            "t = {:.5} beta = {:.6e} diffusion iterations = {}",
            state.t,
            state.beta,
            solver.last_diffusion_iterations
        );
    }
    record.complete = true;
    Ok(record)
}
