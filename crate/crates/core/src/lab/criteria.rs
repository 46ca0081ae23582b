use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Instant;

use super::study::{flow_convergence_plan, uniqueness_plan, weak_plan};
use super::{
    decay_fit, endpoint_fit, tip_fit, flow_convergence, geometric, initial_data_convergence, ladyzhenskaya_ratios,
    uniqueness_probe, weak_refinement, Bound, Check, ConvergenceReport, CriterionOutcome, LabError, RunBank, RunKey,
    StudyConfig, Table,
};
use crate::conformal::{assumption_check, AssumptionSettings, ObstacleFamily};
use crate::fields::{
    circulation, BumpVorticity, Circle, FlowData, HarmonicField, InitialVelocity, JumpDensity,
    ObstacleBoundary, ShiftedInitialData, VectorField,
};
use crate::fit::LogLogFit;
use crate::solver::anchors;

/// Thresholds of the twelve acceptance criteria; all of them enter the report hash.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub circulation: f64,
    pub harmonic_slope: f64,
    pub kernel_slope: f64,
    pub harmonic_constant: f64,
    pub endpoint_slope: f64,
    pub jump_relative: f64,
    pub jump_total: f64,
    pub assumption_identity: f64,
    pub carrier: f64,
    pub order: f64,
    pub stokes_defect: f64,
    pub far_circulation: f64,
    pub weak_factor: f64,
    pub uniqueness_factor: f64,
    /// Runtime budgets in seconds, criterion 1 first.
    pub budgets: [f64; 12],
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            circulation: 1e-6,
            harmonic_slope: 0.05,
            kernel_slope: 0.1,
            harmonic_constant: 0.01,
            endpoint_slope: 0.05,
            jump_relative: 1e-3,
            jump_total: 1e-3,
            assumption_identity: 1e-12,
            carrier: 1e-10,
            order: 0.2,
            stokes_defect: 1e-6,
            far_circulation: 1e-4,
            weak_factor: 3.0,
            uniqueness_factor: 2.0,
            budgets: [5.0, 30.0, 30.0, 5.0, 10.0, 60.0, 120.0, 120.0, 300.0, 900.0, 600.0, 900.0],
        }
    }
}

impl Tolerances {
    /// Flat `name -> value` view for the report.
    pub fn to_map(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        if let Ok(serde_json::Value::Object(obj)) = serde_json::to_value(self) {
            for (k, v) in obj {
                match v {
                    serde_json::Value::Number(n) => {
                        m.insert(k, n.as_f64().unwrap_or(f64::NAN));
                    }
                    serde_json::Value::Array(a) => {
                        for (i, x) in a.iter().enumerate() {
                            m.insert(format!("{k}.{:02}", i + 1), x.as_f64().unwrap_or(f64::NAN));
                        }
                    }
                    _ => {}
                }
            }
        }
        m
    }
}

pub const CRITERIA: [(u32, &str); 12] = [
    (1, "circulation of H over the obstacle"),
    (2, "circulation of the initial velocity"),
    (3, "far-field decay exponents"),
    (4, "endpoint blow-up of the limit field"),
    (5, "vortex-sheet density of the flat plate"),
    (6, "obstacle-family assumption suite"),
    (7, "initial-data convergence"),
    (8, "solver exactness anchors"),
    (9, "conservation and energy envelope"),
    (10, "flow convergence in epsilon"),
    (11, "weak-form residual under refinement"),
    (12, "uniqueness probe"),
];

/// Study, thresholds and the runs shared between criteria 9 to 12.
pub struct CriterionContext {
    pub study: StudyConfig,
    pub tolerances: Tolerances,
    pub bank: RunBank,
    pub stop: Option<Arc<AtomicBool>>,
}

impl CriterionContext {
    pub fn new(study: StudyConfig, tolerances: Tolerances) -> Self {
        CriterionContext {
            study,
            tolerances,
            bank: RunBank::default(),
            stop: None,
        }
    }

    fn stopped(&self) -> bool {
        self.stop.as_ref().is_some_and(|s| s.load(Ordering::Relaxed))
    }

    fn execute(&mut self, plan: &[(RunKey, f64)]) -> Result<(), LabError> {
        let stop = self.stop.clone();
        self.bank.execute(&self.study, plan, stop.as_deref())
    }
}

type Tables = BTreeMap<String, Table>;

fn fit_checks(name: &str, fit: &LogLogFit, target: f64, tol: f64) -> Vec<Check> {
    vec![
        Check::new(format!("{name}_slope"), fit.slope, Bound::Absolute { target }, tol),
        Check::new(format!("{name}_fit_rms"), fit.rms_residual, Bound::AtMost, crate::fit::RELIABLE_RMS),
    ]
}

fn c1(ctx: &CriterionContext, tables: &mut Tables) -> Result<Vec<Check>, LabError> {
    let mut t = Table::new(&["epsilon", "circulation"]);
    let mut checks = Vec::new();
    for e in [0.2, 0.1, 0.05] {
        let family = ObstacleFamily::new(ctx.study.base, e)?;
        let c = circulation(&HarmonicField { family }, &ObstacleBoundary { family }, 256)?;
        t.push(vec![e, c]);
        checks.push(Check::new(
            format!("circulation_H_eps_{e}"),
            c,
            Bound::Absolute { target: 1.0 },
            ctx.tolerances.circulation,
        ));
    }
    tables.insert("harmonic_circulation".into(), t);
    Ok(checks)
}

fn c2(ctx: &CriterionContext, tables: &mut Tables) -> Result<Vec<Check>, LabError> {
    let flow = &ctx.study.flow;
    let mut t = Table::new(&["epsilon", "boundary", "far_circle"]);
    let mut checks = Vec::new();
    for e in [0.2, 0.1, 0.05] {
        let family = ObstacleFamily::new(ctx.study.base, e)?;
        let u = InitialVelocity::new(flow, family)?;
        let inner = circulation(&u, &ObstacleBoundary { family }, 256)?;
        let outer = circulation(
            &u,
            &Circle {
                center: Complex64::new(0.0, 0.0),
                radius: 50.0,
            },
            256,
        )?;
        t.push(vec![e, inner, outer]);
        let tol = ctx.tolerances.circulation;
        checks.push(Check::new(format!("boundary_eps_{e}"), inner, Bound::Absolute { target: flow.gamma }, tol));
        checks.push(Check::new(format!("far_eps_{e}"), outer, Bound::Absolute { target: flow.alpha() }, tol));
    }
    tables.insert("initial_circulation".into(), t);
    Ok(checks)
}

fn c3(ctx: &CriterionContext, tables: &mut Tables) -> Result<Vec<Check>, LabError> {
    let tol = &ctx.tolerances;
    let family = ObstacleFamily::new(ctx.study.base, ctx.study.reference_epsilon)?;
    let radii = geometric(50.0, 800.0, 9);
    let h = HarmonicField { family };
    let u = InitialVelocity::new(&ctx.study.flow, family)?;
    let w = ShiftedInitialData::new(&ctx.study.flow, family, ctx.study.settings.profile)?;
    let fh = decay_fit(&h, &radii, 32)?;
    let fk = decay_fit(u.induced(), &radii, 32)?;
    let fw = decay_fit(&w, &radii, 32)?;
    let mut worst: f64 = 0.0;
    for k in 0..32 {
        let x = Complex64::from_polar(1e3, 2.0 * PI * (k as f64 + 0.3) / 32.0);
        worst = worst.max((x.norm() * h.velocity(x)?.norm() * 2.0 * PI - 1.0).abs());
    }
    let mut t = Table::new(&["field", "slope", "rms_residual"]);
    for (i, f) in [fh, fk, fw].iter().enumerate() {
        t.push(vec![i as f64, f.slope, f.rms_residual]);
    }
    tables.insert("far_field_slopes".into(), t);
    let mut checks = fit_checks("H", &fh, -1.0, tol.harmonic_slope);
    checks.extend(fit_checks("K", &fk, -2.0, tol.kernel_slope));
    checks.extend(fit_checks("W0", &fw, -2.0, tol.kernel_slope));
    checks.push(Check::new("H_constant_deviation", worst, Bound::AtMost, tol.harmonic_constant));
    Ok(checks)
}

fn c4(ctx: &CriterionContext, tables: &mut Tables) -> Result<Vec<Check>, LabError> {
    let flow = FlowData::new(1.0, ctx.study.flow.nu, BumpVorticity::zero())?;
    let u0 = InitialVelocity::limit(&flow, ctx.study.base)?;
    let d = geometric(1e-4, 1e-2, 9);
    let fit = endpoint_fit(&u0, &d, 1.0)?;
    let mut t = Table::new(&["distance", "speed"]);
    for &di in &d {
        t.push(vec![di, u0.velocity(Complex64::new(1.0 + di, 0.0))?.norm()]);
    }
    tables.insert("endpoint_blow_up".into(), t);
    let mut checks = fit_checks("endpoint", &fit, -0.5, ctx.tolerances.endpoint_slope);
    // reported alongside: at ε > 0 the field is bounded at the tip of Γ_ε
    let family = ObstacleFamily::new(ctx.study.base, ctx.study.reference_epsilon)?;
    let ue = InitialVelocity::new(&flow, family)?;
    let tip = tip_fit(&ue, &family, &geometric(1e-7, 1e-5, 5), 1.0)?;
    checks.push(Check::new("tip_slope_at_reference_epsilon", tip.slope.abs(), Bound::AtMost, ctx.tolerances.endpoint_slope));
    Ok(checks)
}

/// `(u(x - iη) - u(x + iη))·e₁` extrapolated to `η → 0` from `η` and `η/2`.
fn offset_jump(u: &InitialVelocity, x: f64, eta: f64) -> Result<f64, LabError> {
    let jump = |h: f64| -> Result<f64, LabError> {
        Ok((u.velocity(Complex64::new(x, -h))? - u.velocity(Complex64::new(x, h))?).re)
    };
    Ok(2.0 * jump(0.5 * eta)? - jump(eta)?)
}

fn c5(ctx: &CriterionContext, tables: &mut Tables) -> Result<Vec<Check>, LabError> {
    let tol = &ctx.tolerances;
    let gamma = 1.0;
    let flow = FlowData::new(gamma, ctx.study.flow.nu, BumpVorticity::zero())?;
    let alpha = flow.alpha();
    let u0 = InitialVelocity::limit(&flow, ctx.study.base)?;
    let jump = JumpDensity::new(&flow, ctx.study.base)?;
    let arc = ctx.study.base.arc();
    let mut t = Table::new(&["x", "oracle", "offset_limit", "density"]);
    let mut checks = Vec::new();
    for x in [-0.5f64, 0.0, 0.5] {
        let oracle = alpha / (PI * (1.0 - x * x).sqrt());
        let offset = offset_jump(&u0, x, 1e-4)?;
        let s = 0.5 * (x + 1.0);
        debug_assert!((arc.point(s).re - x).abs() < 1e-15);
        let g = jump.at(s)?;
        t.push(vec![x, oracle, offset, g]);
        checks.push(Check::new(format!("oracle_vs_offset_x_{x}"), offset, Bound::Relative { target: oracle }, tol.jump_relative));
        checks.push(Check::new(format!("density_x_{x}"), g, Bound::Relative { target: oracle }, tol.jump_relative));
    }
    let total = jump.total_strength()?;
    checks.push(Check::new("total_strength", total, Bound::Absolute { target: alpha }, tol.jump_total));
    tables.insert("jump_density".into(), t);
    Ok(checks)
}

fn c6(ctx: &CriterionContext, tables: &mut Tables) -> Result<Vec<Check>, LabError> {
    let eps = [0.2, 0.1, 0.05];
    let r = assumption_check(ctx.study.base, &eps, 4.0, AssumptionSettings::default())?;
    let mut t = Table::new(&["epsilon", "relative_deviation", "inverse_jacobian", "l3_deviation", "derivative_outside", "weighted_second_derivative"]);
    let mut checks = Vec::new();
    for row in &r.rows {
        t.push(vec![
            row.epsilon,
            row.sup_relative_deviation,
            row.sup_inverse_jacobian,
            row.l3_derivative_deviation,
            row.sup_derivative_outside,
            row.sup_weighted_second_derivative,
        ]);
        checks.push(Check::new(
            format!("quantity_i_eps_{}", row.epsilon),
            row.sup_relative_deviation,
            Bound::Absolute {
                target: row.epsilon / (1.0 + row.epsilon),
            },
            ctx.tolerances.assumption_identity,
        ));
    }
    checks.push(Check::flag("quantity_i_decreasing", r.relative_deviation_decreasing));
    checks.push(Check::flag("quantity_iii_decreasing", r.l3_deviation_decreasing));
    tables.insert("assumption_suite".into(), t);
    Ok(checks)
}

fn c7(ctx: &CriterionContext, tables: &mut Tables) -> Result<Vec<Check>, LabError> {
    let s = &ctx.study;
    let table = initial_data_convergence(&s.eps, &s.patch, &s.flow, s.base)?;
    let mut t = Table::new(&["epsilon", "distance"]);
    for r in &table.rows {
        t.push(vec![r.epsilon, r.value]);
    }
    tables.insert("initial_data_convergence".into(), t);
    Ok(vec![Check::flag("strictly_decreasing", table.strictly_decreasing)])
}

fn c8(ctx: &CriterionContext, tables: &mut Tables) -> Result<Vec<Check>, LabError> {
    let tol = &ctx.tolerances;
    let mut checks = vec![
        Check::new("zero_data_drift", anchors::zero_data_drift(100)?, Bound::AtMost, 0.0),
        Check::new("carrier_error", anchors::carrier_error(128, 256, 1.0)?, Bound::AtMost, tol.carrier),
    ];
    let sizes = [(33, 32), (65, 64), (129, 128)];
    let mut t = Table::new(&["n_sigma", "n_theta", "poisson_error", "diffusion_error"]);
    let mut pe = Vec::new();
    let mut de = Vec::new();
    for &(a, b) in &sizes {
        pe.push(anchors::manufactured_poisson_error(a, b)?);
        de.push(anchors::manufactured_diffusion_error(a, b)?);
        t.push(vec![a as f64, b as f64, pe[pe.len() - 1], de[de.len() - 1]]);
    }
    for (name, e) in [("poisson", &pe), ("diffusion", &de)] {
        for (i, w) in e.windows(2).enumerate() {
            let p = (w[0] / w[1]).log2();
            checks.push(Check::new(format!("{name}_order_{i}"), p, Bound::Absolute { target: 2.0 }, tol.order));
        }
    }
    tables.insert("manufactured".into(), t);
    Ok(checks)
}

fn c9(ctx: &mut CriterionContext, tables: &mut Tables) -> Result<Vec<Check>, LabError> {
    let key = RunKey::new(ctx.study.reference_epsilon, 0, ctx.study.solver.wall);
    ctx.execute(&[(key, ctx.study.t_conservation)])?;
    let run = ctx.bank.record(&key)?;
    let alpha = run.alpha;
    let tol = &ctx.tolerances;
    let t_end = ctx.study.t_conservation;
    let diags: Vec<_> = run.diagnostics.iter().filter(|d| d.t <= t_end + 1e-9).collect();
    let circ = diags.iter().map(|d| (d.circ_far - alpha).abs()).fold(0.0, f64::max);
    let envelope = diags.iter().all(|d| d.envelope_ok);
    let mut t = Table::new(&["t", "energy", "grad_energy", "beta", "circ_far", "envelope_lhs", "envelope_rhs", "ladyzhenskaya"]);
    let lady = ladyzhenskaya_ratios(run);
    for (d, l) in diags.iter().zip(&lady) {
        t.push(vec![d.t, d.energy, d.grad_energy, d.beta, d.circ_far, d.envelope_lhs, d.envelope_rhs, l.1]);
    }
    tables.insert("conservation".into(), t);
    Ok(vec![
        Check::new("worst_stokes_defect", run.worst_stokes_defect, Bound::AtMost, tol.stokes_defect),
        Check::new("worst_far_circulation_error", circ, Bound::AtMost, tol.far_circulation),
        Check::flag("envelope_never_violated", envelope),
        Check::new("t_end", diags.last().map_or(0.0, |d| d.t), Bound::AtLeast, t_end - 1e-9),
    ])
}

fn c10(ctx: &mut CriterionContext, tables: &mut Tables) -> Result<Vec<Check>, LabError> {
    let eps: Vec<f64> = ctx.study.eps.iter().take(3).copied().collect();
    ctx.execute(&flow_convergence_plan(&ctx.study, &eps, 0))?;
    let table = flow_convergence(&ctx.study, &ctx.bank, &eps, 0)?;
    let mut t = Table::new(&["eps_a", "eps_b", "near", "far"]);
    for p in &table.pairs {
        t.push(vec![p.eps_a, p.eps_b, p.near, p.far]);
    }
    tables.insert("flow_convergence".into(), t);
    if !table.missing.is_empty() {
        return Err(LabError::RunFailed(table.missing.join("; ")));
    }
    Ok(vec![
        Check::flag("strictly_decreasing", table.strictly_decreasing),
        Check::flag("verdict_stable_at_double_cadence", table.strictly_decreasing_coarse_cadence),
    ])
}

fn c11(ctx: &mut CriterionContext, tables: &mut Tables) -> Result<Vec<Check>, LabError> {
    let e = ctx.study.reference_epsilon;
    ctx.execute(&weak_plan(&ctx.study, e))?;
    let table = weak_refinement(&ctx.study, &ctx.bank, e)?;
    let mut t = Table::new(&["field", "coarse", "fine", "factor"]);
    let mut checks = Vec::new();
    for (i, r) in table.rows.iter().enumerate() {
        t.push(vec![i as f64, r.coarse, r.fine, r.factor]);
        checks.push(Check::new(format!("factor_{}", r.name), r.factor, Bound::AtLeast, ctx.tolerances.weak_factor));
    }
    tables.insert("weak_residual".into(), t);
    Ok(checks)
}

fn c12(ctx: &mut CriterionContext, tables: &mut Tables) -> Result<Vec<Check>, LabError> {
    let e = ctx.study.reference_epsilon;
    ctx.execute(&uniqueness_plan(&ctx.study, e))?;
    let u = uniqueness_probe(&ctx.study, &ctx.bank, e, ctx.tolerances.uniqueness_factor)?;
    let mut t = Table::new(&["coarse_to_reference", "fine_to_reference", "coarse_to_fine", "closure_distance"]);
    t.push(vec![u.coarse_to_reference, u.fine_to_reference, u.coarse_to_fine, u.closure_distance]);
    tables.insert("uniqueness".into(), t);
    Ok(vec![
        Check::new("refinement_factor", u.refinement_factor, Bound::AtLeast, ctx.tolerances.uniqueness_factor),
        Check::new("closure_distance", u.closure_distance, Bound::AtMost, u.closure_scale),
    ])
}

/// Evaluates one criterion; errors become an unreliable verdict carrying the message.
pub fn run_criterion(ctx: &mut CriterionContext, id: u32) -> (CriterionOutcome, Tables) {
    let title = CRITERIA.iter().find(|c| c.0 == id).map_or("unknown criterion", |c| c.1);
    let start = Instant::now();
    let mut tables = Tables::new();
    let result = match id {
        1 => c1(ctx, &mut tables),
        2 => c2(ctx, &mut tables),
        3 => c3(ctx, &mut tables),
        4 => c4(ctx, &mut tables),
        5 => c5(ctx, &mut tables),
        6 => c6(ctx, &mut tables),
        7 => c7(ctx, &mut tables),
        8 => c8(ctx, &mut tables),
        9 => c9(ctx, &mut tables),
        10 => c10(ctx, &mut tables),
        11 => c11(ctx, &mut tables),
        12 => c12(ctx, &mut tables),
        _ => Err(LabError::Invalid(format!("no criterion {id}"))),
    };
    let seconds = start.elapsed().as_secs_f64();
    let outcome = match result {
        Ok(mut checks) => {
            if let Some(&budget) = ctx.tolerances.budgets.get(id as usize - 1) {
                checks.push(Check::new("runtime_seconds", seconds, Bound::AtMost, budget));
            }
            CriterionOutcome::from_checks(id, title, checks, seconds)
        }
        Err(e) => CriterionOutcome::unreliable(id, title, e.to_string(), seconds),
    };
    (outcome, tables)
}

/// Runs the listed criteria in order into `report`, stopping early when interrupted.
pub fn evaluate(ctx: &mut CriterionContext, ids: &[u32], report: &mut ConvergenceReport) {
    for &id in ids {
        if ctx.stopped() {
            report.complete = false;
            return;
        }
        let (outcome, tables) = run_criterion(ctx, id);
        log::info!("{}", outcome.summary_line());
        report.tables.extend(tables);
        report.add(outcome);
    }
    report.complete = !ctx.stopped();
}
