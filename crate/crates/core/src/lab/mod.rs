//! ε-families, refinement ladders and the acceptance criteria built on them.

mod criteria;
mod fits;
mod initial;
mod patch;
mod report;
mod study;

pub use criteria::{evaluate, run_criterion, CriterionContext, Tolerances, CRITERIA};
pub use fits::{decay_fit, endpoint_fit, geometric, tip_fit};
pub use initial::{extended_samples, initial_data_convergence, lp_uniform_bound, EpsilonRow, InitialDataTable, LpTable};
pub use patch::{l2_patch_norm, time_integrated_distance, ProbePatch};
pub use report::{config_hash, report_emit, Bound, Check, ConvergenceReport, CriterionOutcome, Table, Verdict};
pub use study::{
    flow_convergence, flow_convergence_plan, ladyzhenskaya_ratios, reference_test_fields, uniqueness_plan,
    uniqueness_probe, weak_plan, weak_refinement, FlowConvergenceTable, PairDistance, RunBank, RunEntry, RunKey,
    safe_dt, Rung, StudyConfig, UniquenessTable, WeakRow, WeakTable, FAR_GROUP, NEAR_GROUP,
};

use thiserror::Error;

use crate::conformal::MapError;
use crate::fields::FieldError;
use crate::solver::SolverError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("invalid study input: {0}")]
    Invalid(String),
    #[error("expected {expected} samples, found {found}")]
    MissingSamples { expected: usize, found: usize },
    #[error("no matching snapshot at t = {0}")]
    MissingSnapshot(f64),
    #[error("degenerate fit: {0}")]
    Degenerate(String),
    #[error("run {0} was not part of the study")]
    MissingRun(String),
    #[error("run failed: {0}")]
    RunFailed(String),
    #[error("io: {0}")]
    Io(String),
}

pub(crate) fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}
