//! Vorticity-streamfunction Navier-Stokes on the log-polar image of `Π_ε`.
//!
//! With `T_ε(x) = e^{σ+iθ}`, `g = |T_ε'/T_ε|²`, `w = ω∘T_ε⁻¹` and `Ψ = ψ∘T_ε⁻¹`,
//! the equations are
//!
//! ```text
//! ∂_σσΨ + ∂_θθΨ = w / g
//! ∂_t w + g (Ψ_σ w_θ - Ψ_θ w_σ) = ν g (∂_σσ w + ∂_θθ w)
//! ```
//!
//! with `ω = curl u` and `u = ∇⊥ψ = (-ψ_y, ψ_x)`, so `u = i·conj(T_ε'/T_ε)·(Ψ_σ + iΨ_θ)`.

mod advance;
pub mod anchors;
mod checkpoint;
mod diffusion;
mod energy;
mod grid;
mod poisson;
mod record;
mod run;
mod sample;
mod state;
mod wall;
mod weak;

pub use advance::{AdvectionScheme, Solver, SolverConfig};
pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use energy::{energy_monitor, EnergyMonitor, EnergySample};
pub use grid::{build_grid, build_grid_capped, GridSpec, MappedGrid, DEFAULT_METRIC_CAP};
pub use poisson::{poisson_streamfunction, PoissonSolver};
pub use record::{Diagnostics, ProbeGroup, RunRecord, Snapshot};
pub use run::{simulate, RunFailure, RunSettings};
pub use sample::{stream_gradients, velocity_from_stream, ProbeSampler};
pub use state::{init_state, SolverState};
pub use wall::{wall_vorticity, WallClosure};
pub use weak::{weak_residual, TestField};

use thiserror::Error;

use crate::conformal::{ComplexPoint, MapError};
use crate::fields::FieldError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("metric {value:e} exceeds cap {cap:e} at node {node:?} (x = {point})")]
    MetricOverflow {
        value: f64,
        cap: f64,
        node: (usize, usize),
        point: ComplexPoint,
    },
    #[error("singular tridiagonal system in {0}")]
    Singular(&'static str),
    #[error("time step {dt:e} violates the CFL bound at t = {t}; need dt <= {required:e}")]
    Cfl { dt: f64, required: f64, t: f64 },
    #[error("non-finite vorticity at t = {t} (step {step})")]
    NonFinite { t: f64, step: u64 },
    #[error("support violation: {0}")]
    Support(String),
    #[error("probe {0} lies outside the computational grid")]
    Probe(ComplexPoint),
    #[error("missing probe group {0}")]
    MissingGroup(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
