//! Pointwise evaluators for the explicit velocity fields and their probes.

mod cutoff;
mod jump;
mod kernel;
mod norms;
mod probes;
mod velocity;
mod vorticity;

pub use cutoff::{cutoff_eval, CutoffProfile};
pub use jump::{jump_density, JumpDensity};
pub use kernel::{biot_savart_kernel, harmonic_at, harmonic_field, induced_velocity, kernel_at, InducedVelocity};
pub use norms::{far_field_slope, plane_norm, NormEstimate, PlaneQuadrature};
pub use probes::{
    circulation, curl_probe, divergence_probe, smallness_statistic, Circle, CirculationSettings, Contour,
    ObstacleBoundary, Polyline, SmallnessSettings,
};
pub use velocity::{
    background_field, initial_velocity, limit_velocity, shifted_initial_data, BackgroundField, HarmonicField,
    InitialVelocity, ShiftedInitialData,
};
pub use vorticity::{support_gap, Bump, BumpVorticity, FlowData};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conformal::{ComplexPoint, MapError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("kernel is singular at x = y = {0}")]
    Coincident(ComplexPoint),
    #[error("bump {index}: {message}")]
    Support { index: usize, message: String },
    #[error("quadrature did not reach {tolerance:e} (last change {achieved:e})")]
    Quadrature { tolerance: f64, achieved: f64 },
    #[error("contour integral did not converge with {points} points (last change {change:e})")]
    NonConvergence { points: usize, change: f64 },
    #[error("difference stencil at {0} leaves the domain")]
    StencilCrossesCurve(ComplexPoint),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

/// A velocity field that can be sampled pointwise.
pub trait VectorField: Sync {
    fn velocity(&self, x: ComplexPoint) -> Result<ComplexPoint, FieldError>;

    /// Whether the straight segment `[a, b]` leaves the field's domain.
    fn blocked(&self, _a: ComplexPoint, _b: ComplexPoint) -> bool {
        false
    }
}

impl<F> VectorField for F
where
    F: Fn(ComplexPoint) -> Result<ComplexPoint, FieldError> + Sync,
{
    fn velocity(&self, x: ComplexPoint) -> Result<ComplexPoint, FieldError> {
        self(x)
    }
}

/// A sampled velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocitySample {
    pub point: ComplexPoint,
    pub value: ComplexPoint,
}

pub(crate) const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
