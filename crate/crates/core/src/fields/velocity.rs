use super::cutoff::CutoffProfile;
use super::kernel::{harmonic_at, InducedVelocity};
use super::{FieldError, FlowData, VectorField};
use crate::conformal::{ComplexPoint, ExteriorMap, MapPoint, ObstacleFamily, Side};

/// Quadrature tolerance used by the convenience constructors.
pub const INDUCED_TOLERANCE: f64 = 1e-9;

/// `H_ε` as a sampler.
#[derive(Debug, Clone, Copy)]
pub struct HarmonicField {
    pub family: ObstacleFamily,
}

impl VectorField for HarmonicField {
    fn velocity(&self, x: ComplexPoint) -> Result<ComplexPoint, FieldError> {
        Ok(harmonic_at(&self.family.point(x)?))
    }

    fn blocked(&self, a: ComplexPoint, b: ComplexPoint) -> bool {
        self.family.arc().crossed_by(a, b)
    }
}

/// `u₀^ε = K_ε[ω₀] + α H_ε`; with `ε = 0` this is the limit field `u₀`.
#[derive(Debug, Clone)]
pub struct InitialVelocity {
    induced: InducedVelocity,
    alpha: f64,
}

impl InitialVelocity {
    pub fn new(flow: &FlowData, family: ObstacleFamily) -> Result<Self, FieldError> {
        Ok(InitialVelocity {
            induced: InducedVelocity::converged(&flow.omega0, family, INDUCED_TOLERANCE)?,
            alpha: flow.alpha(),
        })
    }

    pub fn limit(flow: &FlowData, base: ExteriorMap) -> Result<Self, FieldError> {
        Self::new(flow, ObstacleFamily::limit(base))
    }

    pub fn family(&self) -> &ObstacleFamily {
        self.induced.family()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn induced(&self) -> &InducedVelocity {
        &self.induced
    }

    pub fn at_point(&self, px: &MapPoint) -> Result<ComplexPoint, FieldError> {
        Ok(self.induced.at_point(px)? + self.alpha * harmonic_at(px))
    }

    /// One-sided trace on the arc (limit field only).
    pub fn trace(&self, s: f64, side: Side) -> Result<ComplexPoint, FieldError> {
        let px = self.family().trace_point(s, side)?;
        self.at_point(&px)
    }
}

impl VectorField for InitialVelocity {
    fn velocity(&self, x: ComplexPoint) -> Result<ComplexPoint, FieldError> {
        let px = self.family().point(x)?;
        self.at_point(&px)
    }

    fn blocked(&self, a: ComplexPoint, b: ComplexPoint) -> bool {
        self.family().arc().crossed_by(a, b)
    }
}

/// `v^ε = α H_ε Φ^{ε,λ}`.
#[derive(Debug, Clone, Copy)]
pub struct BackgroundField {
    pub family: ObstacleFamily,
    pub alpha: f64,
    pub profile: CutoffProfile,
}

impl BackgroundField {
    pub fn new(flow: &FlowData, family: ObstacleFamily, profile: CutoffProfile) -> Self {
        BackgroundField {
            family,
            alpha: flow.alpha(),
            profile,
        }
    }

    pub fn at_point(&self, px: &MapPoint) -> ComplexPoint {
        let phi = self.profile.at_modulus(px.w.norm());
        if phi == 0.0 {
            return ComplexPoint::new(0.0, 0.0);
        }
        self.alpha * phi * harmonic_at(px)
    }
}

impl VectorField for BackgroundField {
    fn velocity(&self, x: ComplexPoint) -> Result<ComplexPoint, FieldError> {
        Ok(self.at_point(&self.family.point(x)?))
    }

    fn blocked(&self, a: ComplexPoint, b: ComplexPoint) -> bool {
        self.family.arc().crossed_by(a, b)
    }
}

/// `W₀^ε = K_ε[ω₀] + α(1 - Φ^{ε,λ}) H_ε`.
#[derive(Debug, Clone)]
pub struct ShiftedInitialData {
    pub initial: InitialVelocity,
    pub profile: CutoffProfile,
}

impl ShiftedInitialData {
    pub fn new(flow: &FlowData, family: ObstacleFamily, profile: CutoffProfile) -> Result<Self, FieldError> {
        Ok(ShiftedInitialData {
            initial: InitialVelocity::new(flow, family)?,
            profile,
        })
    }

    pub fn at_point(&self, px: &MapPoint) -> Result<ComplexPoint, FieldError> {
        let phi = self.profile.at_modulus(px.w.norm());
        Ok(self.initial.induced().at_point(px)? + self.initial.alpha() * (1.0 - phi) * harmonic_at(px))
    }
}

impl VectorField for ShiftedInitialData {
    fn velocity(&self, x: ComplexPoint) -> Result<ComplexPoint, FieldError> {
        let px = self.initial.family().point(x)?;
        self.at_point(&px)
    }

    fn blocked(&self, a: ComplexPoint, b: ComplexPoint) -> bool {
        self.initial.blocked(a, b)
    }
}

pub fn initial_velocity(flow: &FlowData, family: &ObstacleFamily, x: ComplexPoint) -> Result<ComplexPoint, FieldError> {
    InitialVelocity::new(flow, *family)?.velocity(x)
}

pub fn limit_velocity(flow: &FlowData, base: ExteriorMap, x: ComplexPoint) -> Result<ComplexPoint, FieldError> {
    InitialVelocity::limit(flow, base)?.velocity(x)
}

pub fn background_field(
    flow: &FlowData,
    family: &ObstacleFamily,
    profile: &CutoffProfile,
    x: ComplexPoint,
) -> Result<ComplexPoint, FieldError> {
    BackgroundField::new(flow, *family, *profile).velocity(x)
}

pub fn shifted_initial_data(
    flow: &FlowData,
    family: &ObstacleFamily,
    profile: &CutoffProfile,
    x: ComplexPoint,
) -> Result<ComplexPoint, FieldError> {
    ShiftedInitialData::new(flow, *family, *profile)?.velocity(x)
}
