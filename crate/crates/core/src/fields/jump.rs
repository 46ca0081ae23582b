use std::f64::consts::PI;

use super::{FieldError, FlowData, InitialVelocity};
use crate::conformal::{ExteriorMap, MapError, Side};
use crate::quadrature::Rule;

/// Sheet strength of the limit flow along the arc.
///
/// `g(s) = (u₀⁻ - u₀⁺)·τ(s)`, the tangential velocity below minus above, so a
/// positive circulation gives a positive sheet and `∫ g dℓ` is the circulation
/// `γ` around the arc.
#[derive(Debug, Clone)]
pub struct JumpDensity {
    limit: InitialVelocity,
}

impl JumpDensity {
    pub fn new(flow: &FlowData, base: ExteriorMap) -> Result<Self, FieldError> {
        Ok(JumpDensity {
            limit: InitialVelocity::limit(flow, base)?,
        })
    }

    pub fn at(&self, s: f64) -> Result<f64, FieldError> {
        if !(s > 0.0 && s < 1.0) {
            return Err(MapError::Endpoint(s).into());
        }
        let arc = self.limit.family().arc();
        let t = arc.tangent(s);
        let tau = t / t.norm();
        let above = self.limit.trace(s, Side::Above)?;
        let below = self.limit.trace(s, Side::Below)?;
        let d = below - above;
        Ok(d.re * tau.re + d.im * tau.im)
    }

    /// `∫ g dℓ` over the arc, with `x = -cos φ` absorbing the endpoint singularities.
    pub fn total_strength(&self) -> Result<f64, FieldError> {
        let arc = self.limit.family().arc();
        let rule = Rule::composite(0.0, PI, 4, 32);
        let mut total = 0.0;
        for (&phi, &w) in rule.nodes.iter().zip(&rule.weights) {
            let s = 0.5 * (1.0 - phi.cos());
            // dℓ = |Γ'(s)| ds and ds/dφ = sin φ / 2
            let speed = arc.speed(s);
            total += w * self.at(s)? * speed * 0.5 * phi.sin();
        }
        Ok(total)
    }
}

pub fn jump_density(flow: &FlowData, base: ExteriorMap, s: f64) -> Result<f64, FieldError> {
    JumpDensity::new(flow, base)?.at(s)
}
