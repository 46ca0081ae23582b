use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::FieldError;
use crate::conformal::{ComplexPoint, ExteriorMap, JordanArc};
use crate::quadrature::{Rule, TensorRule};

/// One smooth compactly supported bump `A·exp(1 - 1/(1 - |x-c|²/ρ²))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: ComplexPoint,
    pub radius: f64,
    pub amplitude: f64,
}

impl Bump {
    pub fn new(center: ComplexPoint, radius: f64, amplitude: f64) -> Self {
        Bump {
            center,
            radius,
            amplitude,
        }
    }

    pub fn eval(&self, x: ComplexPoint) -> f64 {
        let q = (x - self.center).norm_sqr() / (self.radius * self.radius);
        if q >= 1.0 {
            0.0
        } else {
            self.amplitude * (1.0 - 1.0 / (1.0 - q)).exp()
        }
    }

    /// Circulation enclosed by the circle of radius `r` about the center.
    pub fn enclosed_circulation(&self, r: f64) -> f64 {
        let t = (r / self.radius).powi(2).min(1.0);
        if t <= 0.0 {
            return 0.0;
        }
        // ∫₀ᵗ e^{1 - 1/(1-u)} du = e ∫_{1-t}^{1} e^{-1/s} ds
        let rule = Rule::composite(1.0 - t, 1.0, 8, 24);
        let integral = rule.integrate(|s| if s > 0.0 { (1.0 - 1.0 / s).exp() } else { 0.0 });
        PI * self.radius * self.radius * self.amplitude * integral
    }

    /// Velocity induced in the free plane (no obstacle): azimuthal, `Γ(r)/(2πr)`.
    pub fn free_velocity(&self, x: ComplexPoint) -> ComplexPoint {
        let d = x - self.center;
        let r2 = d.norm_sqr();
        if r2 == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let circ = self.enclosed_circulation(r2.sqrt());
        Complex64::new(0.0, 1.0) * d * (circ / (2.0 * PI * r2))
    }

    pub fn mass_with(&self, panels: usize, order: usize) -> f64 {
        let c = self.center;
        let r = self.radius;
        TensorRule::rectangle(c.re - r, c.re + r, c.im - r, c.im + r, panels, order)
            .integrate(|x, y| self.eval(Complex64::new(x, y)))
    }
}

/// Initial vorticity as a finite sum of bumps with supports away from the arc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpVorticity {
    pub bumps: Vec<Bump>,
    /// Largest obstacle parameter the supports were validated against.
    pub epsilon_max: f64,
}

/// Default composite rule for bump integrals: 4 panels per side.
pub const BUMP_PANELS: usize = 4;
pub const BUMP_ORDER: usize = 16;

impl BumpVorticity {
    pub fn zero() -> Self {
        BumpVorticity {
            bumps: Vec::new(),
            epsilon_max: 0.0,
        }
    }

    /// Validates every support against the arc and against `Ω_ε` for `ε ≤ epsilon_max`.
    pub fn new(bumps: Vec<Bump>, base: ExteriorMap, epsilon_max: f64) -> Result<Self, FieldError> {
        let arc = base.arc();
        for (i, b) in bumps.iter().enumerate() {
            if !(b.radius > 0.0 && b.radius.is_finite()) {
                return Err(FieldError::Support {
                    index: i,
                    message: format!("radius must be positive, got {}", b.radius),
                });
            }
            if !b.amplitude.is_finite() || !b.center.re.is_finite() || !b.center.im.is_finite() {
                return Err(FieldError::Support {
                    index: i,
                    message: "non-finite bump parameters".into(),
                });
            }
            let gap = support_gap(b, &arc);
            if gap <= 0.0 {
                return Err(FieldError::Support {
                    index: i,
                    message: format!(
                        "support intersects the curve: distance from the disk to the curve is {gap:.6}"
                    ),
                });
            }
            if epsilon_max > 0.0 {
                let level = 1.0 + epsilon_max;
                let min_modulus = min_map_modulus(b, base);
                if min_modulus <= level {
                    return Err(FieldError::Support {
                        index: i,
                        message: format!(
                            "support meets the obstacle for epsilon = {epsilon_max}: min |T| on the disk is {min_modulus:.6} <= {level}"
                        ),
                    });
                }
            }
        }
        Ok(BumpVorticity { bumps, epsilon_max })
    }

    pub fn eval(&self, x: ComplexPoint) -> f64 {
        self.bumps.iter().map(|b| b.eval(x)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bumps.is_empty()
    }

    /// `∫ ω₀` by composite tensor Gauss-Legendre over each bounding square.
    pub fn mass_with(&self, panels: usize, order: usize) -> f64 {
        self.bumps.iter().map(|b| b.mass_with(panels, order)).sum()
    }

    pub fn mass(&self) -> f64 {
        self.mass_with(BUMP_PANELS, BUMP_ORDER * 2)
    }

    /// Whether `x` lies in the closed support of some bump.
    pub fn in_support(&self, x: ComplexPoint) -> bool {
        self.bumps.iter().any(|b| (x - b.center).norm() <= b.radius)
    }

    /// Largest distance from the origin reached by a support.
    pub fn extent(&self) -> f64 {
        self.bumps
            .iter()
            .map(|b| b.center.norm() + b.radius)
            .fold(0.0, f64::max)
    }
}

/// Distance from the closed disk to the arc (negative when they overlap).
pub fn support_gap(b: &Bump, arc: &JordanArc) -> f64 {
    arc.distance(b.center) - b.radius
}

fn min_map_modulus(b: &Bump, base: ExteriorMap) -> f64 {
    let mut min = f64::INFINITY;
    for k in 0..720 {
        let z = b.center + Complex64::from_polar(b.radius, 2.0 * PI * k as f64 / 720.0);
        match base.eval(z) {
            Ok(w) => min = min.min(w.norm()),
            Err(_) => return 1.0,
        }
    }
    if let Ok(w) = base.eval(b.center) {
        min = min.min(w.norm());
    }
    min
}

/// Circulation, viscosity and initial vorticity of one problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowData {
    pub gamma: f64,
    pub nu: f64,
    pub omega0: BumpVorticity,
    mass: f64,
}

impl FlowData {
    pub fn new(gamma: f64, nu: f64, omega0: BumpVorticity) -> Result<Self, FieldError> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(FieldError::Invalid(format!("viscosity must be positive, got {nu}")));
        }
        if !gamma.is_finite() {
            return Err(FieldError::Invalid("circulation must be finite".into()));
        }
        let mass = omega0.mass();
        Ok(FlowData {
            gamma,
            nu,
            omega0,
            mass,
        })
    }

    /// Total vorticity `m = ∫ ω₀`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Circulation at infinity `α = γ + m`.
    pub fn alpha(&self) -> f64 {
        self.gamma + self.mass
    }
}
