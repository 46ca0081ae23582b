use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{FieldError, VectorField};
use crate::conformal::ObstacleFamily;
use crate::fit::{loglog_fit, LogLogFit};
use crate::quadrature::Rule;

/// Quadrature over `Π_ε` in log-polar image coordinates `T_ε(x) = e^{σ+iθ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneQuadrature {
    /// Truncation radius in the physical plane.
    pub radius: f64,
    /// Gauss-Legendre nodes per σ panel.
    pub sigma_order: usize,
    /// Trapezoid points in θ; `None` picks a count resolving the tips of `Γ_ε`.
    pub n_theta: Option<usize>,
}

impl Default for PlaneQuadrature {
    fn default() -> Self {
        PlaneQuadrature {
            radius: 1e3,
            sigma_order: 16,
            n_theta: None,
        }
    }
}

impl PlaneQuadrature {
    fn theta_points(&self, epsilon: f64) -> usize {
        self.n_theta
            .unwrap_or_else(|| ((48.0 / epsilon.max(0.01)).ceil() as usize).max(256).next_multiple_of(8))
    }

    /// σ panel breakpoints, geometrically graded towards the wall.
    fn sigma_breaks(&self, family: &ObstacleFamily) -> Result<Vec<f64>, FieldError> {
        let top = family.map(Complex64::new(self.radius, 0.0))?.norm().ln();
        let mut breaks = vec![0.0];
        let mut b = family.epsilon.max(1e-3) / 4.0;
        while b < top {
            breaks.push(b);
            b *= 2.0;
        }
        breaks.push(top);
        Ok(breaks)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub p: f64,
    /// `∫|u|^p` over the truncated region.
    pub truncated: f64,
    /// Analytic bound for the integral beyond the truncation; `None` when the tail diverges.
    pub tail: Option<f64>,
    /// Decay fitted on the outer rings.
    pub decay: Option<LogLogFit>,
    pub radius: f64,
}

impl NormEstimate {
    /// `‖u‖_p` including the tail bound (infinite when the tail diverges).
    pub fn value(&self) -> f64 {
        match self.tail {
            Some(t) => (self.truncated + t).powf(1.0 / self.p),
            None => f64::INFINITY,
        }
    }

    pub fn truncated_norm(&self) -> f64 {
        self.truncated.powf(1.0 / self.p)
    }
}

/// `‖u‖_{L^p(Π_ε)}` truncated at `|x| ≈ radius` plus an analytic tail from the fitted decay.
pub fn plane_norm(
    field: &dyn VectorField,
    family: &ObstacleFamily,
    p: f64,
    quad: PlaneQuadrature,
) -> Result<NormEstimate, FieldError> {
    if !(p >= 1.0) {
        return Err(FieldError::Invalid(format!("norm exponent must be >= 1, got {p}")));
    }
    let breaks = quad.sigma_breaks(family)?;
    let nt = quad.theta_points(family.epsilon);
    let mut sigma = Rule {
        nodes: Vec::new(),
        weights: Vec::new(),
    };
    for w in breaks.windows(2) {
        let r = Rule::composite(w[0], w[1], 1, quad.sigma_order);
        sigma.nodes.extend(r.nodes);
        sigma.weights.extend(r.weights);
    }
    let dtheta = 2.0 * PI / nt as f64;
    // each σ row: (Σ_θ |u|^p·jacobian·dθ, outer-ring samples)
    let rows: Vec<(f64, f64, f64)> = sigma
        .nodes
        .par_iter()
        .map(|&s| -> Result<(f64, f64, f64), FieldError> {
            let mut acc = 0.0;
            let mut max_u = 0.0f64;
            let mut min_r = f64::INFINITY;
            for k in 0..nt {
                let zeta = Complex64::from_polar(s.exp(), (k as f64 + 0.5) * dtheta);
                let z = family.inverse(zeta)?;
                let jac = (family.inverse_derivative(zeta)? * zeta).norm_sqr();
                let u = field.velocity(z)?.norm();
                acc += u.powf(p) * jac * dtheta;
                max_u = max_u.max(u);
                min_r = min_r.min(z.norm());
            }
            Ok((acc, max_u, min_r))
        })
        .collect::<Result<_, _>>()?;
    let truncated: f64 = rows.iter().zip(&sigma.weights).map(|(r, w)| r.0 * w).sum();

    // decay of max|u| over the outer half of the σ range
    let top = *breaks.last().unwrap_or(&0.0);
    let outer: Vec<&(f64, f64, f64)> = rows
        .iter()
        .zip(&sigma.nodes)
        .filter(|(_, &s)| s > 0.5 * top)
        .map(|(r, _)| r)
        .collect();
    let radii: Vec<f64> = outer.iter().map(|r| r.2).collect();
    let mags: Vec<f64> = outer.iter().map(|r| r.1).collect();
    let decay = loglog_fit(&radii, &mags);
    let tail = if mags.iter().all(|&m| m == 0.0) {
        Some(0.0)
    } else {
        decay.and_then(|fit| {
            let k = fit.slope;
            let e = k * p + 2.0;
            // a fitted slope within fit noise of the borderline counts as divergent
            if e >= -0.05 {
                return None;
            }
            let rmax = *radii.last()?;
            let c = mags.last()? / rmax.powf(k);
            Some(2.0 * PI * c.powf(p) * rmax.powf(e) / (-e))
        })
    };
    Ok(NormEstimate {
        p,
        truncated,
        tail,
        decay,
        radius: quad.radius,
    })
}

/// Log-log slope of `max_θ |u(r e^{iθ})|` over the given radii.
pub fn far_field_slope(field: &dyn VectorField, radii: &[f64], angles: usize) -> Result<LogLogFit, FieldError> {
    let mut mags = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut m = 0.0f64;
        for k in 0..angles {
            let z = Complex64::from_polar(r, 2.0 * PI * (k as f64 + 0.25) / angles as f64);
            m = m.max(field.velocity(z)?.norm());
        }
        mags.push(m);
    }
    loglog_fit(radii, &mags).ok_or_else(|| FieldError::Invalid("degenerate far-field samples".into()))
}

#[cfg(test)]
mod tests {
    use super::super::{Bump, BumpVorticity, CutoffProfile, FlowData, HarmonicField, ShiftedInitialData};
    use super::*;
    use crate::conformal::{ComplexPoint, ExteriorMap};

    #[test]
    fn gaussian_mass_over_the_exterior() {
        // ∫ e^{-|x|²} over the plane minus an ellipse of area π a b
        let eps = 0.2;
        let fam = ObstacleFamily::segment(eps).unwrap();
        let f = |z: ComplexPoint| -> Result<ComplexPoint, FieldError> {
            Ok(Complex64::new((-0.5 * z.norm_sqr()).exp(), 0.0))
        };
        let est = plane_norm(&f, &fam, 2.0, PlaneQuadrature { radius: 30.0, ..Default::default() }).unwrap();
        // oracle: polar quadrature of e^{-r²} outside the ellipse with semi-axes (ρ + 1/ρ)/2, (ρ - 1/ρ)/2
        let rho = 1.0 + eps;
        let a = 0.5 * (rho + 1.0 / rho);
        let b = 0.5 * (rho - 1.0 / rho);
        let rule = Rule::composite(0.0, 2.0 * PI, 16, 32);
        let inside: f64 = rule.integrate(|phi| {
            let r = 1.0 / ((phi.cos() / a).powi(2) + (phi.sin() / b).powi(2)).sqrt();
            0.5 * (1.0 - (-r * r).exp())
        });
        let want = PI - inside;
        assert!((est.truncated - want).abs() < 1e-8 * want, "{} {}", est.truncated, want);
    }

    #[test]
    fn harmonic_field_is_not_square_integrable() {
        let fam = ObstacleFamily::segment(0.1).unwrap();
        let h = HarmonicField { family: fam };
        let est = plane_norm(&h, &fam, 2.0, PlaneQuadrature::default()).unwrap();
        assert!(est.tail.is_none());
        assert!(est.value().is_infinite());
        let fit = est.decay.unwrap();
        assert!((fit.slope + 1.0).abs() < 0.05);
    }

    #[test]
    fn shifted_data_has_a_finite_norm_with_small_tail() {
        let omega = BumpVorticity::new(
            vec![Bump::new(Complex64::new(0.0, 1.0), 0.3, 2.0)],
            ExteriorMap::segment(),
            0.2,
        )
        .unwrap();
        let flow = FlowData::new(1.0, 0.01, omega).unwrap();
        let fam = ObstacleFamily::segment(0.1).unwrap();
        let w = ShiftedInitialData::new(&flow, fam, CutoffProfile::new(4.0).unwrap()).unwrap();
        let est = plane_norm(&w, &fam, 2.0, PlaneQuadrature::default()).unwrap();
        let tail = est.tail.unwrap();
        assert!(tail < 1e-4 * est.truncated, "{est:?}");
        assert!((est.decay.unwrap().slope + 2.0).abs() < 0.1);
    }
}
