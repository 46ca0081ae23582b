use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{RunRecord, SolverError};
use crate::conformal::{ComplexPoint, JordanArc};
use crate::quadrature::gauss_legendre;

/// `ψ(x, t) = χ(t)∇⊥η(x)` with `η = (1 - |x - c|²/ρ²)^k` on the disc and
/// `χ = sin⁴(π(t - t₀)/(t₁ - t₀))` on `[t₀, t₁]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestField {
    pub name: String,
    pub center: ComplexPoint,
    pub radius: f64,
    pub power: u32,
    pub t0: f64,
    pub t1: f64,
}

const RADIAL_NODES: usize = 24;
const ANGULAR_NODES: usize = 64;

/// Derivatives of `η` up to third order that the residual needs.
struct Jet {
    eta_x: f64,
    eta_y: f64,
    eta_xx: f64,
    eta_xy: f64,
    eta_yy: f64,
    lap_x: f64,
    lap_y: f64,
}

impl TestField {
    pub fn new(name: &str, center: ComplexPoint, radius: f64, power: u32, t0: f64, t1: f64) -> Self {
        TestField {
            name: name.to_string(),
            center,
            radius,
            power,
            t0,
            t1,
        }
    }

    /// Support `δ`-away from the arc, power high enough for the third derivatives, window inside `(0, T)`.
    pub fn validate(&self, arc: &JordanArc, delta: f64, t_end: f64) -> Result<(), SolverError> {
        if self.power < 10 {
            return Err(SolverError::Support(format!("{}: power {} < 10", self.name, self.power)));
        }
        let gap = arc.distance(self.center) - self.radius;
        if !(gap > delta) {
            return Err(SolverError::Support(format!(
                "{}: support is {gap:.4} from the curve, need > {delta}",
                self.name
            )));
        }
        if !(self.t0 > 0.0 && self.t1 > self.t0 && self.t1 < t_end) {
            return Err(SolverError::Support(format!(
                "{}: time window [{}, {}] not inside (0, {t_end})",
                self.name, self.t0, self.t1
            )));
        }
        Ok(())
    }

    pub fn chi(&self, t: f64) -> f64 {
        if t <= self.t0 || t >= self.t1 {
            return 0.0;
        }
        (PI * (t - self.t0) / (self.t1 - self.t0)).sin().powi(4)
    }

    pub fn chi_dot(&self, t: f64) -> f64 {
        if t <= self.t0 || t >= self.t1 {
            return 0.0;
        }
        let a = PI / (self.t1 - self.t0);
        let s = a * (t - self.t0);
        4.0 * a * s.sin().powi(3) * s.cos()
    }

    fn jet(&self, x: ComplexPoint) -> Jet {
        let d = x - self.center;
        let s = 1.0 / (self.radius * self.radius);
        let q = d.norm_sqr() * s;
        let zero = Jet {
            eta_x: 0.0,
            eta_y: 0.0,
            eta_xx: 0.0,
            eta_xy: 0.0,
            eta_yy: 0.0,
            lap_x: 0.0,
            lap_y: 0.0,
        };
        if q >= 1.0 {
            return zero;
        }
        let k = self.power as f64;
        let m = 1.0 - q;
        let p1 = -k * m.powi(self.power as i32 - 1);
        let p2 = k * (k - 1.0) * m.powi(self.power as i32 - 2);
        let p3 = -k * (k - 1.0) * (k - 2.0) * m.powi(self.power as i32 - 3);
        let (dx, dy) = (d.re, d.im);
        // Δη = 4s(P' + qP''), so ∂(Δη)/∂x = 8s²x(2P'' + qP''')
        let lap_q = 8.0 * s * s * (2.0 * p2 + q * p3);
        Jet {
            eta_x: 2.0 * s * dx * p1,
            eta_y: 2.0 * s * dy * p1,
            eta_xx: 2.0 * s * p1 + 4.0 * s * s * dx * dx * p2,
            eta_xy: 4.0 * s * s * dx * dy * p2,
            eta_yy: 2.0 * s * p1 + 4.0 * s * s * dy * dy * p2,
            lap_x: lap_q * dx,
            lap_y: lap_q * dy,
        }
    }

    /// `∇⊥η = (-η_y, η_x)`.
    pub fn field(&self, x: ComplexPoint) -> ComplexPoint {
        let j = self.jet(x);
        Complex64::new(-j.eta_y, j.eta_x)
    }

    /// `∂_x(-η_y) + ∂_y(η_x)`, each mixed derivative taken along its own chain rule.
    pub fn divergence(&self, x: ComplexPoint) -> f64 {
        let d = x - self.center;
        let s = 1.0 / (self.radius * self.radius);
        let q = d.norm_sqr() * s;
        if q >= 1.0 {
            return 0.0;
        }
        let k = self.power as f64;
        let p2 = k * (k - 1.0) * (1.0 - q).powi(self.power as i32 - 2);
        // η_y = 2s·y·P'(q), ∂_x q = 2s·x; η_x = 2s·x·P'(q), ∂_y q = 2s·y
        let dx_eta_y = (2.0 * s * d.im) * p2 * (2.0 * s * d.re);
        let dy_eta_x = (2.0 * s * d.re) * p2 * (2.0 * s * d.im);
        -dx_eta_y + dy_eta_x
    }

    /// Polar Gauss-trapezoid nodes and weights covering the support.
    pub fn nodes(&self) -> Vec<(ComplexPoint, f64)> {
        let (xs, ws) = gauss_legendre(RADIAL_NODES);
        let dphi = 2.0 * PI / ANGULAR_NODES as f64;
        let mut out = Vec::with_capacity(RADIAL_NODES * ANGULAR_NODES);
        for (&r, &wr) in xs.iter().zip(&ws) {
            let rho = 0.5 * self.radius * (r + 1.0);
            let w = 0.5 * self.radius * wr * rho * dphi;
            for m in 0..ANGULAR_NODES {
                let phi = (m as f64 + 0.5) * dphi;
                out.push((self.center + Complex64::from_polar(rho, phi), w));
            }
        }
        out
    }

    pub fn points(&self) -> Vec<ComplexPoint> {
        self.nodes().into_iter().map(|(x, _)| x).collect()
    }

    /// `∫ u·ψ_t + [(u·∇)ψ]·u + ν u·Δψ dx` at one time from velocities at `nodes()`.
    pub fn spatial_integral(&self, t: f64, nu: f64, u: &[ComplexPoint]) -> f64 {
        let (chi, chi_dot) = (self.chi(t), self.chi_dot(t));
        if chi == 0.0 && chi_dot == 0.0 {
            return 0.0;
        }
        self.nodes()
            .iter()
            .zip(u)
            .map(|(&(x, w), v)| {
                let j = self.jet(x);
                let (u1, u2) = (v.re, v.im);
                let time = chi_dot * (-u1 * j.eta_y + u2 * j.eta_x);
                let convective = chi * ((u2 * u2 - u1 * u1) * j.eta_xy + u1 * u2 * (j.eta_xx - j.eta_yy));
                let viscous = nu * chi * (-u1 * j.lap_y + u2 * j.lap_x);
                w * (time + convective + viscous)
            })
            .sum()
    }
}

/// `|∫∫ u·ψ_t + [(u·∇)ψ]·u + ν u·Δψ dx dt|` over the snapshots of `run`.
///
/// The test field's quadrature nodes must have been recorded as the probe group named after it.
pub fn weak_residual(run: &RunRecord, test: &TestField) -> Result<f64, SolverError> {
    let series = run.group_series(&test.name)?;
    if series.first().map(|s| s.1.len()) != Some(test.nodes().len()) {
        return Err(SolverError::MissingGroup(format!("{} (node count mismatch)", test.name)));
    }
    if series.first().map(|s| s.0) > Some(test.t0) || series.last().map(|s| s.0) < Some(test.t1) {
        return Err(SolverError::Support(format!("{}: snapshots do not cover the time window", test.name)));
    }
    let nu = run.config.nu;
    let values: Vec<(f64, f64)> = series
        .iter()
        .map(|(t, u)| (*t, test.spatial_integral(*t, nu, u)))
        .collect();
    let total: f64 = values.windows(2).map(|p| 0.5 * (p[1].0 - p[0].0) * (p[0].1 + p[1].1)).sum();
    Ok(total.abs())
}

#[cfg(test)]
mod tests {
    use super::super::{GridSpec, SolverConfig, Snapshot};
    use super::*;
    use crate::fields::{divergence_probe, FieldError};

    fn field() -> TestField {
        TestField::new("a", Complex64::new(0.0, 1.0), 0.5, 10, 0.1, 0.4)
    }

    #[test]
    fn test_field_is_divergence_free() {
        let f = field();
        let probe = |x: ComplexPoint| -> Result<ComplexPoint, FieldError> { Ok(f.field(x)) };
        for x in [Complex64::new(0.1, 1.2), Complex64::new(-0.2, 0.8), Complex64::new(0.3, 1.1)] {
            assert!(f.divergence(x).abs() <= 1e-10);
            assert!(divergence_probe(&probe, x, 1e-4).unwrap().abs() < 1e-4);
        }
    }

    #[test]
    fn jet_matches_finite_differences() {
        let f = field();
        let x = Complex64::new(0.15, 1.1);
        let h = 1e-5;
        let eta = |z: ComplexPoint| (1.0 - (z - f.center).norm_sqr() / 0.25).powi(10);
        let lap = |z: ComplexPoint| {
            let e = |dx: f64, dy: f64| eta(z + Complex64::new(dx, dy));
            let hh = 1e-4;
            (e(hh, 0.0) + e(-hh, 0.0) + e(0.0, hh) + e(0.0, -hh) - 4.0 * e(0.0, 0.0)) / (hh * hh)
        };
        let j = f.jet(x);
        let ex = (eta(x + h) - eta(x - h)) / (2.0 * h);
        assert!((j.eta_x - ex).abs() < 1e-6 * ex.abs().max(1.0));
        let hl = 1e-3;
        let lx = (lap(x + hl) - lap(x - hl)) / (2.0 * hl);
        assert!((j.lap_x - lx).abs() < 1e-2 * lx.abs().max(1.0), "{} {}", j.lap_x, lx);
    }

    #[test]
    fn zero_flow_has_zero_residual() {
        let f = field();
        let n = f.nodes().len();
        let mut run = RunRecord::new(GridSpec::default(), SolverConfig::default(), 0.0, &[(f.name.clone(), f.points())]);
        for s in 0..=50 {
            run.push_snapshot(Snapshot {
                t: s as f64 * 0.01,
                velocities: vec![Complex64::default(); n],
            })
            .unwrap();
        }
        assert_eq!(weak_residual(&run, &f).unwrap(), 0.0);
    }

    #[test]
    fn a_steady_uniform_flow_satisfies_the_weak_form() {
        // constant u solves Navier-Stokes; every term integrates to zero against compact ψ
        let f = field();
        let n = f.nodes().len();
        let mut run = RunRecord::new(GridSpec::default(), SolverConfig::default(), 0.0, &[(f.name.clone(), f.points())]);
        for s in 0..=50 {
            run.push_snapshot(Snapshot {
                t: s as f64 * 0.01,
                velocities: vec![Complex64::new(0.7, -0.3); n],
            })
            .unwrap();
        }
        assert!(weak_residual(&run, &f).unwrap() < 1e-10);
    }

    #[test]
    fn supports_near_the_curve_are_rejected() {
        let arc = JordanArc::segment();
        assert!(TestField::new("b", Complex64::new(0.0, 0.3), 0.25, 10, 0.1, 0.4).validate(&arc, 0.1, 0.5).is_err());
        assert!(field().validate(&arc, 0.1, 0.5).is_ok());
        assert!(field().validate(&arc, 0.1, 0.3).is_err());
    }
}
