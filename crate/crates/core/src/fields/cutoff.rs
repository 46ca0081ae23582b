use serde::{Deserialize, Serialize};

use super::FieldError;
use crate::conformal::{ComplexPoint, ObstacleFamily};

/// Smooth step `Φ` rescaled by `λ`: `Φ^{ε,λ}(x) = Φ((|T_ε(x)| - 1)/λ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffProfile {
    pub lambda: f64,
}

fn f(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

fn df(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp() / (t * t)
    } else {
        0.0
    }
}

impl CutoffProfile {
    pub fn new(lambda: f64) -> Result<Self, FieldError> {
        if !(lambda >= 2.0 && lambda.is_finite()) {
            return Err(FieldError::Invalid(format!("cutoff lambda must be >= 2, got {lambda}")));
        }
        Ok(CutoffProfile { lambda })
    }

    /// `Φ(s)`: 0 for `s ≤ 1`, 1 for `s ≥ 2`.
    pub fn profile(s: f64) -> f64 {
        let a = f(s - 1.0);
        let b = f(2.0 - s);
        if a + b == 0.0 {
            return if s >= 2.0 { 1.0 } else { 0.0 };
        }
        a / (a + b)
    }

    pub fn profile_derivative(s: f64) -> f64 {
        let a = f(s - 1.0);
        let b = f(2.0 - s);
        let den = a + b;
        if den == 0.0 {
            return 0.0;
        }
        (df(s - 1.0) * b + a * df(2.0 - s)) / (den * den)
    }

    /// Value at a point whose image modulus is `r = |T_ε(x)|`.
    pub fn at_modulus(&self, r: f64) -> f64 {
        Self::profile((r - 1.0) / self.lambda)
    }
}

pub fn cutoff_eval(profile: &CutoffProfile, family: &ObstacleFamily, x: ComplexPoint) -> Result<f64, FieldError> {
    let w = family.map(x)?;
    Ok(profile.at_modulus(w.norm()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn anchor_values() {
        assert_eq!(CutoffProfile::profile(1.0), 0.0);
        assert_eq!(CutoffProfile::profile(0.3), 0.0);
        assert_eq!(CutoffProfile::profile(2.0), 1.0);
        assert_eq!(CutoffProfile::profile(7.0), 1.0);
        assert!((CutoffProfile::profile(1.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn derivative_matches_differences() {
        for &s in &[1.1, 1.3, 1.5, 1.8, 1.95] {
            let h = 1e-6;
            let fd = (CutoffProfile::profile(s + h) - CutoffProfile::profile(s - h)) / (2.0 * h);
            assert!((fd - CutoffProfile::profile_derivative(s)).abs() < 1e-7, "s={s}");
            assert!(CutoffProfile::profile_derivative(s) > 0.0);
        }
    }

    #[test]
    fn evaluates_through_the_map() {
        let fam = ObstacleFamily::segment(0.1).unwrap();
        let p = CutoffProfile::new(4.0).unwrap();
        // |T_ε(x)| = ρ on the real axis at x = T⁻¹((1+ε)ρ)
        let at = |rho: f64| fam.inverse(Complex64::new(rho, 0.0)).unwrap();
        assert_eq!(cutoff_eval(&p, &fam, at(3.0)).unwrap(), 0.0);
        assert_eq!(cutoff_eval(&p, &fam, at(13.0)).unwrap(), 1.0);
        assert!((cutoff_eval(&p, &fam, at(7.0)).unwrap() - 0.5).abs() < 1e-12);
        assert!(CutoffProfile::new(1.5).is_err());
    }
}
