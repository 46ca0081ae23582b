use num_complex::Complex64;

use super::LabError;
use crate::conformal::ObstacleFamily;
use crate::fields::{far_field_slope, VectorField};
use crate::fit::{loglog_fit, LogLogFit};

/// Slope of `log max_θ |u|` against `log r`; the radii must span at least a decade.
pub fn decay_fit(field: &dyn VectorField, radii: &[f64], angles: usize) -> Result<LogLogFit, LabError> {
    let lo = radii.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = radii.iter().cloned().fold(0.0, f64::max);
    if !(lo > 0.0 && hi >= 10.0 * lo) {
        return Err(LabError::Invalid(format!("radii must span a decade, got [{lo}, {hi}]")));
    }
    let fit = far_field_slope(field, radii, angles)?;
    if !fit.slope.is_finite() {
        return Err(LabError::Degenerate("field vanishes on the fitting circles".into()));
    }
    Ok(fit)
}

/// Slope of `log |u|` against the distance to the endpoint `±1`, approached along the axis.
pub fn endpoint_fit(field: &dyn VectorField, distances: &[f64], endpoint: f64) -> Result<LogLogFit, LabError> {
    if endpoint.abs() != 1.0 {
        return Err(LabError::Invalid(format!("endpoint must be +1 or -1, got {endpoint}")));
    }
    if distances.len() < 2 || distances.iter().any(|&d| !(d > 0.0 && d <= 0.1)) {
        return Err(LabError::Invalid("distances must lie in (0, 0.1]".into()));
    }
    let mags = distances
        .iter()
        .map(|&d| Ok(field.velocity(Complex64::new(endpoint * (1.0 + d), 0.0))?.norm()))
        .collect::<Result<Vec<f64>, LabError>>()?;
    loglog_fit(distances, &mags).ok_or_else(|| LabError::Degenerate("field vanishes along the axis".into()))
}

/// Like [`endpoint_fit`] but measured from the tip of `Γ_ε` beyond `±1`, where `u₀^ε` stays bounded.
pub fn tip_fit(field: &dyn VectorField, family: &ObstacleFamily, distances: &[f64], endpoint: f64) -> Result<LogLogFit, LabError> {
    if endpoint.abs() != 1.0 {
        return Err(LabError::Invalid(format!("endpoint must be +1 or -1, got {endpoint}")));
    }
    let theta = if endpoint > 0.0 { 0.0 } else { std::f64::consts::PI };
    let tip = family.boundary_point(theta)?;
    let mags = distances
        .iter()
        .map(|&d| Ok(field.velocity(tip + Complex64::new(endpoint * d, 0.0))?.norm()))
        .collect::<Result<Vec<f64>, LabError>>()?;
    loglog_fit(distances, &mags).ok_or_else(|| LabError::Degenerate("field vanishes along the axis".into()))
}

/// `n` points spaced evenly in `log` between `a` and `b`.
pub fn geometric(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| a * (b / a).powf(i as f64 / (n.max(2) - 1) as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::{ComplexPoint, ExteriorMap, ObstacleFamily};
    use crate::fields::{FieldError, FlowData, HarmonicField, InitialVelocity, BumpVorticity};

    #[test]
    fn synthetic_inverse_distance_decay() {
        let f = |x: ComplexPoint| -> Result<ComplexPoint, FieldError> { Ok(Complex64::new(0.0, 3.0) / x.norm()) };
        let fit = decay_fit(&f, &geometric(50.0, 800.0, 6), 16).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-6);
        assert!(fit.reliable);
    }

    #[test]
    fn synthetic_square_root_blow_up() {
        let f = |x: ComplexPoint| -> Result<ComplexPoint, FieldError> {
            Ok(Complex64::new((x.re - 1.0).abs().powf(-0.5), 0.0))
        };
        let fit = endpoint_fit(&f, &geometric(1e-4, 1e-2, 7), 1.0).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-6);
    }

    #[test]
    fn short_radius_span_is_rejected() {
        let f = |_: ComplexPoint| -> Result<ComplexPoint, FieldError> { Ok(Complex64::new(1.0, 0.0)) };
        assert!(decay_fit(&f, &[50.0, 100.0, 400.0], 8).is_err());
        assert!(endpoint_fit(&f, &[0.5, 0.01], 1.0).is_err());
        assert!(endpoint_fit(&f, &[0.05, 0.01], 0.5).is_err());
    }

    #[test]
    fn vanishing_field_is_degenerate() {
        let f = |_: ComplexPoint| -> Result<ComplexPoint, FieldError> { Ok(Complex64::new(0.0, 0.0)) };
        assert!(matches!(decay_fit(&f, &geometric(50.0, 800.0, 5), 8), Err(LabError::Field(_)) | Err(LabError::Degenerate(_))));
        assert!(matches!(endpoint_fit(&f, &geometric(1e-3, 1e-2, 5), -1.0), Err(LabError::Degenerate(_))));
    }

    #[test]
    fn harmonic_field_decays_like_inverse_distance() {
        let h = HarmonicField {
            family: ObstacleFamily::segment(0.1).unwrap(),
        };
        let fit = decay_fit(&h, &geometric(50.0, 800.0, 6), 32).unwrap();
        assert!((fit.slope + 1.0).abs() < 0.05, "{fit:?}");
    }

    #[test]
    fn limit_field_blows_up_like_inverse_square_root() {
        let flow = FlowData::new(1.0, 0.01, BumpVorticity::zero()).unwrap();
        let u0 = InitialVelocity::limit(&flow, ExteriorMap::segment()).unwrap();
        let fit = endpoint_fit(&u0, &geometric(1e-4, 1e-2, 9), 1.0).unwrap();
        assert!((fit.slope + 0.5).abs() < 0.05, "{fit:?}");
        // with ω₀ = 0 the field is α·H, and H does not depend on ε
        let fam = ObstacleFamily::segment(0.1).unwrap();
        let ue = InitialVelocity::new(&flow, fam).unwrap();
        for d in geometric(1e-2, 1e-1, 5) {
            let x = Complex64::new(1.01 + d, 0.0);
            let (a, b) = (ue.velocity(x).unwrap(), u0.velocity(x).unwrap());
            assert!((a - b).norm() < 1e-12 * b.norm(), "{a} {b}");
        }
        // but Ω_ε swallows the singular point, so from its tip the field is bounded
        let tip = fam.boundary_point(0.0).unwrap().re;
        assert!((tip - 0.5 * (1.1 + 1.0 / 1.1)).abs() < 1e-12);
        let fit = tip_fit(&ue, &fam, &geometric(1e-7, 1e-5, 5), 1.0).unwrap();
        assert!(fit.slope.abs() < 0.05, "{fit:?}");
        let fit = tip_fit(&ue, &fam, &geometric(1e-7, 1e-5, 5), -1.0).unwrap();
        assert!(fit.slope.abs() < 0.05, "{fit:?}");
    }
}
