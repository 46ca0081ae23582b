//! Exterior conformal maps of a Jordan arc and the shrinking-obstacle family.
//!
//! The plane is identified with `C`. For a holomorphic map the real Jacobian
//! acts on a vector as multiplication by `T'(z)`, its transpose as
//! multiplication by `conj(T'(z))`, and the perp rotation `v ↦ v⊥` as
//! multiplication by `i`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::quadrature::{gauss_legendre, Rule};

pub type ComplexPoint = Complex64;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error("point {0} lies on the branch cut and no side was supplied")]
    BranchAmbiguity(ComplexPoint),
    #[error("map derivative is singular at the arc endpoint {0}")]
    Singularity(ComplexPoint),
    #[error("image point {w} has modulus {modulus} < 1")]
    OutsideImage { w: ComplexPoint, modulus: f64 },
    #[error("point {z} lies inside the obstacle (|T(z)| = {modulus}, boundary level {level})")]
    InsideObstacle {
        z: ComplexPoint,
        modulus: f64,
        level: f64,
    },
    #[error("arc parameter {0} is not in the open interval (0, 1)")]
    Endpoint(f64),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

/// Side of the arc for one-sided traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Above,
    Below,
}

/// Shapes of arcs with an explicit exterior map. Only the flat plate ships.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArcKind {
    #[default]
    Segment,
}

/// The limit curve, normalized so that its endpoints are `-1` and `+1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct JordanArc {
    pub kind: ArcKind,
}

impl JordanArc {
    pub fn segment() -> Self {
        JordanArc {
            kind: ArcKind::Segment,
        }
    }

    pub fn endpoints(&self) -> (ComplexPoint, ComplexPoint) {
        (Complex64::new(-1.0, 0.0), Complex64::new(1.0, 0.0))
    }

    /// Arc point at parameter `s ∈ [0, 1]`.
    pub fn point(&self, s: f64) -> ComplexPoint {
        match self.kind {
            ArcKind::Segment => Complex64::new(2.0 * s - 1.0, 0.0),
        }
    }

    /// Unit tangent in the direction of increasing `s`.
    pub fn tangent(&self, _s: f64) -> ComplexPoint {
        match self.kind {
            ArcKind::Segment => Complex64::new(1.0, 0.0),
        }
    }

    /// Arc length per unit parameter.
    pub fn speed(&self, _s: f64) -> f64 {
        match self.kind {
            ArcKind::Segment => 2.0,
        }
    }

    pub fn distance(&self, z: ComplexPoint) -> f64 {
        match self.kind {
            ArcKind::Segment => {
                let x = z.re.clamp(-1.0, 1.0);
                (z - Complex64::new(x, 0.0)).norm()
            }
        }
    }

    /// Whether the closed straight segment `[a, b]` meets the arc.
    pub fn crossed_by(&self, a: ComplexPoint, b: ComplexPoint) -> bool {
        match self.kind {
            ArcKind::Segment => {
                if a.im == 0.0 && b.im == 0.0 {
                    let (lo, hi) = if a.re < b.re { (a.re, b.re) } else { (b.re, a.re) };
                    return hi >= -1.0 && lo <= 1.0;
                }
                if (a.im > 0.0 && b.im > 0.0) || (a.im < 0.0 && b.im < 0.0) {
                    return false;
                }
                let t = a.im / (a.im - b.im);
                let x = a.re + t * (b.re - a.re);
                (-1.0..=1.0).contains(&x)
            }
        }
    }
}

/// Principal branch of `sqrt(1 - 1/z²)`, written as `(z-1)(z+1)/z²` to keep
/// accuracy near the endpoints.
fn segment_root(z: ComplexPoint) -> ComplexPoint {
    ((z - 1.0) * (z + 1.0) / (z * z)).sqrt()
}

fn on_segment_cut(z: ComplexPoint) -> bool {
    z.im == 0.0 && z.re.abs() < 1.0
}

/// `T(z) = z + sqrt(z² - 1)` with `T(z)/z → 2` at infinity; cut on `[-1, 1]`.
pub fn segment_exterior_map(z: ComplexPoint) -> Result<ComplexPoint, MapError> {
    if on_segment_cut(z) {
        return Err(MapError::BranchAmbiguity(z));
    }
    if z.im == 0.0 && z.re.abs() == 1.0 {
        return Ok(z);
    }
    Ok(z * (1.0 + segment_root(z)))
}

/// `T'(z) = 1 + z / sqrt(z² - 1)` on the same branch as [`segment_exterior_map`].
pub fn segment_exterior_derivative(z: ComplexPoint) -> Result<ComplexPoint, MapError> {
    if z.im == 0.0 && z.re.abs() == 1.0 {
        return Err(MapError::Singularity(z));
    }
    if on_segment_cut(z) {
        return Err(MapError::BranchAmbiguity(z));
    }
    let s = segment_root(z);
    Ok(1.0 + 1.0 / s)
}

/// `T''(z) = -(z² - 1)^(-3/2)`.
pub fn segment_exterior_second_derivative(z: ComplexPoint) -> Result<ComplexPoint, MapError> {
    if z.im == 0.0 && z.re.abs() == 1.0 {
        return Err(MapError::Singularity(z));
    }
    if on_segment_cut(z) {
        return Err(MapError::BranchAmbiguity(z));
    }
    let r = z * segment_root(z);
    Ok(-1.0 / (r * r * r))
}

/// Joukowski inverse `z = (w + 1/w)/2` on `|w| ≥ 1`.
pub fn segment_inverse(w: ComplexPoint) -> Result<ComplexPoint, MapError> {
    let modulus = w.norm();
    if !(modulus >= 1.0 - 1e-13) {
        return Err(MapError::OutsideImage { w, modulus });
    }
    Ok(0.5 * (w + 1.0 / w))
}

fn segment_inverse_derivative(w: ComplexPoint) -> ComplexPoint {
    0.5 * (1.0 - 1.0 / (w * w))
}

/// Closed-form one-sided limits of `T` and `T'` on the open segment.
pub fn one_sided_map_trace(s: f64, side: Side) -> Result<(ComplexPoint, ComplexPoint), MapError> {
    if !(s > 0.0 && s < 1.0) {
        return Err(MapError::Endpoint(s));
    }
    let x = 2.0 * s - 1.0;
    let r = ((1.0 - x) * (1.0 + x)).sqrt();
    Ok(match side {
        Side::Above => (Complex64::new(x, r), Complex64::new(1.0, -x / r)),
        Side::Below => (Complex64::new(x, -r), Complex64::new(1.0, x / r)),
    })
}

/// A biholomorphism from the exterior of the arc onto the exterior of the unit disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExteriorMap {
    pub kind: ArcKind,
}

impl ExteriorMap {
    pub fn segment() -> Self {
        ExteriorMap {
            kind: ArcKind::Segment,
        }
    }

    pub fn arc(&self) -> JordanArc {
        JordanArc { kind: self.kind }
    }

    pub fn eval(&self, z: ComplexPoint) -> Result<ComplexPoint, MapError> {
        match self.kind {
            ArcKind::Segment => segment_exterior_map(z),
        }
    }

    pub fn deriv(&self, z: ComplexPoint) -> Result<ComplexPoint, MapError> {
        match self.kind {
            ArcKind::Segment => segment_exterior_derivative(z),
        }
    }

    pub fn second_deriv(&self, z: ComplexPoint) -> Result<ComplexPoint, MapError> {
        match self.kind {
            ArcKind::Segment => segment_exterior_second_derivative(z),
        }
    }

    pub fn inverse(&self, w: ComplexPoint) -> Result<ComplexPoint, MapError> {
        match self.kind {
            ArcKind::Segment => segment_inverse(w),
        }
    }

    pub fn inverse_deriv(&self, w: ComplexPoint) -> Result<ComplexPoint, MapError> {
        let modulus = w.norm();
        if !(modulus >= 1.0 - 1e-13) {
            return Err(MapError::OutsideImage { w, modulus });
        }
        match self.kind {
            ArcKind::Segment => Ok(segment_inverse_derivative(w)),
        }
    }

    /// Real coefficient of the linear growth `T(z) ≈ β z` at infinity.
    pub fn farfield_beta(&self) -> f64 {
        match self.kind {
            ArcKind::Segment => 2.0,
        }
    }

    pub fn trace(&self, s: f64, side: Side) -> Result<(ComplexPoint, ComplexPoint), MapError> {
        match self.kind {
            ArcKind::Segment => one_sided_map_trace(s, side),
        }
    }
}

/// `z` together with `T_ε(z)` and `T_ε'(z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapPoint {
    pub z: ComplexPoint,
    pub w: ComplexPoint,
    pub dw: ComplexPoint,
}

impl MapPoint {
    /// `T'/T`, the derivative of `log T`.
    pub fn log_derivative(&self) -> ComplexPoint {
        self.dw / self.w
    }
}

/// The family `T_ε = T / (1 + ε)` whose obstacles `Ω_ε = T⁻¹(B(0, 1+ε) \ D)`
/// shrink to the arc as `ε → 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstacleFamily {
    pub base: ExteriorMap,
    pub epsilon: f64,
}

impl ObstacleFamily {
    pub fn new(base: ExteriorMap, epsilon: f64) -> Result<Self, MapError> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(MapError::Invalid(format!("epsilon must be finite and >= 0, got {epsilon}")));
        }
        Ok(ObstacleFamily { base, epsilon })
    }

    pub fn segment(epsilon: f64) -> Result<Self, MapError> {
        Self::new(ExteriorMap::segment(), epsilon)
    }

    /// The limit problem: exterior of the arc itself.
    pub fn limit(base: ExteriorMap) -> Self {
        ObstacleFamily { base, epsilon: 0.0 }
    }

    pub fn scale(&self) -> f64 {
        1.0 + self.epsilon
    }

    pub fn arc(&self) -> JordanArc {
        self.base.arc()
    }

    fn checked_base(&self, z: ComplexPoint) -> Result<ComplexPoint, MapError> {
        let w = self.base.eval(z)?;
        if self.epsilon > 0.0 {
            let modulus = w.norm();
            let level = self.scale();
            if modulus < level * (1.0 - 1e-12) {
                return Err(MapError::InsideObstacle { z, modulus, level });
            }
        }
        Ok(w)
    }

    pub fn map(&self, z: ComplexPoint) -> Result<ComplexPoint, MapError> {
        Ok(self.checked_base(z)? / self.scale())
    }

    pub fn derivative(&self, z: ComplexPoint) -> Result<ComplexPoint, MapError> {
        self.checked_base(z)?;
        Ok(self.base.deriv(z)? / self.scale())
    }

    pub fn second_derivative(&self, z: ComplexPoint) -> Result<ComplexPoint, MapError> {
        self.checked_base(z)?;
        Ok(self.base.second_deriv(z)? / self.scale())
    }

    pub fn inverse(&self, w: ComplexPoint) -> Result<ComplexPoint, MapError> {
        let modulus = w.norm();
        if !(modulus >= 1.0 - 1e-13) {
            return Err(MapError::OutsideImage { w, modulus });
        }
        self.base.inverse(self.scale() * w)
    }

    pub fn inverse_derivative(&self, w: ComplexPoint) -> Result<ComplexPoint, MapError> {
        let modulus = w.norm();
        if !(modulus >= 1.0 - 1e-13) {
            return Err(MapError::OutsideImage { w, modulus });
        }
        Ok(self.scale() * self.base.inverse_deriv(self.scale() * w)?)
    }

    /// `T_ε` and `T_ε'` at `z` in one call.
    pub fn point(&self, z: ComplexPoint) -> Result<MapPoint, MapError> {
        let w = self.checked_base(z)?;
        let dw = self.base.deriv(z)?;
        let s = self.scale();
        Ok(MapPoint {
            z,
            w: w / s,
            dw: dw / s,
        })
    }

    /// One-sided trace on the arc; only meaningful for the limit map (ε = 0).
    pub fn trace_point(&self, s: f64, side: Side) -> Result<MapPoint, MapError> {
        if self.epsilon != 0.0 {
            return Err(MapError::Invalid(
                "one-sided traces exist only for the limit map".into(),
            ));
        }
        let (w, dw) = self.base.trace(s, side)?;
        Ok(MapPoint {
            z: self.arc().point(s),
            w,
            dw,
        })
    }

    /// Whether `z` is strictly outside the obstacle.
    pub fn is_exterior(&self, z: ComplexPoint) -> bool {
        match self.base.eval(z) {
            Ok(w) => self.epsilon == 0.0 || w.norm() > self.scale(),
            Err(_) => false,
        }
    }

    /// Physical point with log-polar image coordinates `(σ, θ)`.
    pub fn from_log_polar(&self, sigma: f64, theta: f64) -> Result<ComplexPoint, MapError> {
        self.inverse(Complex64::from_polar(sigma.exp(), theta))
    }

    /// Point of `Γ_ε` at image angle `θ`.
    pub fn boundary_point(&self, theta: f64) -> Result<ComplexPoint, MapError> {
        self.from_log_polar(0.0, theta)
    }
}

/// Counterclockwise samples of `Γ_ε` at equally spaced image angles.
pub fn boundary_sample(family: &ObstacleFamily, n: usize) -> Result<Vec<ComplexPoint>, MapError> {
    if n < 4 {
        return Err(MapError::Invalid(format!("need at least 4 boundary samples, got {n}")));
    }
    if !(family.epsilon > 0.0) {
        return Err(MapError::Invalid("boundary sampling needs epsilon > 0".into()));
    }
    (0..n)
        .map(|k| family.boundary_point(2.0 * PI * k as f64 / n as f64))
        .collect()
}

/// Winding number of a closed polygon about `p`.
pub fn winding_number(polygon: &[ComplexPoint], p: ComplexPoint) -> i64 {
    let n = polygon.len();
    let mut total = 0.0;
    for k in 0..n {
        let a = polygon[k] - p;
        let b = polygon[(k + 1) % n] - p;
        total += (b / a).arg();
    }
    (total / (2.0 * PI)).round() as i64
}

/// One row of the obstacle-family diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionRow {
    pub epsilon: f64,
    /// sup |(T_ε − T)/T| over a sample cloud of Π_ε.
    pub sup_relative_deviation: f64,
    /// sup |det D(T_ε⁻¹)| over a sample cloud of the unit-disk exterior.
    pub sup_inverse_jacobian: f64,
    /// ‖DT_ε − DT‖ in L³(B(0,R) ∩ Π_ε), sleeve around the arc excluded.
    pub l3_derivative_deviation: f64,
    /// sup |DT_ε| outside B(0,R).
    pub sup_derivative_outside: f64,
    /// sup |x|·|D²T_ε(x)| outside B(0,R).
    pub sup_weighted_second_derivative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub radius: f64,
    pub sleeve: f64,
    pub cells: usize,
    pub order: usize,
    pub rows: Vec<AssumptionRow>,
    pub relative_deviation_decreasing: bool,
    pub l3_deviation_decreasing: bool,
}

/// Settings for [`assumption_check`].
#[derive(Debug, Clone, Copy)]
pub struct AssumptionSettings {
    pub cells: usize,
    pub order: usize,
    pub sleeve: f64,
}

impl Default for AssumptionSettings {
    fn default() -> Self {
        AssumptionSettings {
            cells: 64,
            order: 20,
            sleeve: 1e-3,
        }
    }
}

fn strictly_decreasing(values: impl IntoIterator<Item = f64>) -> bool {
    let v: Vec<f64> = values.into_iter().collect();
    v.windows(2).all(|w| w[1] < w[0])
}

/// Numerical estimates of the five obstacle-family conditions along an ε ladder.
pub fn assumption_check(
    base: ExteriorMap,
    epsilons: &[f64],
    radius: f64,
    settings: AssumptionSettings,
) -> Result<AssumptionReport, MapError> {
    if epsilons.is_empty() || !strictly_decreasing(epsilons.iter().copied()) {
        return Err(MapError::Invalid("epsilon list must be non-empty and strictly decreasing".into()));
    }
    if !(radius >= 4.0) {
        return Err(MapError::Invalid(format!("radius must be >= 4, got {radius}")));
    }
    let arc = base.arc();
    let (gx, gw) = gauss_legendre(settings.order);
    let cell = 2.0 * radius / settings.cells as f64;

    let mut rows = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let family = ObstacleFamily::new(base, eps)?;
        let scale = family.scale();

        // (i) relative deviation on a log-polar cloud of Π_ε
        let mut sup_dev: f64 = 0.0;
        for i in 0..=48 {
            let rho = scale * 10f64.powf(5.0 * i as f64 / 48.0);
            for k in 0..64 {
                let w = Complex64::from_polar(rho, 2.0 * PI * (k as f64 + 0.5) / 64.0);
                let z = base.inverse(w)?;
                let t = base.eval(z)?;
                let te = family.map(z)?;
                sup_dev = sup_dev.max(((te - t) / t).norm());
            }
        }

        // (ii) inverse Jacobian determinant on the image exterior
        let mut sup_det: f64 = 0.0;
        for i in 0..=48 {
            let rho = 10f64.powf(4.0 * i as f64 / 48.0);
            for k in 0..256 {
                let w = Complex64::from_polar(rho, 2.0 * PI * k as f64 / 256.0);
                sup_det = sup_det.max(family.inverse_derivative(w)?.norm_sqr());
            }
        }

        // (iii) L³ deviation of the derivative by cellwise tensor Gauss-Legendre
        let mut l3 = 0.0;
        for cy in 0..settings.cells {
            let y0 = -radius + cy as f64 * cell;
            for cx in 0..settings.cells {
                let x0 = -radius + cx as f64 * cell;
                for (yi, wy) in gx.iter().zip(&gw) {
                    let y = y0 + 0.5 * cell * (1.0 + yi);
                    for (xi, wx) in gx.iter().zip(&gw) {
                        let x = x0 + 0.5 * cell * (1.0 + xi);
                        let z = Complex64::new(x, y);
                        if z.norm() >= radius || arc.distance(z) <= settings.sleeve {
                            continue;
                        }
                        if !family.is_exterior(z) {
                            continue;
                        }
                        let d = base.deriv(z)?;
                        let dev = (d / scale - d).norm();
                        l3 += 0.25 * cell * cell * wx * wy * dev.powi(3);
                    }
                }
            }
        }

        // (iv), (v) on circles outside B(0,R)
        let mut sup_d: f64 = 0.0;
        let mut sup_d2: f64 = 0.0;
        for i in 0..=40 {
            let r = radius * 10f64.powf(4.0 * i as f64 / 40.0);
            for k in 0..128 {
                let z = Complex64::from_polar(r, 2.0 * PI * (k as f64 + 0.25) / 128.0);
                sup_d = sup_d.max(family.derivative(z)?.norm());
                sup_d2 = sup_d2.max(r * family.second_derivative(z)?.norm());
            }
        }

        rows.push(AssumptionRow {
            epsilon: eps,
            sup_relative_deviation: sup_dev,
            sup_inverse_jacobian: sup_det,
            l3_derivative_deviation: l3.cbrt(),
            sup_derivative_outside: sup_d,
            sup_weighted_second_derivative: sup_d2,
        });
    }
    Ok(AssumptionReport {
        radius,
        sleeve: settings.sleeve,
        cells: settings.cells,
        order: settings.order,
        relative_deviation_decreasing: strictly_decreasing(rows.iter().map(|r| r.sup_relative_deviation)),
        l3_deviation_decreasing: strictly_decreasing(rows.iter().map(|r| r.l3_derivative_deviation)),
        rows,
    })
}

/// `∫ |T'|^p` over the annulus `a < |z - endpoint| < b` (exterior of the arc),
/// in polar coordinates about the endpoint. Used to probe local integrability.
pub fn endpoint_annulus_integral(
    base: ExteriorMap,
    endpoint: ComplexPoint,
    inner: f64,
    outer: f64,
    p: f64,
) -> Result<f64, MapError> {
    // The arc leaves +1 towards angle π and -1 towards angle 0; keep the open
    // angular interval that avoids it so the integrand is smooth.
    let (lo, hi) = if endpoint.re > 0.0 { (-PI, PI) } else { (0.0, 2.0 * PI) };
    let rr = Rule::composite(inner.ln(), outer.ln(), 4, 16);
    let tr = Rule::composite(lo, hi, 16, 16);
    let mut total = 0.0;
    for (&lr, &wr) in rr.nodes.iter().zip(&rr.weights) {
        let r = lr.exp();
        for (&t, &wt) in tr.nodes.iter().zip(&tr.weights) {
            let z = endpoint + Complex64::from_polar(r, t);
            let z = if z.im == 0.0 { z + Complex64::new(0.0, 1e-300) } else { z };
            total += wr * wt * r * r * base.deriv(z)?.norm().powf(p);
        }
    }
    Ok(total)
}

/// Matrix form of multiplication by a complex number: `[[re, -im], [im, re]]`.
pub fn complex_as_matrix(c: ComplexPoint) -> [[f64; 2]; 2] {
    [[c.re, -c.im], [c.im, c.re]]
}

pub fn mat_vec(m: [[f64; 2]; 2], v: ComplexPoint) -> ComplexPoint {
    Complex64::new(m[0][0] * v.re + m[0][1] * v.im, m[1][0] * v.re + m[1][1] * v.im)
}

pub fn transpose(m: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [[m[0][0], m[1][0]], [m[0][1], m[1][1]]]
}

/// `v⊥ = (-v₂, v₁)`.
pub fn perp(v: ComplexPoint) -> ComplexPoint {
    I * v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> ComplexPoint {
        Complex64::new(re, im)
    }

    #[test]
    fn endpoints_are_fixed() {
        assert_eq!(segment_exterior_map(c(1.0, 0.0)).unwrap(), c(1.0, 0.0));
        assert_eq!(segment_exterior_map(c(-1.0, 0.0)).unwrap(), c(-1.0, 0.0));
    }

    #[test]
    fn map_at_two() {
        let w = segment_exterior_map(c(2.0, 0.0)).unwrap();
        let want = 2.0 + 3f64.sqrt();
        assert!((w.re - want).abs() < 1e-14 && w.im == 0.0);
        // round trip through the Joukowski form
        let back = 0.5 * (w + 1.0 / w);
        assert!((back - c(2.0, 0.0)).norm() < 1e-14);
        assert!((segment_inverse(w).unwrap() - c(2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn cut_is_ambiguous_without_side() {
        assert_eq!(
            segment_exterior_map(c(0.5, 0.0)),
            Err(MapError::BranchAmbiguity(c(0.5, 0.0)))
        );
        assert!(matches!(segment_exterior_derivative(c(0.0, 0.0)), Err(MapError::BranchAmbiguity(_))));
        assert!(matches!(segment_exterior_derivative(c(1.0, 0.0)), Err(MapError::Singularity(_))));
    }

    #[test]
    fn upper_side_limit_lands_on_circle() {
        for h in [1e-8, 1e-10, 1e-12] {
            let w = segment_exterior_map(c(0.5, h)).unwrap();
            assert!((w - c(0.5, 0.75f64.sqrt())).norm() < 1e-6);
        }
        let (w, _) = one_sided_map_trace(0.75, Side::Above).unwrap();
        assert!((w - c(0.5, 0.75f64.sqrt())).norm() < 1e-15);
        assert!((w.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn derivative_at_two_matches_finite_difference() {
        let d = segment_exterior_derivative(c(2.0, 0.0)).unwrap();
        assert!((d.re - (1.0 + 2.0 / 3f64.sqrt())).abs() < 1e-14);
        let h = 1e-6;
        let fd = (segment_exterior_map(c(2.0 + h, 0.0)).unwrap() - segment_exterior_map(c(2.0 - h, 0.0)).unwrap())
            / (2.0 * h);
        assert!((fd - d).norm() / d.norm() < 1e-6);
    }

    #[test]
    fn second_derivative_matches_finite_difference() {
        for z in [c(2.0, 0.5), c(-0.3, 0.8), c(0.9, -0.1)] {
            let h = 1e-5;
            let fd = (segment_exterior_derivative(z + h).unwrap() - segment_exterior_derivative(z - h).unwrap())
                / (2.0 * h);
            let d2 = segment_exterior_second_derivative(z).unwrap();
            assert!((fd - d2).norm() / d2.norm() < 1e-6, "{z}: {fd} vs {d2}");
        }
    }

    #[test]
    fn derivative_far_field() {
        let d = segment_exterior_derivative(c(1e6, 3e5)).unwrap();
        assert!((d - c(2.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn inverse_rejects_interior_of_disk() {
        assert!(matches!(segment_inverse(c(0.5, 0.0)), Err(MapError::OutsideImage { .. })));
        assert_eq!(segment_inverse(c(1.0, 0.0)).unwrap(), c(1.0, 0.0));
        for k in 0..16 {
            let t = 2.0 * PI * k as f64 / 16.0;
            let z = segment_inverse(Complex64::from_polar(1.0, t)).unwrap();
            assert!((z.re - t.cos()).abs() < 1e-15 && z.im.abs() < 1e-15);
        }
    }

    #[test]
    fn trace_derivative_matches_offset_limits() {
        let (_, d_above) = one_sided_map_trace(0.5, Side::Above).unwrap();
        assert!((d_above - c(1.0, 0.0)).norm() < 1e-15);
        for s in [0.2, 0.5, 0.8] {
            let x = 2.0 * s - 1.0;
            for (side, sign) in [(Side::Above, 1.0), (Side::Below, -1.0)] {
                let (w, d) = one_sided_map_trace(s, side).unwrap();
                for off in [1e-4, 1e-6] {
                    let z = c(x, sign * off);
                    let dz = segment_exterior_derivative(z).unwrap();
                    let wz = segment_exterior_map(z).unwrap();
                    // T' varies like sqrt of the offset only at endpoints; here O(off)
                    assert!((dz - d).norm() < 10.0 * off, "s={s} off={off}");
                    assert!((wz - w).norm() < 10.0 * off);
                }
            }
            let (wa, _) = one_sided_map_trace(s, Side::Above).unwrap();
            let (wb, _) = one_sided_map_trace(s, Side::Below).unwrap();
            assert!((wa - wb.conj()).norm() < 1e-15);
        }
        assert_eq!(one_sided_map_trace(0.0, Side::Above), Err(MapError::Endpoint(0.0)));
        assert_eq!(one_sided_map_trace(1.0, Side::Below), Err(MapError::Endpoint(1.0)));
    }

    #[test]
    fn family_degenerates_at_zero() {
        let fam = ObstacleFamily::segment(0.0).unwrap();
        let base = ExteriorMap::segment();
        for k in 0..20 {
            let z = c(-3.0 + 0.3 * k as f64, 0.7 - 0.07 * k as f64 + 1e-3);
            assert_eq!(fam.map(z).unwrap(), base.eval(z).unwrap());
            assert_eq!(fam.derivative(z).unwrap(), base.deriv(z).unwrap());
        }
    }

    #[test]
    fn family_values() {
        let fam = ObstacleFamily::segment(0.1).unwrap();
        let w = fam.map(c(2.0, 0.0)).unwrap();
        assert!((w.re - (2.0 + 3f64.sqrt()) / 1.1).abs() < 1e-14);
        assert!((fam.inverse(w).unwrap() - c(2.0, 0.0)).norm() < 1e-14);
        let z = fam.inverse(c(1.0, 0.0)).unwrap();
        assert!((segment_exterior_map(z).unwrap().norm() - 1.1).abs() < 1e-12);
        assert!(matches!(fam.map(c(0.0, 0.01)), Err(MapError::InsideObstacle { .. })));
        assert!(ObstacleFamily::segment(-0.1).is_err());
    }

    #[test]
    fn boundary_samples_enclose_the_arc() {
        let fam = ObstacleFamily::segment(0.1).unwrap();
        let four = boundary_sample(&fam, 4).unwrap();
        for z in &four {
            assert!((segment_exterior_map(*z).unwrap().norm() - 1.1).abs() < 1e-12);
        }
        let poly = boundary_sample(&fam, 256).unwrap();
        assert_eq!(winding_number(&poly, c(1.0, 0.0)), 1);
        assert_eq!(winding_number(&poly, c(-1.0, 0.0)), 1);
        assert_eq!(winding_number(&poly, c(0.0, 0.0)), 1);
        let arc = fam.arc();
        let spread = |eps: f64| {
            let f = ObstacleFamily::segment(eps).unwrap();
            boundary_sample(&f, 256)
                .unwrap()
                .iter()
                .map(|z| arc.distance(*z))
                .fold(0.0, f64::max)
        };
        assert!(spread(0.01) < spread(0.1));
        assert!(boundary_sample(&fam, 3).is_err());
        assert!(boundary_sample(&ObstacleFamily::segment(0.0).unwrap(), 16).is_err());
    }

    #[test]
    fn complex_and_matrix_forms_agree() {
        let mut seed = 12345u64;
        let mut rnd = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) * 6.0 - 3.0
        };
        for _ in 0..200 {
            let z = c(rnd(), rnd());
            if on_segment_cut(z) {
                continue;
            }
            let v = c(rnd(), rnd());
            let d = segment_exterior_derivative(z).unwrap();
            // Jacobian assembled from finite-difference-free partials: ∂T/∂x = T', ∂T/∂y = iT'
            let jac = [[d.re, (I * d).re], [d.im, (I * d).im]];
            let scale = d.norm() * v.norm();
            assert!((mat_vec(jac, v) - d * v).norm() <= 1e-12 * scale);
            assert!((mat_vec(transpose(jac), v) - d.conj() * v).norm() <= 1e-12 * scale);
            let rot = [[0.0, -1.0], [1.0, 0.0]];
            assert!((mat_vec(rot, v) - perp(v)).norm() <= 1e-12 * v.norm());
            assert_eq!(complex_as_matrix(d), jac);
        }
    }

    #[test]
    fn crossing_test() {
        let arc = JordanArc::segment();
        assert!(arc.crossed_by(c(0.0, 0.1), c(0.0, -0.1)));
        assert!(!arc.crossed_by(c(2.0, 0.1), c(2.0, -0.1)));
        assert!(!arc.crossed_by(c(0.0, 0.1), c(0.0, 0.3)));
        assert!(arc.crossed_by(c(0.9, 0.0), c(1.2, 0.0)));
    }

    #[test]
    fn assumption_suite_on_the_segment_family() {
        let eps = [0.2, 0.1, 0.05];
        let settings = AssumptionSettings {
            cells: 16,
            order: 8,
            sleeve: 1e-3,
        };
        let r = assumption_check(ExteriorMap::segment(), &eps, 4.0, settings).unwrap();
        for (row, e) in r.rows.iter().zip(eps) {
            // (T_ε - T)/T = -ε/(1+ε) everywhere
            assert!((row.sup_relative_deviation - e / (1.0 + e)).abs() < 1e-12);
        }
        assert!(r.relative_deviation_decreasing && r.l3_deviation_decreasing);
        assert!(assumption_check(ExteriorMap::segment(), &[0.1, 0.2], 4.0, settings).is_err());
    }
}
