use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{FieldError, VectorField, I};
use crate::conformal::{ComplexPoint, MapError, ObstacleFamily};

/// A closed curve parametrized over `t ∈ [0, 1)`, returning the point and `dz/dt`.
pub trait Contour: Sync {
    fn eval(&self, t: f64) -> Result<(ComplexPoint, ComplexPoint), FieldError>;

    /// Point counts are rounded up to a multiple of this.
    fn granularity(&self) -> usize {
        1
    }
}

/// Counterclockwise circle.
#[derive(Debug, Clone, Copy)]
pub struct Circle {
    pub center: ComplexPoint,
    pub radius: f64,
}

impl Contour for Circle {
    fn eval(&self, t: f64) -> Result<(ComplexPoint, ComplexPoint), FieldError> {
        let e = Complex64::from_polar(1.0, 2.0 * PI * t);
        Ok((self.center + self.radius * e, 2.0 * PI * self.radius * I * e))
    }
}

/// `Γ_ε`, traversed counterclockwise as the image angle increases.
#[derive(Debug, Clone, Copy)]
pub struct ObstacleBoundary {
    pub family: ObstacleFamily,
}

impl Contour for ObstacleBoundary {
    fn eval(&self, t: f64) -> Result<(ComplexPoint, ComplexPoint), FieldError> {
        let w = Complex64::from_polar(1.0, 2.0 * PI * t);
        let z = self.family.inverse(w)?;
        let dz = self.family.inverse_derivative(w)? * 2.0 * PI * I * w;
        Ok((z, dz))
    }
}

/// Closed polygon with edges sharing the parameter range equally.
///
/// Each edge is traversed with a twice-composed sine clustering so the speed
/// vanishes to high order at the vertices and the trapezoid rule stays
/// high-order across the corners.
#[derive(Debug, Clone)]
pub struct Polyline {
    pub vertices: Vec<ComplexPoint>,
}

fn cluster(t: f64) -> (f64, f64) {
    let tau = 2.0 * PI;
    (t - (tau * t).sin() / tau, 1.0 - (tau * t).cos())
}

impl Contour for Polyline {
    fn eval(&self, t: f64) -> Result<(ComplexPoint, ComplexPoint), FieldError> {
        let n = self.vertices.len();
        if n < 3 {
            return Err(FieldError::Invalid("a closed polyline needs at least 3 vertices".into()));
        }
        let s = t.rem_euclid(1.0) * n as f64;
        let k = (s.floor() as usize).min(n - 1);
        let a = self.vertices[k];
        let b = self.vertices[(k + 1) % n];
        let (p1, d1) = cluster(s - k as f64);
        let (p2, d2) = cluster(p1);
        Ok((a + p2 * (b - a), (b - a) * (n as f64 * d1 * d2)))
    }

    fn granularity(&self) -> usize {
        self.vertices.len().max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CirculationSettings {
    pub tolerance: f64,
    pub max_points: usize,
}

impl Default for CirculationSettings {
    fn default() -> Self {
        CirculationSettings {
            tolerance: 1e-8,
            max_points: 1 << 20,
        }
    }
}

fn tangential(field: &dyn VectorField, contour: &dyn Contour, t: f64) -> Result<f64, FieldError> {
    let (z, dz) = contour.eval(t)?;
    let u = field.velocity(z)?;
    Ok(u.re * dz.re + u.im * dz.im)
}

/// Trapezoid approximation of `∮ u·ds`, doubled until successive values agree.
pub fn circulation(field: &dyn VectorField, contour: &dyn Contour, n: usize) -> Result<f64, FieldError> {
    circulation_with(field, contour, n, CirculationSettings::default())
}

pub fn circulation_with(
    field: &dyn VectorField,
    contour: &dyn Contour,
    n: usize,
    settings: CirculationSettings,
) -> Result<f64, FieldError> {
    if n < 64 {
        return Err(FieldError::Invalid(format!("circulation needs at least 64 points, got {n}")));
    }
    let g = contour.granularity();
    let mut n = n.div_ceil(g) * g;
    let mut sum = (0..n)
        .into_par_iter()
        .map(|k| tangential(field, contour, k as f64 / n as f64))
        .collect::<Result<Vec<_>, _>>()?
        .iter()
        .sum::<f64>();
    let mut value = sum / n as f64;
    loop {
        if 2 * n > settings.max_points {
            return Err(FieldError::NonConvergence {
                points: n,
                change: f64::NAN,
            });
        }
        let mids: f64 = (0..n)
            .into_par_iter()
            .map(|k| tangential(field, contour, (k as f64 + 0.5) / n as f64))
            .collect::<Result<Vec<_>, _>>()?
            .iter()
            .sum();
        sum += mids;
        n *= 2;
        let next = sum / n as f64;
        let change = (next - value).abs();
        value = next;
        if change <= settings.tolerance * value.abs().max(1.0) {
            return Ok(value);
        }
        if 2 * n > settings.max_points {
            return Err(FieldError::NonConvergence { points: n, change });
        }
    }
}

fn stencil(field: &dyn VectorField, x: ComplexPoint, h: f64) -> Result<[ComplexPoint; 4], FieldError> {
    if !(h > 0.0) {
        return Err(FieldError::Invalid(format!("probe step must be positive, got {h}")));
    }
    let pts = [x + h, x - h, x + I * h, x - I * h];
    if field.blocked(pts[0], pts[1]) || field.blocked(pts[2], pts[3]) {
        return Err(FieldError::StencilCrossesCurve(x));
    }
    let mut out = [Complex64::new(0.0, 0.0); 4];
    for (o, p) in out.iter_mut().zip(pts) {
        *o = field.velocity(p).map_err(|_| FieldError::StencilCrossesCurve(x))?;
    }
    Ok(out)
}

/// Centered-difference `∂₁u₁ + ∂₂u₂`.
pub fn divergence_probe(field: &dyn VectorField, x: ComplexPoint, h: f64) -> Result<f64, FieldError> {
    let [e, w, n, s] = stencil(field, x, h)?;
    Ok((e.re - w.re + n.im - s.im) / (2.0 * h))
}

/// Centered-difference `∂₁u₂ - ∂₂u₁`.
pub fn curl_probe(field: &dyn VectorField, x: ComplexPoint, h: f64) -> Result<f64, FieldError> {
    let [e, w, n, s] = stencil(field, x, h)?;
    Ok((e.im - w.im - (n.re - s.re)) / (2.0 * h))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallnessSettings {
    /// Cells per side of the initial grid.
    pub grid: usize,
    /// Maximum number of bisections of a mixed cell.
    pub max_depth: u32,
}

impl Default for SmallnessSettings {
    fn default() -> Self {
        SmallnessSettings {
            grid: 64,
            max_depth: 24,
        }
    }
}

/// Point classification for the exceedance set.
fn exceeds(field: &dyn VectorField, x: ComplexPoint, r: f64) -> f64 {
    let value = match field.velocity(x) {
        Err(FieldError::Map(MapError::BranchAmbiguity(_))) => field.velocity(x + I * 1e-13),
        v => v,
    };
    match value {
        Ok(u) => {
            let m = u.norm();
            if !m.is_finite() || m > r {
                1.0
            } else {
                0.0
            }
        }
        Err(FieldError::Map(MapError::InsideObstacle { .. })) => 0.0,
        Err(_) => 1.0,
    }
}

fn cell_area(field: &dyn VectorField, r: f64, x0: f64, y0: f64, h: f64, depth: u32, max_depth: u32) -> f64 {
    let corners = [
        Complex64::new(x0, y0),
        Complex64::new(x0 + h, y0),
        Complex64::new(x0, y0 + h),
        Complex64::new(x0 + h, y0 + h),
        Complex64::new(x0 + 0.5 * h, y0 + 0.5 * h),
    ];
    let hits: f64 = corners.iter().map(|&z| exceeds(field, z, r)).sum();
    if hits == 0.0 || hits == 5.0 || depth >= max_depth {
        return hits / 5.0 * h * h;
    }
    let k = 0.5 * h;
    cell_area(field, r, x0, y0, k, depth + 1, max_depth)
        + cell_area(field, r, x0 + k, y0, k, depth + 1, max_depth)
        + cell_area(field, r, x0, y0 + k, k, depth + 1, max_depth)
        + cell_area(field, r, x0 + k, y0 + k, k, depth + 1, max_depth)
}

/// `R·|{x ∈ box : |u(x)| > R}|^{1/2}` by adaptive bisection of mixed cells.
///
/// The box is `[x0, x1] × [y0, y1]` with square initial cells of side
/// `(x1 - x0)/grid`. Points where the field fails (other than inside the
/// obstacle) count as exceeding.
pub fn smallness_statistic(
    field: &dyn VectorField,
    r: f64,
    bbox: [f64; 4],
    settings: SmallnessSettings,
) -> Result<f64, FieldError> {
    if !(r > 0.0) {
        return Err(FieldError::Invalid(format!("threshold must be positive, got {r}")));
    }
    let [x0, x1, y0, y1] = bbox;
    if !(x1 > x0 && y1 > y0) {
        return Err(FieldError::Invalid("empty sampling box".into()));
    }
    let h = (x1 - x0) / settings.grid as f64;
    let ny = ((y1 - y0) / h).ceil() as usize;
    let area: f64 = (0..settings.grid * ny)
        .into_par_iter()
        .map(|c| {
            let i = c % settings.grid;
            let j = c / settings.grid;
            cell_area(field, r, x0 + i as f64 * h, y0 + j as f64 * h, h, 0, settings.max_depth)
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    Ok(r * area.sqrt())
}
