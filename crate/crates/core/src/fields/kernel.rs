use num_complex::Complex64;
use std::f64::consts::PI;

use super::vorticity::{Bump, BumpVorticity};
use super::{FieldError, FlowData, VectorField, I};
use crate::conformal::{ComplexPoint, MapPoint, ObstacleFamily};
use crate::quadrature::TensorRule;

/// `K_ε(x, y)` from `T_ε(x)`, `T_ε'(x)` and `T_ε(y)`.
pub fn kernel_at(px: &MapPoint, ty: ComplexPoint) -> ComplexPoint {
    let ty_star = ty / ty.norm_sqr();
    let cdw = px.dw.conj();
    cdw * I * (1.0 / (px.w - ty).conj() - 1.0 / (px.w - ty_star).conj()) / (2.0 * PI)
}

/// `H_ε(x) = conj(T_ε'(x))·i / (2π conj(T_ε(x)))`.
pub fn harmonic_at(px: &MapPoint) -> ComplexPoint {
    px.dw.conj() * I / (2.0 * PI * px.w.conj())
}

pub fn biot_savart_kernel(family: &ObstacleFamily, x: ComplexPoint, y: ComplexPoint) -> Result<ComplexPoint, FieldError> {
    if x == y {
        return Err(FieldError::Coincident(x));
    }
    let px = family.point(x)?;
    let ty = family.map(y)?;
    Ok(kernel_at(&px, ty))
}

pub fn harmonic_field(family: &ObstacleFamily, x: ComplexPoint) -> Result<ComplexPoint, FieldError> {
    Ok(harmonic_at(&family.point(x)?))
}

#[derive(Debug, Clone, Copy)]
struct Node {
    y: ComplexPoint,
    weight: f64,
    ty: ComplexPoint,
}

/// Quadrature nodes of one bump with a multipole expansion of their images.
#[derive(Debug, Clone)]
struct BumpNodes {
    bump: Bump,
    nodes: Vec<Node>,
    center: ComplexPoint,
    radius: f64,
    moments: Vec<ComplexPoint>,
}

/// Largest ratio `r/|ζ - c|` at which a multipole expansion is used.
const EXPANSION_RATIO: f64 = 0.75;
const EXPANSION_TERMS: usize = 128;

fn moments(points: impl Iterator<Item = (ComplexPoint, f64)>, center: ComplexPoint) -> Vec<ComplexPoint> {
    let mut m = vec![Complex64::new(0.0, 0.0); EXPANSION_TERMS];
    for (p, w) in points {
        let d = p - center;
        let mut pow = Complex64::new(w, 0.0);
        for mk in m.iter_mut() {
            *mk += pow;
            pow *= d;
        }
    }
    m
}

/// `Σ_k m_k / (ζ - c)^{k+1}` truncated once `ratio^k` drops below `1e-16`.
fn expansion(m: &[ComplexPoint], zeta: ComplexPoint, center: ComplexPoint, ratio: f64) -> ComplexPoint {
    let terms = if ratio <= 0.0 {
        1
    } else {
        ((-16.0 * std::f64::consts::LN_10 / ratio.ln()).ceil() as usize + 1).min(m.len())
    };
    let u = 1.0 / (zeta - center);
    let mut acc = Complex64::new(0.0, 0.0);
    for mk in m[..terms].iter().rev() {
        acc = (acc + mk) * u;
    }
    acc
}

/// Quadrature evaluator for `K_ε[ω₀]`.
///
/// Near a support the free-plane part `i/(2π conj(x-y))` is subtracted under
/// the integral and added back in closed form, so the remaining integrand is
/// smooth in `y` even when `x` lies inside the support. Away from a support the
/// same quadrature is summed through a multipole expansion in the image plane.
#[derive(Debug, Clone)]
pub struct InducedVelocity {
    family: ObstacleFamily,
    groups: Vec<BumpNodes>,
    /// Reflected images `T_ε(y)*`, expanded about the origin.
    reflected: Vec<(ComplexPoint, f64)>,
    reflected_radius: f64,
    reflected_moments: Vec<ComplexPoint>,
    order: usize,
}

pub const INDUCED_PANELS: usize = 4;
const INDUCED_ORDERS: [usize; 4] = [16, 32, 64, 128];

impl InducedVelocity {
    pub fn with_order(omega0: &BumpVorticity, family: ObstacleFamily, order: usize) -> Result<Self, FieldError> {
        let mut groups = Vec::new();
        let mut reflected = Vec::new();
        for b in &omega0.bumps {
            let c = b.center;
            let r = b.radius;
            let rule = TensorRule::rectangle(c.re - r, c.re + r, c.im - r, c.im + r, INDUCED_PANELS, order);
            let mut nodes = Vec::new();
            for (x, y, w) in rule.points() {
                let y = Complex64::new(x, y);
                let v = b.eval(y);
                if v == 0.0 {
                    continue;
                }
                let ty = family.map(y)?;
                nodes.push(Node { y, weight: w * v, ty });
                reflected.push((ty / ty.norm_sqr(), w * v));
            }
            let center = family.map(c)?;
            let radius = nodes.iter().map(|n| (n.ty - center).norm()).fold(0.0, f64::max);
            let moments = moments(nodes.iter().map(|n| (n.ty, n.weight)), center);
            groups.push(BumpNodes {
                bump: *b,
                nodes,
                center,
                radius,
                moments,
            });
        }
        let zero = Complex64::new(0.0, 0.0);
        let reflected_radius = reflected.iter().map(|p| p.0.norm()).fold(0.0, f64::max);
        let reflected_moments = moments(reflected.iter().copied(), zero);
        Ok(InducedVelocity {
            family,
            groups,
            reflected,
            reflected_radius,
            reflected_moments,
            order,
        })
    }

    /// Doubles the per-panel order until 20 probe values agree to `tol`.
    pub fn converged(omega0: &BumpVorticity, family: ObstacleFamily, tol: f64) -> Result<Self, FieldError> {
        let probes = probe_points(omega0, &family);
        let first = Self::with_order(omega0, family, INDUCED_ORDERS[0])?;
        if omega0.is_empty() {
            return Ok(first);
        }
        let mut prev_vals = first.values(&probes)?;
        let mut change = f64::INFINITY;
        for &order in &INDUCED_ORDERS[1..] {
            let next = Self::with_order(omega0, family, order)?;
            let vals = next.values(&probes)?;
            change = prev_vals
                .iter()
                .zip(&vals)
                .map(|(a, b)| (a - b).norm() / b.norm().max(1.0))
                .fold(0.0, f64::max);
            if change <= tol {
                return Ok(next);
            }
            prev_vals = vals;
        }
        Err(FieldError::Quadrature {
            tolerance: tol,
            achieved: change,
        })
    }

    pub fn family(&self) -> &ObstacleFamily {
        &self.family
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn node_count(&self) -> usize {
        self.reflected.len()
    }

    fn values(&self, xs: &[ComplexPoint]) -> Result<Vec<ComplexPoint>, FieldError> {
        xs.iter().map(|&x| self.velocity(x)).collect()
    }

    pub fn velocity(&self, x: ComplexPoint) -> Result<ComplexPoint, FieldError> {
        let px = self.family.point(x)?;
        self.at_point(&px)
    }

    /// Value at a point with precomputed map data (also used for one-sided traces).
    pub fn at_point(&self, px: &MapPoint) -> Result<ComplexPoint, FieldError> {
        let x = px.z;
        let zeta = px.w;
        let cdw = px.dw.conj();
        let mut acc = Complex64::new(0.0, 0.0);
        let mut free = Complex64::new(0.0, 0.0);
        let mut limit: Option<ComplexPoint> = None;
        for g in &self.groups {
            let dist = (zeta - g.center).norm();
            let ratio = g.radius / dist;
            if dist > 0.0 && ratio <= EXPANSION_RATIO {
                acc += cdw * expansion(&g.moments, zeta, g.center, ratio).conj();
                continue;
            }
            for n in &g.nodes {
                let d = x - n.y;
                let regular = if d.norm_sqr() < 1e-18 {
                    match limit {
                        Some(v) => v,
                        None => {
                            let v = (self.family.second_derivative(x)? / (2.0 * px.dw)).conj();
                            limit = Some(v);
                            v
                        }
                    }
                } else {
                    cdw / (zeta - n.ty).conj() - 1.0 / d.conj()
                };
                acc += n.weight * regular;
            }
            free += g.bump.free_velocity(x);
        }
        let ratio = self.reflected_radius / zeta.norm();
        if ratio <= EXPANSION_RATIO {
            let zero = Complex64::new(0.0, 0.0);
            acc -= cdw * expansion(&self.reflected_moments, zeta, zero, ratio).conj();
        } else {
            for &(ts, w) in &self.reflected {
                acc -= w * cdw / (zeta - ts).conj();
            }
        }
        Ok(I * acc / (2.0 * PI) + free)
    }
}

impl VectorField for InducedVelocity {
    fn velocity(&self, x: ComplexPoint) -> Result<ComplexPoint, FieldError> {
        InducedVelocity::velocity(self, x)
    }

    fn blocked(&self, a: ComplexPoint, b: ComplexPoint) -> bool {
        self.family.arc().crossed_by(a, b)
    }
}

fn probe_points(omega0: &BumpVorticity, family: &ObstacleFamily) -> Vec<ComplexPoint> {
    let mut pts = Vec::new();
    for b in &omega0.bumps {
        let c = b.center;
        let r = b.radius;
        for z in [
            c,
            c + Complex64::from_polar(0.5 * r, 1.0),
            c + Complex64::from_polar(0.9 * r, 2.5),
            c + Complex64::from_polar(r, 4.0),
            c + Complex64::from_polar(2.0 * r, 5.5),
        ] {
            pts.push(z);
        }
    }
    for k in 0..20 {
        let z = Complex64::from_polar(1.5 + 0.4 * k as f64, 0.37 + 0.71 * k as f64);
        pts.push(z);
    }
    pts.retain(|&z| family.is_exterior(z));
    pts.truncate(20);
    pts
}

/// `K_ε[ω₀](x)` with a freshly calibrated quadrature (tolerance 1e-9).
pub fn induced_velocity(flow: &FlowData, family: &ObstacleFamily, x: ComplexPoint) -> Result<ComplexPoint, FieldError> {
    InducedVelocity::converged(&flow.omega0, *family, 1e-9)?.velocity(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::{complex_as_matrix, mat_vec, perp, transpose, ExteriorMap};
    use crate::fit::loglog_fit;
    use proptest::prelude::*;

    fn pair() -> BumpVorticity {
        BumpVorticity::new(
            vec![
                Bump::new(Complex64::new(-0.5, 0.6), 0.3, 2.0),
                Bump::new(Complex64::new(0.5, 0.6), 0.3, -2.0),
            ],
            ExteriorMap::segment(),
            0.2,
        )
        .unwrap()
    }

    fn matrix_kernel(family: &ObstacleFamily, x: ComplexPoint, y: ComplexPoint) -> ComplexPoint {
        let tx = family.map(x).unwrap();
        let ty = family.map(y).unwrap();
        let ts = ty / ty.norm_sqr();
        let a = tx - ty;
        let b = tx - ts;
        let v = (perp(a) / a.norm_sqr() - perp(b) / b.norm_sqr()) / (2.0 * PI);
        mat_vec(transpose(complex_as_matrix(family.derivative(x).unwrap())), v)
    }

    proptest! {
        #[test]
        fn complex_and_matrix_kernels_agree(
            xr in 1.2f64..30.0, xa in -3.1f64..3.1, yr in 1.2f64..30.0, ya in -3.1f64..3.1, eps in 0.0f64..0.3,
        ) {
            let fam = ObstacleFamily::segment(eps).unwrap();
            let x = Complex64::from_polar(xr + eps, xa);
            let y = Complex64::from_polar(yr + eps, ya);
            prop_assume!((x - y).norm() > 1e-3);
            let k = biot_savart_kernel(&fam, x, y).unwrap();
            let m = matrix_kernel(&fam, x, y);
            prop_assert!((k - m).norm() <= 1e-12 * m.norm().max(1e-300) + 1e-15);
        }
    }

    #[test]
    fn kernel_from_closed_form_entries() {
        let fam = ObstacleFamily::segment(0.1).unwrap();
        let x = Complex64::new(10.0, 0.0);
        let y = Complex64::new(0.0, 2.0);
        let s99 = 99f64.sqrt();
        let tx = Complex64::new((10.0 + s99) / 1.1, 0.0);
        let dtx = Complex64::new((1.0 + 10.0 / s99) / 1.1, 0.0);
        let ty = Complex64::new(0.0, (2.0 + 5f64.sqrt()) / 1.1);
        let ts = ty / ty.norm_sqr();
        let want = dtx.conj() * I * (1.0 / (tx - ty).conj() - 1.0 / (tx - ts).conj()) / (2.0 * PI);
        let got = biot_savart_kernel(&fam, x, y).unwrap();
        assert!((got - want).norm() <= 1e-12 * want.norm());
    }

    #[test]
    fn kernel_decays_like_inverse_square() {
        let fam = ObstacleFamily::segment(0.1).unwrap();
        let y = Complex64::new(0.0, 2.0);
        let radii: Vec<f64> = (0..13).map(|k| 50.0 * 2f64.powf(k as f64 / 3.0)).collect();
        let mags: Vec<f64> = radii
            .iter()
            .map(|&r| biot_savart_kernel(&fam, Complex64::from_polar(r, 0.7), y).unwrap().norm())
            .collect();
        let fit = loglog_fit(&radii, &mags).unwrap();
        assert!((fit.slope + 2.0).abs() < 0.1, "{fit:?}");
    }

    #[test]
    fn coincident_points_are_rejected() {
        let fam = ObstacleFamily::segment(0.1).unwrap();
        let x = Complex64::new(0.0, 3.0);
        assert!(matches!(biot_savart_kernel(&fam, x, x), Err(FieldError::Coincident(_))));
        assert!(matches!(biot_savart_kernel(&fam, Complex64::new(0.0, 0.01), x), Err(FieldError::Map(_))));
    }

    #[test]
    fn harmonic_far_field_constant() {
        let fam = ObstacleFamily::segment(0.05).unwrap();
        let x = Complex64::from_polar(1e3, 0.4);
        let v = harmonic_field(&fam, x).unwrap().norm() * 1e3;
        assert!((v - 1.0 / (2.0 * PI)).abs() < 0.01 / (2.0 * PI));
    }

    #[test]
    fn harmonic_is_tangent_to_the_obstacle() {
        for eps in [0.05, 0.1, 0.2] {
            let fam = ObstacleFamily::segment(eps).unwrap();
            for k in 0..64 {
                let th = 2.0 * PI * (k as f64 + 0.5) / 64.0;
                let z = fam.boundary_point(th).unwrap();
                let w = Complex64::from_polar(1.0, th);
                // tangent dz/dθ = (T_ε⁻¹)'(w)·i w
                let tangent = fam.inverse_derivative(w).unwrap() * I * w;
                let normal = -I * tangent / tangent.norm();
                let h = harmonic_field(&fam, z).unwrap();
                let hn = h.re * normal.re + h.im * normal.im;
                assert!(hn.abs() <= 1e-8 * h.norm(), "eps={eps} k={k} {hn}");
            }
        }
    }

    #[test]
    fn zero_vorticity_induces_nothing() {
        let fam = ObstacleFamily::segment(0.1).unwrap();
        let k = InducedVelocity::converged(&BumpVorticity::zero(), fam, 1e-9).unwrap();
        assert_eq!(k.velocity(Complex64::new(2.0, 1.0)).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn subtraction_limit_is_continuous() {
        // the regular part at y → x equals its removable limit
        let fam = ObstacleFamily::segment(0.1).unwrap();
        let x = Complex64::new(0.4, 0.9);
        let px = fam.point(x).unwrap();
        let limit = (fam.second_derivative(x).unwrap() / (2.0 * px.dw)).conj();
        let y = x + Complex64::new(1e-5, 0.7e-5);
        let ty = fam.map(y).unwrap();
        let near = px.dw.conj() / (px.w - ty).conj() - 1.0 / (x - y).conj();
        assert!((near - limit).norm() < 1e-4 * limit.norm());
    }

    #[test]
    fn expansions_match_direct_summation() {
        let omega = pair();
        for eps in [0.0, 0.05, 0.2] {
            let fam = ObstacleFamily::segment(eps).unwrap();
            let k = InducedVelocity::with_order(&omega, fam, 32).unwrap();
            for z in [
                Complex64::new(3.0, 0.5),
                Complex64::new(0.0, -0.4),
                Complex64::new(-1.3, 0.1),
                Complex64::new(0.0, 2.0),
                Complex64::new(40.0, -25.0),
            ] {
                let px = fam.point(z).unwrap();
                let direct: ComplexPoint = k
                    .groups
                    .iter()
                    .flat_map(|g| g.nodes.iter())
                    .map(|n| n.weight * kernel_at(&px, n.ty))
                    .sum();
                let got = k.at_point(&px).unwrap();
                assert!((got - direct).norm() <= 1e-12 * direct.norm().max(1e-3), "eps={eps} z={z}");
            }
        }
    }

    #[test]
    fn order_doubling_is_stable_at_probe_points() {
        let omega = pair();
        for eps in [0.2, 0.05, 0.0] {
            let fam = ObstacleFamily::segment(eps).unwrap();
            let k = InducedVelocity::converged(&omega, fam, 1e-9).unwrap();
            let finer = InducedVelocity::with_order(&omega, fam, 2 * k.order()).unwrap();
            for z in probe_points(&omega, &fam) {
                let a = k.velocity(z).unwrap();
                let b = finer.velocity(z).unwrap();
                assert!((a - b).norm() <= 1e-9 * b.norm().max(1.0), "eps={eps} z={z}");
            }
        }
    }

    #[test]
    fn induced_field_decays_like_inverse_square_for_zero_mass() {
        let omega = pair();
        let fam = ObstacleFamily::segment(0.1).unwrap();
        let k = InducedVelocity::converged(&omega, fam, 1e-9).unwrap();
        let radii: Vec<f64> = (0..13).map(|j| 50.0 * 2f64.powf(j as f64 / 3.0)).collect();
        let mags: Vec<f64> = radii
            .iter()
            .map(|&r| k.velocity(Complex64::from_polar(r, 1.1)).unwrap().norm())
            .collect();
        let fit = loglog_fit(&radii, &mags).unwrap();
        assert!((fit.slope + 2.0).abs() < 0.1, "{fit:?}");
    }
}
