use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::SolverError;
use crate::conformal::{ComplexPoint, ObstacleFamily};

/// Parameters fixing a mapped grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub epsilon: f64,
    pub n_sigma: usize,
    pub n_theta: usize,
    pub r_max: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            epsilon: 0.1,
            n_sigma: 128,
            n_theta: 256,
            r_max: 100.0,
        }
    }
}

/// Largest admissible conformal factor `|T_ε'|²`.
pub const DEFAULT_METRIC_CAP: f64 = 1e8;

/// Log-polar grid on the image `|ξ| ≥ 1` of `Π_ε`.
///
/// Node `(j, k)` sits at `σ_j = jΔσ`, `θ_k = kΔθ` with `ξ = e^{σ+iθ}`; arrays are
/// row-major in `j` with index `j·n_theta + k`. Row 0 is the wall `Γ_ε`.
#[derive(Debug, Clone)]
pub struct MappedGrid {
    pub spec: GridSpec,
    pub family: ObstacleFamily,
    pub sigma_max: f64,
    pub dsigma: f64,
    pub dtheta: f64,
    /// `a = |T_ε'|²` at the preimage of each node.
    pub metric: Vec<f64>,
    /// `g = a e^{-2σ} = |T_ε'/T_ε|²`, the factor multiplying the `(σ, θ)` Laplacian.
    pub g: Vec<f64>,
    /// Physical position of each node.
    pub points: Vec<ComplexPoint>,
}

impl MappedGrid {
    pub fn n_sigma(&self) -> usize {
        self.spec.n_sigma
    }

    pub fn n_theta(&self) -> usize {
        self.spec.n_theta
    }

    pub fn len(&self) -> usize {
        self.spec.n_sigma * self.spec.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn idx(&self, j: usize, k: usize) -> usize {
        j * self.spec.n_theta + k
    }

    pub fn sigma(&self, j: usize) -> f64 {
        j as f64 * self.dsigma
    }

    pub fn theta(&self, k: usize) -> f64 {
        k as f64 * self.dtheta
    }

    /// Trapezoid weight of row `j` in σ (half at the wall and the outer row).
    pub fn row_weight(&self, j: usize) -> f64 {
        if j == 0 || j + 1 == self.spec.n_sigma {
            0.5
        } else {
            1.0
        }
    }

    /// `Σ c_j f/g ΔσΔθ`, the physical-plane integral of a nodal field over the truncated domain.
    pub fn integrate_physical(&self, f: &[f64]) -> f64 {
        let nt = self.spec.n_theta;
        let mut total = 0.0;
        for j in 0..self.spec.n_sigma {
            let row: f64 = (0..nt).map(|k| f[j * nt + k] / self.g[j * nt + k]).sum();
            total += self.row_weight(j) * row;
        }
        total * self.dsigma * self.dtheta
    }

    pub fn max_metric(&self) -> (f64, usize) {
        self.metric
            .iter()
            .copied()
            .enumerate()
            .fold((0.0, 0), |acc, (i, a)| if a > acc.0 { (a, i) } else { acc })
    }

    /// Image log-coordinates `(σ, θ)` of a physical point, `θ ∈ [0, 2π)`.
    pub fn log_coordinates(&self, x: ComplexPoint) -> Result<(f64, f64), SolverError> {
        let w = self.family.map(x)?;
        Ok((w.norm().ln(), w.arg().rem_euclid(2.0 * PI)))
    }
}

pub fn build_grid(spec: GridSpec) -> Result<MappedGrid, SolverError> {
    build_grid_capped(spec, DEFAULT_METRIC_CAP)
}

pub fn build_grid_capped(spec: GridSpec, metric_cap: f64) -> Result<MappedGrid, SolverError> {
    if !(spec.epsilon > 0.0 && spec.epsilon.is_finite()) {
        return Err(SolverError::Config(format!("grid epsilon must be > 0, got {}", spec.epsilon)));
    }
    if !(spec.r_max >= 50.0) {
        return Err(SolverError::Config(format!("R_max must be >= 50, got {}", spec.r_max)));
    }
    if spec.n_sigma < 32 || spec.n_theta < 32 {
        return Err(SolverError::Config(format!(
            "grid counts must be >= 32, got {}x{}",
            spec.n_sigma, spec.n_theta
        )));
    }
    let family = ObstacleFamily::segment(spec.epsilon)?;
    let sigma_max = family.map(Complex64::new(spec.r_max, 0.0))?.norm().ln();
    let dsigma = sigma_max / (spec.n_sigma - 1) as f64;
    let dtheta = 2.0 * PI / spec.n_theta as f64;
    let n = spec.n_sigma * spec.n_theta;
    let mut metric = Vec::with_capacity(n);
    let mut g = Vec::with_capacity(n);
    let mut points = Vec::with_capacity(n);
    for j in 0..spec.n_sigma {
        let sigma = j as f64 * dsigma;
        for k in 0..spec.n_theta {
            let zeta = Complex64::from_polar(sigma.exp(), k as f64 * dtheta);
            let z = family.inverse(zeta)?;
            // T_ε'(z) = 1 / (T_ε⁻¹)'(ξ)
            let a = 1.0 / family.inverse_derivative(zeta)?.norm_sqr();
            if !(a.is_finite() && a <= metric_cap) {
                return Err(SolverError::MetricOverflow {
                    value: a,
                    cap: metric_cap,
                    node: (j, k),
                    point: z,
                });
            }
            metric.push(a);
            g.push(a * (-2.0 * sigma).exp());
            points.push(z);
        }
    }
    Ok(MappedGrid {
        spec,
        family,
        sigma_max,
        dsigma,
        dtheta,
        metric,
        g,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(eps: f64) -> GridSpec {
        GridSpec {
            epsilon: eps,
            n_sigma: 64,
            n_theta: 128,
            r_max: 100.0,
        }
    }

    #[test]
    fn far_metric_tends_to_four_over_scale_squared() {
        let grid = build_grid(spec(0.1)).unwrap();
        let j = grid.n_sigma() - 1;
        for k in 0..grid.n_theta() {
            let a = grid.metric[grid.idx(j, k)];
            assert!((a - 4.0 / 1.21).abs() < 1e-3, "{a}");
        }
    }

    #[test]
    fn wall_nodes_lie_on_the_obstacle() {
        let grid = build_grid(spec(0.05)).unwrap();
        for k in 0..grid.n_theta() {
            let z = grid.points[grid.idx(0, k)];
            let w = grid.family.map(z).unwrap();
            assert!((w.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn metric_peaks_at_the_tips_and_grows_as_epsilon_shrinks() {
        let mut prev = 0.0;
        for eps in [0.2, 0.1, 0.05] {
            let grid = build_grid(spec(eps)).unwrap();
            let (max, i) = grid.max_metric();
            let (j, k) = (i / grid.n_theta(), i % grid.n_theta());
            assert_eq!(j, 0);
            assert!(k == 0 || k == grid.n_theta() / 2, "k={k}");
            assert!(max > prev);
            prev = max;
        }
    }

    #[test]
    fn metric_cap_is_enforced() {
        let err = build_grid_capped(spec(0.05), 10.0).unwrap_err();
        assert!(matches!(err, SolverError::MetricOverflow { .. }));
    }

    #[test]
    fn spec_round_trips_bit_exactly() {
        let grid = build_grid(spec(0.1)).unwrap();
        let text = serde_json::to_string(&grid.spec).unwrap();
        let back: GridSpec = serde_json::from_str(&text).unwrap();
        let again = build_grid(back).unwrap();
        assert_eq!(back, grid.spec);
        assert_eq!(again.dsigma.to_bits(), grid.dsigma.to_bits());
        assert_eq!(again.dtheta.to_bits(), grid.dtheta.to_bits());
        assert_eq!(again.len(), grid.len());
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(build_grid(GridSpec { n_sigma: 16, ..spec(0.1) }).is_err());
        assert!(build_grid(GridSpec { r_max: 10.0, ..spec(0.1) }).is_err());
        assert!(build_grid(GridSpec { epsilon: 0.0, ..spec(0.1) }).is_err());
    }

    #[test]
    fn physical_integral_of_an_annulus_indicator() {
        // area between the level curves |T| = 1 + ε and |T| = (1 + ε)e^{σ_max}, which are
        // ellipses with semi-axes (ρ ± 1/ρ)/2 and area π(ρ² - ρ⁻²)/4
        let area = |r: f64| PI * 0.25 * (r * r - 1.0 / (r * r));
        let err = |n: usize| {
            let grid = build_grid(GridSpec {
                n_sigma: n,
                n_theta: 64,
                ..spec(0.2)
            })
            .unwrap();
            let want = area(1.2 * grid.sigma_max.exp()) - area(1.2);
            (grid.integrate_physical(&vec![1.0; grid.len()]) - want).abs() / want
        };
        let (e1, e2) = (err(128), err(256));
        assert!(e2 < 2e-4, "{e2}");
        assert!((e1 / e2 - 4.0).abs() < 0.1, "{e1} {e2}");
    }
}
