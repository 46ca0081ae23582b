use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{strictly_decreasing, LabError, ProbePatch};
use crate::conformal::{ComplexPoint, ExteriorMap, ObstacleFamily};
use crate::fields::{plane_norm, FlowData, InitialVelocity, PlaneQuadrature, VectorField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonRow {
    pub epsilon: f64,
    pub value: f64,
}

/// `‖Eu₀^ε - u₀‖_{L²(patch)}` along an ε list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialDataTable {
    pub rows: Vec<EpsilonRow>,
    /// `d(ε_{i+1}) / d(ε_i)`.
    pub ratios: Vec<f64>,
    pub strictly_decreasing: bool,
}

/// `u₀^ε` extended by zero into `Ω_ε`, sampled at `nodes`.
pub fn extended_samples(flow: &FlowData, family: ObstacleFamily, nodes: &[ComplexPoint]) -> Result<Vec<ComplexPoint>, LabError> {
    let u = InitialVelocity::new(flow, family)?;
    nodes
        .par_iter()
        .map(|&z| {
            if family.is_exterior(z) {
                Ok(u.velocity(z)?)
            } else {
                Ok(ComplexPoint::new(0.0, 0.0))
            }
        })
        .collect()
}

/// Distances from `Eu₀^ε` to `u₀` on the patch; `ε = 0` compares `u₀` with itself.
pub fn initial_data_convergence(
    eps: &[f64],
    patch: &ProbePatch,
    flow: &FlowData,
    base: ExteriorMap,
) -> Result<InitialDataTable, LabError> {
    let nodes = patch.nodes(&base.arc())?;
    let limit = extended_samples(flow, ObstacleFamily::limit(base), &nodes)?;
    let mut rows = Vec::with_capacity(eps.len());
    for &e in eps {
        let family = ObstacleFamily::new(base, e)?;
        let u = extended_samples(flow, family, &nodes)?;
        rows.push(EpsilonRow {
            epsilon: e,
            value: super::l2_patch_norm(patch, &u, Some(&limit))?,
        });
    }
    let values: Vec<f64> = rows.iter().map(|r| r.value).collect();
    Ok(InitialDataTable {
        ratios: values.windows(2).map(|w| w[1] / w[0]).collect(),
        strictly_decreasing: strictly_decreasing(&values),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpTable {
    pub p: f64,
    pub radius: f64,
    /// Norm over `B(0, R) \ Ω_ε` plus the analytic tail; infinite when the tail diverges.
    pub rows: Vec<EpsilonRow>,
    /// `max / min` over the rows.
    pub spread: f64,
    pub uniform: bool,
    /// The tail `∫|u|^p` beyond `R` diverges (the `p = 2` case with `α ≠ 0`).
    pub divergent: bool,
}

/// `‖Eu₀^ε‖_{L^p}` along an ε list, flagged uniform when the values stay within a factor 2.
pub fn lp_uniform_bound(eps: &[f64], p: f64, radius: f64, flow: &FlowData, base: ExteriorMap) -> Result<LpTable, LabError> {
    if !(p > 2.0 && p <= 3.0) && p != 2.0 {
        return Err(LabError::Invalid(format!("p must lie in (2, 3] (or equal 2 for the divergence report), got {p}")));
    }
    let mut rows = Vec::with_capacity(eps.len());
    let mut divergent = false;
    for &e in eps {
        let family = ObstacleFamily::new(base, e)?;
        let u = InitialVelocity::new(flow, family)?;
        let quad = PlaneQuadrature {
            radius,
            ..PlaneQuadrature::default()
        };
        let est = plane_norm(&u, &family, p, quad)?;
        divergent |= est.tail.is_none();
        rows.push(EpsilonRow {
            epsilon: e,
            value: est.value(),
        });
    }
    let max = rows.iter().map(|r| r.value).fold(0.0, f64::max);
    let min = rows.iter().map(|r| r.value).fold(f64::INFINITY, f64::min);
    let spread = if max == 0.0 { 1.0 } else { max / min };
    Ok(LpTable {
        p,
        radius,
        uniform: !divergent && spread <= 2.0,
        spread,
        divergent,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Bump, BumpVorticity};
    use num_complex::Complex64;

    fn flow() -> FlowData {
        let omega = BumpVorticity::new(
            vec![
                Bump::new(Complex64::new(-0.5, 0.6), 0.3, 2.0),
                Bump::new(Complex64::new(0.5, 0.6), 0.3, -2.0),
            ],
            ExteriorMap::segment(),
            0.2,
        )
        .unwrap();
        FlowData::new(1.0, 0.01, omega).unwrap()
    }

    fn coarse(x: [f64; 2], y: [f64; 2]) -> ProbePatch {
        ProbePatch {
            x1: x,
            x2: y,
            delta: 0.2,
            n: 12,
        }
    }

    #[test]
    fn limit_evaluation_path_is_exactly_zero() {
        let t = initial_data_convergence(&[0.0], &coarse([-2.0, 2.0], [-2.0, 2.0]), &flow(), ExteriorMap::segment()).unwrap();
        assert_eq!(t.rows[0].value, 0.0);
    }

    #[test]
    fn distances_shrink_with_epsilon() {
        let t = initial_data_convergence(&[0.2, 0.1, 0.05], &coarse([-2.0, 2.0], [-2.0, 2.0]), &flow(), ExteriorMap::segment()).unwrap();
        assert!(t.strictly_decreasing, "{t:?}");
        assert!(t.ratios.iter().all(|&r| r < 1.0));
    }

    #[test]
    fn far_patch_is_already_close() {
        let t = initial_data_convergence(&[0.2], &coarse([5.0, 7.0], [5.0, 7.0]), &flow(), ExteriorMap::segment()).unwrap();
        assert!(t.rows[0].value < 1e-3, "{t:?}");
    }

    #[test]
    fn zero_data_has_zero_lp_norm() {
        let f = FlowData::new(0.0, 0.01, BumpVorticity::zero()).unwrap();
        let t = lp_uniform_bound(&[0.2, 0.1], 3.0, 100.0, &f, ExteriorMap::segment()).unwrap();
        assert!(t.rows.iter().all(|r| r.value == 0.0));
        assert!(t.uniform);
    }

    #[test]
    fn square_integrability_fails_with_circulation() {
        let f = FlowData::new(1.0, 0.01, BumpVorticity::zero()).unwrap();
        let t = lp_uniform_bound(&[0.2], 2.0, 100.0, &f, ExteriorMap::segment()).unwrap();
        assert!(t.divergent && !t.uniform);
        assert!(t.rows[0].value.is_infinite());
    }

    #[test]
    fn exponent_outside_the_range_is_rejected() {
        assert!(lp_uniform_bound(&[0.2], 3.5, 100.0, &flow(), ExteriorMap::segment()).is_err());
        assert!(lp_uniform_bound(&[0.2], 1.5, 100.0, &flow(), ExteriorMap::segment()).is_err());
    }
}
