use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::LabError;
use crate::conformal::{ComplexPoint, JordanArc};

/// A rectangle sampled at cell midpoints, minus the strip of width `delta` around the arc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbePatch {
    pub x1: [f64; 2],
    pub x2: [f64; 2],
    pub delta: f64,
    /// Cells per side.
    pub n: usize,
}

impl ProbePatch {
    pub fn near() -> Self {
        ProbePatch {
            x1: [-2.0, 2.0],
            x2: [-2.0, 2.0],
            delta: 0.2,
            n: 40,
        }
    }

    pub fn far() -> Self {
        ProbePatch {
            x1: [4.0, 6.0],
            x2: [-1.0, 1.0],
            delta: 0.2,
            n: 20,
        }
    }

    pub fn validate(&self) -> Result<(), LabError> {
        let ok = self.x1[0] < self.x1[1]
            && self.x2[0] < self.x2[1]
            && self.x1.iter().chain(&self.x2).all(|v| v.is_finite())
            && self.delta > 0.0
            && self.n >= 2;
        if ok {
            Ok(())
        } else {
            Err(LabError::Invalid(format!("bad probe patch {self:?}")))
        }
    }

    pub fn cell_area(&self) -> f64 {
        (self.x1[1] - self.x1[0]) * (self.x2[1] - self.x2[0]) / (self.n * self.n) as f64
    }

    /// Midpoints farther than `delta` from the arc, row by row.
    pub fn nodes(&self, arc: &JordanArc) -> Result<Vec<ComplexPoint>, LabError> {
        self.validate()?;
        let hx = (self.x1[1] - self.x1[0]) / self.n as f64;
        let hy = (self.x2[1] - self.x2[0]) / self.n as f64;
        let mut out = Vec::with_capacity(self.n * self.n);
        for b in 0..self.n {
            for a in 0..self.n {
                let z = Complex64::new(self.x1[0] + (a as f64 + 0.5) * hx, self.x2[0] + (b as f64 + 0.5) * hy);
                if arc.distance(z) > self.delta {
                    out.push(z);
                }
            }
        }
        if out.is_empty() {
            return Err(LabError::Invalid("probe patch lies entirely inside the exclusion strip".into()));
        }
        Ok(out)
    }
}

/// Midpoint-rule `‖a - b‖_{L²}` over the patch nodes (`b = 0` when absent).
pub fn l2_patch_norm(patch: &ProbePatch, a: &[ComplexPoint], b: Option<&[ComplexPoint]>) -> Result<f64, LabError> {
    Ok(squared_norm(patch, a, b)?.sqrt())
}

fn squared_norm(patch: &ProbePatch, a: &[ComplexPoint], b: Option<&[ComplexPoint]>) -> Result<f64, LabError> {
    if let Some(b) = b {
        if b.len() != a.len() {
            return Err(LabError::MissingSamples {
                expected: a.len(),
                found: b.len(),
            });
        }
    }
    let sum: f64 = match b {
        Some(b) => a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum(),
        None => a.iter().map(|x| x.norm_sqr()).sum(),
    };
    Ok(sum * patch.cell_area())
}

/// `(∫ ‖a(t) - b(t)‖² dt)^{1/2}` with the trapezoid rule over shared snapshot times.
pub fn time_integrated_distance(
    patch: &ProbePatch,
    a: &[(f64, Vec<ComplexPoint>)],
    b: &[(f64, Vec<ComplexPoint>)],
    t_end: f64,
) -> Result<f64, LabError> {
    let mut values = Vec::new();
    let mut j = 0;
    for (t, ua) in a.iter().filter(|s| s.0 <= t_end + 1e-12) {
        while j < b.len() && b[j].0 < t - 1e-9 {
            j += 1;
        }
        match b.get(j) {
            Some((tb, ub)) if (tb - t).abs() <= 1e-9 => values.push((*t, squared_norm(patch, ua, Some(ub))?)),
            _ => return Err(LabError::MissingSnapshot(*t)),
        }
    }
    if values.len() < 2 {
        return Err(LabError::Invalid("need at least two shared snapshots".into()));
    }
    let total: f64 = values.windows(2).map(|p| 0.5 * (p[1].0 - p[0].0) * (p[0].1 + p[1].1)).sum();
    Ok(total.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit() -> ProbePatch {
        ProbePatch {
            x1: [3.0, 4.0],
            x2: [3.0, 4.0],
            delta: 0.2,
            n: 16,
        }
    }

    #[test]
    fn identical_fields_are_at_distance_zero() {
        let p = ProbePatch::near();
        let nodes = p.nodes(&JordanArc::segment()).unwrap();
        let u: Vec<ComplexPoint> = nodes.iter().map(|z| z * z).collect();
        assert_eq!(l2_patch_norm(&p, &u, Some(&u)).unwrap(), 0.0);
    }

    #[test]
    fn unit_field_on_unit_square_has_norm_one() {
        let p = unit();
        let nodes = p.nodes(&JordanArc::segment()).unwrap();
        assert_eq!(nodes.len(), 256);
        let u = vec![Complex64::new(0.6, 0.8); nodes.len()];
        assert!((l2_patch_norm(&p, &u, None).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn exclusion_strip_removes_nodes_near_the_arc() {
        let p = ProbePatch::near();
        let arc = JordanArc::segment();
        let nodes = p.nodes(&arc).unwrap();
        assert!(nodes.len() < p.n * p.n);
        assert!(nodes.iter().all(|&z| arc.distance(z) > p.delta));
    }

    #[test]
    fn midpoint_norm_converges_at_second_order() {
        // ∫∫ (x² + y²) over [3,4]² = 2·37/3
        let exact = (2.0 * 37.0 / 3.0f64).sqrt();
        let err = |n: usize| {
            let p = ProbePatch { n, ..unit() };
            let u: Vec<ComplexPoint> = p.nodes(&JordanArc::segment()).unwrap().iter().map(|z| Complex64::new(z.re, z.im)).collect();
            (l2_patch_norm(&p, &u, None).unwrap() - exact).abs()
        };
        let (e1, e2, e3) = (err(8), err(16), err(32));
        assert!((e1 / e2).log2() > 1.9 && (e2 / e3).log2() > 1.9, "{e1} {e2} {e3}");
    }

    #[test]
    fn time_integration_uses_shared_snapshots() {
        let p = unit();
        let n = p.nodes(&JordanArc::segment()).unwrap().len();
        let zero = vec![Complex64::new(0.0, 0.0); n];
        let a: Vec<(f64, Vec<ComplexPoint>)> = (0..=10).map(|i| (0.1 * i as f64, vec![Complex64::new(1.0, 0.0); n])).collect();
        let b: Vec<(f64, Vec<ComplexPoint>)> = (0..=20).map(|i| (0.05 * i as f64, zero.clone())).collect();
        let d = time_integrated_distance(&p, &a, &b, 1.0).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
        assert!(matches!(time_integrated_distance(&p, &b, &a, 1.0), Err(LabError::MissingSnapshot(_))));
    }

    #[test]
    fn mismatched_sample_counts_are_rejected() {
        let p = unit();
        let a = vec![Complex64::new(1.0, 0.0); 4];
        assert!(l2_patch_norm(&p, &a, Some(&a[..3])).is_err());
    }

    proptest! {
        #[test]
        fn patch_distance_is_a_metric(seed in 0u64..1000, s in -3.0f64..3.0) {
            let p = unit();
            let n = p.nodes(&JordanArc::segment()).unwrap().len();
            let f = |k: u64| -> Vec<ComplexPoint> {
                (0..n).map(|i| Complex64::new(((i as u64 * 31 + k * 17) % 13) as f64 - 6.0, ((i as u64 * 7 + k) % 5) as f64)).collect()
            };
            let (a, b, c) = (f(seed), f(seed + 1), f(seed + 2));
            let dab = l2_patch_norm(&p, &a, Some(&b)).unwrap();
            let dba = l2_patch_norm(&p, &b, Some(&a)).unwrap();
            let dac = l2_patch_norm(&p, &a, Some(&c)).unwrap();
            let dcb = l2_patch_norm(&p, &c, Some(&b)).unwrap();
            prop_assert!((dab - dba).abs() <= 1e-12 * dab.max(1.0));
            prop_assert!(dab <= dac + dcb + 1e-12);
            let scaled: Vec<ComplexPoint> = a.iter().map(|z| z * s).collect();
            let ns = l2_patch_norm(&p, &scaled, None).unwrap();
            prop_assert!((ns - s.abs() * l2_patch_norm(&p, &a, None).unwrap()).abs() <= 1e-10 * ns.max(1.0));
        }
    }
}
