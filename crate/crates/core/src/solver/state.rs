use num_complex::Complex64;
use std::f64::consts::PI;

use super::{poisson_streamfunction, MappedGrid, PoissonSolver, SolverError};
use crate::fields::FlowData;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    /// Vorticity at the nodes; row 0 is the wall, the outer row stays 0.
    pub w: Vec<f64>,
    pub psi: Vec<f64>,
    pub t: f64,
    pub step: u64,
    /// Circulation carried by the `(β/2π)σ` component of `Ψ`.
    pub beta: f64,
    pub alpha: f64,
}

impl SolverState {
    pub fn zeros(grid: &MappedGrid, alpha: f64) -> Self {
        SolverState {
            w: vec![0.0; grid.len()],
            psi: vec![0.0; grid.len()],
            t: 0.0,
            step: 0,
            beta: alpha,
            alpha,
        }
    }

    /// `β + Σw - α`, zero up to rounding after every Poisson solve.
    pub fn stokes_defect(&self, grid: &MappedGrid) -> f64 {
        self.beta + grid.integrate_physical(&self.w) - self.alpha
    }
}

/// Samples `ω₀` on the nodes and solves for `Ψ`, so that `β(0) = α - Σw ≈ γ`.
pub fn init_state(grid: &MappedGrid, flow: &FlowData, solver: &mut PoissonSolver) -> Result<SolverState, SolverError> {
    let omega = &flow.omega0;
    let limit = 0.5 * grid.spec.r_max;
    for (i, b) in omega.bumps.iter().enumerate() {
        if b.center.norm() + b.radius >= limit {
            return Err(SolverError::Support(format!(
                "bump {i} reaches |x| = {:.4}, beyond R_max/2 = {limit}",
                b.center.norm() + b.radius
            )));
        }
        let mut closest = f64::INFINITY;
        for k in 0..720 {
            let x = b.center + Complex64::from_polar(b.radius, 2.0 * PI * k as f64 / 720.0);
            let m = grid.family.base.eval(x)?.norm() / grid.family.scale();
            closest = closest.min(m);
        }
        if closest <= 1.0 {
            return Err(SolverError::Support(format!(
                "bump {i} meets the obstacle at epsilon = {} (min |T_eps| = {closest:.6})",
                grid.family.epsilon
            )));
        }
    }
    let mut state = SolverState::zeros(grid, flow.alpha());
    let nt = grid.n_theta();
    for (i, (w, &x)) in state.w.iter_mut().zip(&grid.points).enumerate() {
        if i >= (grid.n_sigma() - 1) * nt {
            break;
        }
        *w = omega.eval(x);
    }
    poisson_streamfunction(&mut state, grid, solver);
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::super::{build_grid, GridSpec};
    use super::*;
    use crate::conformal::ExteriorMap;
    use crate::fields::{Bump, BumpVorticity};

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

    fn grid(ns: usize, nt: usize) -> MappedGrid {
        build_grid(GridSpec {
            epsilon: 0.1,
            n_sigma: ns,
            n_theta: nt,
            r_max: 100.0,
        })
        .unwrap()
    }

    #[test]
    fn zero_data_gives_beta_gamma() {
        let g = grid(64, 64);
        let mut p = PoissonSolver::new(&g).unwrap();
        let flow = FlowData::new(1.0, 0.01, BumpVorticity::zero()).unwrap();
        let s = init_state(&g, &flow, &mut p).unwrap();
        assert!(s.w.iter().all(|&w| w == 0.0));
        assert_eq!(s.beta, 1.0);
    }

    #[test]
    fn sampled_mass_converges_rapidly() {
        let omega = BumpVorticity::new(vec![Bump::new(Complex64::new(0.0, 1.0), 0.3, 2.0)], ExteriorMap::segment(), 0.2)
            .unwrap();
        let m = omega.mass_with(16, 64);
        let flow = FlowData::new(0.5, 0.01, omega).unwrap();
        let mut errs = Vec::new();
        for (ns, nt) in [(128, 256), (256, 512)] {
            let g = grid(ns, nt);
            let mut p = PoissonSolver::new(&g).unwrap();
            let s = init_state(&g, &flow, &mut p).unwrap();
            errs.push((g.integrate_physical(&s.w) - m).abs());
            assert!(s.stokes_defect(&g).abs() < 1e-12);
        }
        // faster than any fixed order for a smooth compactly supported integrand
        assert!(errs[1] < 1e-5 && errs[0] / errs[1] > 30.0, "{errs:?}");
    }

    #[test]
    fn neutral_pair_keeps_beta_at_gamma() {
        let flow = FlowData::new(1.0, 0.01, pair()).unwrap();
        let g = grid(256, 512);
        let mut p = PoissonSolver::new(&g).unwrap();
        let s = init_state(&g, &flow, &mut p).unwrap();
        assert!(g.integrate_physical(&s.w).abs() < 1e-6);
        assert!((s.beta - 1.0).abs() < 1e-6, "{}", s.beta);
        assert!(s.stokes_defect(&g).abs() < 1e-12);
    }

    #[test]
    fn supports_touching_the_thick_obstacle_are_rejected() {
        let omega =
            BumpVorticity::new(vec![Bump::new(Complex64::new(0.0, 0.5), 0.3, 1.0)], ExteriorMap::segment(), 0.01)
                .unwrap();
        let flow = FlowData::new(0.0, 0.01, omega).unwrap();
        let g = build_grid(GridSpec {
            epsilon: 1.0,
            n_sigma: 32,
            n_theta: 32,
            r_max: 100.0,
        })
        .unwrap();
        let mut p = PoissonSolver::new(&g).unwrap();
        assert!(matches!(init_state(&g, &flow, &mut p), Err(SolverError::Support(_))));
    }
}
