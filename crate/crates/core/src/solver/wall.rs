use serde::{Deserialize, Serialize};

use super::{MappedGrid, SolverState};

/// No-slip closure for the wall vorticity.
///
/// With `Ψ = 0` and `Ψ_σ = 0` on `σ = 0`, `w = gΨ_σσ` there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WallClosure {
    /// `w₀ = 2gΨ₁/Δσ²`.
    #[default]
    Thom,
    /// `w₀ = g(8Ψ₁ - Ψ₂)/(2Δσ²)`.
    Jensen,
}

/// Wall vorticity implied by the current `Ψ`, one value per θ node.
pub fn wall_vorticity(state: &SolverState, grid: &MappedGrid, closure: WallClosure) -> Vec<f64> {
    let nt = grid.n_theta();
    let h2 = grid.dsigma * grid.dsigma;
    (0..nt)
        .map(|k| {
            let g = grid.g[k];
            let p1 = state.psi[nt + k];
            let p2 = state.psi[2 * nt + k];
            match closure {
                WallClosure::Thom => 2.0 * g * p1 / h2,
                WallClosure::Jensen => g * (8.0 * p1 - p2) / (2.0 * h2),
            }
        })
        .collect()
}

pub(crate) fn apply_wall_closure(state: &mut SolverState, grid: &MappedGrid, closure: WallClosure) {
    let wall = wall_vorticity(state, grid, closure);
    state.w[..grid.n_theta()].copy_from_slice(&wall);
    // Ψ does not depend on the wall row; only the carrier weight moves
    state.beta = state.alpha - grid.integrate_physical(&state.w);
}

#[cfg(test)]
mod tests {
    use super::super::{build_grid, poisson_streamfunction, GridSpec, PoissonSolver};
    use super::*;
    use std::f64::consts::PI;

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
    fn zero_state_has_zero_wall_vorticity() {
        let g = grid(32, 64);
        let s = SolverState::zeros(&g, 0.0);
        for c in [WallClosure::Thom, WallClosure::Jensen] {
            assert!(wall_vorticity(&s, &g, c).iter().all(|&w| w == 0.0));
        }
    }

    #[test]
    fn potential_flow_generates_symmetric_wall_vorticity() {
        let g = grid(64, 128);
        let mut p = PoissonSolver::new(&g).unwrap();
        let mut s = SolverState::zeros(&g, 1.0);
        poisson_streamfunction(&mut s, &g, &mut p);
        let wall = wall_vorticity(&s, &g, WallClosure::Thom);
        let nt = g.n_theta();
        assert!(wall.iter().all(|&w| w > 0.0));
        // the segment is symmetric under θ → -θ (top/bottom) and θ → π - θ
        for k in 1..nt {
            assert!((wall[k] - wall[nt - k]).abs() < 1e-9 * wall[k]);
            let m = (nt / 2 + nt - k) % nt;
            assert!((wall[k] - wall[m]).abs() < 1e-9 * wall[k]);
        }
    }

    #[test]
    fn thom_closure_moves_all_wall_circulation_into_the_wall_row() {
        let g = grid(64, 128);
        let mut p = PoissonSolver::new(&g).unwrap();
        let mut s = SolverState::zeros(&g, 1.0);
        poisson_streamfunction(&mut s, &g, &mut p);
        let before = s.psi.clone();
        apply_wall_closure(&mut s, &g, WallClosure::Thom);
        assert!(s.beta.abs() < 1e-12, "{}", s.beta);
        poisson_streamfunction(&mut s, &g, &mut p);
        for (a, b) in before.iter().zip(&s.psi) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn closures_converge_on_a_smooth_state() {
        // Ψ = σ²(1 + cos θ)/2 has Ψ_σσ = 1 + cos θ at the wall
        let mut prev = f64::INFINITY;
        for (ns, closure) in [(64, WallClosure::Thom), (128, WallClosure::Thom), (256, WallClosure::Thom)] {
            let g = grid(ns, 64);
            let mut s = SolverState::zeros(&g, 0.0);
            let nt = g.n_theta();
            for j in 0..ns {
                for k in 0..nt {
                    let sg = g.sigma(j);
                    s.psi[j * nt + k] = 0.5 * sg * sg * (1.0 + g.theta(k).cos()) + sg * sg * sg;
                }
            }
            let wall = wall_vorticity(&s, &g, closure);
            let err = (0..nt)
                .map(|k| (wall[k] / g.g[k] - (1.0 + g.theta(k).cos())).abs())
                .fold(0.0, f64::max);
            assert!(err < 0.6 * prev, "{err} {prev}");
            prev = err;
        }
        let g = grid(64, 64);
        let mut s = SolverState::zeros(&g, 0.0);
        let nt = g.n_theta();
        for j in 0..64 {
            for k in 0..nt {
                let sg = g.sigma(j);
                s.psi[j * nt + k] = 0.5 * sg * sg * (1.0 + (2.0 * PI * k as f64 / nt as f64).cos()) + sg * sg * sg;
            }
        }
        let wall = wall_vorticity(&s, &g, WallClosure::Jensen);
        for k in 0..nt {
            assert!((wall[k] / g.g[k] - (1.0 + g.theta(k).cos())).abs() < 1e-10);
        }
    }
}
