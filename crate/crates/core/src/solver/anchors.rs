//! Exactness checks on small grids: the carrier, manufactured solutions and the zero state.

use std::f64::consts::PI;

use super::diffusion::ImplicitDiffusion;
use super::{build_grid, GridSpec, MappedGrid, PoissonSolver, Solver, SolverConfig, SolverError, SolverState};
use crate::fields::{BumpVorticity, FlowData};

fn grid(ns: usize, nt: usize, epsilon: f64) -> Result<MappedGrid, SolverError> {
    build_grid(GridSpec {
        epsilon,
        n_sigma: ns,
        n_theta: nt,
        r_max: 100.0,
    })
}

/// Max deviation of the streamfunction of `w = 0` from `(β/2π)σ`.
pub fn carrier_error(ns: usize, nt: usize, beta: f64) -> Result<f64, SolverError> {
    let g = grid(ns, nt, 0.1)?;
    let mut solver = PoissonSolver::new(&g)?;
    let mut psi = vec![0.0; g.len()];
    solver.streamfunction(&g, &vec![0.0; g.len()], beta, &mut psi);
    let mut err = 0.0f64;
    for j in 0..ns {
        for k in 0..nt {
            err = err.max((psi[g.idx(j, k)] - beta * g.sigma(j) / (2.0 * PI)).abs());
        }
    }
    Ok(err)
}

/// Max error of the Poisson solve for `Ψ = sin θ·σ(L - σ)e^{-σ}`, which vanishes at both ends.
pub fn manufactured_poisson_error(ns: usize, nt: usize) -> Result<f64, SolverError> {
    let g = grid(ns, nt, 0.1)?;
    let l = g.sigma_max;
    let exact = |s: f64, t: f64| t.sin() * s * (l - s) * (-s).exp();
    let source = |s: f64, t: f64| {
        let f = s * (l - s) * (-s).exp();
        let f2 = (-s).exp() * (-2.0 - 2.0 * (l - 2.0 * s) + s * (l - s));
        t.sin() * (f2 - f)
    };
    let mut q = vec![0.0; g.len()];
    for j in 0..ns {
        for k in 0..nt {
            q[g.idx(j, k)] = source(g.sigma(j), g.theta(k));
        }
    }
    let mut solver = PoissonSolver::new(&g)?;
    let mut psi = vec![0.0; g.len()];
    solver.solve(&q, &mut psi);
    let mut err = 0.0f64;
    for j in 0..ns {
        for k in 0..nt {
            err = err.max((psi[g.idx(j, k)] - exact(g.sigma(j), g.theta(k))).abs());
        }
    }
    Ok(err)
}

/// Max error of one implicit diffusion solve `(I - c gΔ_s)w = f` against `w = sin θ·σ(L - σ)`.
pub fn manufactured_diffusion_error(ns: usize, nt: usize) -> Result<f64, SolverError> {
    let g = grid(ns, nt, 0.1)?;
    let l = g.sigma_max;
    let c = 1e-3;
    let d = ImplicitDiffusion::new(&g, 1.0, c, 1.0)?;
    let exact = |s: f64, t: f64| t.sin() * s * (l - s);
    // Δ_s w = sin θ(-2 - σ(L - σ))
    let mut w = vec![0.0; g.len()];
    for j in 1..ns - 1 {
        for k in 0..nt {
            let (s, t) = (g.sigma(j), g.theta(k));
            let lap = t.sin() * (-2.0 - s * (l - s));
            w[g.idx(j, k)] = exact(s, t) - c * g.g[g.idx(j, k)] * lap;
        }
    }
    // backward Euler has no explicit part, so w holds the right-hand side
    d.step(&g, &mut w, 1e-13, 200)?;
    let mut err = 0.0f64;
    for j in 0..ns {
        for k in 0..nt {
            err = err.max((w[g.idx(j, k)] - exact(g.sigma(j), g.theta(k))).abs());
        }
    }
    Ok(err)
}

/// Largest `|w|`, `|Ψ|` or `|β|` after `steps` steps from zero data with `γ = 0`.
pub fn zero_data_drift(steps: usize) -> Result<f64, SolverError> {
    let flow = FlowData::new(0.0, 0.01, BumpVorticity::zero())?;
    let config = SolverConfig {
        dt: 1e-3,
        ..SolverConfig::default()
    };
    let mut solver = Solver::new(grid(32, 64, 0.1)?, config)?;
    let mut state: SolverState = solver.init(&flow)?;
    for _ in 0..steps {
        solver.advance(&mut state)?;
    }
    Ok(state
        .w
        .iter()
        .chain(&state.psi)
        .chain(std::iter::once(&state.beta))
        .fold(0.0, |m, v| m.max(v.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orders(e: &[f64]) -> Vec<f64> {
        e.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
    }

    #[test]
    fn carrier_is_reproduced() {
        assert!(carrier_error(64, 64, 1.0).unwrap() < 1e-10);
        assert!(carrier_error(64, 64, -3.5).unwrap() < 1e-10);
    }

    #[test]
    fn manufactured_poisson_is_second_order() {
        let e: Vec<f64> = [(33, 32), (65, 64), (129, 128)]
            .iter()
            .map(|&(a, b)| manufactured_poisson_error(a, b).unwrap())
            .collect();
        assert!(orders(&e).iter().all(|&p| p > 1.9), "{e:?}");
    }

    #[test]
    fn manufactured_diffusion_is_second_order() {
        let e: Vec<f64> = [(33, 32), (65, 64), (129, 128)]
            .iter()
            .map(|&(a, b)| manufactured_diffusion_error(a, b).unwrap())
            .collect();
        assert!(orders(&e).iter().all(|&p| p > 1.8), "{e:?}");
    }

    #[test]
    fn zero_data_is_a_fixed_point() {
        assert_eq!(zero_data_drift(100).unwrap(), 0.0);
    }
}
