use serde::{Deserialize, Serialize};

use super::diffusion::ImplicitDiffusion;
use super::wall::apply_wall_closure;
use super::{init_state, poisson_streamfunction, MappedGrid, PoissonSolver, SolverError, SolverState, WallClosure};
use crate::fields::FlowData;

/// Spatial discretization of `gJ(Ψ, w)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdvectionScheme {
    /// Arakawa's energy- and enstrophy-conserving Jacobian, SSP-RK3 in time.
    #[default]
    Arakawa,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub nu: f64,
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_dt: f64,
    pub advection: AdvectionScheme,
    pub wall: WallClosure,
    /// Relative residual for the implicit diffusion solves.
    pub diffusion_tolerance: f64,
    pub diffusion_max_iterations: usize,
    /// Advective Courant number allowed per step.
    pub cfl: f64,
    /// Initial steps whose diffusion halves use backward Euler instead of Crank-Nicolson.
    pub startup_steps: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            nu: 0.01,
            dt: 1e-3,
            t_end: 0.5,
            snapshot_dt: 0.01,
            advection: AdvectionScheme::Arakawa,
            wall: WallClosure::Thom,
            diffusion_tolerance: 1e-9,
            diffusion_max_iterations: 200,
            cfl: 1.0,
            startup_steps: 2,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(SolverError::Config(format!("{name} must be > 0, got {v}")))
            }
        };
        positive("nu", self.nu)?;
        positive("dt", self.dt)?;
        positive("t_end", self.t_end)?;
        positive("snapshot_dt", self.snapshot_dt)?;
        positive("cfl", self.cfl)?;
        positive("diffusion_tolerance", self.diffusion_tolerance)?;
        self.steps_per_snapshot()?;
        Ok(())
    }

    /// Whole number of steps between snapshots.
    pub fn steps_per_snapshot(&self) -> Result<u64, SolverError> {
        let n = (self.snapshot_dt / self.dt).round();
        if n < 1.0 || ((n * self.dt - self.snapshot_dt).abs() > 1e-9 * self.snapshot_dt) {
            return Err(SolverError::Config(format!(
                "snapshot_dt {} is not a multiple of dt {}",
                self.snapshot_dt, self.dt
            )));
        }
        Ok(n as u64)
    }

    pub fn total_steps(&self) -> u64 {
        (self.t_end / self.dt - 1e-9).ceil() as u64
    }
}

/// Time stepper for one grid: Strang splitting of half-step diffusion, full-step
/// advection and half-step diffusion, with the wall closure refreshed before each
/// diffusion half.
#[derive(Debug)]
pub struct Solver {
    pub grid: MappedGrid,
    pub config: SolverConfig,
    poisson: PoissonSolver,
    crank_nicolson: ImplicitDiffusion,
    backward_euler: ImplicitDiffusion,
    /// Largest BiCGSTAB iteration count of the last step.
    pub last_diffusion_iterations: usize,
}

impl Solver {
    pub fn new(grid: MappedGrid, config: SolverConfig) -> Result<Self, SolverError> {
        config.validate()?;
        let poisson = PoissonSolver::new(&grid)?;
        let half = 0.5 * config.dt;
        let crank_nicolson = ImplicitDiffusion::new(&grid, config.nu, half, 0.5)?;
        let backward_euler = ImplicitDiffusion::new(&grid, config.nu, half, 1.0)?;
        Ok(Solver {
            grid,
            config,
            poisson,
            crank_nicolson,
            backward_euler,
            last_diffusion_iterations: 0,
        })
    }

    pub fn init(&mut self, flow: &FlowData) -> Result<SolverState, SolverError> {
        init_state(&self.grid, flow, &mut self.poisson)
    }

    pub fn poisson(&mut self, state: &mut SolverState) {
        poisson_streamfunction(state, &self.grid, &mut self.poisson);
    }

    /// Largest `dt` the advective CFL bound allows for the current `Ψ`.
    pub fn cfl_limit(&self, state: &SolverState) -> f64 {
        let g = &self.grid;
        let (ns, nt) = (g.n_sigma(), g.n_theta());
        let mut rate = 0.0f64;
        for j in 1..ns - 1 {
            for k in 0..nt {
                let i = j * nt + k;
                let kp = j * nt + (k + 1) % nt;
                let km = j * nt + (k + nt - 1) % nt;
                let ps = (state.psi[i + nt] - state.psi[i - nt]) / (2.0 * g.dsigma);
                let pt = (state.psi[kp] - state.psi[km]) / (2.0 * g.dtheta);
                rate = rate.max(g.g[i] * (pt.abs() / g.dsigma + ps.abs() / g.dtheta));
            }
        }
        if rate == 0.0 {
            f64::INFINITY
        } else {
            self.config.cfl / rate
        }
    }

    fn diffuse(&mut self, state: &mut SolverState, startup: bool) -> Result<(), SolverError> {
        apply_wall_closure(state, &self.grid, self.config.wall);
        let op = if startup { &self.backward_euler } else { &self.crank_nicolson };
        let stats = op.step(
            &self.grid,
            &mut state.w,
            self.config.diffusion_tolerance,
            self.config.diffusion_max_iterations,
        )?;
        self.last_diffusion_iterations = self.last_diffusion_iterations.max(stats.iterations);
        self.poisson(state);
        Ok(())
    }

    fn advect(&mut self, state: &mut SolverState) {
        let dt = self.config.dt;
        let n = state.w.len();
        let w0 = state.w.clone();
        let mut k = vec![0.0; n];

        arakawa_rhs(&self.grid, &state.psi, &state.w, &mut k);
        for i in 0..n {
            state.w[i] = w0[i] + dt * k[i];
        }
        self.poisson(state);

        arakawa_rhs(&self.grid, &state.psi, &state.w, &mut k);
        for i in 0..n {
            state.w[i] = 0.75 * w0[i] + 0.25 * (state.w[i] + dt * k[i]);
        }
        self.poisson(state);

        arakawa_rhs(&self.grid, &state.psi, &state.w, &mut k);
        for i in 0..n {
            state.w[i] = (w0[i] + 2.0 * (state.w[i] + dt * k[i])) / 3.0;
        }
        self.poisson(state);
    }

    /// One step of length `config.dt`.
    pub fn advance(&mut self, state: &mut SolverState) -> Result<(), SolverError> {
        let limit = self.cfl_limit(state);
        if self.config.dt > limit * (1.0 + 1e-12) {
            return Err(SolverError::Cfl {
                dt: self.config.dt,
                required: limit,
                t: state.t,
            });
        }
        self.last_diffusion_iterations = 0;
        let startup = state.step < self.config.startup_steps;
        self.diffuse(state, startup)?;
        self.advect(state);
        self.diffuse(state, startup)?;
        state.step += 1;
        state.t = state.step as f64 * self.config.dt;
        if state.w.iter().chain(&state.psi).any(|v| !v.is_finite()) || !state.beta.is_finite() {
            return Err(SolverError::NonFinite {
                t: state.t,
                step: state.step,
            });
        }
        Ok(())
    }
}

/// `-gJ(Ψ, w)` on interior rows with Arakawa's Jacobian; zero on the wall and outer rows.
pub(crate) fn arakawa_rhs(grid: &MappedGrid, psi: &[f64], w: &[f64], out: &mut [f64]) {
    let (ns, nt) = (grid.n_sigma(), grid.n_theta());
    let scale = 1.0 / (12.0 * grid.dsigma * grid.dtheta);
    out[..nt].fill(0.0);
    out[(ns - 1) * nt..].fill(0.0);
    for j in 1..ns - 1 {
        let (r0, rm, rp) = (j * nt, (j - 1) * nt, (j + 1) * nt);
        for k in 0..nt {
            let kp = if k + 1 == nt { 0 } else { k + 1 };
            let km = if k == 0 { nt - 1 } else { k - 1 };
            // σ is the first coordinate, θ the second
            let p = |r: usize, c: usize| psi[r + c];
            let q = |r: usize, c: usize| w[r + c];
            let j1 = (p(rp, k) - p(rm, k)) * (q(r0, kp) - q(r0, km)) - (p(r0, kp) - p(r0, km)) * (q(rp, k) - q(rm, k));
            let j2 = p(rp, k) * (q(rp, kp) - q(rp, km)) - p(rm, k) * (q(rm, kp) - q(rm, km))
                - p(r0, kp) * (q(rp, kp) - q(rm, kp))
                + p(r0, km) * (q(rp, km) - q(rm, km));
            let j3 = q(r0, kp) * (p(rp, kp) - p(rm, kp)) - q(r0, km) * (p(rp, km) - p(rm, km))
                - q(rp, k) * (p(rp, kp) - p(rp, km))
                + q(rm, k) * (p(rm, kp) - p(rm, km));
            out[r0 + k] = -grid.g[r0 + k] * (j1 + j2 + j3) * scale;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{build_grid, GridSpec};
    use super::*;
    use crate::conformal::ExteriorMap;
    use crate::fields::{Bump, BumpVorticity};
    use num_complex::Complex64;

    fn grid(ns: usize, nt: usize, eps: f64) -> MappedGrid {
        build_grid(GridSpec {
            epsilon: eps,
            n_sigma: ns,
            n_theta: nt,
            r_max: 100.0,
        })
        .unwrap()
    }

    #[test]
    fn arakawa_jacobian_matches_the_continuous_one() {
        // Ψ = σ² cos θ, w = σ sin θ: J = Ψ_σ w_θ - Ψ_θ w_σ = 2σ² cos²θ + σ² sin²θ
        let mut errs = Vec::new();
        for n in [64, 128] {
            let g = grid(n, n, 0.2);
            let nt = g.n_theta();
            let mut psi = vec![0.0; g.len()];
            let mut w = vec![0.0; g.len()];
            for j in 0..n {
                for k in 0..nt {
                    let (s, t) = (g.sigma(j), g.theta(k));
                    psi[j * nt + k] = s * s * t.cos();
                    w[j * nt + k] = s * t.sin();
                }
            }
            let mut out = vec![0.0; g.len()];
            arakawa_rhs(&g, &psi, &w, &mut out);
            let mut err = 0.0f64;
            for j in 1..n - 1 {
                for k in 0..nt {
                    let (s, t) = (g.sigma(j), g.theta(k));
                    let want = -g.g[j * nt + k] * (2.0 * s * s * t.cos().powi(2) + s * s * t.sin().powi(2));
                    err = err.max((out[j * nt + k] - want).abs() / g.g[j * nt + k]);
                }
            }
            errs.push(err);
        }
        assert!(errs[0] / errs[1] > 3.5, "{errs:?}");
    }

    #[test]
    fn arakawa_conserves_mean_and_enstrophy() {
        let g = grid(48, 64, 0.2);
        let nt = g.n_theta();
        let n = g.len();
        let mut psi = vec![0.0; n];
        let mut w = vec![0.0; n];
        for j in 1..g.n_sigma() - 1 {
            for k in 0..nt {
                psi[j * nt + k] = ((j * 13 + k * 7) % 11) as f64 - 5.0;
                w[j * nt + k] = ((j * 5 + k * 3) % 7) as f64 - 3.0;
            }
        }
        // zero boundary rows on both fields make the discrete sums telescope
        for k in 0..nt {
            for r in [0, 1, g.n_sigma() - 2, g.n_sigma() - 1] {
                psi[r * nt + k] = 0.0;
                w[r * nt + k] = 0.0;
            }
        }
        let mut out = vec![0.0; n];
        arakawa_rhs(&g, &psi, &w, &mut out);
        let mean: f64 = out.iter().zip(&g.g).map(|(o, gg)| o / gg).sum();
        let ens: f64 = out.iter().zip(&g.g).zip(&w).map(|((o, gg), w)| o / gg * w).sum();
        let energy: f64 = out.iter().zip(&g.g).zip(&psi).map(|((o, gg), p)| o / gg * p).sum();
        assert!(mean.abs() < 1e-9);
        assert!(ens.abs() < 1e-9);
        assert!(energy.abs() < 1e-9);
    }

    #[test]
    fn circulation_split_is_conserved() {
        let omega = BumpVorticity::new(
            vec![Bump::new(Complex64::new(0.0, 0.9), 0.4, 3.0)],
            ExteriorMap::segment(),
            0.2,
        )
        .unwrap();
        let flow = FlowData::new(1.0, 0.01, omega).unwrap();
        let g = grid(64, 128, 0.1);
        let mut s = Solver::new(g, SolverConfig { dt: 2e-3, ..Default::default() }).unwrap();
        let mut state = s.init(&flow).unwrap();
        let alpha = flow.alpha();
        for _ in 0..20 {
            s.advance(&mut state).unwrap();
            assert!(state.stokes_defect(&s.grid).abs() < 1e-6 * alpha.abs());
        }
        assert!((state.beta - 1.0).abs() > 1e-3);
    }

    #[test]
    fn cfl_violation_reports_the_needed_step() {
        let flow = FlowData::new(5.0, 0.01, BumpVorticity::zero()).unwrap();
        let mut s = Solver::new(grid(64, 128, 0.05), SolverConfig { dt: 0.5, snapshot_dt: 0.5, ..Default::default() }).unwrap();
        let mut state = s.init(&flow).unwrap();
        match s.advance(&mut state) {
            Err(SolverError::Cfl { required, .. }) => assert!(required < 0.5),
            other => panic!("{other:?}"),
        }
    }
}
