use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use std::f64::consts::PI;
use std::sync::Arc;

use super::{MappedGrid, SolverError, SolverState};

/// FFT-in-θ, tridiagonal-in-σ solver for `Δ_s Ψ_p = q`.
///
/// Modes `k ≠ 0` take `Ψ_p = 0` at the wall and at `σ_max`. The mean mode is
/// marched out from the wall with `Ψ_p = ∂_σΨ_p = 0`, so all wall circulation is
/// carried by the `(β/2π)σ` term and the far-field circulation is exactly `β + Σw`.
pub struct PoissonSolver {
    n_sigma: usize,
    n_theta: usize,
    /// Retained half spectrum per row, `n_theta/2 + 1`.
    n_modes: usize,
    dsigma: f64,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
    /// Thomas factors per `(j, k)` on the half spectrum, interior rows only.
    upper: Vec<f64>,
    inv_den: Vec<f64>,
    row: Vec<f64>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl std::fmt::Debug for PoissonSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PoissonSolver")
            .field("n_sigma", &self.n_sigma)
            .field("n_theta", &self.n_theta)
            .finish()
    }
}

impl PoissonSolver {
    pub fn new(grid: &MappedGrid) -> Result<Self, SolverError> {
        let (ns, nt) = (grid.n_sigma(), grid.n_theta());
        let nm = nt / 2 + 1;
        let mut planner = RealFftPlanner::new();
        let forward = planner.plan_fft_forward(nt);
        let inverse = planner.plan_fft_inverse(nt);
        let h2 = 1.0 / (grid.dsigma * grid.dsigma);
        let mut upper = vec![0.0; ns * nm];
        let mut inv_den = vec![0.0; ns * nm];
        for k in 1..nm {
            let s = (0.5 * k as f64 * grid.dtheta).sin();
            let lambda = 4.0 * s * s / (grid.dtheta * grid.dtheta);
            let diag = -2.0 * h2 - lambda;
            let mut prev = 0.0;
            for j in 1..ns - 1 {
                let den = diag - h2 * prev;
                if den.abs() < 1e-300 || !den.is_finite() {
                    return Err(SolverError::Singular("poisson"));
                }
                let c = h2 / den;
                upper[j * nm + k] = c;
                inv_den[j * nm + k] = 1.0 / den;
                prev = c;
            }
        }
        let scratch = vec![Complex64::default(); forward.get_scratch_len().max(inverse.get_scratch_len())];
        Ok(PoissonSolver {
            n_sigma: ns,
            n_theta: nt,
            n_modes: nm,
            dsigma: grid.dsigma,
            forward,
            inverse,
            upper,
            inv_den,
            row: vec![0.0; nt],
            buf: vec![Complex64::default(); ns * nm],
            scratch,
        })
    }

    /// Solves `Δ_s Ψ_p = q` on every row.
    pub fn solve(&mut self, q: &[f64], psi: &mut [f64]) {
        let (ns, nt, nm) = (self.n_sigma, self.n_theta, self.n_modes);
        let h2 = 1.0 / (self.dsigma * self.dsigma);
        for j in 0..ns {
            self.row.copy_from_slice(&q[j * nt..(j + 1) * nt]);
            self.forward
                .process_with_scratch(&mut self.row, &mut self.buf[j * nm..(j + 1) * nm], &mut self.scratch)
                .expect("row lengths match the plan");
        }
        let buf = &mut self.buf;

        // mean mode: Cauchy march from the wall
        let d2 = self.dsigma * self.dsigma;
        let q0: Vec<f64> = (0..ns).map(|j| buf[j * nm].re).collect();
        buf[0] = Complex64::default();
        if ns > 1 {
            buf[nm] = Complex64::new(0.5 * d2 * q0[0], 0.0);
        }
        for j in 1..ns - 1 {
            buf[(j + 1) * nm] = 2.0 * buf[j * nm] - buf[(j - 1) * nm] + d2 * q0[j];
        }

        // other modes: forward sweep over interior rows, all k at once
        for j in 1..ns - 1 {
            for k in 1..nm {
                let i = j * nm + k;
                let below = if j > 1 { buf[i - nm] } else { Complex64::default() };
                buf[i] = (buf[i] - h2 * below) * self.inv_den[i];
            }
        }
        for k in 1..nm {
            buf[k] = Complex64::default();
            buf[(ns - 1) * nm + k] = Complex64::default();
        }
        for j in (1..ns - 2).rev() {
            for k in 1..nm {
                let i = j * nm + k;
                let above = buf[i + nm];
                buf[i] -= self.upper[i] * above;
            }
        }

        let scale = 1.0 / nt as f64;
        for j in 0..ns {
            let spec = &mut self.buf[j * nm..(j + 1) * nm];
            // the mean and Nyquist modes of a real row are real
            spec[0].im = 0.0;
            if nt % 2 == 0 {
                spec[nm - 1].im = 0.0;
            }
            self.inverse
                .process_with_scratch(spec, &mut self.row, &mut self.scratch)
                .expect("row lengths match the plan");
            for (p, r) in psi[j * nt..(j + 1) * nt].iter_mut().zip(&self.row) {
                *p = r * scale;
            }
        }
    }

    /// Full streamfunction from `w` and `β`: `Ψ = Ψ_p + (β/2π)σ`.
    pub fn streamfunction(&mut self, grid: &MappedGrid, w: &[f64], beta: f64, psi: &mut [f64]) {
        let q: Vec<f64> = w.iter().zip(&grid.g).map(|(w, g)| w / g).collect();
        self.solve(&q, psi);
        let nt = grid.n_theta();
        for j in 0..grid.n_sigma() {
            let carrier = beta * grid.sigma(j) / (2.0 * PI);
            for v in &mut psi[j * nt..(j + 1) * nt] {
                *v += carrier;
            }
        }
    }
}

/// Recomputes `β = α - Σw` and `Ψ` for the state.
pub fn poisson_streamfunction(state: &mut SolverState, grid: &MappedGrid, solver: &mut PoissonSolver) {
    state.beta = state.alpha - grid.integrate_physical(&state.w);
    let mut psi = std::mem::take(&mut state.psi);
    solver.streamfunction(grid, &state.w, state.beta, &mut psi);
    state.psi = psi;
}

/// Five-point `Δ_s` at interior nodes; zero on the wall and outer rows.
pub(crate) fn laplacian(grid: &MappedGrid, f: &[f64], out: &mut [f64]) {
    let (ns, nt) = (grid.n_sigma(), grid.n_theta());
    let hs = 1.0 / (grid.dsigma * grid.dsigma);
    let ht = 1.0 / (grid.dtheta * grid.dtheta);
    out[..nt].fill(0.0);
    out[(ns - 1) * nt..].fill(0.0);
    for j in 1..ns - 1 {
        for k in 0..nt {
            let kp = if k + 1 == nt { 0 } else { k + 1 };
            let km = if k == 0 { nt - 1 } else { k - 1 };
            let i = j * nt + k;
            out[i] = (f[i + nt] - 2.0 * f[i] + f[i - nt]) * hs + (f[j * nt + kp] - 2.0 * f[i] + f[j * nt + km]) * ht;
        }
    }
}
