use super::poisson::laplacian;
use super::{MappedGrid, SolverError};

/// `(I - c_i gΔ_s) w_new = (I + c_e gΔ_s) w_old` on interior rows, wall and outer rows held.
///
/// The factored operator `(I - c_i g∂_σσ)(I - c_i g∂_θθ)` is inverted directly and
/// serves as the preconditioner.
#[derive(Debug, Clone)]
pub(crate) struct ImplicitDiffusion {
    pub c_implicit: f64,
    pub c_explicit: f64,
    n_sigma: usize,
    n_theta: usize,
    // σ sweeps, stored per node
    s_lower: Vec<f64>,
    s_upper: Vec<f64>,
    s_inv: Vec<f64>,
    // θ sweeps: Thomas factors of the corner-modified system plus the Sherman-Morrison vector
    t_lower: Vec<f64>,
    t_upper: Vec<f64>,
    t_inv: Vec<f64>,
    t_z: Vec<f64>,
    t_gamma: Vec<f64>,
    t_corner: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct DiffusionStats {
    pub iterations: usize,
    pub residual: f64,
}

fn factor(lower: &[f64], diag: &[f64], upper: &[f64], inv: &mut [f64], cp: &mut [f64]) -> Result<(), SolverError> {
    let mut prev = 0.0;
    for i in 0..diag.len() {
        let den = diag[i] - lower[i] * prev;
        if !(den.abs() > 1e-300) {
            return Err(SolverError::Singular("diffusion"));
        }
        inv[i] = 1.0 / den;
        cp[i] = upper[i] * inv[i];
        prev = cp[i];
    }
    Ok(())
}

fn thomas(lower: &[f64], cp: &[f64], inv: &[f64], x: &mut [f64]) {
    let n = x.len();
    let mut prev = 0.0;
    for i in 0..n {
        x[i] = (x[i] - lower[i] * prev) * inv[i];
        prev = x[i];
    }
    for i in (0..n.saturating_sub(1)).rev() {
        x[i] -= cp[i] * x[i + 1];
    }
}

impl ImplicitDiffusion {
    /// `theta` = 1/2 is Crank-Nicolson, 1 is backward Euler.
    pub fn new(grid: &MappedGrid, nu: f64, dt: f64, theta: f64) -> Result<Self, SolverError> {
        let (ns, nt) = (grid.n_sigma(), grid.n_theta());
        let ci = theta * nu * dt;
        let hs = ci / (grid.dsigma * grid.dsigma);
        let ht = ci / (grid.dtheta * grid.dtheta);
        let n = ns * nt;

        let mut s_lower = vec![0.0; n];
        let mut s_upper = vec![0.0; n];
        let mut s_inv = vec![0.0; n];
        let mut prev = vec![0.0; nt];
        for j in 1..ns - 1 {
            for k in 0..nt {
                let i = j * nt + k;
                let off = -hs * grid.g[i];
                let lower = if j > 1 { off } else { 0.0 };
                let den = 1.0 - 2.0 * off - lower * prev[k];
                if !(den.abs() > 1e-300) {
                    return Err(SolverError::Singular("diffusion"));
                }
                s_lower[i] = lower;
                s_inv[i] = 1.0 / den;
                s_upper[i] = if j + 2 < ns { off * s_inv[i] } else { 0.0 };
                prev[k] = s_upper[i];
            }
        }

        let mut t_lower = vec![0.0; n];
        let mut t_upper = vec![0.0; n];
        let mut t_inv = vec![0.0; n];
        let mut t_z = vec![0.0; n];
        let mut t_gamma = vec![0.0; ns];
        let mut t_corner = vec![(0.0, 0.0); ns];
        for j in 1..ns - 1 {
            let row = j * nt..(j + 1) * nt;
            let a: Vec<f64> = grid.g[row.clone()].iter().map(|g| -ht * g).collect();
            let c = a.clone();
            let mut b: Vec<f64> = a.iter().map(|x| 1.0 - 2.0 * x).collect();
            // corners: A[0][n-1] = a₀, A[n-1][0] = c_{n-1}
            let top = a[0];
            let bottom = c[nt - 1];
            let gamma = -b[0];
            b[0] -= gamma;
            b[nt - 1] -= bottom * top / gamma;
            let mut lower = a.clone();
            lower[0] = 0.0;
            let mut upper = c.clone();
            upper[nt - 1] = 0.0;
            let (inv, cp) = (&mut t_inv[row.clone()], &mut t_upper[row.clone()]);
            factor(&lower, &b, &upper, inv, cp)?;
            t_lower[row.clone()].copy_from_slice(&lower);
            let z = &mut t_z[row.clone()];
            z[0] = gamma;
            z[nt - 1] = bottom;
            thomas(&t_lower[row.clone()], &t_upper[row.clone()], &t_inv[row.clone()], z);
            t_gamma[j] = gamma;
            t_corner[j] = (top, bottom);
        }

        Ok(ImplicitDiffusion {
            c_implicit: ci,
            c_explicit: (1.0 - theta) * nu * dt,
            n_sigma: ns,
            n_theta: nt,
            s_lower,
            s_upper,
            s_inv,
            t_lower,
            t_upper,
            t_inv,
            t_z,
            t_gamma,
            t_corner,
        })
    }

    /// Applies the inverse of the factored operator to interior rows of `r` in place.
    fn precondition(&self, r: &mut [f64]) {
        let (ns, nt) = (self.n_sigma, self.n_theta);
        // σ: all columns swept together
        for j in 1..ns - 1 {
            for k in 0..nt {
                let i = j * nt + k;
                let below = if j > 1 { r[i - nt] } else { 0.0 };
                r[i] = (r[i] - self.s_lower[i] * below) * self.s_inv[i];
            }
        }
        for j in (1..ns - 2).rev() {
            for k in 0..nt {
                let i = j * nt + k;
                r[i] -= self.s_upper[i] * r[i + nt];
            }
        }
        // θ: periodic rows via Sherman-Morrison
        for j in 1..ns - 1 {
            let row = j * nt..(j + 1) * nt;
            let x = &mut r[row.clone()];
            thomas(&self.t_lower[row.clone()], &self.t_upper[row.clone()], &self.t_inv[row.clone()], x);
            let z = &self.t_z[row];
            let gamma = self.t_gamma[j];
            let (top, _) = self.t_corner[j];
            let fact = (x[0] + top * x[nt - 1] / gamma) / (1.0 + z[0] + top * z[nt - 1] / gamma);
            for (xi, zi) in x.iter_mut().zip(z) {
                *xi -= fact * zi;
            }
        }
    }

    /// `out = (I - c_i gΔ_s) y` for `y` vanishing on the wall and outer rows.
    fn apply(&self, grid: &MappedGrid, y: &[f64], lap: &mut [f64], out: &mut [f64]) {
        let nt = self.n_theta;
        laplacian(grid, y, lap);
        for i in nt..(self.n_sigma - 1) * nt {
            out[i] = y[i] - self.c_implicit * grid.g[i] * lap[i];
        }
    }

    /// Advances `w` in place. Row 0 must already hold the new wall values.
    ///
    /// The correction is found by BiCGSTAB, right-preconditioned with the factored operator.
    pub fn step(
        &self,
        grid: &MappedGrid,
        w: &mut [f64],
        tolerance: f64,
        max_iterations: usize,
    ) -> Result<DiffusionStats, SolverError> {
        let (ns, nt) = (self.n_sigma, self.n_theta);
        let n = w.len();
        let interior = nt..(ns - 1) * nt;
        let dot = |a: &[f64], b: &[f64]| -> f64 { a[interior.clone()].iter().zip(&b[interior.clone()]).map(|(x, y)| x * y).sum() };
        let mut lap = vec![0.0; n];
        laplacian(grid, w, &mut lap);
        let mut r = vec![0.0; n];
        let mut b_norm = 0.0f64;
        for i in interior.clone() {
            let b = w[i] + self.c_explicit * grid.g[i] * lap[i];
            b_norm = b_norm.max(b.abs());
            r[i] = b - (w[i] - self.c_implicit * grid.g[i] * lap[i]);
        }
        let b_norm = b_norm.max(f64::MIN_POSITIVE);
        let max_abs = |v: &[f64]| v[interior.clone()].iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut stats = DiffusionStats {
            iterations: 0,
            residual: max_abs(&r) / b_norm,
        };
        if stats.residual <= tolerance {
            return Ok(stats);
        }
        let r_hat = r.clone();
        let mut x = vec![0.0; n];
        let (mut p, mut v) = (vec![0.0; n], vec![0.0; n]);
        let (mut p_hat, mut s_hat, mut t) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
        loop {
            if stats.iterations >= max_iterations {
                return Err(SolverError::Config(format!(
                    "diffusion solve stalled at relative residual {:e} after {} iterations",
                    stats.residual, stats.iterations
                )));
            }
            stats.iterations += 1;
            let rho_new = dot(&r_hat, &r);
            if rho_new == 0.0 || omega == 0.0 {
                return Err(SolverError::Singular("diffusion BiCGSTAB breakdown"));
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for i in interior.clone() {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
            p_hat.copy_from_slice(&p);
            self.precondition(&mut p_hat);
            self.apply(grid, &p_hat, &mut lap, &mut v);
            alpha = rho / dot(&r_hat, &v);
            for i in interior.clone() {
                r[i] -= alpha * v[i];
                x[i] += alpha * p_hat[i];
            }
            stats.residual = max_abs(&r) / b_norm;
            if stats.residual <= tolerance {
                break;
            }
            s_hat.copy_from_slice(&r);
            self.precondition(&mut s_hat);
            self.apply(grid, &s_hat, &mut lap, &mut t);
            let tt = dot(&t, &t);
            omega = if tt > 0.0 { dot(&t, &r) / tt } else { 0.0 };
            for i in interior.clone() {
                x[i] += omega * s_hat[i];
                r[i] -= omega * t[i];
            }
            stats.residual = max_abs(&r) / b_norm;
            if stats.residual <= tolerance {
                break;
            }
        }
        for i in interior {
            w[i] += x[i];
        }
        Ok(stats)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{build_grid, GridSpec};
    use super::*;

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
    fn preconditioner_inverts_the_factored_operator() {
        let g = grid(40, 64, 0.1);
        let d = ImplicitDiffusion::new(&g, 0.01, 1e-2, 1.0).unwrap();
        let (ns, nt) = (g.n_sigma(), g.n_theta());
        let x: Vec<f64> = (0..g.len())
            .map(|i| if i < nt || i >= (ns - 1) * nt { 0.0 } else { ((i * 37) % 23) as f64 - 11.0 })
            .collect();
        // apply (I - c g ∂θθ) then (I - c g ∂σσ)
        let c = d.c_implicit;
        let mut y = x.clone();
        for j in 1..ns - 1 {
            for k in 0..nt {
                let i = j * nt + k;
                let kp = j * nt + (k + 1) % nt;
                let km = j * nt + (k + nt - 1) % nt;
                y[i] = x[i] - c * g.g[i] * (x[kp] - 2.0 * x[i] + x[km]) / (g.dtheta * g.dtheta);
            }
        }
        let mut z = y.clone();
        for j in 1..ns - 1 {
            for k in 0..nt {
                let i = j * nt + k;
                z[i] = y[i] - c * g.g[i] * (y[i + nt] - 2.0 * y[i] + y[i - nt]) / (g.dsigma * g.dsigma);
            }
        }
        d.precondition(&mut z);
        for i in nt..(ns - 1) * nt {
            assert!((z[i] - x[i]).abs() < 1e-10, "{i} {} {}", z[i], x[i]);
        }
    }

    #[test]
    fn zero_stays_zero() {
        let g = grid(32, 64, 0.1);
        let d = ImplicitDiffusion::new(&g, 0.01, 1e-3, 0.5).unwrap();
        let mut w = vec![0.0; g.len()];
        let stats = d.step(&g, &mut w, 1e-12, 50).unwrap();
        assert_eq!(stats.iterations, 0);
        assert!(w.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn iteration_reaches_the_unsplit_solution() {
        let g = grid(64, 128, 0.05);
        let d = ImplicitDiffusion::new(&g, 0.01, 2e-4, 0.5).unwrap();
        let nt = g.n_theta();
        let mut w: Vec<f64> = (0..g.len())
            .map(|i| {
                let (j, k) = (i / nt, i % nt);
                (-g.sigma(j)).exp() * (1.0 + g.theta(k).cos())
            })
            .collect();
        for v in &mut w[(g.n_sigma() - 1) * nt..] {
            *v = 0.0;
        }
        let stats = d.step(&g, &mut w, 1e-11, 200).unwrap();
        assert!(stats.residual <= 1e-11);
    }
}
