use num_complex::Complex64;

use super::{MappedGrid, SolverError, SolverState};
use crate::conformal::ComplexPoint;

/// `(Ψ_σ, Ψ_θ)` at every node: centered inside, one-sided second order on the wall and outer rows.
pub fn stream_gradients(grid: &MappedGrid, psi: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (ns, nt) = (grid.n_sigma(), grid.n_theta());
    let mut ps = vec![0.0; psi.len()];
    let mut pt = vec![0.0; psi.len()];
    let hs = 0.5 / grid.dsigma;
    let ht = 0.5 / grid.dtheta;
    for j in 0..ns {
        for k in 0..nt {
            let i = j * nt + k;
            ps[i] = if j == 0 {
                (-3.0 * psi[i] + 4.0 * psi[i + nt] - psi[i + 2 * nt]) * hs
            } else if j + 1 == ns {
                (3.0 * psi[i] - 4.0 * psi[i - nt] + psi[i - 2 * nt]) * hs
            } else {
                (psi[i + nt] - psi[i - nt]) * hs
            };
            let kp = j * nt + (k + 1) % nt;
            let km = j * nt + (k + nt - 1) % nt;
            pt[i] = (psi[kp] - psi[km]) * ht;
        }
    }
    (ps, pt)
}

fn lagrange4(s: f64) -> [f64; 4] {
    let mut w = [1.0; 4];
    for (m, wm) in w.iter_mut().enumerate() {
        for n in 0..4 {
            if n != m {
                *wm *= (s - n as f64) / (m as f64 - n as f64);
            }
        }
    }
    w
}

#[derive(Debug, Clone, Copy)]
struct Stencil {
    j0: usize,
    ks: [usize; 4],
    ws: [f64; 4],
    wt: [f64; 4],
    /// `T_ε'/T_ε` at the probe.
    ld: Complex64,
}

/// Bicubic interpolation of the stream gradients at fixed physical points.
#[derive(Debug, Clone)]
pub struct ProbeSampler {
    stencils: Vec<Stencil>,
}

impl ProbeSampler {
    pub fn new(grid: &MappedGrid, points: &[ComplexPoint]) -> Result<Self, SolverError> {
        let (ns, nt) = (grid.n_sigma(), grid.n_theta());
        let stencils = points
            .iter()
            .map(|&x| {
                let p = grid.family.point(x).map_err(|_| SolverError::Probe(x))?;
                let sigma = p.w.norm().ln();
                if !(sigma >= -1e-12 && sigma <= grid.sigma_max) {
                    return Err(SolverError::Probe(x));
                }
                let sf = sigma.max(0.0) / grid.dsigma;
                let j0 = (sf.floor() as isize - 1).clamp(0, ns as isize - 4) as usize;
                let theta = p.w.arg().rem_euclid(2.0 * std::f64::consts::PI);
                let tf = theta / grid.dtheta;
                let base = tf.floor();
                let k0 = (base as isize - 1).rem_euclid(nt as isize) as usize;
                Ok(Stencil {
                    j0,
                    ks: [k0, (k0 + 1) % nt, (k0 + 2) % nt, (k0 + 3) % nt],
                    ws: lagrange4(sf - j0 as f64),
                    wt: lagrange4(tf - base + 1.0),
                    ld: p.log_derivative(),
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(ProbeSampler { stencils })
    }

    pub fn len(&self) -> usize {
        self.stencils.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stencils.is_empty()
    }

    /// Velocities from precomputed gradients.
    pub fn sample_gradients(&self, nt: usize, ps: &[f64], pt: &[f64]) -> Vec<ComplexPoint> {
        self.stencils
            .iter()
            .map(|st| {
                let (mut a, mut b) = (0.0, 0.0);
                for (dj, &wsj) in st.ws.iter().enumerate() {
                    let row = (st.j0 + dj) * nt;
                    for (&k, &wtk) in st.ks.iter().zip(&st.wt) {
                        let w = wsj * wtk;
                        a += w * ps[row + k];
                        b += w * pt[row + k];
                    }
                }
                Complex64::new(0.0, 1.0) * st.ld.conj() * Complex64::new(a, b)
            })
            .collect()
    }

    pub fn sample(&self, grid: &MappedGrid, psi: &[f64]) -> Vec<ComplexPoint> {
        let (ps, pt) = stream_gradients(grid, psi);
        self.sample_gradients(grid.n_theta(), &ps, &pt)
    }
}

/// Physical velocity at one point.
pub fn velocity_from_stream(state: &SolverState, grid: &MappedGrid, x: ComplexPoint) -> Result<ComplexPoint, SolverError> {
    Ok(ProbeSampler::new(grid, &[x])?.sample(grid, &state.psi)[0])
}
