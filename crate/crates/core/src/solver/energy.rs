use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::sample::stream_gradients;
use super::{MappedGrid, SolverState};
use crate::fields::CutoffProfile;

/// Norms of `W = u - v^ε` over the truncated grid.
///
/// `v^ε = ∇⊥F(σ)` with `F' = αΦ((e^σ - 1)/λ)/2π`, so `‖W‖² = ∫∫ |∇_s(Ψ - F)|² dσdθ`
/// and, since `W` vanishes on the wall, `‖∇W‖² = ‖curl W‖² = ∫∫ (w - gF'')²/g dσdθ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    pub t: f64,
    pub energy: f64,
    pub grad_energy: f64,
    /// `∫|W|⁴`.
    pub l4_fourth: f64,
    pub envelope_lhs: f64,
    pub envelope_rhs: f64,
    pub envelope_ok: bool,
}

/// `(‖W‖², ‖∇W‖², ∫|W|⁴)` for the current state.
pub fn energy_monitor(state: &SolverState, grid: &MappedGrid, profile: &CutoffProfile) -> (f64, f64, f64) {
    let (ns, nt) = (grid.n_sigma(), grid.n_theta());
    let (ps, pt) = stream_gradients(grid, &state.psi);
    let alpha = state.alpha;
    let lambda = profile.lambda;
    let (mut e, mut d, mut l4) = (0.0, 0.0, 0.0);
    for j in 0..ns {
        let sigma = grid.sigma(j);
        let s = (sigma.exp() - 1.0) / lambda;
        let f1 = alpha * CutoffProfile::profile(s) / (2.0 * PI);
        let f2 = alpha * CutoffProfile::profile_derivative(s) * sigma.exp() / (2.0 * PI * lambda);
        let (mut re, mut rd, mut rl) = (0.0, 0.0, 0.0);
        for k in 0..nt {
            let i = j * nt + k;
            let g = grid.g[i];
            let m2 = (ps[i] - f1).powi(2) + pt[i] * pt[i];
            re += m2;
            rl += g * m2 * m2;
            rd += (state.w[i] - g * f2).powi(2) / g;
        }
        let c = grid.row_weight(j);
        e += c * re;
        d += c * rd;
        l4 += c * rl;
    }
    let cell = grid.dsigma * grid.dtheta;
    (e * cell, d * cell, l4 * cell)
}

/// Tracks `‖W(t)‖² + ν e^{2C₁t} ∫₀ᵗ e^{-2C₁s}‖∇W‖² ds ≤ e^{2C₁t} C` with `C` fitted at the first sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyMonitor {
    pub c1: f64,
    pub margin: f64,
    pub nu: f64,
    pub profile: CutoffProfile,
    pub constant: Option<f64>,
    integral: f64,
    last: Option<(f64, f64)>,
}

impl EnergyMonitor {
    pub fn new(c1: f64, margin: f64, nu: f64, profile: CutoffProfile) -> Self {
        EnergyMonitor {
            c1,
            margin,
            nu,
            profile,
            constant: None,
            integral: 0.0,
            last: None,
        }
    }

    /// Call once per step (or more often); the dissipation integral is a trapezoid over calls.
    pub fn record(&mut self, state: &SolverState, grid: &MappedGrid) -> EnergySample {
        let (energy, grad_energy, l4_fourth) = energy_monitor(state, grid, &self.profile);
        let t = state.t;
        let weighted = (-2.0 * self.c1 * t).exp() * grad_energy;
        if let Some((t0, w0)) = self.last {
            self.integral += 0.5 * (t - t0) * (w0 + weighted);
        }
        self.last = Some((t, weighted));
        let c = *self.constant.get_or_insert((1.0 + self.margin) * energy);
        let growth = (2.0 * self.c1 * t).exp();
        let lhs = energy + self.nu * growth * self.integral;
        let rhs = growth * c;
        EnergySample {
            t,
            energy,
            grad_energy,
            l4_fourth,
            envelope_lhs: lhs,
            envelope_rhs: rhs,
            envelope_ok: lhs <= rhs * (1.0 + 1e-12),
        }
    }
}
