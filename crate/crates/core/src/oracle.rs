//! Independent time-domain evaluation of the zeroth-order currents.
//!
//! The frequency-domain pipeline in [`crate::currents`] rests on contour
//! integrals of the Fourier propagator. This module recomputes the same
//! observables by a completely different route — real-time convolutions of
//! the homogeneous solutions `D₂(t)` against the time-domain noise kernel —
//! so the two can cross-check each other without sharing code paths:
//!
//! ```text
//! P_ξ(n)   =  ∫₀^T ds  [Ḋ₂(s) G_H(s)]_nn
//! ⟨p_n x_a⟩ = ∬₀^T ds ds′ Σ_k Ḋ₂(s)_nk G_k(s′ − s) D₂(s′)_ak
//! ⟨p_n p_n⟩ = ∬₀^T ds ds′ Σ_k Ḋ₂(s)_nk G_k(s′ − s) Ḋ₂(s′)_nk
//! P_γ(n)   = −2γ ⟨p_n²⟩
//! P_{ν→n}  =  λ₂ (⟨p_n x_ν⟩ − ⟨p_n x_n⟩)
//! ```
//!
//! with the stationary noise autocorrelation (hard UV window)
//!
//! ```text
//! G_k(τ) = (1/π) ∫₀^{Ω_c} ω coth(β_k ω / 2) cos(ωτ) dω.
//! ```
//!
//! Discretization: composite Simpson in both time directions and in the
//! kernel's frequency integral. The hard window makes `G(τ)` ring at `Ω_c`,
//! so `dt` must resolve that ringing (~24 points per `2π/Ω_c` period by
//! default) — which is why the oracle is used with a *moderate* cutoff
//! (a few × the top resonance) rather than the production default of 50×.
//! The propagator envelope `e^{−γt}` sets the horizon `T = 25/γ`
//! (`e^{−25} ≈ 1.4e−11`).

use rayon::prelude::*;
use serde::Serialize;

use crate::bath_kernels::{thermal_factor, BathSet, CutoffKind};
use crate::chain_model::ChainModel;
use crate::propagators::TimePropagator;
use crate::{Error, Result};

/// Discretization parameters for the time-domain evaluation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TimeDomainConfig {
    /// Integration horizon `T`.
    pub t_max: f64,
    /// Number of (even) Simpson intervals on `[0, T]`.
    pub steps: usize,
    /// Number of (even) Simpson intervals on `[0, Ω_c]` for the kernel.
    pub omega_steps: usize,
}

impl TimeDomainConfig {
    /// Resolution-matched defaults: horizon `25/γ`, ~24 time points per
    /// period of the fastest oscillation (`Ω_c` or the top resonance), and a
    /// frequency grid fine enough for `cos(ωT)` at the horizon.
    pub fn default_for(model: &ChainModel, baths: &BathSet) -> Self {
        let t_max = 25.0 / model.gamma;
        let f_max = baths.cutoff.max(model.max_resonance());
        let dt_target = std::f64::consts::TAU / f_max / 24.0;
        let steps = ((t_max / dt_target).ceil() as usize).max(64).next_multiple_of(2);
        // ~19 frequency points per period of cos(ωτ) at τ = T.
        let omega_steps =
            ((baths.cutoff * t_max * 3.0).ceil() as usize).max(512).next_multiple_of(2);
        Self { t_max, steps, omega_steps }
    }

    fn validate(&self) -> Result<()> {
        if !(self.t_max > 0.0) || self.steps < 2 || self.steps % 2 != 0 || self.omega_steps < 2
            || self.omega_steps % 2 != 0
        {
            return Err(Error::Config(format!(
                "invalid time-domain discretization: {self:?} (steps must be positive and even)"
            )));
        }
        Ok(())
    }
}

/// Zeroth-order currents from the time-domain route.
#[derive(Debug, Clone, Serialize)]
pub struct OracleCurrents {
    pub p_xi: Vec<f64>,
    pub p_gamma: Vec<f64>,
    /// `p_pair[n][ν]`: current from ν into n (positive = into n).
    pub p_pair: Vec<Vec<f64>>,
    /// `|P_ξ + P_γ + Σ_ν P_{ν→n}|` per site — limited by discretization
    /// error here, unlike the frequency route where it is exact pointwise.
    pub balance_residual: Vec<f64>,
    pub config: TimeDomainConfig,
}

/// Composite-Simpson weight of node `i` on a grid of `m` intervals
/// (excluding the `h/3` prefactor).
#[inline]
fn simpson_coeff(i: usize, m: usize) -> f64 {
    if i == 0 || i == m {
        1.0
    } else if i % 2 == 1 {
        4.0
    } else {
        2.0
    }
}

/// Stationary noise autocorrelation `G(τ)` of a bath at inverse temperature
/// `beta` with a hard window at `cutoff`, by composite Simpson on
/// `omega_steps` intervals.
pub fn noise_kernel_time(beta: f64, cutoff: f64, tau: f64, omega_steps: usize) -> f64 {
    assert!(omega_steps >= 2 && omega_steps % 2 == 0);
    let h = cutoff / omega_steps as f64;
    let mut acc = 0.0;
    for j in 0..=omega_steps {
        let omega = j as f64 * h;
        acc += simpson_coeff(j, omega_steps) * thermal_factor(omega, beta) * (omega * tau).cos();
    }
    acc * h / 3.0 / std::f64::consts::PI
}

/// Evaluates the zeroth-order currents by real-time convolution. The baths
/// must use the hard window (the ringing analysis above is specific to it).
pub fn zeroth_order_time_domain(
    model: &ChainModel,
    baths: &BathSet,
    cfg: &TimeDomainConfig,
) -> Result<OracleCurrents> {
    cfg.validate()?;
    if baths.cutoff_kind != CutoffKind::Hard {
        return Err(Error::Config(
            "the time-domain oracle supports the hard cutoff window only".into(),
        ));
    }
    let n_sites = model.n_sites;
    let m = cfg.steps;
    let dt = cfg.t_max / m as f64;

    // Noise kernels on the lag grid τ_d = d·dt, d = 0..=m (G is even in τ).
    // The thermal factors are hoisted out of the cos loop.
    let h = baths.cutoff / cfg.omega_steps as f64;
    let tf: Vec<Vec<f64>> = baths
        .betas
        .iter()
        .map(|&b| {
            (0..=cfg.omega_steps)
                .map(|j| {
                    simpson_coeff(j, cfg.omega_steps) * thermal_factor(j as f64 * h, b) * h / 3.0
                        / std::f64::consts::PI
                })
                .collect()
        })
        .collect();
    let g: Vec<Vec<f64>> = (0..n_sites)
        .map(|k| {
            (0..=m)
                .into_par_iter()
                .map(|d| {
                    let tau = d as f64 * dt;
                    (0..=cfg.omega_steps)
                        .map(|j| tf[k][j] * (j as f64 * h * tau).cos())
                        .sum()
                })
                .collect()
        })
        .collect();

    // Homogeneous solutions on the time grid, flattened row-major, with the
    // Simpson weight folded in once.
    let tp = TimePropagator::new(model);
    let nn = n_sites * n_sites;
    let mut d2 = vec![0.0; (m + 1) * nn];
    let mut d2dot = vec![0.0; (m + 1) * nn];
    let mut weights = vec![0.0; m + 1];
    for i in 0..=m {
        let t = i as f64 * dt;
        let w = simpson_coeff(i, m) * dt / 3.0;
        weights[i] = w;
        let a = tp.d2(t);
        let b = tp.d2_dot(t);
        for r in 0..n_sites {
            for c in 0..n_sites {
                d2[i * nn + r * n_sites + c] = a[(r, c)];
                d2dot[i * nn + r * n_sites + c] = b[(r, c)];
            }
        }
    }

    // Single time integral: P_ξ(n) = ∫ ds Ḋ₂(s)_nn G_n(s).
    let p_xi: Vec<f64> = (0..n_sites)
        .map(|n| (0..=m).map(|i| weights[i] * d2dot[i * nn + n * n_sites + n] * g[n][i]).sum())
        .collect();

    // Double time integrals: for each outer node i accumulate the inner
    // convolution Σ_j w_j G_k(|j−i|) {D₂, Ḋ₂}(u_j)_ak, then contract with
    // Ḋ₂(u_i)_nk. Parallel map-reduce over i.
    //   pp[n]          = ⟨p_n p_n⟩
    //   px[n * N + a]  = ⟨p_n x_a⟩
    let (pp, px) = (0..=m)
        .into_par_iter()
        .map(|i| {
            let mut inner_x = vec![0.0; nn]; // [a, k] ← Σ_j w_j G_k D₂(u_j)_ak
            let mut inner_p = vec![0.0; nn];
            for j in 0..=m {
                let row = j * nn;
                for a in 0..n_sites {
                    for k in 0..n_sites {
                        let gw = weights[j] * g[k][i.abs_diff(j)];
                        inner_x[a * n_sites + k] += gw * d2[row + a * n_sites + k];
                        inner_p[a * n_sites + k] += gw * d2dot[row + a * n_sites + k];
                    }
                }
            }
            let mut pp_i = vec![0.0; n_sites];
            let mut px_i = vec![0.0; nn];
            for n in 0..n_sites {
                for k in 0..n_sites {
                    let dnk = weights[i] * d2dot[i * nn + n * n_sites + k];
                    pp_i[n] += dnk * inner_p[n * n_sites + k];
                    for a in 0..n_sites {
                        px_i[n * n_sites + a] += dnk * inner_x[a * n_sites + k];
                    }
                }
            }
            (pp_i, px_i)
        })
        .reduce(
            || (vec![0.0; n_sites], vec![0.0; nn]),
            |(mut pa, mut xa), (pb, xb)| {
                for (a, b) in pa.iter_mut().zip(&pb) {
                    *a += b;
                }
                for (a, b) in xa.iter_mut().zip(&xb) {
                    *a += b;
                }
                (pa, xa)
            },
        );

    let p_gamma: Vec<f64> = pp.iter().map(|&v| -2.0 * model.gamma * v).collect();
    let mut p_pair = vec![vec![0.0; n_sites]; n_sites];
    for n in 0..n_sites {
        for nu in model.neighbors(n) {
            p_pair[n][nu] =
                model.lambda2 * (px[n * n_sites + nu] - px[n * n_sites + n]);
        }
    }
    let balance_residual: Vec<f64> = (0..n_sites)
        .map(|n| (p_xi[n] + p_gamma[n] + p_pair[n].iter().sum::<f64>()).abs())
        .collect();

    Ok(OracleCurrents { p_xi, p_gamma, p_pair, balance_residual, config: *cfg })
}
