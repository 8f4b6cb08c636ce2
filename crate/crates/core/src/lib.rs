//! Late-time steady-state energy currents in a chain of damped quantum
//! harmonic oscillators with weak anharmonic couplings.
//!
//! Each oscillator in a nearest-neighbor chain is bilinearly coupled (strength
//! `λ₂`) to its neighbors, damped at rate `γ` by a private Ohmic thermal bath
//! at inverse temperature `β_n`, and optionally perturbed by one of three weak
//! nonlinearities:
//!
//! * **Klein–Gordon (KG)** — quartic on-site pinning, `(λ_KG/4) χ_n⁴`;
//! * **β-type** — quartic nearest-neighbor coupling, `(λ₄/4)(χ_n − χ_ν)⁴`;
//! * **α-type** — cubic nearest-neighbor coupling, `(λ₃/3)(χ_n − χ_ν)³`.
//!
//! At late times the chain relaxes to a nonequilibrium steady state (NESS) in
//! which three stationary energy currents balance at every site:
//!
//! * `P_ξ` — power injected by the site's private bath (noise),
//! * `P_γ` — power dissipated back into the bath (damping),
//! * `P_{ν→n}` — power flowing from neighbor ν into site n.
//!
//! The crate evaluates all three at zeroth order in the nonlinear coupling and
//! their first-order corrections, entirely in the frequency domain: every
//! current is a spectral integral over the causal propagator
//! `D̃(ω) = [−ω² + 2iγω + Ω_R²]⁻¹` weighted by the thermal noise kernel
//! `G̃_H(ω) = ω coth(βω/2)`. First-order corrections are assembled from cached
//! one-dimensional kernel integrals (see [`spectral_integrals`]), and the
//! whole pipeline is cross-validated against an independent brute-force
//! time-domain evaluation (see [`oracle`]) and a suite of exact algebraic
//! identities of the propagator.
//!
//! Units: `ħ = k_B = 1` and every oscillator mass is 1, so frequencies,
//! energies and temperatures share one unit and rates are frequencies.
//!
//! Module map:
//!
//! * [`chain_model`] — chain topology, frequency matrix `Ω_R²`, nonlinear
//!   coupling tensors;
//! * [`bath_kernels`] — thermal noise kernel with UV regularization;
//! * [`propagators`] — frequency-domain resolvent and time-domain fundamental
//!   solutions;
//! * [`spectral_integrals`] — adaptive quadrature and the cached kernel-table
//!   integral families;
//! * [`currents`] — zeroth/first-order currents, balance residuals, ratios;
//! * [`oracle`] — independent time-domain evaluation of the zeroth order;
//! * [`cli`] — configuration, reports, sweeps and the identity-suite runner.

pub mod bath_kernels;
pub mod chain_model;
pub mod cli;
pub mod currents;
pub mod oracle;
pub mod propagators;
pub mod spectral_integrals;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid physical or numerical configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An adaptive quadrature failed to reach the requested tolerance.
    /// Carries the context of the failing integral and the achieved error
    /// estimate so the caller can decide whether the partial result is usable.
    #[error("quadrature did not converge for {context}: error estimate {estimate:.3e}")]
    Quadrature { context: String, estimate: f64 },

    /// A linear solve hit a singular matrix (only possible for `γ = 0` at an
    /// undamped resonance).
    #[error("singular propagator matrix at ω = {omega}")]
    Singular { omega: f64 },
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
