//! Thermal noise kernels of the private Ohmic baths.
//!
//! Each site `n` couples to its own bath at inverse temperature `β_n`. In the
//! frequency domain the bath's symmetric (Hadamard) correlator is
//!
//! ```text
//! G̃_H(ω) = ω coth(β ω / 2) × w(ω),
//! ```
//!
//! where `w(ω)` is a UV regularization window: either a hard cutoff
//! (`w = 1` for `|ω| ≤ Ω_c`, else 0) or an exponential one
//! (`w = exp(−|ω|/Ω_c)`). The kernel is even in ω, strictly positive inside
//! the window, and tends to the classical white-noise value `2/β` as `ω → 0`.
//!
//! Numerical care: near `ω = 0` the product `ω coth(βω/2)` is evaluated by
//! its Taylor series to avoid catastrophic cancellation, and deep in the
//! quantum regime (`βω > 50`) `coth` is clamped to 1 so that `β = ∞`
//! (zero temperature) degrades gracefully to `|ω|`.

use serde::{Deserialize, Serialize};

use crate::chain_model::ChainModel;
use crate::{Error, Result};

/// UV regularization window applied to the noise kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffKind {
    /// `w(ω) = 1` for `|ω| ≤ Ω_c`, 0 beyond.
    Hard,
    /// `w(ω) = exp(−|ω|/Ω_c)`.
    Exponential,
}

/// The set of private baths: per-site inverse temperatures plus the shared
/// UV cutoff.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BathSet {
    /// Per-site inverse temperatures `β_n` (ħ = k_B = 1).
    pub betas: Vec<f64>,
    /// UV cutoff `Ω_c` (frequency units).
    pub cutoff: f64,
    pub cutoff_kind: CutoffKind,
}

/// Default hard-cutoff placement: 50 × the chain's highest resonance.
pub fn default_cutoff(model: &ChainModel) -> f64 {
    50.0 * model.max_resonance()
}

impl BathSet {
    /// Validates and builds a bath set. The cutoff must lie above the chain's
    /// highest resonance, otherwise the regularized integrals would clip the
    /// physical response peaks.
    pub fn new(
        betas: Vec<f64>,
        cutoff: f64,
        cutoff_kind: CutoffKind,
        model: &ChainModel,
    ) -> Result<Self> {
        if betas.len() != model.n_sites {
            return Err(Error::Config(format!(
                "expected {} inverse temperatures, got {}",
                model.n_sites,
                betas.len()
            )));
        }
        if let Some(b) = betas.iter().find(|b| !(**b > 0.0)) {
            return Err(Error::Config(format!("inverse temperatures must be > 0, got {b}")));
        }
        if !(cutoff > model.max_resonance()) {
            return Err(Error::Config(format!(
                "cutoff {cutoff} must exceed the largest chain resonance {}",
                model.max_resonance()
            )));
        }
        Ok(Self { betas, cutoff, cutoff_kind })
    }

    /// Builds a bath set from temperatures instead of inverse temperatures.
    pub fn from_temperatures(
        temps: &[f64],
        cutoff: f64,
        cutoff_kind: CutoffKind,
        model: &ChainModel,
    ) -> Result<Self> {
        if let Some(t) = temps.iter().find(|t| !(**t > 0.0)) {
            return Err(Error::Config(format!("temperatures must be > 0, got {t}")));
        }
        Self::new(temps.iter().map(|t| 1.0 / t).collect(), cutoff, cutoff_kind, model)
    }

    /// The regularization window `w(ω)`.
    #[inline]
    pub fn window(&self, omega: f64) -> f64 {
        match self.cutoff_kind {
            CutoffKind::Hard => {
                if omega.abs() <= self.cutoff {
                    1.0
                } else {
                    0.0
                }
            }
            CutoffKind::Exponential => (-omega.abs() / self.cutoff).exp(),
        }
    }

    /// Regularized noise kernel of site `n` at frequency `ω`.
    #[inline]
    pub fn noise_kernel(&self, n: usize, omega: f64) -> f64 {
        thermal_factor(omega, self.betas[n]) * self.window(omega)
    }

    /// Diagonal of the noise-kernel matrix `G̃_H(ω)` (one private bath per
    /// site, so the matrix is diagonal).
    #[inline]
    pub fn noise_kernel_diag(&self, omega: f64) -> Vec<f64> {
        let w = self.window(omega);
        self.betas.iter().map(|&b| thermal_factor(omega, b) * w).collect()
    }

    /// Half-width of the frequency-integration domain: `Ω_c` for the hard
    /// window, `40 Ω_c` for the exponential one (window < 5e−18 beyond).
    pub fn integration_halfwidth(&self) -> f64 {
        match self.cutoff_kind {
            CutoffKind::Hard => self.cutoff,
            CutoffKind::Exponential => 40.0 * self.cutoff,
        }
    }
}

/// The unregularized thermal factor `ω coth(βω/2)`.
///
/// * `|βω| < 1e−4`: Taylor series `2/β + βω²/6 − β³ω⁴/360` (relative error
///   below 1e−20 there) to avoid the 0/0 cancellation;
/// * `|βω| > 50`: `coth → ±1`, so the factor is `|ω|` exactly to double
///   precision (`coth(25) − 1 < 4e−22`);
/// * otherwise the direct evaluation `ω / tanh(βω/2)`.
#[inline]
pub fn thermal_factor(omega: f64, beta: f64) -> f64 {
    let x = beta * omega;
    if x.abs() < 1e-4 {
        2.0 / beta + beta * omega * omega / 6.0 - beta.powi(3) * omega.powi(4) / 360.0
    } else if x.abs() > 50.0 {
        omega.abs()
    } else {
        omega / (0.5 * x).tanh()
    }
}
