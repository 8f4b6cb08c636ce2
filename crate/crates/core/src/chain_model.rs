//! Physical model of the oscillator chain: topology, renormalized frequency
//! matrix and the nonlinear coupling tensors feeding the perturbative
//! formulas.
//!
//! The linear chain of `N` unit-mass oscillators has potential
//!
//! ```text
//! V = Σ_n ω_R²/2 χ_n² + Σ_<n,ν> λ₂/2 (χ_n − χ_ν)²
//! ```
//!
//! so the renormalized frequency matrix `Ω_R²` is tridiagonal with diagonal
//! `ω_R² + (#neighbors)·λ₂` and off-diagonal `−λ₂` on nearest-neighbor pairs.
//! For two sites this is `[[ω_R²+λ₂, −λ₂], [−λ₂, ω_R²+λ₂]]`.
//!
//! The weak nonlinearities enter the perturbative current formulas only
//! through contraction tensors `μ` and `σ` built here. In the (mean, relative)
//! coordinates `r = (χ + χ′)/2`, `q = χ − χ′` of the doubled (forward/backward)
//! degrees of freedom, the quartic interactions contribute
//!
//! ```text
//! Σ_klmr μ_klmr r_k r_l r_m q_r   and   Σ_klmr σ_klmr r_k q_l q_m q_r ,
//! ```
//!
//! with the nonlinear coupling constant absorbed into the tensors:
//!
//! * KG:     μ_kkkk = −λ_KG per site (all other entries zero), σ_kkkk = −λ_KG/4;
//! * β-type: μ_klmr = −λ₄ s_k s_l s_m s_r over a bond (n,ν) with sign
//!   s_n = +1, s_ν = −1 (the binomial expansion of −λ₄ (r_n−r_ν)³(q_n−q_ν)),
//!   and σ_klmr = −(λ₄/4) s_k s_l s_m s_r;
//! * α-type: rank-3 tensors, μ_klm = −λ₃ s_k s_l s_m (the r²q part).
//!
//! Only `μ` drives the steady-state currents; `σ` (and the cubic tensors) are
//! stored for completeness — their late-time contributions vanish.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Kind of weak nonlinearity perturbing the harmonic chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearityKind {
    /// Quartic on-site (pinned) self-interaction; no inter-site coupling.
    Kg,
    /// Quartic nearest-neighbor coupling `(λ₄/4)(χ_n − χ_ν)⁴`.
    BetaFput,
    /// Cubic nearest-neighbor coupling `(λ₃/3)(χ_n − χ_ν)³`. All first-order
    /// NESS corrections vanish identically for this kind.
    AlphaFput,
}

/// A nonlinearity kind together with its coupling strength (λ_KG, λ₄ or λ₃).
///
/// "Weak" is a runtime report (the perturbative-validity flag on the current
/// report), not a constructor constraint.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NonlinearitySpec {
    pub kind: NonlinearityKind,
    pub strength: f64,
}

impl NonlinearitySpec {
    /// Creates a spec, rejecting negative strengths.
    pub fn new(kind: NonlinearityKind, strength: f64) -> Result<Self> {
        if !(strength >= 0.0) || !strength.is_finite() {
            return Err(Error::Config(format!(
                "nonlinearity strength must be finite and ≥ 0, got {strength}"
            )));
        }
        Ok(Self { kind, strength })
    }
}

/// The damped harmonic chain: `n_sites` unit-mass oscillators with
/// renormalized frequency `omega_r`, bilinear nearest-neighbor coupling
/// `lambda2` (frequency² units) and uniform damping rate `gamma`.
///
/// All oscillator masses are fixed to 1; every bath couples with the same
/// strength, so a single `gamma` appears in the equations of motion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainModel {
    pub n_sites: usize,
    pub omega_r: f64,
    pub lambda2: f64,
    pub gamma: f64,
}

impl ChainModel {
    /// Validates and builds a chain model.
    pub fn new(n_sites: usize, omega_r: f64, lambda2: f64, gamma: f64) -> Result<Self> {
        if n_sites < 1 {
            return Err(Error::Config("n_sites must be ≥ 1".into()));
        }
        if !(omega_r > 0.0) {
            return Err(Error::Config(format!("omega_r must be > 0, got {omega_r}")));
        }
        if !(gamma > 0.0) {
            return Err(Error::Config(format!("gamma must be > 0, got {gamma}")));
        }
        if !(lambda2 >= 0.0) {
            return Err(Error::Config(format!("lambda2 must be ≥ 0, got {lambda2}")));
        }
        Ok(Self { n_sites, omega_r, lambda2, gamma })
    }

    /// Nearest neighbors of site `n` on the open chain.
    pub fn neighbors(&self, n: usize) -> Vec<usize> {
        let mut nb = Vec::with_capacity(2);
        if n > 0 {
            nb.push(n - 1);
        }
        if n + 1 < self.n_sites {
            nb.push(n + 1);
        }
        nb
    }

    /// The renormalized frequency matrix `Ω_R²` (frequency² units): real
    /// symmetric tridiagonal, diagonal `ω_R² + (#neighbors)·λ₂`, off-diagonal
    /// `−λ₂` on nearest-neighbor pairs.
    pub fn frequency_matrix(&self) -> DMatrix<f64> {
        let n = self.n_sites;
        let w2 = self.omega_r * self.omega_r;
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = w2 + self.neighbors(i).len() as f64 * self.lambda2;
            for j in self.neighbors(i) {
                m[(i, j)] = -self.lambda2;
            }
        }
        m
    }

    /// Normal-mode frequencies: square roots of the eigenvalues of `Ω_R²`,
    /// sorted ascending. For two sites these are `ω_R` (symmetric mode) and
    /// `√(ω_R² + 2λ₂)` (antisymmetric mode).
    pub fn resonance_frequencies(&self) -> Vec<f64> {
        let eig = self.frequency_matrix().symmetric_eigen();
        let mut freqs: Vec<f64> = eig.eigenvalues.iter().map(|&v| v.max(0.0).sqrt()).collect();
        freqs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        freqs
    }

    /// Highest normal-mode frequency, used to place the default UV cutoff.
    pub fn max_resonance(&self) -> f64 {
        *self
            .resonance_frequencies()
            .last()
            .expect("n_sites ≥ 1 guarantees at least one mode")
    }
}

/// Dense rank-3 tensor over site indices (row-major `[k][l][m]`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tensor3 {
    pub n: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n * n] }
    }

    #[inline]
    pub fn get(&self, k: usize, l: usize, m: usize) -> f64 {
        self.data[(k * self.n + l) * self.n + m]
    }

    #[inline]
    pub fn add(&mut self, k: usize, l: usize, m: usize, v: f64) {
        self.data[(k * self.n + l) * self.n + m] += v;
    }
}

/// Dense rank-4 tensor over site indices (row-major `[k][l][m][r]`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tensor4 {
    pub n: usize,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n * n * n] }
    }

    #[inline]
    pub fn get(&self, k: usize, l: usize, m: usize, r: usize) -> f64 {
        self.data[((k * self.n + l) * self.n + m) * self.n + r]
    }

    #[inline]
    pub fn add(&mut self, k: usize, l: usize, m: usize, r: usize, v: f64) {
        self.data[((k * self.n + l) * self.n + m) * self.n + r] += v;
    }

    /// Iterates over all (k, l, m, r, value) entries.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, usize, usize, f64)> + '_ {
        let n = self.n;
        self.data.iter().enumerate().map(move |(i, &v)| {
            let r = i % n;
            let m = (i / n) % n;
            let l = (i / (n * n)) % n;
            let k = i / (n * n * n);
            (k, l, m, r, v)
        })
    }
}

/// The nonlinear coupling tensors, with the coupling constant absorbed.
///
/// `mu`/`sigma` are the rank-4 tensors of the quartic interactions (KG,
/// β-type); `mu3`/`sigma3` the rank-3 tensors of the cubic α-type
/// interaction. Only `mu` enters the steady-state currents; the others are
/// stored for completeness (their late-time contributions vanish).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CouplingTensors {
    pub mu: Tensor4,
    pub sigma: Tensor4,
    pub mu3: Tensor3,
    pub sigma3: Tensor3,
}

impl CouplingTensors {
    /// Contraction `Σ_klmr μ_klmr r_k r_l r_m q_r` against test vectors.
    pub fn contract_mu(&self, r: &[f64], q: &[f64]) -> f64 {
        self.mu
            .iter()
            .map(|(k, l, m, rr, v)| v * r[k] * r[l] * r[m] * q[rr])
            .sum()
    }

    /// Contraction `Σ_klmr σ_klmr r_k q_l q_m q_r` against test vectors.
    pub fn contract_sigma(&self, r: &[f64], q: &[f64]) -> f64 {
        self.sigma
            .iter()
            .map(|(k, l, m, rr, v)| v * r[k] * q[l] * q[m] * q[rr])
            .sum()
    }
}

/// Builds the coupling tensors for `nl` on the chain `model`.
///
/// KG places an on-site quartic at every site; α/β place one bond term per
/// nearest-neighbor pair, with sign vector `s_n = +1, s_ν = −1` per bond
/// (sites are scanned left-to-right so each undirected bond contributes
/// once).
pub fn build_coupling_tensors(model: &ChainModel, nl: &NonlinearitySpec) -> CouplingTensors {
    let n = model.n_sites;
    let mut t = CouplingTensors {
        mu: Tensor4::zeros(n),
        sigma: Tensor4::zeros(n),
        mu3: Tensor3::zeros(n),
        sigma3: Tensor3::zeros(n),
    };
    let lam = nl.strength;
    if lam == 0.0 {
        return t;
    }
    match nl.kind {
        NonlinearityKind::Kg => {
            for k in 0..n {
                t.mu.add(k, k, k, k, -lam);
                t.sigma.add(k, k, k, k, -lam / 4.0);
            }
        }
        NonlinearityKind::BetaFput => {
            // One bond (a, a+1) per neighboring pair; the binomial expansion
            // of −λ₄ (r_a − r_{a+1})³ (q_a − q_{a+1}) is a product of signs.
            for a in 0..n.saturating_sub(1) {
                let bond = [a, a + 1];
                let sign = |i: usize| if i == 0 { 1.0 } else { -1.0 };
                for (ik, &k) in bond.iter().enumerate() {
                    for (il, &l) in bond.iter().enumerate() {
                        for (im, &m) in bond.iter().enumerate() {
                            for (ir, &r) in bond.iter().enumerate() {
                                let s = sign(ik) * sign(il) * sign(im) * sign(ir);
                                t.mu.add(k, l, m, r, -lam * s);
                                t.sigma.add(k, l, m, r, -lam / 4.0 * s);
                            }
                        }
                    }
                }
            }
        }
        NonlinearityKind::AlphaFput => {
            // Rank-3 bond tensors; the r²q part carries −λ₃, the pure q³ part
            // −λ₃/12. Neither contributes to the late-time currents.
            for a in 0..n.saturating_sub(1) {
                let bond = [a, a + 1];
                let sign = |i: usize| if i == 0 { 1.0 } else { -1.0 };
                for (ik, &k) in bond.iter().enumerate() {
                    for (il, &l) in bond.iter().enumerate() {
                        for (im, &m) in bond.iter().enumerate() {
                            let s = sign(ik) * sign(il) * sign(im);
                            t.mu3.add(k, l, m, -lam * s);
                            t.sigma3.add(k, l, m, -lam / 12.0 * s);
                        }
                    }
                }
            }
        }
    }
    t
}
