//! Steady-state energy currents: zeroth order, first-order corrections, and
//! the balance identities tying them together.
//!
//! # Zeroth order
//!
//! With `D = D̃(ω)` and `G_k` the diagonal noise kernel (site `ν` ranging over
//! the neighbors of `n`):
//!
//! ```text
//! P_ξ(n)   = −∫ dω/2π  ω Im(D_nn) G_n                      (bath injection)
//! P_γ(n)   = −2γ ∫ dω/2π  ω² Σ_k |D_nk|² G_k               (dissipation)
//! P_{ν→n}  = −λ₂ ∫ dω/2π  ω Σ_k Im(D_nk D*_νk) G_k         (inter-site flow)
//! ```
//!
//! Balance `P_ξ + P_γ + Σ_ν P_{ν→n} = 0` holds *pointwise in ω*: for every
//! bath index `k` the combination
//! `δ_nk ω Im(D_nn) + 2γω²|D_nk|² + λ₂ Σ_ν ω Im(D_nk D*_νk)` vanishes
//! identically, which makes the balance independent of the UV cutoff even
//! though `P_ξ` and `P_γ` are individually cutoff-dependent (they diverge
//! logarithmically with `Ω_c` and are always reported per-cutoff).
//!
//! # First order
//!
//! The corrections are contractions of five real tensors with the coupling
//! tensor `μ`. Each tensor is a three-term symmetrization of products of a
//! kernel-table family with the correlation matrix `C`:
//!
//! ```text
//! Γ_klm^{nr}   = Re Σ_sym A[n,r,k] C_lm            Γ̃_klm^{nr} = 2 Re Σ_sym B[n,r,k] C_lm
//! Υ_{νklm}^{nr} = Re Σ_sym U[n,r,ν,k] C_lm         Υ̃_{νklm}^{nr} = −Re Σ_sym U[ν,r,n,k] C_lm
//! Λ_klm^{n}    = Re Σ_sym L[n,k] C_lm
//! ```
//!
//! where `Σ_sym` denotes `f(k)·C_lm + f(l)·C_km + f(m)·C_kl` (implemented
//! once, in [`symmetrize3`]). The currents are then
//!
//! ```text
//! P_ξ⁽¹⁾(n)    =        Σ μ_klmr Γ_klm^{nr}
//! P_γ⁽¹⁾(n)    = −2γ    Σ μ_klmr Γ̃_klm^{nr}
//! P⁽¹·²⁾_{ν→n} =  λ₂    Σ μ_klmr (Υ_{νklm}^{nr} + Υ̃_{νklm}^{nr})
//! P⁽¹·⁴⁾_{ν→n} = −λ₄ Σ_{klm∈{n,ν}} s_k s_l s_m Λ_klm^{n}     (β-type bonds only)
//! ```
//!
//! with `s_n = +1, s_ν = −1`. The on-site KG nonlinearity generates no
//! quartic inter-site current (`P⁽¹·⁴⁾ = 0`), and the cubic α-type
//! nonlinearity has *no* first-order corrections at all — both facts are
//! hard-coded analytic zeros with tests, not numerical near-zeros.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::bath_kernels::BathSet;
use crate::chain_model::{
    build_coupling_tensors, ChainModel, NonlinearityKind, NonlinearitySpec,
};
use crate::propagators::fourier_propagator;
use crate::spectral_integrals::{build_kernel_table, integrate, KernelTable, QuadratureSpec};
use crate::{Error, Result};

/// Zeroth-order currents. `p_xi` and `p_gamma` are cutoff-dependent and are
/// reported together with the cutoff that produced them; `p_pair` (and hence
/// the balance) is cutoff-insensitive.
#[derive(Debug, Clone, Serialize)]
pub struct ZerothOrderCurrents {
    /// Per-site bath injection `P_ξ(n)`.
    pub p_xi: Vec<f64>,
    /// Per-site dissipation `P_γ(n)`.
    pub p_gamma: Vec<f64>,
    /// `p_pair[n][ν]` = current flowing from site ν into site n (zero unless
    /// ν is a neighbor of n). Positive = energy into n.
    pub p_pair: Vec<Vec<f64>>,
    /// Net inter-site inflow per site, `Σ_ν p_pair[n][ν]`.
    pub p_inter: Vec<f64>,
    /// `|P_ξ + P_γ + Σ_ν P_{ν→n}|` per site.
    pub balance_residual: Vec<f64>,
    /// The UV cutoff the (divergent) `p_xi`/`p_gamma` were evaluated at.
    pub cutoff: f64,
    /// Names of the fields that depend on the cutoff choice.
    pub cutoff_dependent_fields: Vec<String>,
}

fn quad_real<F: Fn(f64) -> f64>(
    f: F,
    spec: &QuadratureSpec,
    w: f64,
    context: &str,
) -> Result<f64> {
    let g = |omega: f64| Complex64::new(f(omega), 0.0);
    let res = integrate(&g, spec, -w, w);
    if !res.converged {
        return Err(Error::Quadrature { context: context.into(), estimate: res.error });
    }
    Ok(res.value.re)
}

/// Evaluates the zeroth-order currents by frequency quadrature.
pub fn zeroth_order(
    model: &ChainModel,
    baths: &BathSet,
    spec: &QuadratureSpec,
) -> Result<ZerothOrderCurrents> {
    let n_sites = model.n_sites;
    let w = baths.integration_halfwidth();
    let two_pi = std::f64::consts::TAU;

    let mut p_xi = Vec::with_capacity(n_sites);
    let mut p_gamma = Vec::with_capacity(n_sites);
    let mut p_pair = vec![vec![0.0; n_sites]; n_sites];

    for n in 0..n_sites {
        p_xi.push(quad_real(
            |omega| {
                let d = fourier_propagator(model, omega);
                -omega * d[(n, n)].im * baths.noise_kernel(n, omega) / two_pi
            },
            spec,
            w,
            &format!("P_xi[{n}]"),
        )?);
        p_gamma.push(quad_real(
            |omega| {
                let d = fourier_propagator(model, omega);
                let g = baths.noise_kernel_diag(omega);
                let s: f64 = (0..n_sites).map(|k| d[(n, k)].norm_sqr() * g[k]).sum();
                -2.0 * model.gamma * omega * omega * s / two_pi
            },
            spec,
            w,
            &format!("P_gamma[{n}]"),
        )?);
        for nu in model.neighbors(n) {
            p_pair[n][nu] = quad_real(
                |omega| {
                    let d = fourier_propagator(model, omega);
                    let g = baths.noise_kernel_diag(omega);
                    let s: f64 = (0..n_sites)
                        .map(|k| (d[(n, k)] * d[(nu, k)].conj()).im * g[k])
                        .sum();
                    -model.lambda2 * omega * s / two_pi
                },
                spec,
                w,
                &format!("P_pair[{n}<-{nu}]"),
            )?;
        }
    }

    let p_inter: Vec<f64> = (0..n_sites).map(|n| p_pair[n].iter().sum()).collect();
    let balance_residual: Vec<f64> =
        (0..n_sites).map(|n| (p_xi[n] + p_gamma[n] + p_inter[n]).abs()).collect();

    Ok(ZerothOrderCurrents {
        p_xi,
        p_gamma,
        p_pair,
        p_inter,
        balance_residual,
        cutoff: baths.cutoff,
        cutoff_dependent_fields: vec!["p_xi".into(), "p_gamma".into()],
    })
}

/// Pointwise zeroth-order balance residual at a single frequency.
///
/// For each site `n` and bath index `k` the combination
/// `δ_nk ω Im(D_nn) + 2γω²|D_nk|² + λ₂ Σ_ν ω Im(D_nk D*_νk)` is an exact
/// algebraic zero. Returns the per-site maximum over `k` of the residual
/// relative to the largest contributing term (0 when all terms vanish, e.g.
/// at ω = 0).
pub fn balance_integrand_residual(model: &ChainModel, omega: f64) -> Vec<f64> {
    let n_sites = model.n_sites;
    let d = fourier_propagator(model, omega);
    let mut out = Vec::with_capacity(n_sites);
    for n in 0..n_sites {
        let mut worst = 0.0_f64;
        for k in 0..n_sites {
            let t_xi = if k == n { omega * d[(n, n)].im } else { 0.0 };
            let t_gamma = 2.0 * model.gamma * omega * omega * d[(n, k)].norm_sqr();
            let t_inter: f64 = model
                .neighbors(n)
                .iter()
                .map(|&nu| model.lambda2 * omega * (d[(n, k)] * d[(nu, k)].conj()).im)
                .sum();
            let scale = t_xi.abs().max(t_gamma.abs()).max(t_inter.abs());
            if scale > 0.0 {
                worst = worst.max((t_xi + t_gamma + t_inter).abs() / scale);
            }
        }
        out.push(worst);
    }
    out
}

/// The five first-order correction tensors (real; imaginary residue of the
/// complex assembly tracked in `max_imag`).
#[derive(Debug, Clone)]
pub struct FirstOrderTensors {
    pub n: usize,
    /// `Γ[n,r,k,l,m]`
    gamma: Vec<f64>,
    /// `Γ̃[n,r,k,l,m]`
    gamma_tilde: Vec<f64>,
    /// `Υ[ν,n,r,k,l,m]`
    upsilon: Vec<f64>,
    /// `Υ̃[ν,n,r,k,l,m]`
    upsilon_tilde: Vec<f64>,
    /// `Λ[n,k,l,m]`
    lambda: Vec<f64>,
    /// Largest imaginary part discarded when taking real parts, relative to
    /// the largest tensor magnitude.
    pub max_imag: f64,
}

impl FirstOrderTensors {
    #[inline]
    fn i5(&self, n: usize, r: usize, k: usize, l: usize, m: usize) -> usize {
        (((n * self.n + r) * self.n + k) * self.n + l) * self.n + m
    }
    #[inline]
    fn i6(&self, nu: usize, n: usize, r: usize, k: usize, l: usize, m: usize) -> usize {
        ((((nu * self.n + n) * self.n + r) * self.n + k) * self.n + l) * self.n + m
    }
    #[inline]
    pub fn gamma(&self, n: usize, r: usize, k: usize, l: usize, m: usize) -> f64 {
        self.gamma[self.i5(n, r, k, l, m)]
    }
    #[inline]
    pub fn gamma_tilde(&self, n: usize, r: usize, k: usize, l: usize, m: usize) -> f64 {
        self.gamma_tilde[self.i5(n, r, k, l, m)]
    }
    #[inline]
    pub fn upsilon(&self, nu: usize, n: usize, r: usize, k: usize, l: usize, m: usize) -> f64 {
        self.upsilon[self.i6(nu, n, r, k, l, m)]
    }
    #[inline]
    pub fn upsilon_tilde(&self, nu: usize, n: usize, r: usize, k: usize, l: usize, m: usize) -> f64 {
        self.upsilon_tilde[self.i6(nu, n, r, k, l, m)]
    }
    #[inline]
    pub fn lambda(&self, n: usize, k: usize, l: usize, m: usize) -> f64 {
        self.lambda[((n * self.n + k) * self.n + l) * self.n + m]
    }

    /// Largest |entry| across all five tensors.
    pub fn max_abs(&self) -> f64 {
        [&self.gamma, &self.gamma_tilde, &self.upsilon, &self.upsilon_tilde, &self.lambda]
            .iter()
            .flat_map(|v| v.iter())
            .map(|x| x.abs())
            .fold(0.0, f64::max)
    }
}

/// The shared three-term symmetrization: `f(k)·C_lm + f(l)·C_km + f(m)·C_kl`.
/// Every first-order tensor uses exactly this pattern, so it lives in one
/// place.
#[inline]
fn symmetrize3<F: Fn(usize) -> Complex64>(
    f: F,
    c: &DMatrix<f64>,
    k: usize,
    l: usize,
    m: usize,
) -> Complex64 {
    f(k) * c[(l, m)] + f(l) * c[(k, m)] + f(m) * c[(k, l)]
}

/// Assembles the five first-order tensors from a kernel table.
pub fn first_order_tensors(table: &KernelTable) -> FirstOrderTensors {
    let n_sites = table.n;
    let n5 = n_sites.pow(5);
    let n6 = n_sites.pow(6);
    let mut t = FirstOrderTensors {
        n: n_sites,
        gamma: vec![0.0; n5],
        gamma_tilde: vec![0.0; n5],
        upsilon: vec![0.0; n6],
        upsilon_tilde: vec![0.0; n6],
        lambda: vec![0.0; n_sites.pow(4)],
        max_imag: 0.0,
    };
    let mut max_imag = 0.0_f64;
    let mut store = |slot: &mut f64, v: Complex64| {
        max_imag = max_imag.max(v.im.abs());
        *slot = v.re;
    };

    for n in 0..n_sites {
        for k in 0..n_sites {
            for l in 0..n_sites {
                for m in 0..n_sites {
                    let il = ((n * n_sites + k) * n_sites + l) * n_sites + m;
                    let v = symmetrize3(|first| table.l(n, first), &table.c, k, l, m);
                    store(&mut t.lambda[il], v);
                    for r in 0..n_sites {
                        let i5 = (((n * n_sites + r) * n_sites + k) * n_sites + l) * n_sites + m;
                        let vg = symmetrize3(|first| table.a(n, r, first), &table.c, k, l, m);
                        store(&mut t.gamma[i5], vg);
                        let vgt =
                            2.0 * symmetrize3(|first| table.b(n, r, first), &table.c, k, l, m);
                        store(&mut t.gamma_tilde[i5], vgt);
                        for nu in 0..n_sites {
                            let i6 = ((((nu * n_sites + n) * n_sites + r) * n_sites + k)
                                * n_sites
                                + l)
                                * n_sites
                                + m;
                            let vu =
                                symmetrize3(|first| table.u(n, r, nu, first), &table.c, k, l, m);
                            store(&mut t.upsilon[i6], vu);
                            let vut =
                                -symmetrize3(|first| table.u(nu, r, n, first), &table.c, k, l, m);
                            store(&mut t.upsilon_tilde[i6], vut);
                        }
                    }
                }
            }
        }
    }
    let scale = t.max_abs().max(1e-300);
    t.max_imag = max_imag / scale;
    t
}

/// First-order current corrections. All entries are exactly zero for the
/// α-type nonlinearity (`analytic_zero` is then set).
#[derive(Debug, Clone, Serialize)]
pub struct FirstOrderCurrents {
    /// Per-site `P_ξ⁽¹⁾`.
    pub p_xi: Vec<f64>,
    /// Per-site `P_γ⁽¹⁾`.
    pub p_gamma: Vec<f64>,
    /// `p_pair_quadratic[n][ν]`: first-order correction to the λ₂-mediated
    /// current from ν into n.
    pub p_pair_quadratic: Vec<Vec<f64>>,
    /// `p_pair_quartic[n][ν]`: current carried directly by the quartic bond
    /// coupling (β-type only; identically zero for KG and α).
    pub p_pair_quartic: Vec<Vec<f64>>,
    /// Set when the whole block is an analytic zero (α-type).
    pub analytic_zero: bool,
}

impl FirstOrderCurrents {
    fn zeros(n: usize, analytic: bool) -> Self {
        Self {
            p_xi: vec![0.0; n],
            p_gamma: vec![0.0; n],
            p_pair_quadratic: vec![vec![0.0; n]; n],
            p_pair_quartic: vec![vec![0.0; n]; n],
            analytic_zero: analytic,
        }
    }

    /// Total first-order pair current ν→n (quadratic + quartic channels).
    pub fn pair_total(&self, n: usize, nu: usize) -> f64 {
        self.p_pair_quadratic[n][nu] + self.p_pair_quartic[n][nu]
    }
}

/// Contracts the first-order tensors with the coupling tensor of `nl`.
pub fn first_order_currents(
    model: &ChainModel,
    nl: &NonlinearitySpec,
    tensors: &FirstOrderTensors,
) -> FirstOrderCurrents {
    let n_sites = model.n_sites;
    if nl.kind == NonlinearityKind::AlphaFput {
        // Cubic nearest-neighbor coupling: every first-order NESS correction
        // vanishes identically (odd number of fields in the Gaussian
        // average), so this is an analytic zero, not a computed one.
        return FirstOrderCurrents::zeros(n_sites, true);
    }
    let mu = build_coupling_tensors(model, nl).mu;
    let mut out = FirstOrderCurrents::zeros(n_sites, false);

    for n in 0..n_sites {
        let mut xi = 0.0;
        let mut ga = 0.0;
        for (k, l, m, r, v) in mu.iter() {
            if v == 0.0 {
                continue;
            }
            xi += v * tensors.gamma(n, r, k, l, m);
            ga += v * tensors.gamma_tilde(n, r, k, l, m);
        }
        out.p_xi[n] = xi;
        out.p_gamma[n] = -2.0 * model.gamma * ga;

        for nu in model.neighbors(n) {
            let mut pq = 0.0;
            for (k, l, m, r, v) in mu.iter() {
                if v == 0.0 {
                    continue;
                }
                pq += v
                    * (tensors.upsilon(nu, n, r, k, l, m) + tensors.upsilon_tilde(nu, n, r, k, l, m));
            }
            out.p_pair_quadratic[n][nu] = model.lambda2 * pq;

            if nl.kind == NonlinearityKind::BetaFput {
                // Current carried by the quartic bond itself: the binomial
                // contraction of Λ over the bond indices with signs
                // s_n = +1, s_ν = −1.
                let bond = [n, nu];
                let sgn = |i: usize| if i == n { 1.0 } else { -1.0 };
                let mut p4 = 0.0;
                for &k in &bond {
                    for &l in &bond {
                        for &m in &bond {
                            p4 += sgn(k) * sgn(l) * sgn(m) * tensors.lambda(n, k, l, m);
                        }
                    }
                }
                out.p_pair_quartic[n][nu] = -nl.strength * p4;
            }
        }
    }
    out
}

/// Full per-configuration report: zeroth order, first order, balance
/// residuals at both orders and the nonlinearity ratio.
#[derive(Debug, Clone, Serialize)]
pub struct CurrentReport {
    pub zeroth: ZerothOrderCurrents,
    pub first: FirstOrderCurrents,
    /// `P⁽¹⁾/P⁽⁰⁾` for the inter-site current into site 0 from site 1
    /// (0 when the zeroth-order current vanishes).
    pub ratio: f64,
    /// Per-site `|P_ξ⁽¹⁾ + P_γ⁽¹⁾ + Σ_ν (P⁽¹·²⁾ + P⁽¹·⁴⁾)|`.
    pub balance_residual_first: Vec<f64>,
    /// `|ratio| < 0.1`: the first-order correction is a small perturbation.
    pub perturbative_validity: bool,
    /// Largest kernel-table quadrature error estimate.
    pub table_error: f64,
    /// Imaginary-residue diagnostic of the (real) tensor assembly.
    pub tensor_max_imag: f64,
}

/// Runs the full pipeline: kernel table → tensors → currents → residuals.
pub fn ness_report(
    model: &ChainModel,
    baths: &BathSet,
    nl: &NonlinearitySpec,
    spec: &QuadratureSpec,
) -> Result<CurrentReport> {
    let zeroth = zeroth_order(model, baths, spec)?;
    let table = build_kernel_table(model, baths, spec)?;
    let tensors = first_order_tensors(&table);
    let first = first_order_currents(model, nl, &tensors);

    let n_sites = model.n_sites;
    let balance_residual_first: Vec<f64> = (0..n_sites)
        .map(|n| {
            let inter: f64 = model.neighbors(n).iter().map(|&nu| first.pair_total(n, nu)).sum();
            (first.p_xi[n] + first.p_gamma[n] + inter).abs()
        })
        .collect();

    let p0 = zeroth.p_pair[0].get(1).copied().unwrap_or(0.0);
    let p1 = if n_sites > 1 { first.pair_total(0, 1) } else { 0.0 };
    let ratio = if p0.abs() > 0.0 { p1 / p0 } else { 0.0 };

    Ok(CurrentReport {
        ratio,
        perturbative_validity: ratio.abs() < 0.1,
        balance_residual_first,
        table_error: table.max_error,
        tensor_max_imag: tensors.max_imag,
        zeroth,
        first,
    })
}

/// Residuals of the pointwise kernel identities behind the first-order
/// balance proof (two-site chain). All values are relative to the magnitude
/// of the largest contributing term at that frequency.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KernelIdentityResiduals {
    /// `K_{νk}^{nν}(ω)` (must vanish).
    pub k_vanishing: f64,
    /// `L_{νk}^{nν}(ω)` (must vanish).
    pub l_vanishing: f64,
    /// `K_{νk}^{nn}(ω) − ω Im(D*_nn D_nk)`.
    pub k_closed_form: f64,
    /// `L_{νk}^{nn}(ω) − ω Im(D*_nν D_νk)`.
    pub l_closed_form: f64,
}

impl KernelIdentityResiduals {
    pub fn max(&self) -> f64 {
        self.k_vanishing.max(self.l_vanishing).max(self.k_closed_form).max(self.l_closed_form)
    }
}

/// Evaluates the kernel combinations
///
/// ```text
/// K_{νk}^{nr} = ω Im(D_nr D_nk) + 4γω² Re(D_nr D*_nn D_nk)
///             + ωλ₂ [Im(D_nr D*_νn D_nk) − Im(D_νr D*_nn D_nk)]
/// L_{νk}^{nr} = 4γω² Re(D_nr D*_nν D_νk)
///             + ωλ₂ [Im(D_nr D*_νν D_νk) − Im(D_νr D*_nν D_νk)]
/// ```
///
/// and checks the four exact consequences of the resolvent identities:
/// `K^{nν} = 0`, `L^{nν} = 0`, `K^{nn} = ω Im(D*_nn D_nk)` and
/// `L^{nn} = ω Im(D*_nν D_νk)`. These are the pointwise backbone of the
/// first-order NESS balance. Two-site chains only.
pub fn kernel_identity_residuals(model: &ChainModel, omega: f64) -> KernelIdentityResiduals {
    assert_eq!(model.n_sites, 2, "kernel identities are formulated for the two-site chain");
    let d = fourier_propagator(model, omega);
    let g = model.gamma;
    let l2 = model.lambda2;
    let w2 = omega * omega;

    let mut res = KernelIdentityResiduals {
        k_vanishing: 0.0,
        l_vanishing: 0.0,
        k_closed_form: 0.0,
        l_closed_form: 0.0,
    };

    for (n, nu) in [(0usize, 1usize), (1, 0)] {
        for k in 0..2 {
            let k_terms = |r: usize| -> ([f64; 4], f64) {
                let t = [
                    omega * (d[(n, r)] * d[(n, k)]).im,
                    4.0 * g * w2 * (d[(n, r)] * d[(n, n)].conj() * d[(n, k)]).re,
                    omega * l2 * (d[(n, r)] * d[(nu, n)].conj() * d[(n, k)]).im,
                    -omega * l2 * (d[(nu, r)] * d[(n, n)].conj() * d[(n, k)]).im,
                ];
                (t, t.iter().sum())
            };
            let l_terms = |r: usize| -> ([f64; 3], f64) {
                let t = [
                    4.0 * g * w2 * (d[(n, r)] * d[(n, nu)].conj() * d[(nu, k)]).re,
                    omega * l2 * (d[(n, r)] * d[(nu, nu)].conj() * d[(nu, k)]).im,
                    -omega * l2 * (d[(nu, r)] * d[(n, nu)].conj() * d[(nu, k)]).im,
                ];
                (t, t.iter().sum())
            };
            let rel = |value: f64, terms: &[f64]| -> f64 {
                let scale = terms.iter().fold(0.0_f64, |a, t| a.max(t.abs()));
                if scale > 0.0 {
                    value.abs() / scale
                } else {
                    0.0
                }
            };

            // r = ν: both kernels vanish identically.
            let (tk, k_nv) = k_terms(nu);
            res.k_vanishing = res.k_vanishing.max(rel(k_nv, &tk));
            let (tl, l_nv) = l_terms(nu);
            res.l_vanishing = res.l_vanishing.max(rel(l_nv, &tl));

            // r = n: closed forms.
            let (tk, k_nn) = k_terms(n);
            let k_expect = omega * (d[(n, n)].conj() * d[(n, k)]).im;
            res.k_closed_form =
                res.k_closed_form.max(rel(k_nn - k_expect, &[tk[0], tk[1], tk[2], tk[3], k_expect]));
            let (tl, l_nn) = l_terms(n);
            let l_expect = omega * (d[(n, nu)].conj() * d[(nu, k)]).im;
            res.l_closed_form =
                res.l_closed_form.max(rel(l_nn - l_expect, &[tl[0], tl[1], tl[2], l_expect]));
        }
    }
    res
}
