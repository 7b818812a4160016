//! Shell energy balance diagnostics.
//!
//! Testing the momentum equation against the shell piece `u_q` gives
//!
//! ```text
//! d/dt ‖u_q‖₂² = −2ν‖∇u_q‖₂² + 2 T_q,    T_q = ∫ Tr[(u⊗u)_q · ∇u_q] dx.
//! ```
//!
//! `T_q` is evaluated spectrally from the transformed products `u_i u_j`;
//! with a dealiased field on a grid satisfying `3 K_max < n` every pairing
//! against a retained mode is exact. The decomposition
//! `(u⊗u)_q = u_q⊗u + u⊗u_q + r_q(u,u)` and the split of `T_q` into a
//! remainder part and a low-mode part are evaluated by physical-space
//! quadrature, which is also exact for triple products of dealiased fields.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::{lambda, FilterBank};
use crate::spectral::fft::Fft3;
use crate::spectral::{synthesize, GridSpec, PhysicalVelocity, SpectralVelocity, BOX_VOLUME};

/// Independent components of a symmetric 3×3 tensor, in storage order.
pub const TENSOR_PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

/// Storage slot of the `(i, j)` component.
#[inline]
pub fn tensor_slot(i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    match (a, b) {
        (0, 0) => 0,
        (0, 1) => 1,
        (0, 2) => 2,
        (1, 1) => 3,
        (1, 2) => 4,
        _ => 5,
    }
}

/// Symmetric tensor field sampled on the physical grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensorField {
    grid: GridSpec,
    comps: [Vec<f64>; 6],
}

impl SymTensorField {
    pub fn zeros(grid: GridSpec) -> Self {
        SymTensorField {
            grid,
            comps: std::array::from_fn(|_| vec![0.0; grid.len()]),
        }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    /// The `(i, j)` component.
    pub fn get(&self, i: usize, j: usize) -> &[f64] {
        &self.comps[tensor_slot(i, j)]
    }

    pub fn slot(&self, s: usize) -> &[f64] {
        &self.comps[s]
    }

    /// Pointwise trace `Σ_i T_ii`.
    pub fn trace(&self) -> Vec<f64> {
        (0..self.grid.len())
            .map(|x| self.comps[0][x] + self.comps[3][x] + self.comps[5][x])
            .collect()
    }

    /// Frobenius L² norm `(∫ Σ_ij T_ij²)^{1/2}` by grid quadrature.
    pub fn l2_norm(&self) -> f64 {
        let mut acc = 0.0;
        for (s, &(i, j)) in TENSOR_PAIRS.iter().enumerate() {
            let mult = if i == j { 1.0 } else { 2.0 };
            acc += mult * self.comps[s].iter().map(|v| v * v).sum::<f64>();
        }
        (acc * self.grid.cell_volume()).sqrt()
    }

    pub fn sub(&self, other: &SymTensorField) -> SymTensorField {
        let mut out = self.clone();
        for s in 0..6 {
            for (a, b) in out.comps[s].iter_mut().zip(&other.comps[s]) {
                *a -= b;
            }
        }
        out
    }

    /// `∫ Σ_ij T_ij G_ij dx` against a full (not necessarily symmetric) tensor.
    pub fn contract(&self, g: &Gradient) -> f64 {
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let t = self.get(i, j);
                let gij = &g.d[i][j];
                acc += t.iter().zip(gij).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        acc * self.grid.cell_volume()
    }
}

/// Velocity gradient `d[i][j] = ∂_j u_i` on the physical grid.
#[derive(Debug, Clone)]
pub struct Gradient {
    pub d: [[Vec<f64>; 3]; 3],
}

impl Gradient {
    pub fn of(u: &SpectralVelocity) -> Gradient {
        let grid = u.grid();
        let mut hats: Vec<Vec<Complex64>> = Vec::with_capacity(9);
        for i in 0..3 {
            for j in 0..3 {
                let mut h = u.component(i).to_vec();
                for (idx, v) in h.iter_mut().enumerate() {
                    let k = grid.derivative_wavevector(idx);
                    *v *= Complex64::new(0.0, k[j]);
                }
                hats.push(h);
            }
        }
        let refs: Vec<&[Complex64]> = hats.iter().map(|h| h.as_slice()).collect();
        let mut fields = Fft3::shared(grid.n()).inverse_real_many(&refs).into_iter();
        let d = std::array::from_fn(|_| std::array::from_fn(|_| fields.next().unwrap()));
        Gradient { d }
    }
}

fn require_alias_free(u: &SpectralVelocity) -> Result<()> {
    let grid = u.grid();
    if !grid.products_alias_free() {
        return Err(Error::Config(format!(
            "dealias cutoff {} too high for alias-free products on n = {}",
            grid.k_max(),
            grid.n()
        )));
    }
    if !u.is_dealiased() {
        return Err(Error::Config(
            "field carries modes beyond the dealias cutoff".into(),
        ));
    }
    Ok(())
}

fn check_bank(u: &SpectralVelocity, bank: &FilterBank) -> Result<()> {
    if u.grid() != bank.grid() {
        return Err(Error::Config("field and filter bank grids differ".into()));
    }
    Ok(())
}

/// Pointwise products `u_i u_j` and their normalized transforms.
pub(crate) struct Products {
    pub hats: Vec<Vec<Complex64>>,
}

impl Products {
    pub fn of(phys: &PhysicalVelocity) -> Products {
        let grid = phys.grid();
        let prods: Vec<Vec<f64>> = TENSOR_PAIRS
            .iter()
            .map(|&(i, j)| {
                phys.component(i)
                    .iter()
                    .zip(phys.component(j))
                    .map(|(a, b)| a * b)
                    .collect()
            })
            .collect();
        let refs: Vec<&[f64]> = prods.iter().map(|p| p.as_slice()).collect();
        Products {
            hats: Fft3::shared(grid.n()).forward_real_many(&refs),
        }
    }

    /// Per-mode transfer density `(2π)³ Σ_i Im(g_i conj(û_i))`,
    /// `g_i = Σ_j k_j P̂_ij`, so that `T_q = Σ_k φ_q(k)² τ(k)`.
    pub fn transfer_density(&self, u: &SpectralVelocity) -> Vec<f64> {
        let grid = u.grid();
        (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let uh = u.at(idx);
                if uh.iter().all(|v| v.re == 0.0 && v.im == 0.0) {
                    return 0.0;
                }
                let k = grid.derivative_wavevector(idx);
                let mut acc = 0.0;
                for i in 0..3 {
                    let mut g = Complex64::new(0.0, 0.0);
                    for j in 0..3 {
                        g += self.hats[tensor_slot(i, j)][idx] * k[j];
                    }
                    acc += (g * uh[i].conj()).im;
                }
                BOX_VOLUME * acc
            })
            .collect()
    }
}

/// `(u⊗u)_q`: the shell-`q` multiplier applied to each product `u_i u_j`.
pub fn tensor_shell(u: &SpectralVelocity, bank: &FilterBank, q: i32) -> Result<SymTensorField> {
    check_bank(u, bank)?;
    require_alias_free(u)?;
    let w = bank.weights(q)?;
    let products = Products::of(&synthesize(u));
    Ok(shell_of_products(&products, w, u.grid()))
}

fn shell_of_products(products: &Products, w: &[f64], grid: GridSpec) -> SymTensorField {
    let filtered: Vec<Vec<Complex64>> = products
        .hats
        .iter()
        .map(|h| h.iter().zip(w).map(|(v, m)| v * m).collect())
        .collect();
    let refs: Vec<&[Complex64]> = filtered.iter().map(|h| h.as_slice()).collect();
    let mut it = Fft3::shared(grid.n()).inverse_real_many(&refs).into_iter();
    SymTensorField {
        grid,
        comps: std::array::from_fn(|_| it.next().unwrap()),
    }
}

/// `r_q(u,u) = (u⊗u)_q − u_q⊗u − u⊗u_q`.
///
/// Equals the kernel form `∫ F⁻¹(φ_q)(y) (u(x−y) − u(x))⊗(u(x−y) − u(x)) dy`
/// because `φ_q(0) = 0`; see [`remainder_kernel`].
pub fn remainder(u: &SpectralVelocity, bank: &FilterBank, q: i32) -> Result<SymTensorField> {
    check_bank(u, bank)?;
    if q < 0 {
        return Err(Error::Range(format!("remainder needs q >= 0, got {q}")));
    }
    require_alias_free(u)?;
    let phys = synthesize(u);
    let products = Products::of(&phys);
    let uq = synthesize(&bank.shell_project(u, q)?);
    Ok(remainder_from(&products, bank.weights(q)?, &phys, &uq))
}

fn remainder_from(
    products: &Products,
    w: &[f64],
    phys: &PhysicalVelocity,
    uq: &PhysicalVelocity,
) -> SymTensorField {
    let mut r = shell_of_products(products, w, phys.grid());
    for (s, &(i, j)) in TENSOR_PAIRS.iter().enumerate() {
        let (ui, uj) = (phys.component(i), phys.component(j));
        let (qi, qj) = (uq.component(i), uq.component(j));
        for x in 0..phys.grid().len() {
            r.comps[s][x] -= qi[x] * uj[x] + ui[x] * qj[x];
        }
    }
    r
}

/// Lattice convolution kernel of the shell-`q` multiplier:
/// `w(y) = n⁻³ Σ_k φ_q(k) e^{ik·y}`, so that `(f)_q(x) = Σ_y w(y) f(x − y)`.
pub fn shell_kernel(bank: &FilterBank, q: i32) -> Result<Vec<f64>> {
    let grid = bank.grid();
    let w: Vec<Complex64> = bank
        .weights(q)?
        .iter()
        .map(|&m| Complex64::new(m, 0.0))
        .collect();
    let zeros = vec![Complex64::new(0.0, 0.0); grid.len()];
    let (k, _) = Fft3::shared(grid.n()).inverse_real_pair(&w, &zeros);
    let scale = 1.0 / grid.len() as f64;
    Ok(k.into_iter().map(|v| v * scale).collect())
}

/// Remainder by direct summation of the kernel definition, `O(n⁶)`.
///
/// Meant for small grids (`n = 16`) as a cross-check of [`remainder`].
pub fn remainder_kernel(u: &SpectralVelocity, bank: &FilterBank, q: i32) -> Result<SymTensorField> {
    check_bank(u, bank)?;
    if q < 0 {
        return Err(Error::Range(format!("remainder needs q >= 0, got {q}")));
    }
    let grid = u.grid();
    let n = grid.n();
    let kernel = shell_kernel(bank, q)?;
    let phys = synthesize(u);
    let vals = phys.components();
    let sums: Vec<[f64; 6]> = (0..grid.len())
        .into_par_iter()
        .map(|x| {
            let (xi, xj, xl) = grid.coords(x);
            let here = [vals[0][x], vals[1][x], vals[2][x]];
            let mut acc = [0.0; 6];
            for (y, &wy) in kernel.iter().enumerate() {
                let (yi, yj, yl) = grid.coords(y);
                let src = grid.index((xi + n - yi) % n, (xj + n - yj) % n, (xl + n - yl) % n);
                let d = [
                    vals[0][src] - here[0],
                    vals[1][src] - here[1],
                    vals[2][src] - here[2],
                ];
                for (s, &(i, j)) in TENSOR_PAIRS.iter().enumerate() {
                    acc[s] += wy * d[i] * d[j];
                }
            }
            acc
        })
        .collect();
    let mut out = SymTensorField::zeros(grid);
    for (x, acc) in sums.iter().enumerate() {
        for s in 0..6 {
            out.comps[s][x] = acc[s];
        }
    }
    Ok(out)
}

/// `∫ Σ_ij a_j (∂_j w_i) a_i dx` by grid quadrature.
fn advective_form(a: &PhysicalVelocity, grad_w: &Gradient) -> f64 {
    let grid = a.grid();
    let mut acc = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let (ai, aj, g) = (a.component(i), a.component(j), &grad_w.d[i][j]);
            for x in 0..grid.len() {
                acc += aj[x] * g[x] * ai[x];
            }
        }
    }
    acc * grid.cell_volume()
}

/// Split of the shell transfer into remainder and low-mode parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NltSplit {
    /// `∫ r_q(u,u) : ∇u_q dx`.
    pub remainder: f64,
    /// `−∫ u_q · ∇u_{≤q+1} · u_q dx`.
    pub low: f64,
    /// `−∫ u_q · ∇u_{q+2} · u_q dx`. Shell `q+2` overlaps the spectral
    /// support of `u_q ⊗ u_q`, so this term is generally nonzero; shells
    /// `≥ q+3` contribute nothing.
    pub tail: f64,
}

impl NltSplit {
    /// `remainder + low + tail`, equal to `T_q` for divergence-free `u`.
    pub fn total(&self) -> f64 {
        self.remainder + self.low + self.tail
    }
}

/// Remainder / low-mode split of the shell transfer `T_q`.
pub fn nlt_split(u: &SpectralVelocity, bank: &FilterBank, q: i32) -> Result<NltSplit> {
    check_bank(u, bank)?;
    require_alias_free(u)?;
    let phys = synthesize(u);
    let products = Products::of(&phys);
    nlt_split_with(u, bank, q, &phys, &products)
}

fn nlt_split_with(
    u: &SpectralVelocity,
    bank: &FilterBank,
    q: i32,
    phys: &PhysicalVelocity,
    products: &Products,
) -> Result<NltSplit> {
    let uq_hat = bank.shell_project(u, q)?;
    if uq_hat.is_zero() {
        return Ok(NltSplit {
            remainder: 0.0,
            low: 0.0,
            tail: 0.0,
        });
    }
    let uq = synthesize(&uq_hat);
    let r = remainder_from(products, bank.weights(q)?, phys, &uq);
    let remainder = r.contract(&Gradient::of(&uq_hat));
    let low = -advective_form(&uq, &Gradient::of(&bank.band(u, 0, q + 1)));
    let tail = if q + 2 <= bank.q_max() {
        -advective_form(&uq, &Gradient::of(&bank.band(u, q + 2, q + 2)))
    } else {
        0.0
    };
    Ok(NltSplit {
        remainder,
        low,
        tail,
    })
}

/// Shell transfer `T_q = ∫ Tr[(u⊗u)_q · ∇u_q] dx`.
pub fn transfer(u: &SpectralVelocity, bank: &FilterBank, q: i32) -> Result<f64> {
    check_bank(u, bank)?;
    require_alias_free(u)?;
    let w = bank.weights(q)?;
    let density = Products::of(&synthesize(u)).transfer_density(u);
    Ok(density.iter().zip(w).map(|(t, m)| m * m * t).sum())
}

/// Sides of the trace bound for one shell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma1Sides {
    pub lhs: f64,
    /// `λ_q⁻¹ ‖u_q‖₂ Σ_{p≤q} λ_p² ‖u_p‖₄²`
    pub rhs1: f64,
    /// `λ_q ‖u_q‖₂ Σ_{p>q} ‖u_p‖₄²`
    pub rhs2: f64,
    /// `‖u_q‖₂² Σ_{p≤q+1} λ_p^{5/2} ‖u_p‖₂`
    pub rhs3: f64,
}

impl Lemma1Sides {
    pub fn rhs(&self) -> f64 {
        self.rhs1 + self.rhs2 + self.rhs3
    }
}

fn lemma1_from(q: usize, transfer_q: f64, l2: &[f64], l4: &[f64]) -> Lemma1Sides {
    let lq = lambda(q as i32);
    let rhs1 = l2[q] / lq
        * (0..=q)
            .map(|p| lambda(p as i32).powi(2) * l4[p] * l4[p])
            .sum::<f64>();
    let rhs2 = lq * l2[q] * l4.iter().skip(q + 1).map(|v| v * v).sum::<f64>();
    let top = (q + 1).min(l2.len() - 1);
    let rhs3 = l2[q] * l2[q]
        * (0..=top)
            .map(|p| lambda(p as i32).powf(2.5) * l2[p])
            .sum::<f64>();
    Lemma1Sides {
        lhs: transfer_q,
        rhs1,
        rhs2,
        rhs3,
    }
}

/// Left side `T_q` and the three right-hand sums of the trace bound.
pub fn lemma1_sides(u: &SpectralVelocity, bank: &FilterBank, q: i32) -> Result<Lemma1Sides> {
    let a = ShellAnalysis::new(u, bank, true)?;
    bank.weights(q)?;
    Ok(a.lemma1(q as usize))
}

/// The trisums `A`, `B`, `C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TriSums {
    pub s: f64,
    pub nu: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

fn check_s(s: f64) -> Result<()> {
    if !(s > 0.5 && s < 2.5) {
        return Err(Error::Range(format!("s must lie in (1/2, 5/2), got {s}")));
    }
    Ok(())
}

/// `A`, `B`, `C` from shell L² and L⁴ norms.
pub fn trisums_from_norms(l2: &[f64], l4: &[f64], s: f64, nu: f64) -> TriSums {
    let shells = l2.len();
    let mut a = 0.0;
    let mut b = 0.0;
    let mut c = 0.0;
    for q in 0..shells {
        let lq = lambda(q as i32);
        for p in 0..shells {
            let lp = lambda(p as i32);
            if p <= q {
                a += lq.powf(2.0 * s - 1.0) * l2[q] * lp * lp * l4[p] * l4[p];
            } else {
                b += lq.powf(2.0 * s + 1.0) * l2[q] * l4[p] * l4[p];
            }
            if p <= q + 1 {
                c += lq.powf(2.0 * s) * l2[q] * l2[q] * lp.powf(2.5) * l2[p];
            }
        }
    }
    TriSums { s, nu, a, b, c }
}

/// Trisums for `1/2 < s < 5/2`, `ν > 0`.
pub fn abc_sums(u: &SpectralVelocity, bank: &FilterBank, s: f64, nu: f64) -> Result<TriSums> {
    check_s(s)?;
    check_nu(nu)?;
    let a = ShellAnalysis::new(u, bank, true)?;
    Ok(a.trisums(s, nu))
}

fn check_nu(nu: f64) -> Result<()> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::Range(format!("viscosity must be positive, got {nu}")));
    }
    Ok(())
}

/// Riccati exponent `(2s+1)/(2s−1)`.
pub fn riccati_exponent(s: f64) -> f64 {
    (2.0 * s + 1.0) / (2.0 * s - 1.0)
}

/// Empirical constants for `X ≲ ν Σ_q(ν⁻¹ λ_q^{2s} ‖u_q‖₂²)^β + (ν/3) Σ_q λ_q^{2s+2} ‖u_q‖₂²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AbcConstants {
    pub k_a: f64,
    pub k_b: f64,
    pub k_c: f64,
}

/// Denominator of the trisum estimates for given shell energies.
pub fn abc_estimate_scale(energies: &[f64], s: f64, nu: f64) -> f64 {
    let beta = riccati_exponent(s);
    let mut nonlinear = 0.0;
    let mut dissipative = 0.0;
    for (q, e) in energies.iter().enumerate() {
        let lq = lambda(q as i32);
        nonlinear += (lq.powf(2.0 * s) * e / nu).powf(beta);
        dissipative += lq.powf(2.0 * s + 2.0) * e;
    }
    nu * nonlinear + nu / 3.0 * dissipative
}

/// Largest ratio of each trisum to its estimate over an ensemble.
pub fn estimate_abc_constants(
    ensemble: &[SpectralVelocity],
    bank: &FilterBank,
    s: f64,
    nu: f64,
) -> Result<AbcConstants> {
    check_s(s)?;
    check_nu(nu)?;
    let mut out: Option<AbcConstants> = None;
    for u in ensemble {
        let analysis = ShellAnalysis::new(u, bank, true)?;
        let scale = abc_estimate_scale(&analysis.energies, s, nu);
        if scale == 0.0 {
            continue;
        }
        let t = analysis.trisums(s, nu);
        let k = AbcConstants {
            k_a: t.a / scale,
            k_b: t.b / scale,
            k_c: t.c / scale,
        };
        out = Some(match out {
            None => k,
            Some(m) => AbcConstants {
                k_a: m.k_a.max(k.k_a),
                k_b: m.k_b.max(k.k_b),
                k_c: m.k_c.max(k.k_c),
            },
        });
    }
    out.ok_or_else(|| Error::UndefinedRatio("ensemble has no nonzero field".into()))
}

/// Both sides of the Riccati-type inequality and `y = ‖u‖²_{Ḣ^s}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiccatiSides {
    pub s: f64,
    /// `Σ_q λ_q^{2s} (−2ν‖∇u_q‖₂² + 2 T_q)`, the instantaneous `dy/dt`.
    pub lhs: f64,
    /// `Σ_q (λ_q^{2s} ‖u_q‖₂²)^{(2s+1)/(2s−1)}`.
    pub rhs: f64,
    pub y: f64,
}

pub fn riccati_sides(u: &SpectralVelocity, bank: &FilterBank, s: f64, nu: f64) -> Result<RiccatiSides> {
    check_s(s)?;
    check_nu(nu)?;
    let a = ShellAnalysis::new(u, bank, false)?;
    Ok(a.riccati(s, nu))
}

/// One row of the per-shell flux table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShellFluxRow {
    pub q: i32,
    pub energy: f64,
    pub transfer: f64,
    /// `∫ Tr[(u⊗u)_q · ∇u] dx`; these sum to zero over shells.
    pub partition_flux: f64,
    /// `2ν ‖∇u_q‖₂²`.
    pub dissipation_exact: f64,
    /// `2ν λ_q² ‖u_q‖₂²`.
    pub dissipation_lambda: f64,
    pub remainder_l2: f64,
    pub lemma1_lhs: f64,
    pub lemma1_rhs_terms: [f64; 3],
}

/// Aggregated diagnostics for one field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluxReport {
    pub rows: Vec<ShellFluxRow>,
    pub trisums: TriSums,
    pub riccati: RiccatiSides,
    /// `Σ_q T_q`.
    pub flux_sum: f64,
    /// `Σ_q |T_q|`.
    pub flux_abs_sum: f64,
    /// `Σ_q ∫ Tr[(u⊗u)_q · ∇u] dx = ∫ Tr[(u⊗u) · ∇u] dx`.
    pub partition_flux_sum: f64,
}

impl FluxReport {
    /// `|Σ_q T_q| / max(Σ_q |T_q|, ε)`.
    pub fn relative_flux_sum(&self) -> f64 {
        self.flux_sum.abs() / self.flux_abs_sum.max(EPS)
    }
}

/// Floor for relative-error denominators.
pub const EPS: f64 = 1e-14;

pub fn shell_flux_report(u: &SpectralVelocity, bank: &FilterBank, s: f64, nu: f64) -> Result<FluxReport> {
    check_s(s)?;
    check_nu(nu)?;
    let analysis = ShellAnalysis::new(u, bank, true)?;
    let phys = synthesize(u);
    let mut rows = Vec::with_capacity(bank.shell_count());
    for q in 0..bank.shell_count() {
        let l = analysis.lemma1(q);
        let remainder_l2 = if analysis.energies[q] == 0.0 {
            0.0
        } else {
            let uq = synthesize(&bank.shell_project(u, q as i32)?);
            remainder_from(&analysis.products, bank.weights(q as i32)?, &phys, &uq).l2_norm()
        };
        rows.push(ShellFluxRow {
            q: q as i32,
            energy: analysis.energies[q],
            transfer: analysis.transfer[q],
            partition_flux: analysis.partition_flux[q],
            dissipation_exact: 2.0 * nu * analysis.grad_energies[q],
            dissipation_lambda: 2.0 * nu * lambda(q as i32).powi(2) * analysis.energies[q],
            remainder_l2,
            lemma1_lhs: l.lhs,
            lemma1_rhs_terms: [l.rhs1, l.rhs2, l.rhs3],
        });
    }
    Ok(FluxReport {
        trisums: analysis.trisums(s, nu),
        riccati: analysis.riccati(s, nu),
        flux_sum: analysis.transfer.iter().sum(),
        flux_abs_sum: analysis.transfer.iter().map(|t| t.abs()).sum(),
        partition_flux_sum: analysis.partition_flux.iter().sum(),
        rows,
    })
}

/// Shell-resolved quantities of one field, computed once and shared.
pub struct ShellAnalysis {
    products: Products,
    /// `‖u_q‖₂²`
    pub energies: Vec<f64>,
    /// `‖∇u_q‖₂²`
    pub grad_energies: Vec<f64>,
    /// `T_q`
    pub transfer: Vec<f64>,
    /// `∫ Tr[(u⊗u)_q · ∇u] dx`
    pub partition_flux: Vec<f64>,
    /// `‖u_q‖₄`, empty unless requested.
    pub l4: Vec<f64>,
}

impl ShellAnalysis {
    pub fn new(u: &SpectralVelocity, bank: &FilterBank, with_l4: bool) -> Result<Self> {
        check_bank(u, bank)?;
        require_alias_free(u)?;
        let products = Products::of(&synthesize(u));
        let density = products.transfer_density(u);
        let mut transfer = vec![0.0; bank.shell_count()];
        let mut partition_flux = vec![0.0; bank.shell_count()];
        for q in bank.shells() {
            let w = bank.weights(q)?;
            let (mut t, mut p) = (0.0, 0.0);
            for (d, m) in density.iter().zip(w) {
                t += m * m * d;
                p += m * d;
            }
            transfer[q as usize] = t;
            partition_flux[q as usize] = p;
        }
        let l4 = if with_l4 { bank.shell_norms(u)?.l4 } else { Vec::new() };
        Ok(ShellAnalysis {
            products,
            energies: bank.shell_energies(u),
            grad_energies: bank.shell_gradient_energies(u),
            transfer,
            partition_flux,
            l4,
        })
    }

    pub fn l2(&self) -> Vec<f64> {
        self.energies.iter().map(|e| e.sqrt()).collect()
    }

    pub fn lemma1(&self, q: usize) -> Lemma1Sides {
        lemma1_from(q, self.transfer[q], &self.l2(), &self.l4)
    }

    pub fn trisums(&self, s: f64, nu: f64) -> TriSums {
        trisums_from_norms(&self.l2(), &self.l4, s, nu)
    }

    pub fn riccati(&self, s: f64, nu: f64) -> RiccatiSides {
        let beta = riccati_exponent(s);
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        let mut y = 0.0;
        for q in 0..self.energies.len() {
            let w = lambda(q as i32).powf(2.0 * s);
            lhs += w * (-2.0 * nu * self.grad_energies[q] + 2.0 * self.transfer[q]);
            let yq = w * self.energies[q];
            rhs += yq.powf(beta);
            y += yq;
        }
        RiccatiSides { s, lhs, rhs, y }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{leray_project, make_random_field, make_taylor_green};
    use std::collections::BTreeMap;

    fn setup(n: usize) -> (GridSpec, FilterBank) {
        let g = GridSpec::new(n).unwrap();
        (g, FilterBank::new(g).unwrap())
    }

    fn unit_mode(grid: GridSpec) -> SpectralVelocity {
        // ‖u‖₂ = 1, u = (0, c sin x, 0)
        let c = 2f64.sqrt() / std::f64::consts::TAU.powf(1.5) / 2.0;
        let mut u = SpectralVelocity::zeros(grid);
        u.component_mut(1)[grid.index_of([1, 0, 0]).unwrap()] = Complex64::new(0.0, -c);
        u.component_mut(1)[grid.index_of([-1, 0, 0]).unwrap()] = Complex64::new(0.0, c);
        u
    }

    fn random(grid: GridSpec, seed: u64) -> SpectralVelocity {
        let spec = BTreeMap::from([(0, 1.0), (1, 0.7), (2, 0.4)]);
        make_random_field(grid, seed, &spec).unwrap()
    }

    #[test]
    fn zero_field_is_quiet() {
        let (g, b) = setup(16);
        let z = SpectralVelocity::zeros(g);
        for q in b.shells() {
            assert!(tensor_shell(&z, &b, q).unwrap().l2_norm() == 0.0);
            assert!(remainder(&z, &b, q).unwrap().l2_norm() == 0.0);
            let s = nlt_split(&z, &b, q).unwrap();
            assert_eq!((s.remainder, s.low, s.tail), (0.0, 0.0, 0.0));
            let l = lemma1_sides(&z, &b, q).unwrap();
            assert_eq!([l.lhs, l.rhs1, l.rhs2, l.rhs3], [0.0; 4]);
        }
        let t = abc_sums(&z, &b, 1.5, 1.0).unwrap();
        assert_eq!([t.a, t.b, t.c], [0.0; 3]);
        let r = riccati_sides(&z, &b, 1.5, 1.0).unwrap();
        assert_eq!([r.lhs, r.rhs, r.y], [0.0; 3]);
        assert!(matches!(
            estimate_abc_constants(&[z], &b, 1.5, 1.0),
            Err(Error::UndefinedRatio(_))
        ));
    }

    #[test]
    fn single_mode_tensor_lands_in_shell_one() {
        let (g, b) = setup(16);
        let u = unit_mode(g);
        // u_y² = c² sin² x = c²/2 (1 − cos 2x): |k| = 2 part is −c²/2 cos 2x.
        let c = 2f64.sqrt() / std::f64::consts::TAU.powf(1.5);
        let t1 = tensor_shell(&u, &b, 1).unwrap();
        for idx in 0..g.len() {
            let (i, _, _) = g.coords(idx);
            let x = g.coordinate(i);
            let expect = -c * c / 2.0 * (2.0 * x).cos();
            assert!((t1.get(1, 1)[idx] - expect).abs() < 1e-15);
            assert!(t1.get(0, 0)[idx].abs() < 1e-15);
        }
        for q in [0, 2, 3, 4] {
            assert!(tensor_shell(&u, &b, q).unwrap().l2_norm() < 1e-15);
        }
    }

    #[test]
    fn taylor_green_tensor_reconstruction() {
        let (g, b) = setup(16);
        let u = make_taylor_green(g, 1.0).unwrap();
        let phys = synthesize(&u);
        let mut total = SymTensorField::zeros(g);
        for q in b.shells() {
            let t = tensor_shell(&u, &b, q).unwrap();
            for s in 0..6 {
                for x in 0..g.len() {
                    total.comps[s][x] += t.comps[s][x];
                }
            }
        }
        for (s, &(i, j)) in TENSOR_PAIRS.iter().enumerate() {
            let prod: Vec<f64> = (0..g.len())
                .map(|x| phys.component(i)[x] * phys.component(j)[x])
                .collect();
            let mean = prod.iter().sum::<f64>() / g.len() as f64;
            for x in 0..g.len() {
                assert!((total.comps[s][x] - (prod[x] - mean)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn remainder_matches_kernel_on_random_field() {
        let (g, b) = setup(16);
        let u = random(g, 5);
        for q in [0, 2] {
            let fast = remainder(&u, &b, q).unwrap();
            let slow = remainder_kernel(&u, &b, q).unwrap();
            let err = fast.sub(&slow).l2_norm();
            assert!(err < 1e-12 * slow.l2_norm(), "q = {q}: {err}");
        }
        assert!(matches!(remainder(&u, &b, -1), Err(Error::Range(_))));
    }

    #[test]
    fn remainder_is_translation_covariant() {
        let (g, b) = setup(16);
        let u = random(g, 9);
        // Shift by 3 grid cells in y: û(k) → û(k) e^{-i k_y · 3dx}.
        let shift = 3usize;
        let mut shifted = u.clone();
        for idx in 0..g.len() {
            let k = g.wavevector(idx);
            let ph = Complex64::from_polar(1.0, -(k[1] as f64) * shift as f64 * g.dx());
            shifted.set(idx, u.at(idx).map(|v| v * ph));
        }
        let r = remainder(&u, &b, 1).unwrap();
        let rs = remainder(&shifted, &b, 1).unwrap();
        let n = g.n();
        for x in 0..g.len() {
            let (i, j, l) = g.coords(x);
            let src = g.index(i, (j + n - shift) % n, l);
            for s in 0..6 {
                assert!((rs.comps[s][x] - r.comps[s][src]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn split_reproduces_transfer() {
        let (g, b) = setup(32);
        let u = random(g, 2);
        for q in b.shells() {
            let t = transfer(&u, &b, q).unwrap();
            let s = nlt_split(&u, &b, q).unwrap();
            let scale = [t, s.remainder, s.low, s.tail]
                .iter()
                .fold(EPS, |m, v| m.max(v.abs()));
            assert!((s.total() - t).abs() < 1e-11 * scale, "q = {q}");
        }
    }

    #[test]
    fn single_mode_has_no_transfer() {
        let (g, b) = setup(16);
        let u = unit_mode(g);
        let t0 = transfer(&u, &b, 0).unwrap();
        // Direct physical quadrature of Σ_ij (u_i u_j)_0 ∂_j (u_0)_i.
        let t = tensor_shell(&u, &b, 0).unwrap();
        let direct = t.contract(&Gradient::of(&b.shell_project(&u, 0).unwrap()));
        assert!(t0.abs() < 1e-16 && direct.abs() < 1e-16);
        let s = nlt_split(&u, &b, 0).unwrap();
        assert!((s.total() - direct).abs() < 1e-16);
    }

    #[test]
    fn single_mode_trisums_collapse() {
        let (g, b) = setup(16);
        let u = unit_mode(g);
        let norms = b.shell_norms(&u).unwrap();
        let (l2, l4) = (norms.l2[0], norms.l4[0]);
        assert!((l2 - 1.0).abs() < 1e-12);
        let t = abc_sums(&u, &b, 1.5, 1.0).unwrap();
        assert!((t.a - l2 * l4 * l4).abs() < 1e-12);
        assert_eq!(t.b, 0.0);
        assert!((t.c - l2.powi(3)).abs() < 1e-12);
        let k = estimate_abc_constants(&[u], &b, 1.5, 1.0).unwrap();
        assert!((k.k_a - t.a / (4.0 / 3.0)).abs() < 1e-12);
        assert!((k.k_c - t.c / (4.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn riccati_exponents() {
        assert_eq!(riccati_exponent(1.5), 2.0);
        assert_eq!(riccati_exponent(1.0), 3.0);
        assert!((riccati_exponent(2.0) - 5.0 / 3.0).abs() < 1e-15);
        let (g, b) = setup(16);
        let u = unit_mode(g);
        assert!(matches!(riccati_sides(&u, &b, 0.5, 1.0), Err(Error::Range(_))));
        assert!(matches!(abc_sums(&u, &b, 2.5, 1.0), Err(Error::Range(_))));
        assert!(matches!(abc_sums(&u, &b, 1.5, 0.0), Err(Error::Range(_))));
    }

    #[test]
    fn taylor_green_lemma_support() {
        let (g, b) = setup(16);
        let u = make_taylor_green(g, 1.0).unwrap();
        let a = ShellAnalysis::new(&u, &b, true).unwrap();
        let nonzero: Vec<usize> = (0..b.shell_count()).filter(|&q| a.l4[q] > 0.0).collect();
        assert_eq!(nonzero, vec![0, 1]);
        let l = a.lemma1(1);
        assert_eq!(l.rhs2, 0.0);
        assert!(l.rhs1 > 0.0 && l.rhs3 > 0.0);
    }

    #[test]
    fn partition_flux_sums_to_zero() {
        let (g, b) = setup(32);
        let u = random(g, 13);
        let rep = shell_flux_report(&u, &b, 1.5, 0.1).unwrap();
        let scale: f64 = rep.rows.iter().map(|r| r.partition_flux.abs()).sum();
        assert!(rep.partition_flux_sum.abs() < 1e-12 * scale);
        for r in &rep.rows {
            assert!(r.dissipation_exact >= 0.0);
            assert!(r.dissipation_exact <= 4.0 * r.dissipation_lambda * (1.0 + 1e-12));
            assert!(r.dissipation_exact >= r.dissipation_lambda / 4.0 * (1.0 - 1e-12));
        }
    }

    #[test]
    fn products_require_dealiased_fields() {
        let (g, b) = setup(16);
        let mut u = SpectralVelocity::zeros(g);
        u.component_mut(2)[g.index_of([7, 0, 0]).unwrap()] = Complex64::new(1.0, 0.0);
        u.component_mut(2)[g.index_of([-7, 0, 0]).unwrap()] = Complex64::new(1.0, 0.0);
        let u = leray_project(&u);
        assert!(matches!(tensor_shell(&u, &b, 0), Err(Error::Config(_))));
        let wide = GridSpec::with_dealias(16, 1, 1).unwrap();
        let bw = FilterBank::new(wide).unwrap();
        assert!(matches!(
            transfer(&SpectralVelocity::zeros(wide), &bw, 0),
            Err(Error::Config(_))
        ));
    }
}
