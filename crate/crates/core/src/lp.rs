//! Dyadic Littlewood-Paley decomposition on the integer lattice.
//!
//! The radial profile `ψ` equals 1 on `[0, 1/2]`, 0 on `[1, ∞)` and blends
//! smoothly in between. Shell `q` uses the multiplier
//! `φ_q(k) = ψ(|k|/2^{q+1}) − ψ(|k|/2^q)`, supported in
//! `2^{q-1} < |k| < 2^{q+1}`, with wavenumber `λ_q = 2^q`. On the lattice
//! every nonzero wavevector has `|k| ≥ 1`, so `ψ(|k|) = 0` and the shells
//! `q < 0` vanish; the pieces `q = 0..=q_max` sum to the field whenever it has
//! zero mean.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::spectral::{synthesize, GridSpec, SpectralVelocity, BOX_VOLUME};

/// Identifier of the `ψ` profile, recorded in run manifests.
pub const PSI_PROFILE_ID: &str =
    "exp-ratio: psi(r) = B(2-2r) / (B(2-2r) + B(2r-1)) on (1/2, 1), B(t) = exp(-1/t)";

fn bump(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth radial cut-off: 1 for `r ≤ 1/2`, 0 for `r ≥ 1`, monotone between.
pub fn psi(r: f64) -> f64 {
    if r <= 0.5 {
        1.0
    } else if r >= 1.0 {
        0.0
    } else {
        let a = bump(2.0 - 2.0 * r);
        let b = bump(2.0 * r - 1.0);
        a / (a + b)
    }
}

/// Dyadic wavenumber `λ_q = 2^q`.
#[inline]
pub fn lambda(q: i32) -> f64 {
    2f64.powi(q)
}

/// Shell multiplier `φ_q(r) = ψ(r / 2^{q+1}) − ψ(r / 2^q)`.
pub fn phi(q: i32, r: f64) -> f64 {
    psi(r / lambda(q + 1)) - psi(r / lambda(q))
}

/// Physical-space norm used by Bernstein-type estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpIndex {
    L2,
    L4,
    Infinity,
}

impl LpIndex {
    pub fn exponent(self) -> f64 {
        match self {
            LpIndex::L2 => 2.0,
            LpIndex::L4 => 4.0,
            LpIndex::Infinity => f64::INFINITY,
        }
    }

    /// `1/p`, zero for `p = ∞`.
    pub fn reciprocal(self) -> f64 {
        match self {
            LpIndex::L2 => 0.5,
            LpIndex::L4 => 0.25,
            LpIndex::Infinity => 0.0,
        }
    }
}

/// Per-shell multipliers cached on every lattice point.
#[derive(Debug, Clone)]
pub struct FilterBank {
    grid: GridSpec,
    q_max: i32,
    weights: Vec<Vec<f64>>,
}

/// The pieces `u_q` of a field.
#[derive(Debug, Clone)]
pub struct ShellDecomposition {
    grid: GridSpec,
    pub pieces: BTreeMap<i32, SpectralVelocity>,
    pub source_checksum: u64,
}

/// L², L⁴ and L^∞ norms of every shell piece.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellNorms {
    pub l2: Vec<f64>,
    pub l4: Vec<f64>,
    pub linf: Vec<f64>,
}

impl FilterBank {
    pub fn new(grid: GridSpec) -> Result<Self> {
        let k_max = grid.k_max();
        if k_max < 1 {
            return Err(Error::Config("grid cannot host shell 0".into()));
        }
        let q_max = (k_max as f64).log2().ceil() as i32 + 1;
        let weights = (0..=q_max)
            .map(|q| (0..grid.len()).map(|idx| phi(q, grid.magnitude(idx))).collect())
            .collect();
        Ok(FilterBank {
            grid,
            q_max,
            weights,
        })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn q_min(&self) -> i32 {
        0
    }

    pub fn q_max(&self) -> i32 {
        self.q_max
    }

    pub fn shells(&self) -> std::ops::RangeInclusive<i32> {
        0..=self.q_max
    }

    pub fn shell_count(&self) -> usize {
        self.q_max as usize + 1
    }

    /// Cached `φ_q(k)` for all lattice indices.
    pub fn weights(&self, q: i32) -> Result<&[f64]> {
        self.check_shell(q)?;
        Ok(&self.weights[q as usize])
    }

    fn check_shell(&self, q: i32) -> Result<()> {
        if q < 0 || q > self.q_max {
            return Err(Error::Range(format!(
                "shell {q} outside [0, {}]",
                self.q_max
            )));
        }
        Ok(())
    }

    fn check_grid(&self, u: &SpectralVelocity) -> Result<()> {
        if u.grid() != self.grid {
            return Err(Error::Config("field and filter bank grids differ".into()));
        }
        Ok(())
    }

    /// `max |ψ(|k|) + Σ_q φ_q(k) − 1|` over retained `k ≠ 0`.
    pub fn partition_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for idx in 1..self.grid.len() {
            if !self.grid.is_retained(idx) {
                continue;
            }
            let mut total = psi(self.grid.magnitude(idx));
            for w in &self.weights {
                total += w[idx];
            }
            worst = worst.max((total - 1.0).abs());
        }
        worst
    }

    /// `(inf_k Σ_q φ_q(k)²)^{1/2}` over retained `k ≠ 0`.
    pub fn square_sum_floor(&self) -> f64 {
        let mut lo = f64::INFINITY;
        for idx in 1..self.grid.len() {
            if !self.grid.is_retained(idx) {
                continue;
            }
            let s: f64 = self.weights.iter().map(|w| w[idx] * w[idx]).sum();
            lo = lo.min(s);
        }
        lo.sqrt()
    }

    /// The piece `u_q` with `û_q(k) = φ_q(k) û(k)`.
    pub fn shell_project(&self, u: &SpectralVelocity, q: i32) -> Result<SpectralVelocity> {
        self.check_grid(u)?;
        let w = self.weights(q)?;
        Ok(u.multiplied(|idx| w[idx]))
    }

    pub fn decompose(&self, u: &SpectralVelocity) -> Result<ShellDecomposition> {
        self.check_grid(u)?;
        let pieces = self
            .shells()
            .map(|q| (q, u.multiplied(|idx| self.weights[q as usize][idx])))
            .collect();
        Ok(ShellDecomposition {
            grid: self.grid,
            pieces,
            source_checksum: checksum(u),
        })
    }

    /// `u_{≤Q} = Σ_{q ≤ Q} u_q`; `Q = -1` gives the zero field.
    pub fn truncate_low(&self, u: &SpectralVelocity, cap: i32) -> Result<SpectralVelocity> {
        self.check_grid(u)?;
        if cap < -1 || cap > self.q_max {
            return Err(Error::Range(format!(
                "low truncation index {cap} outside [-1, {}]",
                self.q_max
            )));
        }
        Ok(self.band(u, 0, cap))
    }

    /// `u_{≥Q} = Σ_{q ≥ Q} u_q`; `Q = q_max + 1` gives the zero field.
    pub fn truncate_high(&self, u: &SpectralVelocity, floor: i32) -> Result<SpectralVelocity> {
        self.check_grid(u)?;
        if floor < 0 || floor > self.q_max + 1 {
            return Err(Error::Range(format!(
                "high truncation index {floor} outside [0, {}]",
                self.q_max + 1
            )));
        }
        Ok(self.band(u, floor, self.q_max))
    }

    /// `Σ_{lo ≤ q ≤ hi} u_q`, clamped to the representable shells.
    pub(crate) fn band(&self, u: &SpectralVelocity, lo: i32, hi: i32) -> SpectralVelocity {
        let lo = lo.max(0);
        let hi = hi.min(self.q_max);
        u.multiplied(|idx| {
            let mut m = 0.0;
            for q in lo..=hi {
                m += self.weights[q as usize][idx];
            }
            m
        })
    }

    /// `‖u_q‖₂²` for every shell.
    pub fn shell_energies(&self, u: &SpectralVelocity) -> Vec<f64> {
        let mut out = vec![0.0; self.shell_count()];
        for idx in 0..self.grid.len() {
            let e: f64 = u.at(idx).iter().map(|v| v.norm_sqr()).sum();
            if e == 0.0 {
                continue;
            }
            for (q, w) in self.weights.iter().enumerate() {
                out[q] += w[idx] * w[idx] * e;
            }
        }
        out.iter_mut().for_each(|v| *v *= BOX_VOLUME);
        out
    }

    /// `‖∇u_q‖₂²` for every shell.
    pub fn shell_gradient_energies(&self, u: &SpectralVelocity) -> Vec<f64> {
        let mut out = vec![0.0; self.shell_count()];
        for idx in 0..self.grid.len() {
            let e: f64 = u.at(idx).iter().map(|v| v.norm_sqr()).sum();
            if e == 0.0 {
                continue;
            }
            let k2 = self.grid.magnitude_sq(idx) as f64;
            for (q, w) in self.weights.iter().enumerate() {
                out[q] += w[idx] * w[idx] * k2 * e;
            }
        }
        out.iter_mut().for_each(|v| *v *= BOX_VOLUME);
        out
    }

    /// Homogeneous Sobolev norm `(Σ_q λ_q^{2s} ‖u_q‖₂²)^{1/2}`.
    pub fn sobolev_norm(&self, u: &SpectralVelocity, s: f64) -> Result<f64> {
        self.check_grid(u)?;
        Ok(sobolev_from_energies(&self.shell_energies(u), s).sqrt())
    }

    /// L², L⁴ and L^∞ norms of every shell piece (grid quadrature for L⁴, L^∞).
    pub fn shell_norms(&self, u: &SpectralVelocity) -> Result<ShellNorms> {
        self.check_grid(u)?;
        let energies = self.shell_energies(u);
        let mut l4 = Vec::with_capacity(self.shell_count());
        let mut linf = Vec::with_capacity(self.shell_count());
        for (q, e) in energies.iter().enumerate() {
            if *e == 0.0 {
                l4.push(0.0);
                linf.push(0.0);
                continue;
            }
            let piece = synthesize(&self.shell_project(u, q as i32)?);
            l4.push(piece.lp_norm(4.0));
            linf.push(piece.max_speed());
        }
        Ok(ShellNorms {
            l2: energies.iter().map(|e| e.sqrt()).collect(),
            l4,
            linf,
        })
    }
}

/// `Σ_q λ_q^{2s} e_q` for shell energies `e_q` indexed from `q = 0`.
pub fn sobolev_from_energies(energies: &[f64], s: f64) -> f64 {
    energies
        .iter()
        .enumerate()
        .map(|(q, e)| lambda(q as i32).powf(2.0 * s) * e)
        .sum()
}

impl ShellDecomposition {
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    /// `Σ_q u_q`.
    pub fn reconstruct(&self) -> SpectralVelocity {
        let mut out = SpectralVelocity::zeros(self.grid);
        for piece in self.pieces.values() {
            out.add_assign(piece);
        }
        out
    }

    /// `u_{≤Q}` from stored pieces.
    pub fn low(&self, cap: i32) -> SpectralVelocity {
        let mut out = SpectralVelocity::zeros(self.grid);
        for (_, piece) in self.pieces.range(..=cap) {
            out.add_assign(piece);
        }
        out
    }

    /// `u_{≥Q}` from stored pieces.
    pub fn high(&self, floor: i32) -> SpectralVelocity {
        let mut out = SpectralVelocity::zeros(self.grid);
        for (_, piece) in self.pieces.range(floor..) {
            out.add_assign(piece);
        }
        out
    }
}

/// FNV-1a over the coefficient bit patterns.
fn checksum(u: &SpectralVelocity) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for c in u.coeffs() {
        for v in c {
            for word in [v.re.to_bits(), v.im.to_bits()] {
                for byte in word.to_le_bytes() {
                    h ^= byte as u64;
                    h = h.wrapping_mul(0x100000001b3);
                }
            }
        }
    }
    h
}

/// `‖u_q‖_p / (λ_q^{3(1/r − 1/p)} ‖u_q‖_r)` for a field localized in shell `q`.
pub fn bernstein_ratio(
    u_q: &SpectralVelocity,
    bank: &FilterBank,
    q: i32,
    p: LpIndex,
    r: LpIndex,
) -> Result<f64> {
    bank.check_grid(u_q)?;
    bank.check_shell(q)?;
    if r.reciprocal() < p.reciprocal() {
        return Err(Error::Range("Bernstein ratio requires r <= p".into()));
    }
    let grid = bank.grid();
    let (lo, hi) = (lambda(q - 1), lambda(q + 1));
    for idx in 0..grid.len() {
        let m = grid.magnitude(idx);
        if (m <= lo || m >= hi) && u_q.at(idx).iter().any(|v| v.norm() > 0.0) {
            return Err(Error::Invariant(format!(
                "field has content at |k| = {m:.3} outside shell {q}"
            )));
        }
    }
    if u_q.is_zero() {
        return Err(Error::UndefinedRatio("zero field".into()));
    }
    let phys = synthesize(u_q);
    let num = phys.lp_norm(p.exponent());
    let den = phys.lp_norm(r.exponent());
    let scale = lambda(q).powf(3.0 * (r.reciprocal() - p.reciprocal()));
    Ok(num / (scale * den))
}
