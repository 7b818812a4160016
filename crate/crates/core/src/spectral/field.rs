use std::f64::consts::TAU;

use num_complex::Complex64;

use super::fft::Fft3;
use super::grid::GridSpec;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `(2π)³`, the box volume; multiplies coefficient sums in Parseval's identity.
pub const BOX_VOLUME: f64 = TAU * TAU * TAU;

/// Fourier coefficients of a real velocity field on the periodic box.
///
/// Uses `û(k) = (2π)⁻³ ∫ u(x) e^{-ik·x} dx`, so that
/// `u(x) = Σ_k û(k) e^{ik·x}` and `‖u‖₂² = (2π)³ Σ_k |û(k)|²`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralVelocity {
    grid: GridSpec,
    coeffs: [Vec<Complex64>; 3],
    pub time: f64,
}

/// Real velocity samples on the physical grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalVelocity {
    grid: GridSpec,
    values: [Vec<f64>; 3],
}

impl PhysicalVelocity {
    pub fn new(grid: GridSpec, values: [Vec<f64>; 3]) -> Result<Self> {
        if values.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::Config(format!(
                "physical field components must have {} samples",
                grid.len()
            )));
        }
        Ok(PhysicalVelocity { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        PhysicalVelocity {
            grid,
            values: std::array::from_fn(|_| vec![0.0; grid.len()]),
        }
    }

    /// Samples a closure `f(x, y, z) -> [u, v, w]` on the grid.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64, f64) -> [f64; 3]) -> Self {
        let mut out = Self::zeros(grid);
        for idx in 0..grid.len() {
            let (i, j, l) = grid.coords(idx);
            let v = f(grid.coordinate(i), grid.coordinate(j), grid.coordinate(l));
            for c in 0..3 {
                out.values[c][idx] = v[c];
            }
        }
        out
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn component(&self, c: usize) -> &[f64] {
        &self.values[c]
    }

    pub fn components(&self) -> &[Vec<f64>; 3] {
        &self.values
    }

    pub fn into_components(self) -> [Vec<f64>; 3] {
        self.values
    }

    /// Pointwise Euclidean magnitude.
    pub fn magnitude(&self, idx: usize) -> f64 {
        (0..3)
            .map(|c| self.values[c][idx] * self.values[c][idx])
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_speed(&self) -> f64 {
        (0..self.grid.len())
            .map(|i| self.magnitude(i))
            .fold(0.0, f64::max)
    }

    /// Grid quadrature of `|u|²` over the box.
    pub fn l2_norm_sq(&self) -> f64 {
        let mut acc = 0.0;
        for idx in 0..self.grid.len() {
            let m = self.magnitude(idx);
            acc += m * m;
        }
        acc * self.grid.cell_volume()
    }

    /// Grid quadrature `(∫|u|^p)^{1/p}`; `p = ∞` gives the maximum of `|u|`.
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.max_speed();
        }
        let mut acc = 0.0;
        for idx in 0..self.grid.len() {
            acc += self.magnitude(idx).powf(p);
        }
        (acc * self.grid.cell_volume()).powf(1.0 / p)
    }

    pub fn max_abs_diff(&self, other: &PhysicalVelocity) -> f64 {
        let mut m = 0.0f64;
        for c in 0..3 {
            for (a, b) in self.values[c].iter().zip(&other.values[c]) {
                m = m.max((a - b).abs());
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().flatten().all(|v| v.is_finite())
    }
}

impl SpectralVelocity {
    pub fn zeros(grid: GridSpec) -> Self {
        SpectralVelocity {
            grid,
            coeffs: std::array::from_fn(|_| vec![ZERO; grid.len()]),
            time: 0.0,
        }
    }

    /// Wraps raw coefficient arrays without checking the field invariants.
    pub fn from_coeffs(grid: GridSpec, coeffs: [Vec<Complex64>; 3]) -> Result<Self> {
        if coeffs.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::Config(format!(
                "spectral components must have {} coefficients",
                grid.len()
            )));
        }
        Ok(SpectralVelocity {
            grid,
            coeffs,
            time: 0.0,
        })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        &self.coeffs[c]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        &mut self.coeffs[c]
    }

    pub fn coeffs(&self) -> &[Vec<Complex64>; 3] {
        &self.coeffs
    }

    /// Coefficient vector at lattice index `idx`.
    #[inline]
    pub fn at(&self, idx: usize) -> [Complex64; 3] {
        [self.coeffs[0][idx], self.coeffs[1][idx], self.coeffs[2][idx]]
    }

    /// Coefficient vector at an integer wavevector (zero if off-lattice).
    pub fn at_wavevector(&self, k: [i64; 3]) -> [Complex64; 3] {
        match self.grid.index_of(k) {
            Some(idx) => self.at(idx),
            None => [ZERO; 3],
        }
    }

    #[inline]
    pub fn set(&mut self, idx: usize, v: [Complex64; 3]) {
        for c in 0..3 {
            self.coeffs[c][idx] = v[c];
        }
    }

    /// Applies a real scalar multiplier `m(idx)` to every mode.
    pub fn multiplied(&self, m: impl Fn(usize) -> f64) -> SpectralVelocity {
        let mut out = self.clone();
        for idx in 0..self.grid.len() {
            let w = m(idx);
            for c in 0..3 {
                out.coeffs[c][idx] *= w;
            }
        }
        out
    }

    pub fn scale(&mut self, factor: f64) {
        for c in self.coeffs.iter_mut() {
            for v in c.iter_mut() {
                *v *= factor;
            }
        }
    }

    pub fn add_assign(&mut self, other: &SpectralVelocity) {
        for c in 0..3 {
            for (a, b) in self.coeffs[c].iter_mut().zip(&other.coeffs[c]) {
                *a += b;
            }
        }
    }

    pub fn sub(&self, other: &SpectralVelocity) -> SpectralVelocity {
        let mut out = self.clone();
        for c in 0..3 {
            for (a, b) in out.coeffs[c].iter_mut().zip(&other.coeffs[c]) {
                *a -= b;
            }
        }
        out
    }

    /// `‖u‖₂² = (2π)³ Σ_k |û(k)|²`.
    pub fn l2_norm_sq(&self) -> f64 {
        let mut acc = 0.0;
        for c in &self.coeffs {
            for v in c {
                acc += v.norm_sqr();
            }
        }
        BOX_VOLUME * acc
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    /// `‖∇u‖₂² = (2π)³ Σ_k |k|² |û(k)|²`.
    pub fn enstrophy(&self) -> f64 {
        let mut acc = 0.0;
        for idx in 0..self.grid.len() {
            let k2 = self.grid.magnitude_sq(idx) as f64;
            if k2 == 0.0 {
                continue;
            }
            let e: f64 = (0..3).map(|c| self.coeffs[c][idx].norm_sqr()).sum();
            acc += k2 * e;
        }
        BOX_VOLUME * acc
    }

    /// Lattice inner product `(2π)³ Re Σ_k û(k)·conj(v̂(k))`.
    pub fn inner(&self, other: &SpectralVelocity) -> f64 {
        let mut acc = 0.0;
        for c in 0..3 {
            for (a, b) in self.coeffs[c].iter().zip(&other.coeffs[c]) {
                acc += (a * b.conj()).re;
            }
        }
        BOX_VOLUME * acc
    }

    /// Largest coefficient magnitude.
    pub fn max_coeff(&self) -> f64 {
        self.coeffs
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.norm()))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().flatten().all(|v| v.re == 0.0 && v.im == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs
            .iter()
            .flatten()
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// `max |û(k) - conj(û(-k))| / max |û|`, zero for an exactly real field.
    pub fn hermitian_defect(&self) -> f64 {
        let scale = self.max_coeff();
        if scale == 0.0 {
            return 0.0;
        }
        let mut m = 0.0f64;
        for idx in 0..self.grid.len() {
            let mi = self.grid.mirror(idx);
            for c in 0..3 {
                m = m.max((self.coeffs[c][idx] - self.coeffs[c][mi].conj()).norm());
            }
        }
        m / scale
    }

    /// `max_k |k·û(k)| / (|k| |û(k)|)` over modes with nonzero coefficients.
    pub fn divergence_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for idx in 0..self.grid.len() {
            let u = self.at(idx);
            let amp = u.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            if amp == 0.0 {
                continue;
            }
            let k = self.grid.derivative_wavevector(idx);
            let kn = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
            if kn == 0.0 {
                continue;
            }
            let div = u[0] * k[0] + u[1] * k[1] + u[2] * k[2];
            worst = worst.max(div.norm() / (kn * amp));
        }
        worst
    }

    /// Magnitude of the mean mode relative to the largest coefficient.
    pub fn mean_defect(&self) -> f64 {
        let scale = self.max_coeff();
        if scale == 0.0 {
            return 0.0;
        }
        self.at(0).iter().map(|v| v.norm()).fold(0.0, f64::max) / scale
    }

    /// Whether every mode outside the dealias mask is exactly zero.
    pub fn is_dealiased(&self) -> bool {
        (0..self.grid.len()).all(|idx| {
            self.grid.is_retained(idx) || self.at(idx).iter().all(|v| *v == ZERO)
        })
    }

    /// Checks zero mean, Hermitian symmetry and incompressibility.
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        let h = self.hermitian_defect();
        if h > tol {
            return Err(Error::Invariant(format!("Hermitian symmetry broken ({h:.3e})")));
        }
        let m = self.mean_defect();
        if m > tol {
            return Err(Error::Invariant(format!("nonzero mean mode ({m:.3e})")));
        }
        let d = self.divergence_residual();
        if d > tol {
            return Err(Error::Invariant(format!("field is not divergence-free ({d:.3e})")));
        }
        Ok(())
    }

    /// Spectral interpolation onto another grid: common modes are copied,
    /// the rest are zero. Nyquist modes of either grid are dropped.
    pub fn resample(&self, target: GridSpec) -> SpectralVelocity {
        let mut out = SpectralVelocity::zeros(target);
        out.time = self.time;
        let limit = (self.grid.n().min(target.n()) / 2) as i64;
        for idx in 0..self.grid.len() {
            let k = self.grid.wavevector(idx);
            if k.iter().any(|c| c.abs() >= limit) {
                continue;
            }
            if let Some(t) = target.index_of(k) {
                out.set(t, self.at(idx));
            }
        }
        out
    }
}

/// Analysis of a physical field into Fourier coefficients.
pub fn forward_transform(f: &PhysicalVelocity) -> Result<SpectralVelocity> {
    let grid = f.grid;
    if f.values.iter().any(|c| c.len() != grid.len()) {
        return Err(Error::Config("physical field does not match its grid".into()));
    }
    let fft = Fft3::shared(grid.n());
    let (a, b) = fft.forward_real_pair(&f.values[0], &f.values[1]);
    let zeros = vec![0.0; grid.len()];
    let (c, _) = fft.forward_real_pair(&f.values[2], &zeros);
    SpectralVelocity::from_coeffs(grid, [a, b, c])
}

/// Synthesis of a real field; fails if the coefficients are not Hermitian.
pub fn inverse_transform(u: &SpectralVelocity) -> Result<PhysicalVelocity> {
    let h = u.hermitian_defect();
    if h > 1e-12 {
        return Err(Error::Invariant(format!(
            "coefficients are not Hermitian-symmetric (defect {h:.3e})"
        )));
    }
    Ok(synthesize(u))
}

/// Synthesis without the Hermitian check (imaginary parts are discarded).
pub(crate) fn synthesize(u: &SpectralVelocity) -> PhysicalVelocity {
    let grid = u.grid;
    let fft = Fft3::shared(grid.n());
    let mut out = fft.inverse_real_many(&[&u.coeffs[0], &u.coeffs[1], &u.coeffs[2]]);
    let c = out.pop().unwrap();
    let b = out.pop().unwrap();
    let a = out.pop().unwrap();
    PhysicalVelocity {
        grid,
        values: [a, b, c],
    }
}

/// Leray projection `P(k) = I - k kᵀ/|k|²` applied mode by mode.
///
/// The mean mode and modes carrying a Nyquist component are set to zero.
pub fn leray_project(u: &SpectralVelocity) -> SpectralVelocity {
    let grid = u.grid;
    let mut out = u.clone();
    for idx in 0..grid.len() {
        if idx == 0 || grid.has_nyquist(idx) {
            out.set(idx, [ZERO; 3]);
            continue;
        }
        let k = grid.derivative_wavevector(idx);
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        let v = u.at(idx);
        let kv = (v[0] * k[0] + v[1] * k[1] + v[2] * k[2]) / k2;
        out.set(idx, [v[0] - kv * k[0], v[1] - kv * k[1], v[2] - kv * k[2]]);
    }
    out
}

/// Two-thirds rule: zero every mode with `max_i |k_i| > K_max`.
pub fn dealias(u: &SpectralVelocity) -> SpectralVelocity {
    let grid = u.grid;
    let mut out = u.clone();
    for idx in 0..grid.len() {
        if !grid.is_retained(idx) {
            out.set(idx, [ZERO; 3]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid16() -> GridSpec {
        GridSpec::new(16).unwrap()
    }

    #[test]
    fn sine_mode_analysis() {
        let g = grid16();
        let f = PhysicalVelocity::from_fn(g, |x, _, _| [x.sin(), 0.0, 0.0]);
        let u = forward_transform(&f).unwrap();
        let plus = g.index_of([1, 0, 0]).unwrap();
        let minus = g.index_of([-1, 0, 0]).unwrap();
        assert!((u.component(0)[plus] - Complex64::new(0.0, -0.5)).norm() < 1e-15);
        assert!((u.component(0)[minus] - Complex64::new(0.0, 0.5)).norm() < 1e-15);
        for idx in 0..g.len() {
            if idx != plus && idx != minus {
                assert!(u.at(idx).iter().all(|v| v.norm() < 1e-15));
            }
        }
    }

    #[test]
    fn sine_mode_synthesis() {
        let g = grid16();
        let mut u = SpectralVelocity::zeros(g);
        u.component_mut(0)[g.index_of([1, 0, 0]).unwrap()] = Complex64::new(0.0, -0.5);
        u.component_mut(0)[g.index_of([-1, 0, 0]).unwrap()] = Complex64::new(0.0, 0.5);
        let f = inverse_transform(&u).unwrap();
        let expect = PhysicalVelocity::from_fn(g, |x, _, _| [x.sin(), 0.0, 0.0]);
        assert!(f.max_abs_diff(&expect) < 1e-14);
    }

    #[test]
    fn zero_field_transforms() {
        let g = grid16();
        let u = forward_transform(&PhysicalVelocity::zeros(g)).unwrap();
        assert!(u.is_zero());
        let f = inverse_transform(&SpectralVelocity::zeros(g)).unwrap();
        assert_eq!(f.max_abs(), 0.0);
    }

    #[test]
    fn broken_hermitian_symmetry_is_rejected() {
        let g = grid16();
        let mut u = SpectralVelocity::zeros(g);
        u.component_mut(1)[g.index_of([0, 2, 1]).unwrap()] = Complex64::new(1.0, 0.0);
        assert!(matches!(inverse_transform(&u), Err(Error::Invariant(_))));
    }

    #[test]
    fn projection_annihilates_gradients() {
        let g = grid16();
        let mut u = SpectralVelocity::zeros(g);
        for idx in 0..g.len() {
            let k = g.wavevector(idx);
            let r = g.magnitude(idx);
            if r == 0.0 || r > 4.0 {
                continue;
            }
            // û = i k ĝ with ĝ(k) = 1/(1+|k|²) real and even, so the field is real.
            let gk = 1.0 / (1.0 + r * r);
            let v = [0, 1, 2].map(|c| Complex64::new(0.0, k[c] as f64 * gk));
            u.set(idx, v);
        }
        let p = leray_project(&u);
        assert!(p.max_coeff() < 1e-16);
    }

    #[test]
    fn dealias_cutoff_examples() {
        let g = grid16();
        let mut u = SpectralVelocity::zeros(g);
        let k6 = g.index_of([6, 0, 0]).unwrap();
        let k111 = g.index_of([1, 1, 1]).unwrap();
        u.component_mut(1)[k6] = Complex64::new(1.0, 0.0);
        u.component_mut(1)[k111] = Complex64::new(0.5, 0.0);
        let d = dealias(&u);
        assert_eq!(d.component(1)[k6], ZERO);
        assert_eq!(d.component(1)[k111], Complex64::new(0.5, 0.0));
        assert_eq!(dealias(&d), d);
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let g = grid16();
        let bad = PhysicalVelocity::new(g, [vec![0.0; 10], vec![0.0; 10], vec![0.0; 10]]);
        assert!(matches!(bad, Err(Error::Config(_))));
    }
}
