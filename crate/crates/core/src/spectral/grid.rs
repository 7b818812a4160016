use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cubic periodic grid on `[0, 2π)³` with `n` points per dimension.
///
/// Lattice wavenumbers are the integers `k ∈ [-n/2, n/2)³`. Storage order for
/// every field is `(i * n + j) * n + l` with the z index `l` running fastest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    n: usize,
    dealias_num: u32,
    dealias_den: u32,
}

impl GridSpec {
    /// Grid with the default 2/3 dealiasing fraction.
    pub fn new(n: usize) -> Result<Self> {
        Self::with_dealias(n, 2, 3)
    }

    pub fn with_dealias(n: usize, num: u32, den: u32) -> Result<Self> {
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::Config(format!(
                "grid size must be a power of two >= 16, got {n}"
            )));
        }
        if den == 0 || num == 0 || num > den {
            return Err(Error::Config(format!(
                "dealias fraction must lie in (0, 1], got {num}/{den}"
            )));
        }
        let grid = GridSpec {
            n,
            dealias_num: num,
            dealias_den: den,
        };
        if grid.k_max() < 2 {
            return Err(Error::Config(format!(
                "dealias cutoff {} below 2 for n = {n}",
                grid.k_max()
            )));
        }
        Ok(grid)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of lattice points `n³`.
    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dealias_fraction(&self) -> (u32, u32) {
        (self.dealias_num, self.dealias_den)
    }

    /// Dealias cutoff `floor(fraction · n/2)` on the max-norm of `k`.
    pub fn k_max(&self) -> i64 {
        (self.dealias_num as u64 * (self.n as u64 / 2) / self.dealias_den as u64) as i64
    }

    /// Whether products of two dealiased fields are exact on the retained band.
    pub fn products_alias_free(&self) -> bool {
        3 * self.k_max() < self.n as i64
    }

    /// Grid spacing `2π / n`.
    pub fn dx(&self) -> f64 {
        std::f64::consts::TAU / self.n as f64
    }

    /// Quadrature weight `(2π/n)³` of a single grid cell.
    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(3)
    }

    #[inline]
    pub fn wavenumber(&self, i: usize) -> i64 {
        let n = self.n;
        if i < n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    /// Array index of a signed wavenumber (taken modulo `n`).
    #[inline]
    pub fn slot(&self, k: i64) -> usize {
        k.rem_euclid(self.n as i64) as usize
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, l: usize) -> usize {
        (i * self.n + j) * self.n + l
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let n = self.n;
        (idx / (n * n), (idx / n) % n, idx % n)
    }

    /// Integer wavevector stored at `idx`.
    #[inline]
    pub fn wavevector(&self, idx: usize) -> [i64; 3] {
        let (i, j, l) = self.coords(idx);
        [self.wavenumber(i), self.wavenumber(j), self.wavenumber(l)]
    }

    /// Index of the wavevector `-k`.
    #[inline]
    pub fn mirror(&self, idx: usize) -> usize {
        let n = self.n;
        let (i, j, l) = self.coords(idx);
        self.index((n - i) % n, (n - j) % n, (n - l) % n)
    }

    /// Index of an arbitrary integer wavevector, if it is on the lattice.
    pub fn index_of(&self, k: [i64; 3]) -> Option<usize> {
        let half = (self.n / 2) as i64;
        if k.iter().all(|&c| (-half..half).contains(&c)) {
            Some(self.index(self.slot(k[0]), self.slot(k[1]), self.slot(k[2])))
        } else {
            None
        }
    }

    /// Wavevector used for differentiation: Nyquist components map to zero.
    #[inline]
    pub fn derivative_wavevector(&self, idx: usize) -> [f64; 3] {
        let nyq = -((self.n / 2) as i64);
        let k = self.wavevector(idx);
        let f = |c: i64| if c == nyq { 0.0 } else { c as f64 };
        [f(k[0]), f(k[1]), f(k[2])]
    }

    #[inline]
    pub fn has_nyquist(&self, idx: usize) -> bool {
        let nyq = -((self.n / 2) as i64);
        self.wavevector(idx).contains(&nyq)
    }

    /// Euclidean magnitude `|k|` of the stored wavevector.
    #[inline]
    pub fn magnitude(&self, idx: usize) -> f64 {
        let k = self.wavevector(idx);
        ((k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64).sqrt()
    }

    #[inline]
    pub fn magnitude_sq(&self, idx: usize) -> i64 {
        let k = self.wavevector(idx);
        k[0] * k[0] + k[1] * k[1] + k[2] * k[2]
    }

    /// Whether the mode survives the dealias mask.
    #[inline]
    pub fn is_retained(&self, idx: usize) -> bool {
        let km = self.k_max();
        self.wavevector(idx).iter().all(|c| c.abs() <= km)
    }

    /// Physical coordinate of grid index `i` along any axis.
    #[inline]
    pub fn coordinate(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }
}
