//! Canonical initial fields.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::field::{leray_project, SpectralVelocity, BOX_VOLUME};
use super::grid::GridSpec;
use crate::error::{Error, Result};

/// `a·(sin x cos y cos z, −cos x sin y cos z, 0)`.
///
/// Every coefficient sits at `k = (±1, ±1, ±1)`, so the field is exactly
/// divergence-free and all of its energy lives at `|k| = √3`.
pub fn make_taylor_green(grid: GridSpec, amplitude: f64) -> Result<SpectralVelocity> {
    if !amplitude.is_finite() {
        return Err(Error::Config(format!("amplitude must be finite, got {amplitude}")));
    }
    let mut u = SpectralVelocity::zeros(grid);
    for s1 in [-1i64, 1] {
        for s2 in [-1i64, 1] {
            for s3 in [-1i64, 1] {
                let idx = grid.index_of([s1, s2, s3]).expect("grid hosts |k| = 1 modes");
                let c = amplitude / 8.0;
                u.set(
                    idx,
                    [
                        Complex64::new(0.0, -(s1 as f64) * c),
                        Complex64::new(0.0, s2 as f64 * c),
                        Complex64::new(0.0, 0.0),
                    ],
                );
            }
        }
    }
    Ok(u)
}

/// Lattice points of generation band `q`: `2^{q-1/2} ≤ |k| < 2^{q+1/2}`.
///
/// Enumerated in lexicographic order of `k`, independent of the grid size.
pub fn band_wavevectors(q: i32) -> Vec<[i64; 3]> {
    let lo = 2f64.powi(2 * q - 1);
    let hi = 2f64.powi(2 * q + 1);
    let r = hi.sqrt().ceil() as i64;
    let mut out = Vec::new();
    for a in -r..=r {
        for b in -r..=r {
            for c in -r..=r {
                let m = (a * a + b * b + c * c) as f64;
                if m >= lo && m < hi {
                    out.push([a, b, c]);
                }
            }
        }
    }
    out
}

fn is_canonical(k: [i64; 3]) -> bool {
    k[0] > 0 || (k[0] == 0 && (k[1] > 0 || (k[1] == 0 && k[2] > 0)))
}

/// Random divergence-free field with prescribed band energies.
///
/// `spectrum` maps a generation band `q` (see [`band_wavevectors`]) to the
/// energy `‖u_band‖₂²` carried by that band. Bands are disjoint, so each is
/// rescaled independently after projection. For a fixed seed the result is
/// the same field on every grid that resolves all requested bands.
pub fn make_random_field(
    grid: GridSpec,
    seed: u64,
    spectrum: &BTreeMap<i32, f64>,
) -> Result<SpectralVelocity> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = SpectralVelocity::zeros(grid);
    let k_max = grid.k_max();
    for (&q, &energy) in spectrum {
        if !(energy.is_finite() && energy >= 0.0) {
            return Err(Error::Config(format!("band {q} energy must be finite and >= 0")));
        }
        let band = band_wavevectors(q);
        if band.is_empty() {
            return Err(Error::Config(format!("band {q} contains no lattice wavevectors")));
        }
        if band.iter().any(|k| k.iter().any(|c| c.abs() > k_max)) {
            return Err(Error::Config(format!(
                "band {q} is not resolved on an n = {} grid (dealias cutoff {k_max})",
                grid.n()
            )));
        }
        let mut part = SpectralVelocity::zeros(grid);
        for &k in band.iter().filter(|k| is_canonical(**k)) {
            let v: [Complex64; 3] = std::array::from_fn(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im)
            });
            let idx = grid.index_of(k).expect("band checked against cutoff");
            let neg = grid.index_of([-k[0], -k[1], -k[2]]).expect("band symmetric");
            part.set(idx, v);
            part.set(neg, v.map(|c| c.conj()));
        }
        let mut part = leray_project(&part);
        let e = part.l2_norm_sq();
        if e > 0.0 {
            part.scale((energy / e).sqrt());
        }
        u.add_assign(&part);
    }
    Ok(u)
}

/// Energy `(2π)³ Σ |û|²` restricted to generation band `q`.
pub fn band_energy(u: &SpectralVelocity, q: i32) -> f64 {
    BOX_VOLUME
        * band_wavevectors(q)
            .into_iter()
            .map(|k| u.at_wavevector(k).iter().map(|v| v.norm_sqr()).sum::<f64>())
            .sum::<f64>()
}
