//! Three-dimensional complex FFT on cubic grids.
//!
//! Each transform runs three passes of "FFT along the contiguous axis, then
//! rotate axes `(a, b, c) -> (c, a, b)`", which returns the data to its
//! original layout after the third pass. Lines are processed in parallel; every
//! line is independent, so results do not depend on the thread count.
//!
//! Real fields are transformed two at a time by packing them as the real and
//! imaginary parts of one complex field.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

pub struct Fft3 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft3").field("n", &self.n).finish()
    }
}

impl Fft3 {
    /// Shared plan for grids of size `n`.
    pub fn shared(n: usize) -> Arc<Fft3> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Fft3>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut map = cache.lock().expect("fft plan cache poisoned");
        map.entry(n)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                Arc::new(Fft3 {
                    n,
                    forward: planner.plan_fft_forward(n),
                    inverse: planner.plan_fft_inverse(n),
                })
            })
            .clone()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Unnormalized forward transform (`e^{-ik·x}` kernel) in place.
    pub fn forward(&self, data: &mut Vec<Complex64>) {
        self.run(data, &self.forward);
    }

    /// Unnormalized inverse transform (`e^{+ik·x}` kernel) in place.
    pub fn inverse(&self, data: &mut Vec<Complex64>) {
        self.run(data, &self.inverse);
    }

    fn run(&self, data: &mut Vec<Complex64>, plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        assert_eq!(data.len(), n * n * n, "buffer does not match grid size");
        let mut rotated = vec![Complex64::new(0.0, 0.0); data.len()];
        for _ in 0..3 {
            data.par_chunks_mut(n * n).for_each(|plane| {
                let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
                plan.process_with_scratch(plane, &mut scratch);
            });
            {
                let src: &[Complex64] = data;
                rotated
                    .par_chunks_mut(n * n)
                    .enumerate()
                    .for_each(|(c, slab)| {
                        for a in 0..n {
                            for b in 0..n {
                                slab[a * n + b] = src[(a * n + b) * n + c];
                            }
                        }
                    });
            }
            std::mem::swap(data, &mut rotated);
        }
    }

    /// Normalized analysis of two real fields: `f̂(k) = n⁻³ Σ f(x) e^{-ik·x}`.
    pub fn forward_real_pair(&self, a: &[f64], b: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let len = a.len();
        assert_eq!(len, b.len());
        let mut packed: Vec<Complex64> = a
            .iter()
            .zip(b)
            .map(|(&x, &y)| Complex64::new(x, y))
            .collect();
        self.forward(&mut packed);
        let n = self.n;
        let scale = 1.0 / len as f64;
        let mut ah = vec![Complex64::new(0.0, 0.0); len];
        let mut bh = vec![Complex64::new(0.0, 0.0); len];
        ah.par_iter_mut()
            .zip(bh.par_iter_mut())
            .enumerate()
            .for_each(|(idx, (av, bv))| {
                let (i, j, l) = (idx / (n * n), (idx / n) % n, idx % n);
                let m = (((n - i) % n) * n + (n - j) % n) * n + (n - l) % n;
                let c = packed[idx];
                let cm = packed[m].conj();
                *av = (c + cm) * (0.5 * scale);
                // (c - cm) / (2i)
                let d = c - cm;
                *bv = Complex64::new(d.im, -d.re) * (0.5 * scale);
            });
        (ah, bh)
    }

    /// Synthesis of two Hermitian coefficient arrays into real fields.
    pub fn inverse_real_pair(&self, ah: &[Complex64], bh: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
        assert_eq!(ah.len(), bh.len());
        let mut packed: Vec<Complex64> = ah
            .iter()
            .zip(bh)
            .map(|(x, y)| x + Complex64::new(-y.im, y.re))
            .collect();
        self.inverse(&mut packed);
        packed.into_iter().map(|c| (c.re, c.im)).unzip()
    }

    /// Normalized analysis of a list of real fields.
    pub fn forward_real_many(&self, fields: &[&[f64]]) -> Vec<Vec<Complex64>> {
        let mut out = Vec::with_capacity(fields.len());
        for pair in fields.chunks(2) {
            if pair.len() == 2 {
                let (a, b) = self.forward_real_pair(pair[0], pair[1]);
                out.push(a);
                out.push(b);
            } else {
                let zeros = vec![0.0; pair[0].len()];
                let (a, _) = self.forward_real_pair(pair[0], &zeros);
                out.push(a);
            }
        }
        out
    }

    /// Synthesis of a list of Hermitian coefficient arrays.
    pub fn inverse_real_many(&self, fields: &[&[Complex64]]) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(fields.len());
        for pair in fields.chunks(2) {
            if pair.len() == 2 {
                let (a, b) = self.inverse_real_pair(pair[0], pair[1]);
                out.push(a);
                out.push(b);
            } else {
                let zeros = vec![Complex64::new(0.0, 0.0); pair[0].len()];
                let (a, _) = self.inverse_real_pair(pair[0], &zeros);
                out.push(a);
            }
        }
        out
    }
}
