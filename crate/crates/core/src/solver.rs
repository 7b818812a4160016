//! Pseudo-spectral time integration of the incompressible Navier–Stokes
//! equations on the periodic box.
//!
//! The viscous term is integrated exactly through the factor `e^{−ν|k|²t}`;
//! the dealiased, Leray-projected nonlinearity `−P ∇·(u⊗u)` is advanced with
//! classical fourth-order Runge–Kutta in the transformed variable.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::{tensor_slot, ShellAnalysis, TENSOR_PAIRS, EPS};
use crate::lp::{sobolev_from_energies, FilterBank};
use crate::spectral::fft::Fft3;
use crate::spectral::{synthesize, GridSpec, SpectralVelocity};

/// Fraction of the advective crossing time allowed per step.
pub const CFL_NUMBER: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    pub nu: f64,
    pub dt: f64,
    pub t_end: f64,
    /// Diagnostics are sampled every this many steps (and at `t = 0`).
    pub diag_every: usize,
    /// Snapshots are kept every this many steps; `0` keeps none.
    pub snapshot_every: usize,
    pub nonlinear: bool,
    /// Sobolev index of the Riccati diagnostics and trisums.
    pub diag_s: f64,
}

impl SolverParams {
    pub fn new(nu: f64, dt: f64, t_end: f64) -> Self {
        SolverParams {
            nu,
            dt,
            t_end,
            diag_every: 1,
            snapshot_every: 0,
            nonlinear: true,
            diag_s: 1.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::Config(format!("nu must be positive, got {}", self.nu)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("t_end must be >= 0, got {}", self.t_end)));
        }
        if self.diag_every == 0 {
            return Err(Error::Config("diag_every must be at least 1".into()));
        }
        if !(self.diag_s > 0.5 && self.diag_s < 2.5) {
            return Err(Error::Config(format!(
                "diagnostic s must lie in (1/2, 5/2), got {}",
                self.diag_s
            )));
        }
        Ok(())
    }

    /// Number of steps to reach `t_end`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Largest step allowed by the CFL bound `dt ≤ 0.5 Δx / max|u|`.
pub fn admissible_dt(u: &SpectralVelocity) -> f64 {
    let speed = synthesize(u).max_speed();
    if speed == 0.0 {
        f64::INFINITY
    } else {
        CFL_NUMBER * u.grid().dx() / speed
    }
}

pub fn check_cfl(u: &SpectralVelocity, dt: f64) -> Result<()> {
    let admissible = admissible_dt(u);
    if dt > admissible {
        return Err(Error::StepSize { dt, admissible });
    }
    Ok(())
}

/// `−P ∇·(u⊗u)`, dealiased.
pub fn nonlinear_term(u: &SpectralVelocity) -> SpectralVelocity {
    let grid = u.grid();
    let phys = synthesize(u);
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
    let hats = Fft3::shared(grid.n()).forward_real_many(&refs);
    let zero = Complex64::new(0.0, 0.0);
    let modes: Vec<[Complex64; 3]> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            if idx == 0 || !grid.is_retained(idx) || grid.has_nyquist(idx) {
                return [zero; 3];
            }
            let k = grid.derivative_wavevector(idx);
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            let mut d = [zero; 3];
            for (i, di) in d.iter_mut().enumerate() {
                let mut acc = zero;
                for j in 0..3 {
                    acc += hats[tensor_slot(i, j)][idx] * k[j];
                }
                *di = Complex64::new(acc.im, -acc.re);
            }
            let kd = (d[0] * k[0] + d[1] * k[1] + d[2] * k[2]) / k2;
            [d[0] - kd * k[0], d[1] - kd * k[1], d[2] - kd * k[2]]
        })
        .collect();
    let mut out = SpectralVelocity::zeros(grid);
    for (idx, v) in modes.into_iter().enumerate() {
        out.set(idx, v);
    }
    out
}

/// Integrating-factor RK4 stepper for a fixed grid, `ν` and `dt`.
#[derive(Debug, Clone)]
pub struct Integrator {
    grid: GridSpec,
    params: SolverParams,
    full: Vec<f64>,
    half: Vec<f64>,
}

impl Integrator {
    pub fn new(grid: GridSpec, params: SolverParams) -> Result<Self> {
        params.validate()?;
        let factor = |h: f64| -> Vec<f64> {
            (0..grid.len())
                .map(|idx| (-params.nu * grid.magnitude_sq(idx) as f64 * h).exp())
                .collect()
        };
        Ok(Integrator {
            grid,
            params,
            full: factor(params.dt),
            half: factor(0.5 * params.dt),
        })
    }

    pub fn params(&self) -> &SolverParams {
        &self.params
    }

    /// One step of size `dt`; the CFL bound is checked first.
    pub fn step(&self, u: &SpectralVelocity) -> Result<SpectralVelocity> {
        if u.grid() != self.grid {
            return Err(Error::Config("field grid differs from integrator grid".into()));
        }
        let dt = self.params.dt;
        let mut next = if self.params.nonlinear {
            check_cfl(u, dt)?;
            let e = |v: &SpectralVelocity| v.multiplied(|i| self.full[i]);
            let eh = |v: &SpectralVelocity| v.multiplied(|i| self.half[i]);
            let k1 = nonlinear_term(u);
            let k2 = nonlinear_term(&eh(&axpy(u, 0.5 * dt, &k1)));
            let mut s3 = eh(u);
            s3.add_assign(&scaled(&k2, 0.5 * dt));
            let k3 = nonlinear_term(&s3);
            let mut s4 = e(u);
            s4.add_assign(&scaled(&eh(&k3), dt));
            let k4 = nonlinear_term(&s4);

            let mut incr = e(&k1);
            incr.add_assign(&scaled(&eh(&k2), 2.0));
            incr.add_assign(&scaled(&eh(&k3), 2.0));
            incr.add_assign(&k4);
            let mut out = e(u);
            out.add_assign(&scaled(&incr, dt / 6.0));
            out
        } else {
            u.multiplied(|i| self.full[i])
        };
        next.time = u.time + dt;
        if !next.is_finite() {
            return Err(Error::Divergence {
                last_good_time: u.time,
            });
        }
        Ok(next)
    }
}

fn scaled(v: &SpectralVelocity, a: f64) -> SpectralVelocity {
    let mut out = v.clone();
    out.scale(a);
    out
}

fn axpy(u: &SpectralVelocity, a: f64, v: &SpectralVelocity) -> SpectralVelocity {
    let mut out = u.clone();
    out.add_assign(&scaled(v, a));
    out
}

/// Single step with a freshly built integrator.
pub fn step(u: &SpectralVelocity, params: &SolverParams) -> Result<SpectralVelocity> {
    Integrator::new(u.grid(), *params)?.step(u)
}

/// Diagnostics sampled along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub energy: f64,
    pub enstrophy: f64,
    pub h1: f64,
    pub h32: f64,
    pub y: f64,
    pub riccati_lhs: f64,
    pub riccati_rhs: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub flux_sum: f64,
    pub shell_energies: Vec<f64>,
}

/// Full diagnostic row for one field.
pub fn diagnose(u: &SpectralVelocity, bank: &FilterBank, nu: f64, s: f64) -> Result<TrajectoryRow> {
    let analysis = ShellAnalysis::new(u, bank, true)?;
    let riccati = analysis.riccati(s, nu);
    let tri = analysis.trisums(s, nu);
    Ok(TrajectoryRow {
        t: u.time,
        energy: u.l2_norm_sq(),
        enstrophy: u.enstrophy(),
        h1: sobolev_from_energies(&analysis.energies, 1.0),
        h32: sobolev_from_energies(&analysis.energies, 1.5),
        y: riccati.y,
        riccati_lhs: riccati.lhs,
        riccati_rhs: riccati.rhs,
        a: tri.a,
        b: tri.b,
        c: tri.c,
        flux_sum: analysis.transfer.iter().sum(),
        shell_energies: analysis.energies,
    })
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub nu: f64,
    pub rows: Vec<TrajectoryRow>,
    pub snapshots: Vec<SpectralVelocity>,
}

impl Trajectory {
    pub fn energy_balance_residual(&self) -> Result<f64> {
        energy_balance_residual(&self.rows, self.nu)
    }
}

/// Run from `u0`, calling `on_snapshot` for every kept snapshot.
pub fn simulate_with(
    u0: &SpectralVelocity,
    params: &SolverParams,
    mut on_snapshot: impl FnMut(&SpectralVelocity) -> Result<()>,
) -> Result<Vec<TrajectoryRow>> {
    let grid = u0.grid();
    let integrator = Integrator::new(grid, *params)?;
    let bank = FilterBank::new(grid)?;
    let steps = params.steps();
    let mut u = u0.clone();
    let mut rows = Vec::with_capacity(steps / params.diag_every + 1);
    for n in 0..=steps {
        if n > 0 {
            u = integrator.step(&u)?;
        }
        if n % params.diag_every == 0 {
            rows.push(diagnose(&u, &bank, params.nu, params.diag_s)?);
        }
        if params.snapshot_every > 0 && n % params.snapshot_every == 0 {
            on_snapshot(&u)?;
        }
    }
    Ok(rows)
}

pub fn simulate(u0: &SpectralVelocity, params: &SolverParams) -> Result<Trajectory> {
    let mut snapshots = Vec::new();
    let rows = simulate_with(u0, params, |u| {
        snapshots.push(u.clone());
        Ok(())
    })?;
    Ok(Trajectory {
        nu: params.nu,
        rows,
        snapshots,
    })
}

/// `max_i |Ė_i + 2ν‖∇u‖₂²| / max(E(0), ε)` with `Ė` from centered differences.
pub fn energy_balance_residual(rows: &[TrajectoryRow], nu: f64) -> Result<f64> {
    if rows.len() < 3 {
        return Err(Error::Range(format!(
            "energy balance needs at least 3 rows, got {}",
            rows.len()
        )));
    }
    let scale = rows[0].energy.max(EPS);
    let mut worst: f64 = 0.0;
    for w in rows.windows(3) {
        let de = (w[2].energy - w[0].energy) / (w[2].t - w[0].t);
        worst = worst.max((de + 2.0 * nu * w[1].enstrophy).abs() / scale);
    }
    Ok(worst)
}
