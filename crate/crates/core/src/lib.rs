//! Pseudo-spectral Navier-Stokes on the periodic box `[0, 2π)³` together with
//! Littlewood-Paley shell diagnostics: shell projections, homogeneous Sobolev
//! norms, shell energy transfer and its remainder decomposition, the trisums
//! `A`, `B`, `C`, Riccati-type inequality sides, and closed-form blow-up lower
//! bounds.

pub mod bounds;
pub mod error;
pub mod flux;
pub mod io;
pub mod lp;
pub mod solver;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
