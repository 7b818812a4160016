//! Periodic-box field representation: grids, transforms, projection,
//! dealiasing and canonical initial data.

pub mod fft;
mod field;
mod generate;
mod grid;

pub use field::{
    dealias, forward_transform, inverse_transform, leray_project, PhysicalVelocity,
    SpectralVelocity, BOX_VOLUME,
};
pub(crate) use field::synthesize;
pub use generate::{band_energy, band_wavevectors, make_random_field, make_taylor_green};
pub use grid::GridSpec;
