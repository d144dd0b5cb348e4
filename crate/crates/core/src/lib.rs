//! Spin-kinetic plasma toolkit.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod fields;
pub mod fluid;
pub mod gauge;
pub mod grid;
pub mod kinetic;
pub mod params;
pub mod pauli;
pub mod runner;
pub mod sphere;
pub mod stats;
pub mod transforms;

pub use error::{Error, Result};
pub use grid::{Grid1D, Spectral, C64};
pub use params::PlasmaParams;
pub use sphere::{SphereBasis, SphereQuadrature, Vec3};
