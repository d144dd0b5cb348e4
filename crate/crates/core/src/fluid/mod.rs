//! Quantum fluid models and ensemble-averaged moments.

pub mod averaged;
pub mod ensemble;
pub mod madelung;
pub mod spin;

pub use averaged::{averaged_equation_residual, ensemble_trajectory, AveragedResiduals};
pub use ensemble::{ensemble_moments, FluidMoments, WavefunctionEnsemble};
pub use madelung::{
    bohm_acceleration, fluid_rhs, step_fluid, FluidOptions, FluidPotential, FluidState,
};
pub use spin::{effective_field, spin_density_rhs, step_spin_density, SPIN_LENGTH_TOL};
