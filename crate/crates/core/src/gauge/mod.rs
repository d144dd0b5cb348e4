//! Gauge transformations and the gauge-invariant Wigner construction.

pub mod kinetic;
pub mod tilde;
pub mod transform;
pub mod wigner;

pub use kinetic::{gi_kinetic_residual, GiKineticResidual, GiResidualRow};
pub use tilde::{
    tilde_fields_exact, tilde_fields_hbar2, CorrectionValues, FieldProfiles, Probe, TildeFields,
    Truncation,
};
pub use transform::{gauge_transform_state, GaugeTransformSpec};
pub use wigner::{
    gi_correction_series, gi_wigner_mixed, gi_wigner_transform, Dressing, GaussianMixedState,
    GiOptions, GiWignerDistribution, VectorPotential, TAU_DOUBLING_TOL,
};
