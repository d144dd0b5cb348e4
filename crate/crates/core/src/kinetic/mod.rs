//! Semiclassical spin-Vlasov dynamics: particles, Eulerian advection and the
//! ħ²-truncated residual of the full phase-space equation.

pub mod deposit;
pub mod eulerian;
pub mod particles;
pub mod push;
pub mod residual;

pub use deposit::{conserving_current, deposit_sources, Sources};
pub use eulerian::{
    eulerian_step, EulerianFields, EulerianOptions, EulerianSolver, ExtendedDistribution, Limiter,
    VelocityAxis, VelocitySpace,
};
pub use particles::{load_particles, LoadSpec, ParticleEnsemble, SpinLoading, SpinParticle};
pub use push::{push_particles, FieldSampler};
pub use residual::{
    full_equation_residual_hbar2, AnalyticDistribution, AnalyticPotentials, Profile, SamplePoints,
    TruncationResidual,
};
