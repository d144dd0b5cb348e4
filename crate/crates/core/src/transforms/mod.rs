//! Quasi-distribution transforms: spatial Wigner function and spin Q-function.

pub mod spin;
pub mod wavefunction;
pub mod wigner;

pub use spin::{
    spin_moments_and_reconstruct, spin_q_transform, spin_q_transform_hermitian, DensityMatrixSpin,
    Mat2, SpinDistribution, SpinMoments, PAULI,
};
pub use wavefunction::{gaussian_packet, WaveFunction1D};
pub use wigner::{
    expect_phase_space, marginals, momentum_density, wigner_transform, Marginals, MomentumAxis,
    PhaseSpaceField,
};
