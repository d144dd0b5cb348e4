//! Fixtures shared by the kernel benchmarks.

use std::f64::consts::PI;
use std::sync::Arc;

use spinkin_core::fields::ExternalField;
use spinkin_core::kinetic::{
    load_particles, EulerianFields, ExtendedDistribution, LoadSpec, ParticleEnsemble, SpinLoading,
    VelocityAxis, VelocitySpace,
};
use spinkin_core::pauli::{init_state, SpinorField, StateFamily};
use spinkin_core::{Grid1D, PlasmaParams, SphereQuadrature};

pub fn packet(n: usize, length: f64) -> SpinorField {
    let fam = StateFamily::Gaussian {
        x0: length / 2.0,
        sigma: length / 12.0,
        p0: 0.5,
        theta: 0.9,
        phi: 0.3,
    };
    init_state(
        &fam,
        Grid1D::new(n, length).unwrap(),
        &PlasmaParams::default(),
    )
    .unwrap()
}

pub fn plasma(n_particles: usize, n_x: usize) -> ParticleEnsemble {
    load_particles(
        Grid1D::new(n_x, 2.0 * PI).unwrap(),
        &LoadSpec {
            n_particles,
            density: 1.0,
            perturbation: 1e-2,
            mode: 1,
            drift: [0.0; 3],
            v_thermal: 1.0,
            spin: SpinLoading::Aligned {
                dir: [1.0, 0.0, 0.0],
            },
            quiet: true,
            seed: 1,
        },
    )
    .unwrap()
}

pub fn gradient_field() -> ExternalField {
    ExternalField::GradientB { b0: 1.0, b1: 0.1 }
}

/// Spin-polarized Maxwellian on a `n_x × n_v × quadrature` grid.
pub fn eulerian(
    n_x: usize,
    n_v: usize,
) -> (ExtendedDistribution, EulerianFields, Arc<SphereQuadrature>) {
    let g = Grid1D::new(n_x, 2.0 * PI).unwrap();
    let vel = VelocitySpace::one(VelocityAxis::new(n_v, 6.0).unwrap());
    let quad = Arc::new(SphereQuadrature::new(4, 8).unwrap());
    let f = ExtendedDistribution::from_fn(g, vel, quad.clone(), |x, v, s| {
        (1.0 + 0.1 * x.cos()) * (-v[0] * v[0] / 2.0).exp() * (1.0 + 0.5 * s[2]) / (2.0 * PI).sqrt()
    });
    let fields = EulerianFields::from_external(&gradient_field(), g);
    (f, fields, quad)
}
