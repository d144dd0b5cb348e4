use std::f64::consts::PI;
use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use spinkin_bench::{eulerian, gradient_field, packet, plasma};
use spinkin_core::fields::CurlMethod;
use spinkin_core::fluid::{step_fluid, FluidOptions, FluidPotential, FluidState};
use spinkin_core::gauge::{gi_wigner_transform, GiOptions, VectorPotential};
use spinkin_core::kinetic::{
    deposit_sources, push_particles, EulerianOptions, EulerianSolver, FieldSampler,
};
use spinkin_core::pauli::{ExternalPotentials, PauliPropagator};
use spinkin_core::transforms::wigner::{wigner_transform, MomentumAxis};
use spinkin_core::transforms::{spin_moments_and_reconstruct, spin_q_transform, DensityMatrixSpin};
use spinkin_core::{PlasmaParams, SphereQuadrature};

fn transforms(c: &mut Criterion) {
    let p = PlasmaParams::default();
    let quad = Arc::new(SphereQuadrature::new(16, 32).unwrap());
    let rho = DensityMatrixSpin::from_bloch([0.3, -0.2, 0.5]).unwrap();
    c.bench_function("spin_q_round_trip", |b| {
        b.iter(|| spin_moments_and_reconstruct(&spin_q_transform(black_box(&rho), &quad).unwrap()))
    });
    let mut group = c.benchmark_group("wigner");
    for n in [128usize, 256] {
        let psi = packet(n, 40.0).component(0);
        let psi = psi.normalized().unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &psi, |b, psi| {
            b.iter(|| wigner_transform(black_box(psi), &p, n, 4.0).unwrap())
        });
    }
    group.finish();
    let psi = packet(128, 20.0);
    let a_x: Vec<f64> = psi
        .grid
        .points()
        .iter()
        .map(|x| 0.3 * (PI * x / 10.0).cos())
        .collect();
    let a = VectorPotential::Sampled { values: a_x };
    let axis = MomentumAxis::new(64, 4.0).unwrap();
    c.bench_function("gi_wigner_128x64", |b| {
        b.iter(|| gi_wigner_transform(black_box(&psi), &a, &p, axis, GiOptions::default()).unwrap())
    });
}

fn solvers(c: &mut Criterion) {
    let p = PlasmaParams::default();
    let ens = plasma(100_000, 128);
    let ext = gradient_field();
    let sampler = FieldSampler::external_only(&ext, ens.grid.length);
    c.bench_function("push_1e5", |b| {
        b.iter(|| push_particles(black_box(&ens), &sampler, &p, 0.01).unwrap())
    });
    c.bench_function("deposit_1e5", |b| {
        b.iter(|| deposit_sources(black_box(&ens), &p, CurlMethod::Spectral))
    });

    let mut psi = packet(1024, 40.0);
    let prop = PauliPropagator::new(
        psi.grid,
        &ExternalPotentials::uniform_b(&psi.grid, [0.0, 0.0, 1.0]),
        &p,
        5e-4,
        0.0,
    )
    .unwrap();
    c.bench_function("pauli_step_1024", |b| {
        b.iter(|| prop.step(black_box(&mut psi)))
    });

    let psi = packet(256, 40.0);
    let fluid = FluidState::new(psi.grid, psi.density(), vec![0.0; 256]).unwrap();
    let pot = FluidPotential::Fixed {
        phi: vec![0.0; 256],
    };
    c.bench_function("fluid_step_256", |b| {
        b.iter(|| step_fluid(black_box(&fluid), &pot, &p, 1e-3, FluidOptions::default()).unwrap())
    });

    let (f, fields, quad) = eulerian(64, 64);
    let solver = EulerianSolver::new(
        quad,
        EulerianOptions {
            quantum_term: true,
            ..Default::default()
        },
    );
    c.bench_function("eulerian_step_64x64x32", |b| {
        b.iter(|| solver.step(black_box(&f), &fields, &p, 0.01).unwrap())
    });
}

criterion_group!(benches, transforms, solvers);
criterion_main!(benches);
