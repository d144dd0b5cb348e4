use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use spinkin_core::fields::{solve_poisson, ExternalField};
use spinkin_core::gauge::{
    gauge_transform_state, gi_wigner_transform, GaugeTransformSpec, GiOptions, VectorPotential,
};
use spinkin_core::kinetic::{
    push_particles, EulerianFields, EulerianOptions, EulerianSolver, ExtendedDistribution,
    FieldSampler, ParticleEnsemble, SpinParticle, VelocityAxis, VelocitySpace,
};
use spinkin_core::pauli::{init_state, ExternalPotentials, PauliPropagator, StateFamily};
use spinkin_core::runner::{DiagnosticsSeries, RunConfig, Scenario};
use spinkin_core::transforms::gaussian_packet;
use spinkin_core::transforms::wigner::{marginals, wigner_transform, MomentumAxis};
use spinkin_core::{Grid1D, PlasmaParams, SphereBasis, SphereQuadrature};

fn gaussian(g: Grid1D, p0: f64, theta: f64, phi: f64) -> StateFamily {
    StateFamily::Gaussian {
        x0: 0.5 * g.length,
        sigma: 1.0,
        p0,
        theta,
        phi,
    }
}

fn unit(theta: f64, phi: f64) -> [f64; 3] {
    [
        theta.sin() * phi.cos(),
        theta.sin() * phi.sin(),
        theta.cos(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pauli_steps_are_unitary(p0 in -1.5..1.5f64, theta in 0.0..PI, phi in 0.0..2.0 * PI, bz in -2.0..2.0f64) {
        let g = Grid1D::new(64, 20.0).unwrap();
        let p = PlasmaParams::default();
        let mut psi = init_state(&gaussian(g, p0, theta, phi), g, &p).unwrap();
        let sig0 = psi.mean_sigma();
        let prop = PauliPropagator::new(g, &ExternalPotentials::uniform_b(&g, [0.0, 0.0, bz]), &p, 0.01, psi.momentum_offset).unwrap();
        for _ in 0..50 {
            prop.step(&mut psi);
        }
        let sig = psi.mean_sigma();
        prop_assert!((psi.norm_sqr() - 1.0).abs() < 1e-12);
        prop_assert!((sig[2] - sig0[2]).abs() < 1e-12);
        let perp = |s: [f64; 3]| (s[0] * s[0] + s[1] * s[1]).sqrt();
        prop_assert!((perp(sig) - perp(sig0)).abs() < 1e-12);
    }

    #[test]
    fn wigner_position_marginal_is_the_density(x0 in 8.0..12.0f64, sigma in 0.5..2.0f64, p0 in -2.0..2.0f64) {
        let g = Grid1D::new(128, 20.0).unwrap();
        let p = PlasmaParams::default();
        let axis = MomentumAxis::conjugate(&g, p.hbar, 128).unwrap();
        let psi = gaussian_packet(g, x0, sigma, p0, p.hbar).unwrap();
        let m = marginals(&wigner_transform(&psi, &p, axis.n, axis.v_max).unwrap()).unwrap();
        let err = m.density_x.iter().zip(psi.density()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn gi_wigner_is_gauge_invariant(beta in -1.0..1.0f64, mode in 1usize..4, phase in 0.0..2.0 * PI, a0 in -0.5..0.5f64) {
        let g = Grid1D::new(64, 20.0).unwrap();
        let p = PlasmaParams::default();
        let psi = init_state(&gaussian(g, 0.4, 0.9, 0.3), g, &p).unwrap();
        let k1 = 2.0 * PI / g.length;
        let mut pot = ExternalPotentials::zero(&g);
        pot.a[0] = g.points().iter().map(|x| a0 * (k1 * x).cos()).collect();
        let lam = GaugeTransformSpec::SingleMode { amplitude: beta, k: mode as f64 * k1, phase };
        let (psi2, pot2) = gauge_transform_state(&psi, &pot, &lam, &p).unwrap();
        let axis = MomentumAxis::new(32, 4.0).unwrap();
        let w1 = gi_wigner_transform(&psi, &VectorPotential::Sampled { values: pot.a[0].clone() }, &p, axis, GiOptions::default()).unwrap();
        let w2 = gi_wigner_transform(&psi2, &VectorPotential::Sampled { values: pot2.a[0].clone() }, &p, axis, GiOptions::default()).unwrap();
        prop_assert!(w1.max_difference(&w2).unwrap() < 1e-10);
    }

    #[test]
    fn push_keeps_unit_spins(v in prop::array::uniform3(-2.0..2.0f64), th in 0.0..PI, ph in 0.0..2.0 * PI, b0 in -3.0..3.0f64, b1 in -0.5..0.5f64) {
        let g = Grid1D::new(16, 2.0 * PI).unwrap();
        let p = PlasmaParams::default();
        let ens = ParticleEnsemble::new(g, vec![SpinParticle { x: 1.0, v, s: unit(th, ph), w: 0.7 }]).unwrap();
        let ext = ExternalField::GradientB { b0, b1 };
        let sampler = FieldSampler::external_only(&ext, g.length);
        let mut e = ens;
        for _ in 0..100 {
            e = push_particles(&e, &sampler, &p, 0.05).unwrap();
        }
        let s = e.particles[0].s;
        prop_assert!(((s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt() - 1.0).abs() < 1e-14);
        prop_assert_eq!(e.particles[0].w, 0.7);
    }

    #[test]
    fn sphere_rotations_keep_the_integral(th in 0.0..PI, ph in 0.0..2.0 * PI, angle in -PI..PI, a in prop::array::uniform3(-0.3..0.3f64)) {
        let quad = SphereQuadrature::new(8, 16).unwrap();
        let basis = SphereBasis::new(&quad);
        let f: Vec<f64> = quad.nodes.iter().map(|s| 1.0 + a[0] * s[0] + a[1] * s[1] * s[2] + a[2] * s[2] * s[2]).collect();
        let r = basis.rotation_matrix(unit(th, ph), angle);
        let n = quad.len();
        let g: Vec<f64> = (0..n).map(|i| (0..n).map(|j| r[i * n + j] * f[j]).sum()).collect();
        prop_assert!((quad.integrate(&g) - quad.integrate(&f)).abs() < 1e-12);
    }

    #[test]
    fn poisson_satisfies_gauss_law(amps in prop::collection::vec(-0.1..0.1f64, 1..5)) {
        let g = Grid1D::new(64, 7.0).unwrap();
        let p = PlasmaParams::default();
        let k1 = 2.0 * PI / g.length;
        let rho: Vec<f64> = g.points().iter().map(|x| {
            amps.iter().enumerate().map(|(m, a)| a * ((m + 1) as f64 * k1 * x).cos()).sum()
        }).collect();
        let (_, ex) = solve_poisson(&g, &rho, &p).unwrap();
        let sp = spinkin_core::Spectral::new(g);
        let div = sp.derivative(&ex, 1);
        let err = div.iter().zip(&rho).map(|(d, r)| (p.eps0 * d - r).abs()).fold(0.0, f64::max);
        prop_assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn eulerian_steps_conserve_mass(eps in -0.5..0.5f64, b in prop::array::uniform3(-1.0..1.0f64), dir in prop::array::uniform3(-0.5..0.5f64)) {
        let g = Grid1D::new(16, 2.0 * PI).unwrap();
        let vel = VelocitySpace::one(VelocityAxis::new(32, 6.0).unwrap());
        let quad = Arc::new(SphereQuadrature::new(4, 8).unwrap());
        let f = ExtendedDistribution::from_fn(g, vel, quad.clone(), |x, v, s| {
            (1.0 + eps * x.cos()) * (-v[0] * v[0] / 2.0).exp() * (1.0 + dir[0] * s[0] + dir[1] * s[1] + dir[2] * s[2])
        });
        let fields = EulerianFields::from_external(&ExternalField::UniformB { b }, g);
        let solver = EulerianSolver::new(quad, EulerianOptions::default());
        let p = PlasmaParams::default();
        let next = solver.step(&f, &fields, &p, 0.02).unwrap();
        prop_assert!((next.total() - f.total()).abs() < 1e-12 * f.total());
    }

    #[test]
    fn diagnostics_csv_is_lossless(rows in prop::collection::vec(prop::array::uniform2(prop::num::f64::NORMAL | prop::num::f64::ZERO), 1..30)) {
        let mut s = DiagnosticsSeries::new(["a", "b"]).unwrap();
        for (i, r) in rows.iter().enumerate() {
            s.push(i as f64 * 0.1, r).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        s.write_csv(&path).unwrap();
        prop_assert_eq!(DiagnosticsSeries::read_csv(&path).unwrap(), s);
    }

    #[test]
    fn expanded_configs_round_trip(which in 0usize..5, seed in 0u64..1000, dt_steps in 10usize..500) {
        let mut c = RunConfig::preset(Scenario::ALL[which]);
        c.seed = seed;
        c.t_end = c.dt * dt_steps as f64;
        c.cadence = None;
        let c = c.expanded();
        let back = RunConfig::from_json(&c.to_json()).unwrap();
        prop_assert_eq!(back, c);
    }
}
