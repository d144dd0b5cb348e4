//! Acceptance checks with fixed tolerances and runtime budgets.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{CurlMethod, ExternalField};
use crate::fluid::{
    averaged_equation_residual, ensemble_trajectory, step_fluid, FluidOptions, FluidPotential,
    FluidState, WavefunctionEnsemble,
};
use crate::gauge::{
    gauge_transform_state, gi_correction_series, gi_wigner_mixed, gi_wigner_transform, Dressing,
    GaugeTransformSpec, GaussianMixedState, GiOptions, VectorPotential,
};
use crate::grid::{Grid1D, C64};
use crate::kinetic::particles::{stream_rng, Stream};
use crate::kinetic::{
    deposit_sources, full_equation_residual_hbar2, load_particles, AnalyticDistribution,
    AnalyticPotentials, EulerianFields, EulerianOptions, EulerianSolver, ExtendedDistribution,
    LoadSpec, ParticleEnsemble, Profile, SamplePoints, SpinLoading, SpinParticle, VelocityAxis,
    VelocitySpace,
};
use crate::params::PlasmaParams;
use crate::pauli::{
    init_state, spin_state, ExternalPotentials, PauliPropagator, SpinorField, StateFamily,
};
use crate::runner::config::{Backend, RunConfig, Scenario};
use crate::runner::fit::{fit_frequency, FitOutcome};
use crate::runner::scenarios::simulate_quietly;
use crate::sphere::{dot, SphereQuadrature, Vec3};
use crate::stats::{linear_fit, loglog_slope, observed_orders};
use crate::transforms::wigner::{marginals, momentum_density, wigner_transform, MomentumAxis};
use crate::transforms::{
    gaussian_packet, spin_moments_and_reconstruct, spin_q_transform, DensityMatrixSpin,
    WaveFunction1D,
};

/// Result of one acceptance check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    /// Measured quantities against their thresholds.
    pub detail: String,
    pub seconds: f64,
    pub budget_seconds: f64,
}

impl CheckOutcome {
    /// One table row: status, id, name, runtime and the measurement.
    pub fn line(&self) -> String {
        format!(
            "{} {:>2} {:<24} {:>7.2}s / {:>4.0}s  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.budget_seconds,
            self.detail
        )
    }
}

struct Spec {
    id: u8,
    name: &'static str,
    budget: f64,
    run: fn() -> Result<(bool, String)>,
}

const CHECKS: [Spec; 11] = [
    Spec {
        id: 1,
        name: "spin_transform",
        budget: 5.0,
        run: spin_transform,
    },
    Spec {
        id: 2,
        name: "wigner_marginals",
        budget: 30.0,
        run: wigner_marginals,
    },
    Spec {
        id: 3,
        name: "precession",
        budget: 10.0,
        run: precession,
    },
    Spec {
        id: 4,
        name: "plasma_oscillation",
        budget: 60.0,
        run: plasma_oscillation,
    },
    Spec {
        id: 5,
        name: "madelung_pauli",
        budget: 60.0,
        run: madelung_pauli,
    },
    Spec {
        id: 6,
        name: "averaged_fluid",
        budget: 120.0,
        run: averaged_fluid,
    },
    Spec {
        id: 7,
        name: "semiclassical_limit",
        budget: 60.0,
        run: semiclassical_limit,
    },
    Spec {
        id: 8,
        name: "gauge_invariance",
        budget: 60.0,
        run: gauge_invariance,
    },
    Spec {
        id: 9,
        name: "magnetization_current",
        budget: 10.0,
        run: magnetization_current,
    },
    Spec {
        id: 10,
        name: "stern_gerlach",
        budget: 10.0,
        run: stern_gerlach,
    },
    Spec {
        id: 11,
        name: "quantum_spin_gradient",
        budget: 30.0,
        run: quantum_spin_gradient,
    },
];

/// A selection of checks by id, name or `all`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckSuite {
    pub ids: Vec<u8>,
}

impl CheckSuite {
    pub fn all() -> Self {
        Self {
            ids: CHECKS.iter().map(|c| c.id).collect(),
        }
    }

    /// Accepts `all`, a check id or name, or a comma-separated list of them.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim() == "all" {
            return Ok(Self::all());
        }
        let mut ids = Vec::new();
        for item in text.split(',').map(str::trim) {
            let found = CHECKS
                .iter()
                .find(|c| c.name == item || item.parse::<u8>().ok() == Some(c.id))
                .ok_or_else(|| {
                    let names: Vec<&str> = CHECKS.iter().map(|c| c.name).collect();
                    Error::Config(vec![format!(
                        "suite: unknown check `{item}` (expected all, 1-11 or {})",
                        names.join(", ")
                    )])
                })?;
            if !ids.contains(&found.id) {
                ids.push(found.id);
            }
        }
        Ok(Self { ids })
    }

    pub fn names() -> Vec<(u8, &'static str)> {
        CHECKS.iter().map(|c| (c.id, c.name)).collect()
    }
}

/// Runs one check; errors count as failures.
pub fn run_check(id: u8) -> Option<CheckOutcome> {
    let spec = CHECKS.iter().find(|c| c.id == id)?;
    let start = Instant::now();
    let (ok, detail) = match (spec.run)() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    let seconds = start.elapsed().as_secs_f64();
    let within = seconds <= spec.budget;
    Some(CheckOutcome {
        id,
        name: spec.name,
        passed: ok && within,
        detail: if within {
            detail
        } else {
            format!("{detail}; runtime over budget")
        },
        seconds,
        budget_seconds: spec.budget,
    })
}

pub fn run_checks(suite: &CheckSuite) -> Vec<CheckOutcome> {
    suite.ids.iter().filter_map(|&id| run_check(id)).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn sci(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:.2e}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn fitted_omega(outcome: FitOutcome, what: &str) -> Result<f64> {
    match outcome {
        FitOutcome::Fitted(f) => Ok(f.omega),
        FitOutcome::Inconclusive { reason } => {
            Err(Error::Format(format!("{what} fit inconclusive: {reason}")))
        }
    }
}

// ------------------------------------------------------------------ 1

fn spin_transform() -> Result<(bool, String)> {
    let quad = Arc::new(SphereQuadrature::new(16, 32)?);
    let mut rng = stream_rng(2024, Stream::Spins);
    let (mut worst, mut min_q): (f64, f64) = (0.0, f64::INFINITY);
    for i in 0..1000 {
        let rho = if i % 2 == 0 {
            let dir: Vec3 = [0, 1, 2].map(|_| rng.sample::<f64, _>(StandardNormal));
            let n = dir.iter().map(|c| c * c).sum::<f64>().sqrt();
            let r = rng.gen::<f64>().cbrt();
            DensityMatrixSpin::from_bloch(dir.map(|c| r * c / n))?
        } else {
            let mut z = || C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
            DensityMatrixSpin::from_factor(&[[z(), z()], [z(), z()]])?
        };
        let q = spin_q_transform(&rho, &quad)?;
        min_q = min_q.min(q.min());
        let back = spin_moments_and_reconstruct(&q).density_matrix()?;
        for r in 0..2 {
            for c in 0..2 {
                worst = worst.max((back.matrix()[r][c] - rho.matrix()[r][c]).norm());
            }
        }
    }
    Ok((
        worst < 1e-12 && min_q >= -1e-12,
        format!("max |Δρ| = {worst:.2e} (< 1e-12), min Q = {min_q:.3e} (>= -1e-12)"),
    ))
}

// ------------------------------------------------------------------ 2

fn wigner_corpus(g: Grid1D, hbar: f64) -> Result<Vec<WaveFunction1D>> {
    let mut out = Vec::new();
    for i in 0..12 {
        let t = i as f64;
        out.push(gaussian_packet(
            g,
            14.0 + 1.1 * t,
            0.6 + 0.12 * t,
            -3.0 + 0.55 * t,
            hbar,
        )?);
    }
    for i in 0..8 {
        let t = i as f64;
        let a = gaussian_packet(g, 16.0 + 0.3 * t, 0.8, 1.0 - 0.4 * t, hbar)?;
        let b = gaussian_packet(g, 20.0 + 0.5 * t, 0.6 + 0.1 * t, -0.5 + 0.3 * t, hbar)?;
        let phase = C64::from_polar(1.0, 0.7 * t);
        let psi = a
            .psi
            .iter()
            .zip(&b.psi)
            .map(|(x, y)| x + phase * y)
            .collect();
        out.push(WaveFunction1D::new(g, psi)?.normalized()?);
    }
    Ok(out)
}

fn wigner_marginals() -> Result<(bool, String)> {
    let g = Grid1D::new(256, 40.0)?;
    let p = PlasmaParams::default();
    let axis = MomentumAxis::conjugate(&g, p.hbar, 256)?;
    let corpus = wigner_corpus(g, p.hbar)?;
    let (mut ex, mut ep): (f64, f64) = (0.0, 0.0);
    for psi in &corpus {
        let w = wigner_transform(psi, &p, axis.n, axis.v_max)?;
        let m = marginals(&w)?;
        ex = ex.max(max_abs_diff(&m.density_x, &psi.density()));
        ep = ep.max(max_abs_diff(
            &m.density_p,
            &momentum_density(psi, p.hbar, &axis),
        ));
    }
    Ok((
        ex < 1e-6 && ep < 1e-6,
        format!(
            "{} states: x-marginal {ex:.2e}, p-marginal {ep:.2e} (< 1e-6)",
            corpus.len()
        ),
    ))
}

// ------------------------------------------------------------------ 3

fn precession_config() -> RunConfig {
    let mut c = RunConfig::preset(Scenario::Precession);
    c.n_particles = 1000;
    c.grid.n_x = 32;
    c.b0 = 1.0;
    c.external = None;
    c.spin_dir = [1.0, 0.0, 0.0];
    let period = 2.0 * PI / (c.params.precession_rate() * c.b0);
    c.dt = period / 64.0;
    c.t_end = 50.0 * period;
    c.cadence = None;
    c.expanded()
}

fn precession() -> Result<(bool, String)> {
    let c = precession_config();
    let sim = simulate_quietly(&c)?;
    if let Some(e) = sim.aborted {
        return Err(e);
    }
    let want = 2.0 * c.params.mu_b() * c.b0 / c.params.hbar;
    let omega = fitted_omega(fit_frequency(&sim.series, "mean_s_x")?, "precession")?;
    let rel = (omega / want - 1.0).abs();
    let dev = sim
        .series
        .column("spin_norm_dev")
        .expect("column")
        .iter()
        .fold(0.0f64, |m, v| m.max(*v));
    Ok((
        rel < 1e-3 && dev < 1e-12,
        format!("ω = {omega:.6} vs {want:.6}, rel {rel:.1e} (< 1e-3); max ||ŝ|−1| = {dev:.1e} (< 1e-12)"),
    ))
}

// ------------------------------------------------------------------ 4

fn plasma_config(backend: Backend) -> RunConfig {
    let mut c = RunConfig::preset(Scenario::PlasmaOsc);
    c.backend = Some(backend);
    c.grid.length = 2.0 * PI;
    c.perturbation = 1e-3;
    c.t_end = 20.0 * PI;
    match backend {
        Backend::Fluid => {
            c.grid.n_x = 32;
            c.params.hbar = 1.0;
            c.quantum_term = Some(true);
            c.dt = 2.0 * PI / 640.0;
        }
        _ => {
            c.grid.n_x = 128;
            c.n_particles = 100_000;
            c.dt = 2.0 * PI / 64.0;
        }
    }
    c.cadence = None;
    c.expanded()
}

fn plasma_oscillation() -> Result<(bool, String)> {
    let pic = plasma_config(Backend::Pic);
    let wp = (pic.density * pic.params.charge.powi(2) / (pic.params.eps0 * pic.params.mass)).sqrt();
    let sim = simulate_quietly(&pic)?;
    if let Some(e) = sim.aborted {
        return Err(e);
    }
    let w = fitted_omega(fit_frequency(&sim.series, "e_mode")?, "PIC")?;
    let rel_pic = (w / wp - 1.0).abs();

    let fl = plasma_config(Backend::Fluid);
    let p = fl.params;
    let k = 2.0 * PI * fl.mode as f64 / fl.grid.length;
    let want2 = wp * wp + p.hbar.powi(2) * k.powi(4) / (4.0 * p.mass.powi(2));
    let sim = simulate_quietly(&fl)?;
    if let Some(e) = sim.aborted {
        return Err(e);
    }
    let wq = fitted_omega(fit_frequency(&sim.series, "e_mode")?, "fluid")?;
    let rel_q = (wq * wq / want2 - 1.0).abs();
    Ok((
        rel_pic < 1e-2 && rel_q < 2e-2,
        format!(
            "PIC ω/ω_p = {:.5} (rel {rel_pic:.1e} < 1e-2); quantum fluid ω² = {:.5} vs {want2:.5} (rel {rel_q:.1e} < 2e-2)",
            w / wp,
            wq * wq
        ),
    ))
}

// ------------------------------------------------------------------ 5

/// Max density difference between the fluid solver and the Pauli oracle over
/// `[0, t_end]`, and the time at which the fluid hit its density floor.
fn spreading_error(nx: usize, dt: f64, t_end: f64) -> Result<(f64, Option<f64>)> {
    let g = Grid1D::new(nx, 2.0 * PI)?;
    let p = PlasmaParams::default();
    let fam = StateFamily::Gaussian {
        x0: PI,
        sigma: 1.0,
        p0: 0.0,
        theta: 0.0,
        phi: 0.0,
    };
    let mut psi = init_state(&fam, g, &p)?;
    let prop = PauliPropagator::new(g, &ExternalPotentials::zero(&g), &p, dt, 0.0)?;
    let mut f = FluidState::new(g, psi.density(), vec![0.0; nx])?;
    let pot = FluidPotential::Fixed { phi: vec![0.0; nx] };
    let steps = (t_end / dt).round() as usize;
    let mut worst: f64 = 0.0;
    for i in 1..=steps {
        prop.step(&mut psi);
        match step_fluid(&f, &pot, &p, dt, FluidOptions::default()) {
            Ok(next) => f = next,
            Err(Error::DensityFloor { .. }) => return Ok((worst, Some(i as f64 * dt))),
            Err(e) => return Err(e),
        }
        worst = worst.max(max_abs_diff(&psi.density(), &f.n));
    }
    Ok((worst, None))
}

fn madelung_pauli() -> Result<(bool, String)> {
    let (linf, floor) = spreading_error(32, 0.01, 20.0)?;
    let reached = floor.map_or("not reached by t = 20".to_string(), |t| {
        format!("at t = {t:.3}")
    });
    // Simultaneous refinement with dt ∝ Δx² at a fixed Bohm stability number.
    let mut errs = Vec::new();
    let sizes = [16usize, 24, 32];
    for &nx in &sizes {
        let kmax = nx as f64 / 2.0;
        let steps = (2.0 * kmax * kmax / 2.56).ceil();
        let (e, _) = spreading_error(nx, 2.0 / steps, 2.0)?;
        errs.push(e);
    }
    let orders: Vec<f64> = errs
        .windows(2)
        .zip(sizes.windows(2))
        .map(|(e, n)| (e[0] / e[1]).ln() / (n[1] as f64 / n[0] as f64).ln())
        .collect();
    let order_ok = orders.iter().all(|o| (o - 2.0).abs() <= 0.2);
    Ok((
        linf < 1e-3 && order_ok,
        format!(
            "L∞ = {linf:.2e} (< 1e-3), floor {reached}; errors [{}] for N_x = {sizes:?}, orders {orders:.2?} (2.0 ± 0.2)",
            sci(&errs)
        ),
    ))
}

// ------------------------------------------------------------------ 6

fn textured_member(g: Grid1D, p0: f64, shift: f64, spin: (f64, f64)) -> Result<SpinorField> {
    let mut up = Vec::new();
    let mut down = Vec::new();
    for x in g.points() {
        let amp = (1.0 + 0.5 * (x + shift).cos()).sqrt();
        let chi = spin_state(spin.0 + 0.3 * (x - shift).sin(), spin.1 + 0.2 * x.cos());
        let z = C64::from_polar(amp, p0 * x);
        up.push(z * chi[0]);
        down.push(z * chi[1]);
    }
    let mut s = SpinorField::new(g, up, down)?;
    s.normalize()?;
    Ok(s)
}

fn averaged_fluid() -> Result<(bool, String)> {
    let mut errs = Vec::new();
    for (k, nx) in [32usize, 48, 64].into_iter().enumerate() {
        let g = Grid1D::new(nx, 2.0 * PI)?;
        let dt = 0.02 / 2f64.powi(k as i32);
        let phi: Vec<f64> = g.points().iter().map(|x| 0.3 * x.cos()).collect();
        let ay: Vec<f64> = g.points().iter().map(|x| 0.2 * (2.0 * x).sin()).collect();
        let az: Vec<f64> = g.points().iter().map(|x| 0.1 * x.cos()).collect();
        let pot = ExternalPotentials::from_potentials(&g, phi, [vec![0.0; nx], ay, az])?;
        let p = PlasmaParams::default();
        let ens = WavefunctionEnsemble::new(
            vec![
                textured_member(g, 1.0, 0.0, (0.8, 0.0))?,
                textured_member(g, -2.0, 1.3, (2.0, 1.0))?,
            ],
            vec![0.6, 0.4],
        )?;
        let traj = ensemble_trajectory(&ens, &pot, &p, dt, 1, 3)?;
        let r = averaged_equation_residual(&traj, dt, &pot, &p)?;
        errs.push([r.continuity_max(), r.momentum_max(), r.spin_max()]);
    }
    let mut ok = true;
    let mut parts = Vec::new();
    for (c, name) in ["continuity", "momentum", "spin"].iter().enumerate() {
        let e: Vec<f64> = errs.iter().map(|e| e[c]).collect();
        let orders = observed_orders(&e, 2.0);
        ok &= orders.iter().all(|o| (o - 2.0).abs() <= 0.2);
        parts.push(format!("{name} orders {orders:.2?}"));
    }
    Ok((ok, format!("{} (2.0 ± 0.2)", parts.join(", "))))
}

// ------------------------------------------------------------------ 7

fn semiclassical_limit() -> Result<(bool, String)> {
    let f = AnalyticDistribution {
        density: Profile::SingleMode {
            offset: 1.0,
            amplitude: 0.3,
            k: 0.5,
            phase: 0.2,
        },
        drift: [0.2, -0.1, 0.0],
        v_thermal: 0.8,
        spin: [1.0, 0.2, -0.3, 0.5],
    };
    let pts = SamplePoints::lattice(4.0, 16, &f, 3, SphereQuadrature::new(4, 8)?);
    let p = PlasmaParams::default();
    let hs = [0.05, 0.1, 0.2, 0.4];
    let uniform = AnalyticPotentials {
        v: Profile::constant(0.7),
        a: [
            Profile::constant(0.1),
            Profile::constant(0.4),
            Profile::constant(-0.2),
        ],
    };
    let quadratic = AnalyticPotentials::electrostatic(Profile::Polynomial {
        coeffs: vec![0.0, 0.3, -0.4],
    });
    let quartic = AnalyticPotentials::electrostatic(Profile::Polynomial {
        coeffs: vec![0.0, 0.0, 0.1, 0.0, -0.02],
    });
    let worst = |pot: &AnalyticPotentials| -> Result<f64> {
        let r = full_equation_residual_hbar2(&f, pot, &p, &pts, &hs)?;
        Ok(r.iter().map(|x| x.rhs).fold(0.0, f64::max))
    };
    let (ru, rq) = (worst(&uniform)?, worst(&quadratic)?);
    let r4 = full_equation_residual_hbar2(&f, &quartic, &p, &pts, &hs)?;
    let ys: Vec<f64> = r4.iter().map(|x| x.rhs).collect();
    let slope = loglog_slope(&hs, &ys)?;
    Ok((
        ru <= 1e-12 && rq <= 1e-12 && (slope - 2.0).abs() <= 0.1,
        format!(
            "uniform {ru:.1e}, quadratic {rq:.1e} (<= 1e-12); quartic slope {slope:.3} (2.0 ± 0.1)"
        ),
    ))
}

// ------------------------------------------------------------------ 8

fn gauge_invariance() -> Result<(bool, String)> {
    let g = Grid1D::new(128, 20.0)?;
    let p = PlasmaParams::default();
    let psi = init_state(
        &StateFamily::Gaussian {
            x0: 10.0,
            sigma: 1.0,
            p0: 0.6,
            theta: 0.9,
            phi: 0.3,
        },
        g,
        &p,
    )?;
    let k1 = 2.0 * PI / 20.0;
    let a_x: Vec<f64> = g.points().iter().map(|x| 0.3 * (k1 * x).cos()).collect();
    let mut pot = ExternalPotentials::zero(&g);
    pot.a[0] = a_x.clone();
    let axis = MomentumAxis::new(64, 4.0)?;
    let none = GiOptions::with_dressing(Dressing::None);
    let (mut agree, mut differ): (f64, f64) = (0.0, f64::INFINITY);
    for lam in [
        GaugeTransformSpec::Constant { value: 0.7 },
        GaugeTransformSpec::SingleMode {
            amplitude: 0.5,
            k: 2.0 * k1,
            phase: 0.2,
        },
    ] {
        let (psi2, pot2) = gauge_transform_state(&psi, &pot, &lam, &p)?;
        let a1 = VectorPotential::Sampled {
            values: a_x.clone(),
        };
        let a2 = VectorPotential::Sampled {
            values: pot2.a[0].clone(),
        };
        let gi1 = gi_wigner_transform(&psi, &a1, &p, axis, GiOptions::default())?;
        let gi2 = gi_wigner_transform(&psi2, &a2, &p, axis, GiOptions::default())?;
        agree = agree.max(gi1.max_difference(&gi2)?);
        if matches!(lam, GaugeTransformSpec::SingleMode { .. }) {
            let c1 = gi_wigner_transform(&psi, &a1, &p, axis, none)?;
            let c2 = gi_wigner_transform(&psi2, &a2, &p, axis, none)?;
            differ = differ.min(c1.max_difference(&c2)?);
        }
    }

    let gs = Grid1D::new(16, 8.0)?;
    let a = VectorPotential::Analytic {
        profile: Profile::SingleMode {
            offset: 0.0,
            amplitude: 0.8,
            k: 2.0 * PI / 8.0,
            phase: 0.0,
        },
    };
    let st = GaussianMixedState {
        x0: 4.0,
        sigma_x: 2.0,
        p0: 0.2,
        sigma_p: 0.5,
        bloch: [0.0, 0.0, 0.4],
    };
    let hbars = [0.4, 0.2, 0.1];
    let mut res = Vec::new();
    for &h in &hbars {
        let ph = PlasmaParams::with_hbar(h);
        let gi = gi_wigner_mixed(&st, gs, &a, &ph, axis, GiOptions::default())?;
        let loc = gi_wigner_mixed(
            &st,
            gs,
            &a,
            &ph,
            axis,
            GiOptions::with_dressing(Dressing::Local),
        )?;
        let corr = gi_correction_series(&loc.scalar_field(), &a, &ph, 2)?;
        res.push(max_abs_diff(&corr.values, &gi.scalar));
    }
    let slope = loglog_slope(&hbars, &res)?;
    Ok((
        agree < 1e-10 && differ > 1e-3 && (slope - 4.0).abs() <= 0.2,
        format!(
            "GI pairs {agree:.1e} (< 1e-10), canonical pairs {differ:.1e} (> 1e-3); correction residual slope {slope:.3} (4.0 ± 0.2)"
        ),
    ))
}

// ------------------------------------------------------------------ 9

fn magnetization_current() -> Result<(bool, String)> {
    let p = PlasmaParams::default();
    let g = Grid1D::new(64, 2.0 * PI)?;
    let (n0, m0, k) = (1.0, 0.6, 1.0);
    // One particle per node, tilted so that −3μ_B n ŝ_z = M₀ cos kx.
    let particles = (0..g.n)
        .map(|j| {
            let x = g.x(j);
            let cz = -m0 * (k * x).cos() / (3.0 * p.mu_b() * n0);
            SpinParticle {
                x,
                v: [0.0; 3],
                s: [(1.0 - cz * cz).sqrt(), 0.0, cz],
                w: n0 * g.dx(),
            }
        })
        .collect();
    let ens = ParticleEnsemble::new(g, particles)?;
    let src = deposit_sources(&ens, &p, CurlMethod::Spectral);
    let want: Vec<f64> = g.points().iter().map(|x| m0 * k * (k * x).sin()).collect();
    let curl_err = max_abs_diff(&src.j_bound[1], &want);

    // Factor-3 rule: particles on quadrature nodes weighted by the Q-function.
    let quad = SphereQuadrature::new(8, 16)?;
    let d = [0.3, -0.5, 0.81];
    let dn = dot(d, d).sqrt();
    let d = d.map(|c| c / dn);
    let q: Vec<f64> = quad
        .nodes
        .iter()
        .map(|s| (1.0 + dot(*s, d)) / (4.0 * PI))
        .collect();
    let moment = quad.first_moment(&q);
    let g1 = Grid1D::new(4, 4.0)?;
    let weights = &quad.weights;
    let parts = quad
        .nodes
        .iter()
        .zip(weights)
        .zip(&q)
        .map(|((s, w), f)| SpinParticle {
            x: g1.x(1),
            v: [0.0; 3],
            s: *s,
            w: n0 * g1.dx() * w * f,
        })
        .collect();
    let src = deposit_sources(&ParticleEnsemble::new(g1, parts)?, &p, CurlMethod::Spectral);
    let rule = (0..3)
        .map(|c| (src.m[c][1] - (-3.0 * p.mu_b() * n0 * moment[c])).abs())
        .fold(0.0, f64::max);
    let sigma_err = (0..3)
        .map(|c| (3.0 * moment[c] - d[c]).abs())
        .fold(0.0, f64::max);

    // The same rule for Q-function sampled particles.
    let ens = load_particles(
        g1,
        &LoadSpec {
            n_particles: 40_000,
            density: n0,
            perturbation: 0.0,
            mode: 1,
            drift: [0.0; 3],
            v_thermal: 0.0,
            spin: SpinLoading::QFunction { dir: d },
            quiet: true,
            seed: 9,
        },
    )?;
    let mean = ens.mean_spin();
    let sampled = (0..3)
        .map(|c| (3.0 * mean[c] - d[c]).abs())
        .fold(0.0, f64::max);
    Ok((
        curl_err < 1e-8 && rule < 1e-12 && sigma_err < 1e-12 && sampled < 1e-2,
        format!(
            "|J_b − M₀k sin kx| = {curl_err:.1e} (< 1e-8); deposited M vs 3μ_B∫ŝf {rule:.1e}, 3∫ŝf vs ⟨σ⟩ {sigma_err:.1e} (< 1e-12); sampled 3⟨ŝ⟩ vs ⟨σ⟩ {sampled:.1e} (< 1e-2)"
        ),
    ))
}

// ----------------------------------------------------------------- 10

fn stern_gerlach() -> Result<(bool, String)> {
    let mut c = RunConfig::preset(Scenario::SternGerlach);
    c.n_particles = 2000;
    c.grid.n_x = 32;
    c.b0 = 0.0;
    c.b1 = 0.01;
    c.external = None;
    c.dt = 0.01;
    c.t_end = 1.0;
    c.cadence = None;
    let c = c.expanded();
    let sim = simulate_quietly(&c)?;
    if let Some(e) = sim.aborted {
        return Err(e);
    }
    let want = c.params.mu_b() * c.b1 / c.params.mass;
    let t = sim.series.time();
    let (_, up) = linear_fit(t, sim.series.column("mean_vx_up").expect("column"))?;
    let (_, down) = linear_fit(t, sim.series.column("mean_vx_down").expect("column"))?;
    let e_up = (up / -want - 1.0).abs();
    let e_down = (down / want - 1.0).abs();
    Ok((
        e_up < 5e-3 && e_down < 5e-3,
        format!(
            "a_up = {up:.6e}, a_down = {down:.6e} vs ∓{want:.6e}; rel {e_up:.1e}, {e_down:.1e} (< 5e-3)"
        ),
    ))
}

// ----------------------------------------------------------------- 11

fn gauss(v: f64) -> f64 {
    (-v * v / 2.0).exp() / (2.0 * PI).sqrt()
}

fn quantum_spin_gradient() -> Result<(bool, String)> {
    let p = PlasmaParams::with_hbar(0.5);
    let (b0, b1) = (1.0, 0.4);
    let field = ExternalField::GradientB { b0, b1 };

    // Spin-dependent f: the step difference against dt·(μ_B/m) ∂ₓ(B·∇ŝ f)·∂ᵥ.
    let g = Grid1D::new(4, 4.0)?;
    let vel = VelocitySpace::one(VelocityAxis::new(512, 8.0)?);
    let quad = Arc::new(SphereQuadrature::new(6, 12)?);
    let a = [0.3, -0.2, 0.5];
    let f0 = ExtendedDistribution::from_fn(g, vel, quad.clone(), |_, v, s| {
        gauss(v[0]) * (1.0 + dot(a, s))
    });
    let fields = EulerianFields::from_external(&field, g);
    let off = EulerianSolver::new(quad.clone(), EulerianOptions::default());
    let on = EulerianSolver::new(
        quad.clone(),
        EulerianOptions {
            quantum_term: true,
            ..Default::default()
        },
    );
    let exact = ExtendedDistribution::from_fn(g, vel, quad.clone(), |_, v, s| {
        p.mu_b() / p.mass * (-v[0] * gauss(v[0])) * b1 * (a[2] - dot(a, s) * s[2])
    });
    let dts = [0.08, 0.04, 0.02];
    let mut errs = Vec::new();
    for &dt in &dts {
        let x = on.step(&f0, &fields, &p, dt)?;
        let y = off.step(&f0, &fields, &p, dt)?;
        let e = x
            .values
            .iter()
            .zip(&y.values)
            .zip(&exact.values)
            .map(|((a, b), q)| (a - b - dt * q).abs())
            .fold(0.0, f64::max);
        errs.push(e);
    }
    let slope = loglog_slope(&dts, &errs)?;

    // ŝ-independent f: the term must vanish identically.
    let g2 = Grid1D::new(16, 4.0)?;
    let vel2 = VelocitySpace::two(VelocityAxis::new(16, 4.0)?, VelocityAxis::new(8, 4.0)?);
    let quad2 = Arc::new(SphereQuadrature::new(4, 8)?);
    let h0 = ExtendedDistribution::from_fn(g2, vel2, quad2.clone(), |x, v, _| {
        (1.0 + 0.2 * (PI * x / 2.0).cos()) * gauss(v[0]) * gauss(v[1])
    });
    let fields2 = EulerianFields::from_external(&field, g2);
    let off2 = EulerianSolver::new(quad2.clone(), EulerianOptions::default());
    let on2 = EulerianSolver::new(
        quad2,
        EulerianOptions {
            quantum_term: true,
            ..Default::default()
        },
    );
    let same = max_abs_diff(
        &on2.step(&h0, &fields2, &p, 0.05)?.values,
        &off2.step(&h0, &fields2, &p, 0.05)?.values,
    );
    Ok((
        (slope - 2.0).abs() <= 0.2 && same <= 1e-13,
        format!(
            "remainder [{}] for dt = {dts:?}, slope {slope:.3} (O(dt²)); ŝ-independent difference {same:.1e} (<= 1e-13)",
            sci(&errs)
        ),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_parse() {
        assert_eq!(CheckSuite::parse("all").unwrap().ids.len(), 11);
        assert_eq!(
            CheckSuite::parse("3, stern_gerlach,3").unwrap().ids,
            vec![3, 10]
        );
        assert!(matches!(CheckSuite::parse("nope"), Err(Error::Config(_))));
        assert!(run_check(99).is_none());
    }

    #[test]
    fn outcome_lines_are_single_rows() {
        let o = CheckOutcome {
            id: 4,
            name: "plasma_oscillation",
            passed: false,
            detail: "x".into(),
            seconds: 1.0,
            budget_seconds: 60.0,
        };
        assert!(o.line().starts_with("FAIL  4 plasma_oscillation"));
        assert!(!o.line().contains('\n'));
    }
}
