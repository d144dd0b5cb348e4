//! Scenario loops for every backend, and the run-directory driver.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{solve_poisson, ExternalField, FieldState, Layout};
use crate::fluid::{step_fluid, FluidOptions, FluidPotential, FluidState};
use crate::grid::Grid1D;
use crate::kinetic::push::stagger_velocities;
use crate::kinetic::{
    load_particles, push_particles, EulerianFields, EulerianOptions, EulerianSolver,
    ExtendedDistribution, FieldSampler, LoadSpec, ParticleEnsemble, SpinLoading, SpinParticle,
    VelocityAxis, VelocitySpace,
};
use crate::params::PlasmaParams;
use crate::pauli::{init_state, ExternalPotentials, PauliPropagator, SpinorField, StateFamily};
use crate::runner::config::{Backend, RunConfig, Scenario};
use crate::runner::io::{
    write_atomic, DiagnosticsSeries, Snapshot, SnapshotAxis, SnapshotMeta, CODE_VERSION,
    FORMAT_VERSION,
};
use crate::sphere::{dot, norm, SphereQuadrature};

/// Diagnostics of a finished or aborted loop.
#[derive(Debug)]
pub struct Simulation {
    pub series: DiagnosticsSeries,
    pub completed_steps: usize,
    /// Guard violation that stopped the loop early.
    pub aborted: Option<Error>,
}

type Sink<'a> = dyn FnMut(&str, Snapshot) -> Result<()> + 'a;

/// Runs the configured loop in memory; `sink` receives every snapshot.
pub fn simulate(cfg: &RunConfig, sink: &mut Sink<'_>) -> Result<Simulation> {
    let cfg = cfg.clone().expanded();
    cfg.validate()?;
    let grid = Grid1D::new(cfg.grid.n_x, cfg.grid.length)?;
    match cfg.backend() {
        Backend::Pic => pic_loop(&cfg, grid, sink),
        Backend::Eulerian => eulerian_loop(&cfg, grid, sink),
        Backend::Fluid => fluid_loop(&cfg, grid, sink),
        Backend::Oracle => oracle_loop(&cfg, grid, sink),
    }
}

/// Steps a state, recording diagnostics every step and snapshots every
/// `cadence` steps. A failed step keeps everything gathered so far.
fn drive<S>(
    cfg: &RunConfig,
    series: &mut DiagnosticsSeries,
    state: &mut S,
    sink: &mut Sink<'_>,
    mut step: impl FnMut(&mut S) -> Result<()>,
    diag: impl Fn(&S) -> Vec<f64>,
    snap: impl Fn(&S) -> Result<Snapshot>,
) -> Result<Simulation> {
    let steps = cfg.steps();
    let cadence = cfg.cadence();
    let emit = |s: &S, i: usize, sink: &mut Sink<'_>| -> Result<()> {
        let mut sn = snap(s)?;
        sn.meta.time = i as f64 * cfg.dt;
        sn.meta.step = i;
        sink(&format!("snap_{i:07}"), sn)
    };
    series.push(0.0, &diag(state))?;
    emit(state, 0, sink)?;
    for i in 1..=steps {
        if let Err(e) = step(state) {
            return Ok(Simulation {
                series: series.clone(),
                completed_steps: i - 1,
                aborted: Some(e),
            });
        }
        series.push(i as f64 * cfg.dt, &diag(state))?;
        if i % cadence == 0 {
            emit(state, i, sink)?;
        }
    }
    Ok(Simulation {
        series: series.clone(),
        completed_steps: steps,
        aborted: None,
    })
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    let n = norm(v);
    v.map(|c| c / n)
}

/// Sine and cosine projections of a field onto mode `k`.
fn mode_projection(grid: &Grid1D, f: &[f64], k: f64) -> (f64, f64) {
    let scale = 2.0 / grid.n as f64;
    let (mut s, mut c) = (0.0, 0.0);
    for (j, v) in f.iter().enumerate() {
        let (sn, cs) = (k * grid.x(j)).sin_cos();
        s += v * sn;
        c += v * cs;
    }
    (scale * s, scale * c)
}

fn wavenumber(cfg: &RunConfig) -> f64 {
    2.0 * PI * cfg.mode as f64 / cfg.grid.length
}

// ---------------------------------------------------------------- PIC

struct PicState {
    ens: ParticleEnsemble,
    fields: FieldState,
}

fn electrostatic_solve(
    ens: &ParticleEnsemble,
    fields: &mut FieldState,
    params: &PlasmaParams,
) -> Result<()> {
    let src = crate::kinetic::deposit_sources(ens, params, Default::default());
    let mean = src.rho_c.iter().sum::<f64>() / src.rho_c.len() as f64;
    let rho: Vec<f64> = src.rho_c.iter().map(|r| r - mean).collect();
    let (phi, ex) = solve_poisson(&ens.grid, &rho, params)?;
    fields.phi = phi;
    fields.e[0] = ex;
    Ok(())
}

fn stern_gerlach_beams(cfg: &RunConfig, grid: Grid1D) -> Result<ParticleEnsemble> {
    let n = cfg.n_particles;
    let w = cfg.density * grid.length / n as f64;
    let particles = (0..n)
        .map(|i| SpinParticle {
            x: (i as f64 + 0.5) / n as f64 * grid.length,
            v: [0.0; 3],
            s: if i % 2 == 0 {
                [0.0, 0.0, 1.0]
            } else {
                [0.0, 0.0, -1.0]
            },
            w,
        })
        .collect();
    ParticleEnsemble::new(grid, particles)
}

fn pic_loop(cfg: &RunConfig, grid: Grid1D, sink: &mut Sink<'_>) -> Result<Simulation> {
    let params = cfg.params;
    let electrostatic = cfg.scenario == Scenario::PlasmaOsc;
    let ens = if cfg.scenario == Scenario::SternGerlach {
        stern_gerlach_beams(cfg, grid)?
    } else {
        load_particles(
            grid,
            &LoadSpec {
                n_particles: cfg.n_particles,
                density: cfg.density,
                perturbation: if electrostatic { cfg.perturbation } else { 0.0 },
                mode: cfg.mode,
                drift: [0.0; 3],
                v_thermal: cfg.v_thermal(),
                spin: SpinLoading::Aligned { dir: cfg.spin_dir },
                quiet: cfg.quiet,
                seed: cfg.seed,
            },
        )?
    };
    let ext = cfg.external.clone();
    let mut st = PicState {
        ens,
        fields: FieldState::zero(grid, Layout::Collocated),
    };
    if electrostatic {
        electrostatic_solve(&st.ens, &mut st.fields, &params)?;
    }
    {
        let sampler = FieldSampler::new(
            electrostatic.then_some(&st.fields),
            ext.as_ref(),
            grid.length,
        );
        stagger_velocities(&mut st.ens, &sampler, &params, cfg.dt);
    }
    let k = wavenumber(cfg);
    let mut columns = vec![
        "mean_s_x",
        "mean_s_y",
        "mean_s_z",
        "spin_norm_dev",
        "kinetic_energy",
        "zeeman_energy",
        "field_energy",
        "total_charge",
        "momentum_x",
        "e_mode",
    ];
    let sg = cfg.scenario == Scenario::SternGerlach;
    if sg {
        columns.extend(["mean_vx_up", "mean_vx_down"]);
    }
    let mut series = DiagnosticsSeries::new(columns)?;
    let dt = cfg.dt;
    let step = |s: &mut PicState| -> Result<()> {
        let sampler = FieldSampler::new(
            electrostatic.then_some(&s.fields),
            ext.as_ref(),
            grid.length,
        );
        let next = push_particles(&s.ens, &sampler, &params, dt)?;
        s.ens = next;
        if electrostatic {
            electrostatic_solve(&s.ens, &mut s.fields, &params)?;
        }
        Ok(())
    };
    let diag = |s: &PicState| -> Vec<f64> {
        let ms = s.ens.mean_spin();
        let zeeman: f64 = s
            .ens
            .particles
            .iter()
            .map(|p| {
                let b = ext
                    .as_ref()
                    .map_or([0.0; 3], |e| e.eval(p.x, grid.length).b);
                p.w * params.mu_b() * dot(p.s, b)
            })
            .sum();
        let field_energy = 0.5
            * params.eps0
            * grid.integrate(&s.fields.e[0].iter().map(|e| e * e).collect::<Vec<_>>());
        let mut row = vec![
            ms[0],
            ms[1],
            ms[2],
            s.ens.spin_norm_deviation(),
            s.ens.kinetic_energy(params.mass),
            zeeman,
            field_energy,
            -params.charge * s.ens.total_weight(),
            s.ens.momentum(params.mass)[0],
            mode_projection(&grid, &s.fields.e[0], k).0,
        ];
        if sg {
            let mean_vx = |sign: f64| {
                let (sum, w) = s
                    .ens
                    .particles
                    .iter()
                    .filter(|p| p.s[2] * sign > 0.0)
                    .fold((0.0, 0.0), |(a, b), p| (a + p.w * p.v[0], b + p.w));
                if w > 0.0 {
                    sum / w
                } else {
                    0.0
                }
            };
            row.push(mean_vx(1.0));
            row.push(mean_vx(-1.0));
        }
        row
    };
    let snap = |s: &PicState| -> Result<Snapshot> {
        let labels = ["x", "v_x", "v_y", "v_z", "s_x", "s_y", "s_z", "w"];
        let mut meta = SnapshotMeta::new(
            "particles",
            vec![
                SnapshotAxis::index("particle", s.ens.len()),
                SnapshotAxis::labelled("attribute", &labels),
            ],
        );
        meta.attributes.insert("length".into(), grid.length.into());
        meta.attributes
            .insert("velocity_time_offset".into(), (-0.5 * dt).into());
        let data = s
            .ens
            .particles
            .iter()
            .flat_map(|p| [p.x, p.v[0], p.v[1], p.v[2], p.s[0], p.s[1], p.s[2], p.w])
            .collect();
        Snapshot::new(meta, data)
    };
    drive(cfg, &mut series, &mut st, sink, step, diag, snap)
}

// ----------------------------------------------------------- Eulerian

fn maxwellian(v: f64, vt: f64) -> f64 {
    (-0.5 * v * v / (vt * vt)).exp() / ((2.0 * PI).sqrt() * vt)
}

fn eulerian_loop(cfg: &RunConfig, grid: Grid1D, sink: &mut Sink<'_>) -> Result<Simulation> {
    let params = cfg.params;
    let vel = VelocitySpace::one(VelocityAxis::new(cfg.grid.n_v, cfg.grid.v_max)?);
    let quad = Arc::new(SphereQuadrature::new(cfg.grid.n_theta, cfg.grid.n_phi)?);
    let k = wavenumber(cfg);
    let vt = cfg.v_thermal();
    let d = unit(cfg.spin_dir);
    let (n0, eps) = (cfg.density, cfg.perturbation);
    let init = move |x: f64, v: [f64; 2], s: [f64; 3]| {
        n0 * (1.0 + eps * (k * x).cos()) * maxwellian(v[0], vt) * (1.0 + dot(s, d)) / (4.0 * PI)
    };
    let f0 = ExtendedDistribution::from_fn(grid, vel, quad.clone(), init);
    let fields = match &cfg.external {
        Some(e) => EulerianFields::from_external(e, grid),
        None => EulerianFields::zero(grid),
    };
    let solver = EulerianSolver::new(
        quad.clone(),
        EulerianOptions {
            quantum_term: cfg.quantum_term(),
            ..Default::default()
        },
    );
    let free = cfg.scenario == Scenario::FreeStream;
    let mut columns = vec![
        "total",
        "density_mode",
        "mean_sigma_x",
        "mean_sigma_y",
        "mean_sigma_z",
    ];
    if free {
        columns.push("l1_error");
    }
    let mut series = DiagnosticsSeries::new(columns)?;
    let dt = cfg.dt;
    let mut st = (f0, 0usize);
    let step = |s: &mut (ExtendedDistribution, usize)| -> Result<()> {
        s.0 = solver.step(&s.0, &fields, &params, dt)?;
        s.1 += 1;
        Ok(())
    };
    let diag = |s: &(ExtendedDistribution, usize)| -> Vec<f64> {
        let f = &s.0;
        let total = f.total();
        let n = f.density();
        let m = f.spin_moment();
        let sigma = [0, 1, 2].map(|c| 3.0 * grid.integrate(&m[c]) / grid.integrate(&n));
        let mut row = vec![
            total,
            mode_projection(&grid, &n, k).1,
            sigma[0],
            sigma[1],
            sigma[2],
        ];
        if free {
            let t = s.1 as f64 * dt;
            let exact = ExtendedDistribution::from_fn(grid, vel, quad.clone(), |x, v, sp| {
                init(x - v[0] * t, v, sp)
            });
            row.push(f.l1_distance(&exact).unwrap_or(f64::INFINITY));
        }
        row
    };
    let snap = |s: &(ExtendedDistribution, usize)| -> Result<Snapshot> {
        let f = &s.0;
        let ax = vel.vx;
        let mut meta = SnapshotMeta::new(
            "extended_distribution",
            vec![
                SnapshotAxis::uniform("x", grid.n, 0.0, grid.dx()),
                SnapshotAxis::uniform("v_x", ax.n, ax.value(0), ax.dv()),
                SnapshotAxis::index("v_y", vel.nvy()),
                SnapshotAxis::index("sphere_node", f.n_sphere()),
            ],
        );
        meta.attributes
            .insert("n_theta".into(), cfg.grid.n_theta.into());
        meta.attributes
            .insert("n_phi".into(), cfg.grid.n_phi.into());
        Snapshot::new(meta, f.values.clone())
    };
    drive(cfg, &mut series, &mut st, sink, step, diag, snap)
}

// -------------------------------------------------------------- fluid

fn gaussian_family(cfg: &RunConfig) -> StateFamily {
    let d = unit(cfg.spin_dir);
    StateFamily::Gaussian {
        x0: 0.5 * cfg.grid.length,
        sigma: cfg.sigma,
        p0: 0.0,
        theta: d[2].clamp(-1.0, 1.0).acos(),
        phi: d[1].atan2(d[0]),
    }
}

fn width(grid: &Grid1D, n: &[f64]) -> f64 {
    let mass = grid.integrate(n);
    let xs = grid.points();
    let mean = xs.iter().zip(n).map(|(x, v)| x * v).sum::<f64>() * grid.dx() / mass;
    let var = xs
        .iter()
        .zip(n)
        .map(|(x, v)| (x - mean).powi(2) * v)
        .sum::<f64>()
        * grid.dx()
        / mass;
    var.sqrt()
}

fn fluid_loop(cfg: &RunConfig, grid: Grid1D, sink: &mut Sink<'_>) -> Result<Simulation> {
    let params = cfg.params;
    let opts = FluidOptions {
        quantum: cfg.quantum_term(),
        ..Default::default()
    };
    let k = wavenumber(cfg);
    let (state, pot) = match cfg.scenario {
        Scenario::PlasmaOsc => {
            let n = grid
                .points()
                .iter()
                .map(|x| cfg.density * (1.0 + cfg.perturbation * (k * x).cos()))
                .collect();
            (
                FluidState::new(grid, n, vec![0.0; grid.n])?,
                FluidPotential::SelfConsistent {
                    ion_density: cfg.density,
                },
            )
        }
        _ => {
            let psi = init_state(&gaussian_family(cfg), grid, &params)?;
            (
                FluidState::new(grid, psi.density(), vec![0.0; grid.n])?,
                FluidPotential::Fixed {
                    phi: vec![0.0; grid.n],
                },
            )
        }
    };
    let osc = cfg.scenario == Scenario::PlasmaOsc;
    let columns = if osc {
        vec![
            "mass",
            "density_mode",
            "e_mode",
            "field_energy",
            "kinetic_energy",
        ]
    } else {
        vec!["mass", "width", "peak_density", "kinetic_energy"]
    };
    let mut series = DiagnosticsSeries::new(columns)?;
    let dt = cfg.dt;
    let mut st = state;
    let step = |s: &mut FluidState| -> Result<()> {
        *s = step_fluid(s, &pot, &params, dt, opts)?;
        Ok(())
    };
    let diag = |s: &FluidState| -> Vec<f64> {
        let ke = 0.5
            * params.mass
            * grid.integrate(
                &s.n.iter()
                    .zip(&s.u)
                    .map(|(n, u)| n * u * u)
                    .collect::<Vec<_>>(),
            );
        if osc {
            let rho: Vec<f64> =
                s.n.iter()
                    .map(|n| -params.charge * (n - cfg.density))
                    .collect();
            let ex = solve_poisson(&grid, &rho, &params)
                .map(|r| r.1)
                .unwrap_or_else(|_| vec![f64::INFINITY; grid.n]);
            let fe =
                0.5 * params.eps0 * grid.integrate(&ex.iter().map(|e| e * e).collect::<Vec<_>>());
            vec![
                s.mass(),
                mode_projection(&grid, &s.n, k).1,
                mode_projection(&grid, &ex, k).0,
                fe,
                ke,
            ]
        } else {
            let peak = s.n.iter().copied().fold(0.0, f64::max);
            vec![s.mass(), width(&grid, &s.n), peak, ke]
        }
    };
    let snap = |s: &FluidState| -> Result<Snapshot> {
        let meta = SnapshotMeta::new(
            "fluid",
            vec![
                SnapshotAxis::uniform("x", grid.n, 0.0, grid.dx()),
                SnapshotAxis::labelled("field", &["n", "u"]),
            ],
        );
        Snapshot::new(
            meta,
            s.n.iter().zip(&s.u).flat_map(|(a, b)| [*a, *b]).collect(),
        )
    };
    drive(cfg, &mut series, &mut st, sink, step, diag, snap)
}

// ------------------------------------------------------------- oracle

/// Spinor samples as `[x][re ψ↑, im ψ↑, re ψ↓, im ψ↓]`.
pub fn spinor_snapshot(psi: &SpinorField, params: &PlasmaParams) -> Result<Snapshot> {
    let g = psi.grid;
    let mut meta = SnapshotMeta::new(
        "spinor",
        vec![
            SnapshotAxis::uniform("x", g.n, 0.0, g.dx()),
            SnapshotAxis::labelled("component", &["re_up", "im_up", "re_down", "im_down"]),
        ],
    );
    meta.attributes.insert("length".into(), g.length.into());
    meta.attributes
        .insert("momentum_offset".into(), psi.momentum_offset.into());
    meta.attributes
        .insert("params".into(), serde_json::to_value(params)?);
    let data = psi
        .up
        .iter()
        .zip(&psi.down)
        .flat_map(|(u, d)| [u.re, u.im, d.re, d.im])
        .collect();
    Snapshot::new(meta, data)
}

fn oracle_loop(cfg: &RunConfig, grid: Grid1D, sink: &mut Sink<'_>) -> Result<Simulation> {
    let params = cfg.params;
    let pot = match &cfg.external {
        Some(ExternalField::UniformB { b }) => ExternalPotentials::uniform_b(&grid, *b),
        Some(other) => {
            return Err(Error::Unsupported {
                what: "oracle field",
                detail: format!("{other:?}"),
            })
        }
        None => ExternalPotentials::zero(&grid),
    };
    let psi = init_state(&gaussian_family(cfg), grid, &params)?;
    let prop = PauliPropagator::new(grid, &pot, &params, cfg.dt, psi.momentum_offset)?;
    let mut series = DiagnosticsSeries::new([
        "norm",
        "width",
        "peak_density",
        "mean_sigma_x",
        "mean_sigma_y",
        "mean_sigma_z",
    ])?;
    let mut st = psi;
    let step = |s: &mut SpinorField| -> Result<()> {
        prop.step(s);
        Ok(())
    };
    let diag = |s: &SpinorField| -> Vec<f64> {
        let n = s.density();
        let sig = s.mean_sigma();
        let peak = n.iter().copied().fold(0.0, f64::max);
        vec![s.norm_sqr(), width(&grid, &n), peak, sig[0], sig[1], sig[2]]
    };
    let snap = |s: &SpinorField| spinor_snapshot(s, &params);
    drive(cfg, &mut series, &mut st, sink, step, diag, snap)
}

// ------------------------------------------------------ run directory

#[derive(Debug, Clone, Serialize)]
struct Manifest<'a> {
    code_version: &'a str,
    format_version: u32,
    scenario: &'a str,
    backend: &'a str,
    steps: usize,
    completed_steps: usize,
    status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    caveat: Option<&'a str>,
}

#[derive(Debug)]
pub struct RunReport {
    pub dir: PathBuf,
    pub series: DiagnosticsSeries,
    pub completed_steps: usize,
}

/// Directory a config writes into.
pub fn run_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join(format!(
        "{}-{}-seed{}",
        cfg.scenario.name(),
        cfg.backend().name(),
        cfg.seed
    ))
}

/// Executes a config and writes `config.json`, `manifest.json`,
/// `diagnostics.csv` and `snapshots/` into [`run_dir`].
pub fn run_case(cfg: &RunConfig) -> Result<RunReport> {
    let cfg = cfg.clone().expanded();
    cfg.validate()?;
    let dir = run_dir(&cfg);
    let snaps = dir.join("snapshots");
    std::fs::create_dir_all(&snaps).map_err(|e| Error::io(&snaps, e))?;
    super::config::write_config(&cfg, dir.join("config.json"))?;
    let mut sink = |stem: &str, s: Snapshot| s.write(&snaps, stem).map(|_| ());
    let sim = simulate(&cfg, &mut sink)?;
    sim.series.write_csv(dir.join("diagnostics.csv"))?;
    let status = match &sim.aborted {
        None => "completed".to_string(),
        Some(e) => format!("aborted: {e}"),
    };
    let manifest = Manifest {
        code_version: CODE_VERSION,
        format_version: FORMAT_VERSION,
        scenario: cfg.scenario.name(),
        backend: cfg.backend().name(),
        steps: cfg.steps(),
        completed_steps: sim.completed_steps,
        status,
        caveat: cfg.external.as_ref().and_then(|e| e.caveat()),
    };
    write_atomic(
        &dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?.as_bytes(),
    )?;
    match sim.aborted {
        None => Ok(RunReport {
            dir,
            series: sim.series,
            completed_steps: sim.completed_steps,
        }),
        Some(e) => Err(Error::RunAborted {
            dir: dir.display().to_string(),
            completed: sim.completed_steps,
            source: Box::new(e),
        }),
    }
}

/// Runs without writing anything.
pub fn simulate_quietly(cfg: &RunConfig) -> Result<Simulation> {
    simulate(cfg, &mut |_, _| Ok(()))
}

/// Lists the snapshot sidecars of a run directory in step order.
pub fn list_snapshots(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let snaps = dir.as_ref().join("snapshots");
    let mut out: Vec<PathBuf> = std::fs::read_dir(&snaps)
        .map_err(|e| Error::io(&snaps, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runner::fit::fit_frequency;

    fn small(scenario: Scenario) -> RunConfig {
        let mut c = RunConfig::preset(scenario);
        c.n_particles = 256;
        c.grid.n_x = 16;
        c.t_end = 0.2;
        c.dt = 0.01;
        c.cadence = Some(10);
        c.expanded()
    }

    #[test]
    fn every_preset_runs() {
        for s in Scenario::ALL {
            for &b in s.backends() {
                let mut c = small(s);
                c.backend = Some(b);
                if b == Backend::Eulerian {
                    c.v_thermal = Some(1.0);
                    c.grid.v_max = 4.0;
                    c.grid.n_v = 8;
                }
                let sim = simulate_quietly(&c).unwrap_or_else(|e| panic!("{s:?} {b:?}: {e}"));
                assert!(sim.aborted.is_none(), "{s:?} {b:?}: {:?}", sim.aborted);
                assert_eq!(sim.series.len(), 21);
            }
        }
    }

    #[test]
    fn precession_frequency() {
        let mut c = RunConfig::preset(Scenario::Precession);
        c.n_particles = 64;
        c.grid.n_x = 8;
        c.b0 = 2.0;
        c.external = None;
        c.dt = 0.02;
        c.t_end = 40.0;
        c.cadence = None;
        let c = c.expanded();
        let sim = simulate_quietly(&c).unwrap();
        let f = *fit_frequency(&sim.series, "mean_s_x")
            .unwrap()
            .fitted()
            .unwrap();
        assert!((f.omega / 2.0 - 1.0).abs() < 1e-3, "{f:?}");
    }

    #[test]
    fn run_directory_is_complete_and_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small(Scenario::PlasmaOsc);
        c.out_dir = dir.path().to_path_buf();
        let csv = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            let r = pool.install(|| run_case(&c)).unwrap();
            std::fs::read(r.dir.join("diagnostics.csv")).unwrap()
        };
        let one = csv(1);
        let four = csv(4);
        assert_eq!(one, four);
        let d = run_dir(&c);
        for f in ["config.json", "manifest.json", "diagnostics.csv"] {
            assert!(d.join(f).exists(), "{f}");
        }
        assert_eq!(list_snapshots(&d).unwrap().len(), 3);
        let back = super::super::config::load_config(d.join("config.json")).unwrap();
        assert_eq!(back, c.clone().expanded());
    }

    #[test]
    fn aborted_runs_keep_valid_output() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small(Scenario::Precession);
        c.out_dir = dir.path().to_path_buf();
        // The cyclotron guard rejects the very first push.
        c.b0 = 100.0;
        c.external = None;
        c.cadence = Some(1);
        match run_case(&c) {
            Err(Error::RunAborted { completed, .. }) => assert_eq!(completed, 0),
            other => panic!("{other:?}"),
        }
        let d = run_dir(&c.expanded());
        let snaps = list_snapshots(&d).unwrap();
        assert_eq!(snaps.len(), 1);
        Snapshot::read(&snaps[0]).unwrap();
        let manifest = std::fs::read_to_string(d.join("manifest.json")).unwrap();
        assert!(manifest.contains("aborted"));
        assert_eq!(
            DiagnosticsSeries::read_csv(d.join("diagnostics.csv"))
                .unwrap()
                .len(),
            1
        );
    }
}
