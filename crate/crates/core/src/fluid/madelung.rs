//! Scalar quantum fluid: continuity plus momentum with the Bohm force.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::solve_poisson;
use crate::grid::{Grid1D, Spectral};
use crate::params::PlasmaParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidState {
    pub grid: Grid1D,
    pub n: Vec<f64>,
    pub u: Vec<f64>,
}

impl FluidState {
    pub fn new(grid: Grid1D, n: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        grid.check_len(n.len(), "density")?;
        grid.check_len(u.len(), "velocity")?;
        if let Some(i) = n.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::param(
                "density",
                format!("must be finite and >= 0, got {} at {i}", n[i]),
            ));
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("velocity", "must be finite"));
        }
        Ok(Self { grid, n, u })
    }

    pub fn mass(&self) -> f64 {
        self.grid.integrate(&self.n)
    }
}

/// Electrostatic potential seen by the fluid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FluidPotential {
    Fixed {
        phi: Vec<f64>,
    },
    /// Poisson's equation with a uniform neutralizing ion density.
    SelfConsistent {
        ion_density: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FluidOptions {
    /// The floor is this fraction of `max n`.
    pub floor_fraction: f64,
    /// Include the Bohm force.
    pub quantum: bool,
}

impl Default for FluidOptions {
    fn default() -> Self {
        Self {
            floor_fraction: 1e-10,
            quantum: true,
        }
    }
}

fn check_floor(n: &[f64], fraction: f64) -> Result<()> {
    let nmax = n.iter().copied().fold(0.0, f64::max);
    let floor = fraction * nmax;
    match n.iter().position(|&v| !(v > floor)) {
        Some(index) => Err(Error::DensityFloor {
            index,
            value: n[index],
            floor,
        }),
        None => Ok(()),
    }
}

/// `(ħ²/2m²) ∂ₓ[∂ₓ²√n / √n]`.
pub fn bohm_acceleration(sp: &Spectral, n: &[f64], params: &PlasmaParams) -> Vec<f64> {
    let r: Vec<f64> = n.iter().map(|v| v.sqrt()).collect();
    let r2 = sp.derivative(&r, 2);
    let q: Vec<f64> = r2.iter().zip(&r).map(|(a, b)| a / b).collect();
    let c = params.hbar * params.hbar / (2.0 * params.mass * params.mass);
    sp.derivative(&q, 1).into_iter().map(|v| c * v).collect()
}

fn potential(state: &FluidState, pot: &FluidPotential, params: &PlasmaParams) -> Result<Vec<f64>> {
    match pot {
        FluidPotential::Fixed { phi } => {
            state.grid.check_len(phi.len(), "phi")?;
            Ok(phi.clone())
        }
        FluidPotential::SelfConsistent { ion_density } => {
            let rho: Vec<f64> = state
                .n
                .iter()
                .map(|n| -params.charge * (n - ion_density))
                .collect();
            Ok(solve_poisson(&state.grid, &rho, params)?.0)
        }
    }
}

/// `(∂ₜn, ∂ₜu)` for a given scalar potential.
pub fn fluid_rhs(
    state: &FluidState,
    phi: &[f64],
    params: &PlasmaParams,
    opts: FluidOptions,
) -> Result<(Vec<f64>, Vec<f64>)> {
    rhs_with(&Spectral::new(state.grid), state, phi, params, opts)
}

fn rhs_with(
    sp: &Spectral,
    state: &FluidState,
    phi: &[f64],
    params: &PlasmaParams,
    opts: FluidOptions,
) -> Result<(Vec<f64>, Vec<f64>)> {
    params.validate()?;
    state.grid.check_len(phi.len(), "phi")?;
    check_floor(&state.n, opts.floor_fraction)?;
    let flux: Vec<f64> = state.n.iter().zip(&state.u).map(|(a, b)| a * b).collect();
    let dn: Vec<f64> = sp.derivative(&flux, 1).into_iter().map(|v| -v).collect();
    let du_dx = sp.derivative(&state.u, 1);
    let dphi = sp.derivative(phi, 1);
    let qm = params.charge / params.mass;
    let bohm = if opts.quantum {
        bohm_acceleration(sp, &state.n, params)
    } else {
        vec![0.0; state.grid.n]
    };
    let du = (0..state.grid.n)
        .map(|j| -state.u[j] * du_dx[j] + qm * dphi[j] + bohm[j])
        .collect();
    Ok((dn, du))
}

/// One classical fourth-order Runge–Kutta step.
pub fn step_fluid(
    state: &FluidState,
    pot: &FluidPotential,
    params: &PlasmaParams,
    dt: f64,
    opts: FluidOptions,
) -> Result<FluidState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", "must be finite and > 0"));
    }
    let sp = Spectral::new(state.grid);
    let eval = |s: &FluidState| -> Result<(Vec<f64>, Vec<f64>)> {
        let phi = potential(s, pot, params)?;
        rhs_with(&sp, s, &phi, params, opts)
    };
    let shifted = |k: &(Vec<f64>, Vec<f64>), h: f64| FluidState {
        grid: state.grid,
        n: state.n.iter().zip(&k.0).map(|(a, b)| a + h * b).collect(),
        u: state.u.iter().zip(&k.1).map(|(a, b)| a + h * b).collect(),
    };
    let k1 = eval(state)?;
    let k2 = eval(&shifted(&k1, 0.5 * dt))?;
    let k3 = eval(&shifted(&k2, 0.5 * dt))?;
    let k4 = eval(&shifted(&k3, dt))?;
    let comb = |a: &[f64], i: usize, ks: [&[f64]; 4]| {
        a[i] + dt / 6.0 * (ks[0][i] + 2.0 * ks[1][i] + 2.0 * ks[2][i] + ks[3][i])
    };
    let n = (0..state.grid.n)
        .map(|i| comb(&state.n, i, [&k1.0, &k2.0, &k3.0, &k4.0]))
        .collect();
    let u = (0..state.grid.n)
        .map(|i| comb(&state.u, i, [&k1.1, &k2.1, &k3.1, &k4.1]))
        .collect();
    let out = FluidState {
        grid: state.grid,
        n,
        u,
    };
    check_floor(&out.n, opts.floor_fraction)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn equilibrium_is_stationary() {
        let g = Grid1D::new(32, 5.0).unwrap();
        let p = PlasmaParams::default();
        let s0 = FluidState::new(g, vec![1.3; 32], vec![0.0; 32]).unwrap();
        let (dn, du) = fluid_rhs(&s0, &[0.0; 32], &p, FluidOptions::default()).unwrap();
        assert!(dn.iter().chain(&du).all(|v| *v == 0.0));
        let pot = FluidPotential::SelfConsistent { ion_density: 1.3 };
        let mut s = s0.clone();
        for _ in 0..1000 {
            s = step_fluid(&s, &pot, &p, 0.01, FluidOptions::default()).unwrap();
        }
        let dev =
            s.n.iter()
                .zip(&s0.n)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
        assert!(dev < 1e-13 && s.u.iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn bohm_force_linearizes() {
        // n = 1 + ε cos kx ⇒ Bohm acceleration ≈ (ħ²k³/4m²) ε sin kx
        let g = Grid1D::new(64, 2.0 * PI).unwrap();
        let p = PlasmaParams::with_hbar(0.7);
        let k = 3.0;
        let eps = 1e-6;
        let n: Vec<f64> = g
            .points()
            .iter()
            .map(|x| 1.0 + eps * (k * x).cos())
            .collect();
        let a = bohm_acceleration(&Spectral::new(g), &n, &p);
        for (j, x) in g.points().into_iter().enumerate() {
            let want = p.hbar * p.hbar * k.powi(3) / 4.0 * eps * (k * x).sin();
            assert!((a[j] - want).abs() < 1e-10, "{} {}", a[j], want);
        }
    }

    #[test]
    fn mass_is_conserved() {
        let g = Grid1D::new(64, 10.0).unwrap();
        let p = PlasmaParams::default();
        let n: Vec<f64> = g
            .points()
            .iter()
            .map(|x| 1.0 + 0.2 * (2.0 * PI * x / 10.0).sin())
            .collect();
        let u: Vec<f64> = g
            .points()
            .iter()
            .map(|x| 0.1 * (2.0 * PI * x / 10.0).cos())
            .collect();
        let mut s = FluidState::new(g, n, u).unwrap();
        let m0 = s.mass();
        let pot = FluidPotential::SelfConsistent { ion_density: 1.0 };
        for _ in 0..1000 {
            s = step_fluid(&s, &pot, &p, 0.005, FluidOptions::default()).unwrap();
        }
        assert!((s.mass() - m0).abs() < 1e-10);
    }

    #[test]
    fn floor_violation_is_reported() {
        let g = Grid1D::new(16, 1.0).unwrap();
        let p = PlasmaParams::default();
        let mut n = vec![1.0; 16];
        n[5] = 1e-12;
        let s = FluidState::new(g, n, vec![0.0; 16]).unwrap();
        match fluid_rhs(&s, &[0.0; 16], &p, FluidOptions::default()) {
            Err(Error::DensityFloor { index, .. }) => assert_eq!(index, 5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cold_classical_limit_follows_characteristics() {
        // u(x, t) solves Burgers: u = u0(x0), x = x0 + u0(x0) t
        let g = Grid1D::new(256, 2.0 * PI).unwrap();
        let p = PlasmaParams::with_hbar(1e-8);
        let amp = 0.1;
        let u0 = |x: f64| amp * x.sin();
        let n = vec![1.0; g.n];
        let u = g.points().iter().map(|&x| u0(x)).collect();
        let mut s = FluidState::new(g, n, u).unwrap();
        let opts = FluidOptions {
            quantum: false,
            ..Default::default()
        };
        let pot = FluidPotential::Fixed {
            phi: vec![0.0; g.n],
        };
        let dt = 0.01;
        let steps = 200;
        for _ in 0..steps {
            s = step_fluid(&s, &pot, &p, dt, opts).unwrap();
        }
        let t = dt * steps as f64;
        for (j, x) in g.points().into_iter().enumerate() {
            let mut x0 = x;
            for _ in 0..50 {
                x0 -= (x0 + u0(x0) * t - x) / (1.0 + amp * x0.cos() * t);
            }
            assert!((s.u[j] - u0(x0)).abs() < 1e-6, "{j}");
        }
    }
}
