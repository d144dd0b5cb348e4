//! Split-step spectral propagator for the one-dimensional Pauli equation.
//!
//! `H = (p + eA)²/2m + μ_B B·σ − eφ` with `A = A(x)` and `A_x` constant.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid1D, Spectral, C64};
use crate::params::PlasmaParams;
use crate::sphere::Vec3;
use crate::transforms::spin::Mat2;
use crate::transforms::wavefunction::WaveFunction1D;

/// Two-component spinor on a shared periodic grid.
///
/// As for [`WaveFunction1D`], the physical state carries the extra factor
/// `exp(i momentum_offset x / ħ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinorField {
    pub grid: Grid1D,
    pub up: Vec<C64>,
    pub down: Vec<C64>,
    #[serde(default)]
    pub momentum_offset: f64,
}

impl SpinorField {
    pub fn new(grid: Grid1D, up: Vec<C64>, down: Vec<C64>) -> Result<Self> {
        grid.check_len(up.len(), "spin-up component")?;
        grid.check_len(down.len(), "spin-down component")?;
        Ok(Self {
            grid,
            up,
            down,
            momentum_offset: 0.0,
        })
    }

    /// `ψ(x) χ` for a scalar state and a constant two-spinor `χ`.
    pub fn product(psi: &WaveFunction1D, chi: [C64; 2]) -> Self {
        Self {
            grid: psi.grid,
            up: psi.psi.iter().map(|z| z * chi[0]).collect(),
            down: psi.psi.iter().map(|z| z * chi[1]).collect(),
            momentum_offset: psi.momentum_offset,
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        let s: f64 = self.up.iter().chain(&self.down).map(|z| z.norm_sqr()).sum();
        s * self.grid.dx()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_sqr();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::NotNormalized { norm: n });
        }
        let s = 1.0 / n.sqrt();
        self.up
            .iter_mut()
            .chain(self.down.iter_mut())
            .for_each(|z| *z *= s);
        Ok(())
    }

    pub fn require_normalized(&self) -> Result<()> {
        let n = self.norm_sqr();
        if !((n - 1.0).abs() < crate::transforms::wavefunction::NORM_TOLERANCE) {
            return Err(Error::NotNormalized { norm: n });
        }
        Ok(())
    }

    pub fn component(&self, which: usize) -> WaveFunction1D {
        WaveFunction1D {
            grid: self.grid,
            psi: if which == 0 {
                self.up.clone()
            } else {
                self.down.clone()
            },
            momentum_offset: self.momentum_offset,
        }
    }

    pub fn density(&self) -> Vec<f64> {
        self.up
            .iter()
            .zip(&self.down)
            .map(|(a, b)| a.norm_sqr() + b.norm_sqr())
            .collect()
    }

    /// Global `⟨σ⟩ = ∫ ψ†σψ dx`.
    pub fn mean_sigma(&self) -> Vec3 {
        let mut s = [0.0; 3];
        for (a, b) in self.up.iter().zip(&self.down) {
            let c = a.conj() * b;
            s[0] += 2.0 * c.re;
            s[1] += 2.0 * c.im;
            s[2] += a.norm_sqr() - b.norm_sqr();
        }
        s.map(|v| v * self.grid.dx())
    }

    /// Multiplies by `exp(-i e Λ(x) / ħ)` sampled pointwise.
    pub fn apply_phase(&mut self, phase: impl Fn(f64) -> f64) {
        for j in 0..self.grid.n {
            let u = C64::from_polar(1.0, phase(self.grid.x(j)));
            self.up[j] *= u;
            self.down[j] *= u;
        }
    }
}

/// Unit spinor `(cos θ/2, e^{iφ} sin θ/2)` with `χ†σχ = (sinθ cosφ, sinθ sinφ, cosθ)`.
pub fn spin_state(theta: f64, phi: f64) -> [C64; 2] {
    [
        C64::new((0.5 * theta).cos(), 0.0),
        C64::from_polar((0.5 * theta).sin(), phi),
    ]
}

/// Prescribed static potentials and fields on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalPotentials {
    pub phi: Vec<f64>,
    /// Vector potential components; `a[0]` must be constant.
    pub a: [Vec<f64>; 3],
    pub b: [Vec<f64>; 3],
    pub e: [Vec<f64>; 3],
    /// True when `b` was supplied directly instead of derived from `a`.
    pub direct_b: bool,
}

impl ExternalPotentials {
    pub fn zero(grid: &Grid1D) -> Self {
        let z = vec![0.0; grid.n];
        Self {
            phi: z.clone(),
            a: [z.clone(), z.clone(), z.clone()],
            b: [z.clone(), z.clone(), z.clone()],
            e: [z.clone(), z.clone(), z],
            direct_b: false,
        }
    }

    /// Uniform magnetic field supplied directly, no vector potential.
    pub fn uniform_b(grid: &Grid1D, b: Vec3) -> Self {
        let mut p = Self::zero(grid);
        p.direct_b = true;
        for c in 0..3 {
            p.b[c] = vec![b[c]; grid.n];
        }
        p
    }

    /// Scalar potential only; `E = -∂φ`.
    pub fn electrostatic(grid: &Grid1D, phi: Vec<f64>) -> Result<Self> {
        let zero = vec![0.0; grid.n];
        Self::from_potentials(grid, phi, [zero.clone(), zero.clone(), zero])
    }

    /// Derives `B = (0, -∂A_z, ∂A_y)` and `E = -∂φ` spectrally.
    pub fn from_potentials(grid: &Grid1D, phi: Vec<f64>, a: [Vec<f64>; 3]) -> Result<Self> {
        grid.check_len(phi.len(), "phi")?;
        for c in &a {
            grid.check_len(c.len(), "A")?;
        }
        let sp = Spectral::new(*grid);
        let day = sp.derivative(&a[1], 1);
        let daz = sp.derivative(&a[2], 1);
        let dphi = sp.derivative(&phi, 1);
        let p = Self {
            b: [vec![0.0; grid.n], daz.iter().map(|v| -v).collect(), day],
            e: [
                dphi.iter().map(|v| -v).collect(),
                vec![0.0; grid.n],
                vec![0.0; grid.n],
            ],
            phi,
            a,
            direct_b: false,
        };
        p.validate(grid)?;
        Ok(p)
    }

    /// Array lengths only; any gauge is accepted.
    pub fn check_shapes(&self, grid: &Grid1D) -> Result<()> {
        grid.check_len(self.phi.len(), "phi")?;
        for c in self.a.iter().chain(&self.b).chain(&self.e) {
            grid.check_len(c.len(), "potential component")?;
        }
        Ok(())
    }

    /// Shapes plus the Coulomb-gauge requirement that `A_x` be constant.
    pub fn validate(&self, grid: &Grid1D) -> Result<()> {
        self.check_shapes(grid)?;
        let ax = &self.a[0];
        let (lo, hi) = ax
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
                (l.min(v), h.max(v))
            });
        if hi - lo > 1e-12 * (1.0 + hi.abs().max(lo.abs())) {
            return Err(Error::Unsupported {
                what: "vector potential",
                detail: format!(
                    "A_x must be constant in the Coulomb gauge, spread {:.3e}",
                    hi - lo
                ),
            });
        }
        Ok(())
    }

    pub fn a_x(&self) -> f64 {
        self.a[0].first().copied().unwrap_or(0.0)
    }
}

/// Initial-state families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateFamily {
    Gaussian {
        x0: f64,
        sigma: f64,
        #[serde(default)]
        p0: f64,
        #[serde(default)]
        theta: f64,
        #[serde(default)]
        phi: f64,
    },
    PlaneWave {
        p0: f64,
        #[serde(default)]
        theta: f64,
        #[serde(default)]
        phi: f64,
    },
    Superposition {
        /// `(x0, sigma, p0, re, im)` per packet.
        packets: Vec<[f64; 5]>,
        #[serde(default)]
        theta: f64,
        #[serde(default)]
        phi: f64,
    },
}

impl StateFamily {
    pub fn from_name(name: &str, value: serde_json::Value) -> Result<Self> {
        let mut v = value;
        if let serde_json::Value::Object(ref mut m) = v {
            m.insert("family".into(), serde_json::Value::String(name.to_string()));
        }
        serde_json::from_value(v).map_err(|e| Error::param("family", e.to_string()))
    }
}

pub fn init_state(
    family: &StateFamily,
    grid: Grid1D,
    params: &PlasmaParams,
) -> Result<SpinorField> {
    use crate::transforms::wavefunction::gaussian_packet;
    params.validate()?;
    let hbar = params.hbar;
    let (psi, theta, phi) = match family {
        StateFamily::Gaussian {
            x0,
            sigma,
            p0,
            theta,
            phi,
        } => (gaussian_packet(grid, *x0, *sigma, *p0, hbar)?, *theta, *phi),
        StateFamily::PlaneWave { p0, theta, phi } => {
            let mut w =
                WaveFunction1D::new(grid, vec![C64::new(1.0, 0.0); grid.n])?.normalized()?;
            w.momentum_offset = *p0;
            (w, *theta, *phi)
        }
        StateFamily::Superposition {
            packets,
            theta,
            phi,
        } => {
            if packets.is_empty() {
                return Err(Error::param(
                    "packets",
                    "superposition needs at least one packet",
                ));
            }
            let mut acc = vec![C64::new(0.0, 0.0); grid.n];
            for &[x0, sigma, p0, re, im] in packets {
                let g = gaussian_packet(grid, x0, sigma, p0, hbar)?;
                for (a, z) in acc.iter_mut().zip(&g.psi) {
                    *a += z * C64::new(re, im);
                }
            }
            (WaveFunction1D::new(grid, acc)?.normalized()?, *theta, *phi)
        }
    };
    Ok(SpinorField::product(&psi, spin_state(theta, phi)))
}

/// `exp(-i α n·σ)` for a unit vector `n`.
fn su2(alpha: f64, n: Vec3) -> Mat2 {
    let (s, c) = alpha.sin_cos();
    [
        [C64::new(c, -s * n[2]), C64::new(-s * n[1], -s * n[0])],
        [C64::new(s * n[1], -s * n[0]), C64::new(c, s * n[2])],
    ]
}

/// Precomputed split-step factors for fixed potentials and time step.
#[derive(Debug, Clone)]
pub struct PauliPropagator {
    spectral: Spectral,
    kinetic: Vec<C64>,
    local: Vec<Mat2>,
}

impl PauliPropagator {
    pub fn new(
        grid: Grid1D,
        pot: &ExternalPotentials,
        params: &PlasmaParams,
        dt: f64,
        momentum_offset: f64,
    ) -> Result<Self> {
        params.validate()?;
        pot.validate(&grid)?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::param("dt", format!("must be > 0, got {dt}")));
        }
        let (m, e, hbar) = (params.mass, params.charge, params.hbar);
        let spectral = Spectral::new(grid);
        let shift = momentum_offset + e * pot.a_x();
        let mut worst: f64 = 0.0;
        let kinetic = spectral
            .wavenumbers()
            .iter()
            .map(|&k| {
                let p = hbar * k + shift;
                let phase = p * p * dt / (2.0 * m * hbar);
                worst = worst.max(phase);
                C64::from_polar(1.0, -phase)
            })
            .collect();
        if worst > PI {
            return Err(Error::StepRejected {
                guard: "spectral phase",
                ratio: worst,
                limit: PI,
            });
        }
        let mu_b = params.mu_b();
        let local = (0..grid.n)
            .map(|j| {
                let v = -e * pot.phi[j]
                    + e * e * (pot.a[1][j].powi(2) + pot.a[2][j].powi(2)) / (2.0 * m);
                let b = [pot.b[0][j], pot.b[1][j], pot.b[2][j]];
                let bn = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
                let u = if bn > 0.0 {
                    su2(
                        mu_b * bn * dt / (2.0 * hbar),
                        [b[0] / bn, b[1] / bn, b[2] / bn],
                    )
                } else {
                    su2(0.0, [0.0, 0.0, 1.0])
                };
                let g = C64::from_polar(1.0, -v * dt / (2.0 * hbar));
                u.map(|row| row.map(|z| z * g))
            })
            .collect();
        Ok(Self {
            spectral,
            kinetic,
            local,
        })
    }

    fn apply_local(&self, s: &mut SpinorField) {
        for (j, u) in self.local.iter().enumerate() {
            let (a, b) = (s.up[j], s.down[j]);
            s.up[j] = u[0][0] * a + u[0][1] * b;
            s.down[j] = u[1][0] * a + u[1][1] * b;
        }
    }

    fn apply_kinetic(&self, c: &mut [C64]) {
        self.spectral.forward(c);
        c.iter_mut().zip(&self.kinetic).for_each(|(z, k)| *z *= k);
        self.spectral.inverse(c);
    }

    pub fn step(&self, s: &mut SpinorField) {
        self.apply_local(s);
        self.apply_kinetic(&mut s.up);
        self.apply_kinetic(&mut s.down);
        self.apply_local(s);
    }
}

/// One Strang step of length `dt`.
pub fn step_pauli(
    state: &SpinorField,
    pot: &ExternalPotentials,
    params: &PlasmaParams,
    dt: f64,
) -> Result<SpinorField> {
    let prop = PauliPropagator::new(state.grid, pot, params, dt, state.momentum_offset)?;
    let mut out = state.clone();
    prop.step(&mut out);
    Ok(out)
}

/// Local fluid variables of a spinor.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorObservables {
    pub n: Vec<f64>,
    /// Velocity; NaN where masked.
    pub v: Vec<f64>,
    /// Spin density `(ħ/2) ψ†σψ / n`; NaN where masked.
    pub s: Vec<Vec3>,
    /// True where `n ≥ MASK_FRACTION · max n`.
    pub defined: Vec<bool>,
}

pub const MASK_FRACTION: f64 = 1e-12;

/// Per-point `Re[ψ†(-iħ∂ + eA_x + p_off)ψ]` for both components.
pub(crate) fn current_density(
    state: &SpinorField,
    spectral: &Spectral,
    params: &PlasmaParams,
    a_x: &[f64],
) -> Vec<f64> {
    let du = spectral.derivative_complex(&state.up, 1);
    let dd = spectral.derivative_complex(&state.down, 1);
    (0..state.grid.n)
        .map(|j| {
            let shift = params.charge * a_x[j] + state.momentum_offset;
            let mut acc = 0.0;
            for (psi, d) in [(&state.up, &du), (&state.down, &dd)] {
                let z = psi[j].conj() * (C64::new(0.0, -params.hbar) * d[j] + psi[j] * shift);
                acc += z.re;
            }
            acc
        })
        .collect()
}

pub fn spinor_observables(
    state: &SpinorField,
    pot: &ExternalPotentials,
    params: &PlasmaParams,
) -> Result<SpinorObservables> {
    pot.check_shapes(&state.grid)?;
    let spectral = Spectral::new(state.grid);
    let n = state.density();
    let nmax = n.iter().copied().fold(0.0, f64::max);
    let j = current_density(state, &spectral, params, &pot.a[0]);
    let half = 0.5 * params.hbar;
    let mut v = Vec::with_capacity(n.len());
    let mut s = Vec::with_capacity(n.len());
    let mut defined = Vec::with_capacity(n.len());
    for i in 0..n.len() {
        let ok = n[i] >= MASK_FRACTION * nmax && n[i] > 0.0;
        defined.push(ok);
        if ok {
            v.push(j[i] / (params.mass * n[i]));
            let c = state.up[i].conj() * state.down[i];
            let (a2, b2) = (state.up[i].norm_sqr(), state.down[i].norm_sqr());
            s.push([2.0 * c.re, 2.0 * c.im, a2 - b2].map(|x| half * x / n[i]));
        } else {
            v.push(f64::NAN);
            s.push([f64::NAN; 3]);
        }
    }
    Ok(SpinorObservables { n, v, s, defined })
}

/// `⟨H⟩` for static potentials.
pub fn energy(state: &SpinorField, pot: &ExternalPotentials, params: &PlasmaParams) -> f64 {
    let spectral = Spectral::new(state.grid);
    let (m, e) = (params.mass, params.charge);
    let shift = state.momentum_offset + e * pot.a_x();
    let n = state.grid.n as f64;
    let mut kin = 0.0;
    for comp in [&state.up, &state.down] {
        let mut c = comp.clone();
        spectral.forward(&mut c);
        for (z, &k) in c.iter().zip(spectral.wavenumbers()) {
            let p = params.hbar * k + shift;
            kin += z.norm_sqr() * p * p / (2.0 * m);
        }
    }
    kin *= state.grid.dx() / n;
    let mu_b = params.mu_b();
    let mut local = 0.0;
    for j in 0..state.grid.n {
        let (a, b) = (state.up[j], state.down[j]);
        let dens = a.norm_sqr() + b.norm_sqr();
        let c = a.conj() * b;
        let sig = [2.0 * c.re, 2.0 * c.im, a.norm_sqr() - b.norm_sqr()];
        let v = -e * pot.phi[j] + e * e * (pot.a[1][j].powi(2) + pot.a[2][j].powi(2)) / (2.0 * m);
        local +=
            v * dens + mu_b * (pot.b[0][j] * sig[0] + pot.b[1][j] * sig[1] + pot.b[2][j] * sig[2]);
    }
    kin + local * state.grid.dx()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid1D {
        Grid1D::new(128, 40.0).unwrap()
    }

    fn gaussian(theta: f64, phi: f64) -> SpinorField {
        init_state(
            &StateFamily::Gaussian {
                x0: 20.0,
                sigma: 1.0,
                p0: 0.0,
                theta,
                phi,
            },
            grid(),
            &PlasmaParams::default(),
        )
        .unwrap()
    }

    #[test]
    fn init_orientation() {
        let s = gaussian(0.0, 0.0);
        assert!(s.down.iter().all(|z| z.norm() == 0.0));
        let s = gaussian(PI / 2.0, 0.0);
        for (a, b) in s.up.iter().zip(&s.down) {
            assert!((a - b).norm() < 1e-15);
        }
        let s = gaussian(1.1, 0.7);
        let m = s.mean_sigma();
        let want = [
            1.1f64.sin() * 0.7f64.cos(),
            1.1f64.sin() * 0.7f64.sin(),
            1.1f64.cos(),
        ];
        for c in 0..3 {
            assert!((m[c] - want[c]).abs() < 1e-12);
        }
        assert!(StateFamily::from_name("squeezed", serde_json::json!({})).is_err());
    }

    #[test]
    fn free_gaussian_spreads() {
        let p = PlasmaParams::default();
        let mut s = init_state(
            &StateFamily::Gaussian {
                x0: 20.0,
                sigma: std::f64::consts::FRAC_1_SQRT_2,
                p0: 0.0,
                theta: 0.0,
                phi: 0.0,
            },
            grid(),
            &p,
        )
        .unwrap();
        let pot = ExternalPotentials::zero(&s.grid);
        let dt = 0.01;
        let prop = PauliPropagator::new(s.grid, &pot, &p, dt, 0.0).unwrap();
        for _ in 0..200 {
            prop.step(&mut s);
        }
        let n = s.density();
        let g = s.grid;
        let mean: f64 = (0..g.n).map(|j| g.x(j) * n[j]).sum::<f64>() * g.dx();
        let var: f64 = (0..g.n)
            .map(|j| (g.x(j) - mean).powi(2) * n[j])
            .sum::<f64>()
            * g.dx();
        let width2 = 2.0 * var;
        let t: f64 = 2.0;
        assert!(
            ((width2 - (1.0 + t * t)) / (1.0 + t * t)).abs() < 1e-4,
            "{width2}"
        );
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zeeman_precession() {
        let p = PlasmaParams::with_hbar(0.5);
        let mut s = gaussian(PI / 2.0, 0.0);
        let b0 = 1.3;
        let pot = ExternalPotentials::uniform_b(&s.grid, [0.0, 0.0, b0]);
        let dt = 0.05;
        let prop = PauliPropagator::new(s.grid, &pot, &p, dt, 0.0).unwrap();
        for step in 1..=100 {
            prop.step(&mut s);
            let t = step as f64 * dt;
            let w = 2.0 * p.mu_b() * b0 / p.hbar;
            assert!((s.mean_sigma()[0] - (w * t).cos()).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_potential_is_a_phase() {
        let p = PlasmaParams::default();
        let s0 = gaussian(0.3, 0.2);
        let pot = ExternalPotentials::electrostatic(&s0.grid, vec![0.7; s0.grid.n]).unwrap();
        let free = ExternalPotentials::zero(&s0.grid);
        let a = step_pauli(&s0, &pot, &p, 0.05).unwrap();
        let b = step_pauli(&s0, &free, &p, 0.05).unwrap();
        for (x, y) in a.density().iter().zip(b.density()) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn guards() {
        let p = PlasmaParams::default();
        let s = gaussian(0.0, 0.0);
        let pot = ExternalPotentials::zero(&s.grid);
        assert!(matches!(
            step_pauli(&s, &pot, &p, 1.0),
            Err(Error::StepRejected { .. })
        ));
        assert!(step_pauli(&s, &pot, &p, -0.1).is_err());
        let mut bad = pot.clone();
        bad.a[0] = s.grid.points();
        assert!(step_pauli(&s, &bad, &p, 0.01).is_err());
    }

    #[test]
    fn observables() {
        let p = PlasmaParams::with_hbar(0.7);
        let g = grid();
        let s = init_state(
            &StateFamily::Gaussian {
                x0: 20.0,
                sigma: 1.5,
                p0: 0.9,
                theta: 0.0,
                phi: 0.0,
            },
            g,
            &p,
        )
        .unwrap();
        let obs = spinor_observables(&s, &ExternalPotentials::zero(&g), &p).unwrap();
        assert!((g.integrate(&obs.n) - 1.0).abs() < 1e-12);
        for j in 0..g.n {
            if obs.defined[j] {
                assert!((obs.v[j] - 0.9).abs() < 1e-10, "{j} {}", obs.v[j]);
                assert!((obs.s[j][2] - 0.35).abs() < 1e-15);
            }
        }
        let pw = init_state(
            &StateFamily::PlaneWave {
                p0: 1.234,
                theta: 2.0,
                phi: 1.0,
            },
            g,
            &p,
        )
        .unwrap();
        let obs = spinor_observables(&pw, &ExternalPotentials::zero(&g), &p).unwrap();
        assert!(obs.v.iter().all(|v| (v - 1.234).abs() < 1e-12));
    }
}
