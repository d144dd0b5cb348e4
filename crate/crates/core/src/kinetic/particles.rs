//! Spin macroparticles and their initial loading.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::sphere::{norm, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinParticle {
    pub x: f64,
    pub v: Vec3,
    /// Unit spin direction; the spin vector is `(ħ/2) s`.
    pub s: Vec3,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleEnsemble {
    pub grid: Grid1D,
    pub particles: Vec<SpinParticle>,
}

/// Tolerance on `| |ŝ| − 1 |`.
pub const SPIN_NORM_TOL: f64 = 1e-12;

impl ParticleEnsemble {
    pub fn new(grid: Grid1D, particles: Vec<SpinParticle>) -> Result<Self> {
        for (i, p) in particles.iter().enumerate() {
            if !(p.w > 0.0 && p.w.is_finite()) {
                return Err(Error::param(
                    "weight",
                    format!("particle {i} has weight {}", p.w),
                ));
            }
            let m = norm(p.s);
            if (m - 1.0).abs() > SPIN_NORM_TOL {
                return Err(Error::SpinMagnitude {
                    index: i,
                    magnitude: m,
                    expected: 1.0,
                });
            }
        }
        let mut ens = Self { grid, particles };
        ens.wrap();
        Ok(ens)
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn wrap(&mut self) {
        let g = self.grid;
        self.particles.iter_mut().for_each(|p| p.x = g.wrap(p.x));
    }

    pub fn total_weight(&self) -> f64 {
        self.particles.iter().map(|p| p.w).sum()
    }

    /// Largest `| |ŝ| − 1 |` over the ensemble.
    pub fn spin_norm_deviation(&self) -> f64 {
        self.particles
            .iter()
            .map(|p| (norm(p.s) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `Σ w m |v|² / 2`.
    pub fn kinetic_energy(&self, mass: f64) -> f64 {
        self.particles
            .iter()
            .map(|p| 0.5 * mass * p.w * (p.v[0] * p.v[0] + p.v[1] * p.v[1] + p.v[2] * p.v[2]))
            .sum()
    }

    /// `Σ w m v`.
    pub fn momentum(&self, mass: f64) -> Vec3 {
        let mut m = [0.0; 3];
        for p in &self.particles {
            for c in 0..3 {
                m[c] += mass * p.w * p.v[c];
            }
        }
        m
    }

    /// Weighted mean of `ŝ`.
    pub fn mean_spin(&self) -> Vec3 {
        let w = self.total_weight();
        let mut s = [0.0; 3];
        for p in &self.particles {
            for c in 0..3 {
                s[c] += p.w * p.s[c];
            }
        }
        s.map(|v| v / w)
    }
}

/// Independent random streams derived from one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Positions = 1,
    Velocities = 2,
    Spins = 3,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// How spin directions are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpinLoading {
    /// Every particle points along `dir`.
    Aligned { dir: Vec3 },
    /// Directions distributed as the Q-function `(1 + ŝ·d)/4π` of the pure state along `dir`.
    QFunction { dir: Vec3 },
}

/// Initial phase-space loading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadSpec {
    pub n_particles: usize,
    /// Mean density `n0`; each weight is `n0 L / N`.
    pub density: f64,
    /// Relative amplitude `ε` of a `cos(k x)` density perturbation.
    #[serde(default)]
    pub perturbation: f64,
    /// Mode number of the perturbation.
    #[serde(default = "one")]
    pub mode: usize,
    #[serde(default)]
    pub drift: Vec3,
    #[serde(default)]
    pub v_thermal: f64,
    pub spin: SpinLoading,
    /// Stratified positions and low-discrepancy velocities and spins.
    #[serde(default = "yes")]
    pub quiet: bool,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

fn unit(v: Vec3) -> Result<Vec3> {
    let n = norm(v);
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::param("spin direction", "must be a nonzero vector"));
    }
    Ok(v.map(|c| c / n))
}

/// Orthonormal `(e1, e2)` completing `d` to a right-handed frame.
fn frame(d: Vec3) -> (Vec3, Vec3) {
    let a = if d[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let e1 = crate::sphere::cross(d, a);
    let n1 = norm(e1);
    let e1 = e1.map(|c| c / n1);
    (e1, crate::sphere::cross(d, e1))
}

/// Direction with cosine `u` to `d` and azimuth `phi` about it.
fn direction(d: Vec3, u: f64, phi: f64) -> Vec3 {
    let (e1, e2) = frame(d);
    let st = (1.0 - u * u).max(0.0).sqrt();
    let (sp, cp) = phi.sin_cos();
    let s = [0, 1, 2].map(|c| u * d[c] + st * (cp * e1[c] + sp * e2[c]));
    let n = norm(s);
    s.map(|c| c / n)
}

/// Van der Corput radical inverse in `base`.
fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Inverse of `x + (ε/k) sin(k x)` scaled to `[0, L)`, by Newton iteration.
fn perturbed_position(target: f64, eps: f64, k: f64) -> f64 {
    let mut x = target;
    for _ in 0..50 {
        let g = x + eps / k * (k * x).sin() - target;
        let dg = 1.0 + eps * (k * x).cos();
        let step = g / dg;
        x -= step;
        if step.abs() < 1e-15 * (1.0 + x.abs()) {
            break;
        }
    }
    x
}

pub fn load_particles(grid: Grid1D, spec: &LoadSpec) -> Result<ParticleEnsemble> {
    let n = spec.n_particles;
    if n == 0 {
        return Err(Error::param("n_particles", "must be positive"));
    }
    if !(spec.density > 0.0) {
        return Err(Error::param("density", "must be positive"));
    }
    if !(spec.perturbation.abs() < 1.0) {
        return Err(Error::param("perturbation", "must satisfy |eps| < 1"));
    }
    if spec.v_thermal < 0.0 {
        return Err(Error::param("v_thermal", "must be nonnegative"));
    }
    let l = grid.length;
    let k = 2.0 * PI * spec.mode as f64 / l;
    let w = spec.density * l / n as f64;
    let mut pos_rng = stream_rng(spec.seed, Stream::Positions);
    let mut vel_rng = stream_rng(spec.seed, Stream::Velocities);
    let mut spin_rng = stream_rng(spec.seed, Stream::Spins);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let u = if spec.quiet {
            (i as f64 + 0.5) / n as f64
        } else {
            pos_rng.gen::<f64>()
        };
        let x = if spec.perturbation != 0.0 {
            perturbed_position(u * l, spec.perturbation, k)
        } else {
            u * l
        };
        let mut v = spec.drift;
        if spec.v_thermal > 0.0 {
            for c in v.iter_mut() {
                let z: f64 = vel_rng.sample(StandardNormal);
                *c += spec.v_thermal * z;
            }
        }
        let s = match spec.spin {
            SpinLoading::Aligned { dir } => unit(dir)?,
            SpinLoading::QFunction { dir } => {
                let d = unit(dir)?;
                let (a, b) = if spec.quiet {
                    (
                        radical_inverse(i as u64 + 1, 2),
                        radical_inverse(i as u64 + 1, 3),
                    )
                } else {
                    (spin_rng.gen::<f64>(), spin_rng.gen::<f64>())
                };
                direction(d, 2.0 * a.sqrt() - 1.0, 2.0 * PI * b)
            }
        };
        out.push(SpinParticle { x, v, s, w });
    }
    ParticleEnsemble::new(grid, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(spin: SpinLoading) -> LoadSpec {
        LoadSpec {
            n_particles: 4000,
            density: 2.0,
            perturbation: 0.0,
            mode: 1,
            drift: [0.0; 3],
            v_thermal: 0.0,
            spin,
            quiet: true,
            seed: 7,
        }
    }

    #[test]
    fn weights_normalize_to_density() {
        let g = Grid1D::new(16, 5.0).unwrap();
        let e = load_particles(
            g,
            &spec(SpinLoading::Aligned {
                dir: [0.0, 0.0, 2.0],
            }),
        )
        .unwrap();
        assert!((e.total_weight() - 10.0).abs() < 1e-10);
        assert!(e.particles.iter().all(|p| p.s == [0.0, 0.0, 1.0]));
    }

    #[test]
    fn q_function_spins_have_factor_three_mean() {
        let g = Grid1D::new(16, 5.0).unwrap();
        let e = load_particles(
            g,
            &spec(SpinLoading::QFunction {
                dir: [1.0, 0.0, 0.0],
            }),
        )
        .unwrap();
        let m = e.mean_spin();
        assert!((3.0 * m[0] - 1.0).abs() < 1e-2, "{m:?}");
        assert!(m[1].abs() < 1e-2 && m[2].abs() < 1e-2);
        assert!(e.spin_norm_deviation() < 1e-14);
    }

    #[test]
    fn seeded_loading_is_reproducible() {
        let g = Grid1D::new(16, 5.0).unwrap();
        let mut s = spec(SpinLoading::QFunction {
            dir: [0.0, 1.0, 1.0],
        });
        s.quiet = false;
        s.v_thermal = 0.3;
        let a = load_particles(g, &s).unwrap();
        let b = load_particles(g, &s).unwrap();
        assert_eq!(a, b);
        s.seed += 1;
        assert_ne!(a, load_particles(g, &s).unwrap());
    }

    #[test]
    fn perturbed_positions_follow_the_density() {
        let g = Grid1D::new(32, 2.0 * PI).unwrap();
        let mut s = spec(SpinLoading::Aligned {
            dir: [0.0, 0.0, 1.0],
        });
        s.perturbation = 0.1;
        s.n_particles = 100_000;
        let e = load_particles(g, &s).unwrap();
        let c: f64 = e.particles.iter().map(|p| p.w * p.x.cos()).sum::<f64>() / g.length;
        // ∫ n0 (1 + ε cos x) cos x dx / L = n0 ε / 2
        assert!((c - 2.0 * 0.1 / 2.0).abs() < 1e-4, "{c}");
    }
}
