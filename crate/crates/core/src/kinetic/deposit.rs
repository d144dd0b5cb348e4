//! Charge, current and magnetization deposition with the linear shape function.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{bound_current, cic_weights, CurlMethod};
use crate::grid::Grid1D;
use crate::kinetic::particles::ParticleEnsemble;
use crate::params::PlasmaParams;

/// Particles per deposition chunk. Chunks are reduced in index order so the
/// result does not depend on the number of threads.
pub const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct Sources {
    /// Number density `Σ w S(x − x_i)`.
    pub density: Vec<f64>,
    /// `−e n`.
    pub rho_c: Vec<f64>,
    /// `−e Σ w v S`.
    pub j_free: [Vec<f64>; 3],
    /// `−3 μ_B Σ w ŝ S`.
    pub m: [Vec<f64>; 3],
    /// `(0, −∂ₓM_z, ∂ₓM_y)`.
    pub j_bound: [Vec<f64>; 3],
}

/// Seven nodal moments: `n`, `n v`, `n ŝ`.
fn moments(grid: &Grid1D, ens: &ParticleEnsemble) -> [Vec<f64>; 7] {
    let n = grid.n;
    let partial: Vec<[Vec<f64>; 7]> = ens
        .particles
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
            for p in chunk {
                let (j0, j1, w1) = cic_weights(grid, p.x);
                let vals = [1.0, p.v[0], p.v[1], p.v[2], p.s[0], p.s[1], p.s[2]];
                for (a, v) in acc.iter_mut().zip(vals) {
                    a[j0] += p.w * v * (1.0 - w1);
                    a[j1] += p.w * v * w1;
                }
            }
            acc
        })
        .collect();
    let mut total: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
    for part in partial {
        for (t, p) in total.iter_mut().zip(part) {
            t.iter_mut().zip(p).for_each(|(a, b)| *a += b);
        }
    }
    let inv = 1.0 / grid.dx();
    for t in total.iter_mut() {
        t.iter_mut().for_each(|v| *v *= inv);
    }
    total
}

pub fn deposit_sources(ens: &ParticleEnsemble, params: &PlasmaParams, curl: CurlMethod) -> Sources {
    let g = ens.grid;
    let [n, nvx, nvy, nvz, nsx, nsy, nsz] = moments(&g, ens);
    let e = params.charge;
    let mcoef = -3.0 * params.mu_b();
    let scale = |v: &[f64], c: f64| v.iter().map(|x| x * c).collect::<Vec<_>>();
    let m = [scale(&nsx, mcoef), scale(&nsy, mcoef), scale(&nsz, mcoef)];
    let j_bound = bound_current(&g, &m, curl);
    Sources {
        rho_c: scale(&n, -e),
        j_free: [scale(&nvx, -e), scale(&nvy, -e), scale(&nvz, -e)],
        density: n,
        m,
        j_bound,
    }
}

/// Longitudinal current on the half nodes `x_{j+1/2}` from the motion between
/// two ensembles, such that `Δρ_c/dt + (J_{j+1/2} − J_{j−1/2})/Δx = 0` holds
/// exactly for the linear-shape charge density.
pub fn conserving_current(
    old: &ParticleEnsemble,
    new: &ParticleEnsemble,
    params: &PlasmaParams,
    dt: f64,
) -> Result<Vec<f64>> {
    let g = old.grid;
    if old.len() != new.len() || old.grid != new.grid {
        return Err(Error::GridMismatch(
            "ensembles differ in size or grid".into(),
        ));
    }
    let dx = g.dx();
    let l = g.length;
    let n = g.n;
    let q = -params.charge;
    let partial: Vec<Result<Vec<f64>>> = old
        .particles
        .par_chunks(CHUNK)
        .zip(new.particles.par_chunks(CHUNK))
        .map(|(a, b)| {
            let mut acc = vec![0.0; n];
            for (p0, p1) in a.iter().zip(b) {
                let mut d = p1.x - p0.x;
                d -= l * (d / l).round();
                if d.abs() >= dx {
                    return Err(Error::StepRejected {
                        guard: "particle crossing",
                        ratio: d.abs() / dx,
                        limit: 1.0,
                    });
                }
                let (x0, x1) = (p0.x, p0.x + d);
                let right = |x: f64, f: f64| ((x + 0.5 * dx - f) / dx).clamp(0.0, 1.0);
                let lo = (x0.min(x1) / dx - 1.0).floor() as i64 - 1;
                let hi = (x0.max(x1) / dx + 1.0).ceil() as i64;
                for k in lo..=hi {
                    let f = (k as f64 + 0.5) * dx;
                    let dr = right(x1, f) - right(x0, f);
                    if dr != 0.0 {
                        acc[k.rem_euclid(n as i64) as usize] += q * p0.w * dr / dt;
                    }
                }
            }
            Ok(acc)
        })
        .collect();
    let mut j = vec![0.0; n];
    for part in partial {
        j.iter_mut().zip(part?).for_each(|(a, b)| *a += b);
    }
    Ok(j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetic::particles::SpinParticle;

    #[test]
    fn single_particle_charge() {
        let g = Grid1D::new(10, 2.0).unwrap();
        let p = PlasmaParams::default();
        let e = ParticleEnsemble::new(
            g,
            vec![SpinParticle {
                x: 0.73,
                v: [0.1, 0.0, 0.0],
                s: [0.0, 0.0, 1.0],
                w: 0.6,
            }],
        )
        .unwrap();
        let s = deposit_sources(&e, &p, CurlMethod::Spectral);
        assert!((g.integrate(&s.rho_c) + 0.6).abs() < 1e-15);
        assert!((g.integrate(&s.m[2]) + 3.0 * p.mu_b() * 0.6).abs() < 1e-15);
    }

    #[test]
    fn uniform_aligned_spins_have_no_bound_current() {
        let g = Grid1D::new(16, 4.0).unwrap();
        let p = PlasmaParams::default();
        let parts = (0..160)
            .map(|i| SpinParticle {
                x: (i as f64 + 0.5) * 4.0 / 160.0,
                v: [0.0; 3],
                s: [0.0, 0.0, 1.0],
                w: 0.025,
            })
            .collect();
        let e = ParticleEnsemble::new(g, parts).unwrap();
        let s = deposit_sources(&e, &p, CurlMethod::Spectral);
        assert!(s.j_bound.iter().flatten().all(|v| v.abs() < 1e-12));
        assert!(s.m[2].iter().all(|v| (v + 3.0 * p.mu_b()).abs() < 1e-12));
    }

    #[test]
    fn current_satisfies_discrete_continuity() {
        let g = Grid1D::new(12, 3.0).unwrap();
        let p = PlasmaParams::default();
        let dt = 0.1;
        let parts: Vec<SpinParticle> = (0..37)
            .map(|i| {
                let x = (i as f64 * 0.618 * 3.0) % 3.0;
                let v = 2.0 * ((i as f64) * 1.3).sin();
                SpinParticle {
                    x,
                    v: [v, 0.0, 0.0],
                    s: [0.0, 0.0, 1.0],
                    w: 0.1 + 0.01 * i as f64,
                }
            })
            .collect();
        let old = ParticleEnsemble::new(g, parts.clone()).unwrap();
        let moved = parts
            .iter()
            .map(|q| SpinParticle {
                x: g.wrap(q.x + q.v[0] * dt),
                ..*q
            })
            .collect();
        let new = ParticleEnsemble::new(g, moved).unwrap();
        let j = conserving_current(&old, &new, &p, dt).unwrap();
        let r0 = deposit_sources(&old, &p, CurlMethod::Spectral).rho_c;
        let r1 = deposit_sources(&new, &p, CurlMethod::Spectral).rho_c;
        for k in 0..g.n {
            let km = (k + g.n - 1) % g.n;
            let res = (r1[k] - r0[k]) / dt + (j[k] - j[km]) / g.dx();
            assert!(res.abs() < 1e-12, "{k}: {res}");
        }
    }
}
