//! Characteristics of the semiclassical spin-Vlasov equation.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::external::PointField;
use crate::fields::{ExternalField, FieldState};
use crate::grid::Spectral;
use crate::kinetic::particles::ParticleEnsemble;
use crate::params::PlasmaParams;
use crate::sphere::{cross, dot, mat_vec, norm, rodrigues_matrix};

/// Combined grid and analytic fields, gathered at particle positions.
#[derive(Debug, Clone)]
pub struct FieldSampler<'a> {
    grid: Option<&'a FieldState>,
    db_dx: Option<[Vec<f64>; 3]>,
    external: Option<&'a ExternalField>,
    length: f64,
}

impl<'a> FieldSampler<'a> {
    pub fn new(
        grid: Option<&'a FieldState>,
        external: Option<&'a ExternalField>,
        length: f64,
    ) -> Self {
        let db_dx = grid.map(|fs| {
            let sp = Spectral::new(fs.grid);
            [
                vec![0.0; fs.grid.n],
                sp.derivative(&fs.b[1], 1),
                sp.derivative(&fs.b[2], 1),
            ]
        });
        Self {
            grid,
            db_dx,
            external,
            length,
        }
    }

    pub fn external_only(external: &'a ExternalField, length: f64) -> Self {
        Self::new(None, Some(external), length)
    }

    pub fn at(&self, x: f64) -> PointField {
        let mut p = match self.external {
            Some(ext) => ext.eval(x, self.length),
            None => PointField::default(),
        };
        if let (Some(fs), Some(db)) = (self.grid, &self.db_dx) {
            let (e, b) = fs.interpolate(x);
            for c in 0..3 {
                p.e[c] += e[c];
                p.b[c] += b[c];
                p.db_dx[c] += fs.sample(&db[c], x - fs.position(0, c, true));
            }
        }
        p
    }

    /// Upper bound on `|B|` used by the step guard.
    pub fn b_max(&self) -> f64 {
        let mut m = self.external.map(|e| e.b_max(self.length)).unwrap_or(0.0);
        if let Some(fs) = self.grid {
            let gmax = (0..fs.grid.n)
                .map(|j| norm([fs.b[0][j], fs.b[1][j], fs.b[2][j]]))
                .fold(0.0, f64::max);
            m += gmax;
        }
        m
    }
}

/// Largest accepted `ω_c dt`.
pub const CYCLOTRON_GUARD: f64 = 0.5;

/// Advances positions, velocities and spins by `dt`.
///
/// Positions and spins live on integer time levels and velocities on half
/// levels. The velocity update is a Boris rotation framed by two half kicks
/// from `−e E` and the dipole force `−μ_B ∂ₓ(ŝ·B)`; the spin is then rotated
/// about `B` at the mid-point of the drift through the angle `(e/m)|B| dt`.
pub fn push_particles(
    ens: &ParticleEnsemble,
    fields: &FieldSampler<'_>,
    params: &PlasmaParams,
    dt: f64,
) -> Result<ParticleEnsemble> {
    params.validate()?;
    let qm = -params.charge / params.mass;
    let wc = params.charge * fields.b_max() / params.mass;
    if !(dt > 0.0) || wc * dt >= CYCLOTRON_GUARD {
        return Err(Error::StepRejected {
            guard: "cyclotron",
            ratio: wc * dt,
            limit: CYCLOTRON_GUARD,
        });
    }
    let dipole = params.mu_b() / params.mass;
    let rate = params.precession_rate();
    let g = ens.grid;
    let mut out = ens.clone();
    out.particles.par_iter_mut().for_each(|p| {
        let f = fields.at(p.x);
        let ax = qm * f.e[0] - dipole * dot(p.s, f.db_dx);
        let kick = [ax, qm * f.e[1], qm * f.e[2]].map(|a| 0.5 * dt * a);
        let mut v = [0, 1, 2].map(|c| p.v[c] + kick[c]);
        let t = f.b.map(|b| 0.5 * dt * qm * b);
        let t2 = dot(t, t);
        let vp = {
            let c = cross(v, t);
            [0, 1, 2].map(|i| v[i] + c[i])
        };
        let s = t.map(|x| 2.0 * x / (1.0 + t2));
        let c = cross(vp, s);
        v = [0, 1, 2].map(|i| v[i] + c[i] + kick[i]);
        p.v = v;
        let mid = p.x + 0.5 * dt * v[0];
        p.x = g.wrap(p.x + dt * v[0]);
        let bm = fields.at(g.wrap(mid)).b;
        let bn = norm(bm);
        if bn > 0.0 {
            let r = rodrigues_matrix(bm, rate * bn * dt);
            let s = mat_vec(&r, p.s);
            let n = norm(s);
            p.s = s.map(|c| c / n);
        }
    });
    Ok(out)
}

/// Shifts velocities back by half a step so they sit at `t − dt/2`.
pub fn stagger_velocities(
    ens: &mut ParticleEnsemble,
    fields: &FieldSampler<'_>,
    params: &PlasmaParams,
    dt: f64,
) {
    let qm = -params.charge / params.mass;
    let dipole = params.mu_b() / params.mass;
    for p in &mut ens.particles {
        let f = fields.at(p.x);
        let a = [
            qm * (f.e[0] + p.v[1] * f.b[2] - p.v[2] * f.b[1]) - dipole * dot(p.s, f.db_dx),
            qm * (f.e[1] + p.v[2] * f.b[0] - p.v[0] * f.b[2]),
            qm * (f.e[2] + p.v[0] * f.b[1] - p.v[1] * f.b[0]),
        ];
        for c in 0..3 {
            p.v[c] -= 0.5 * dt * a[c];
        }
    }
}
