//! Eulerian advection of `f(x, v, ŝ)` on a fixed extended phase-space grid.
//!
//! Storage is `[x][v_x][v_y][sphere node]`. Velocity cells are centred and the
//! velocity boundaries admit no inflow; `x` is periodic.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::external::ExternalField;
use crate::fields::FieldState;
use crate::grid::{Grid1D, Spectral};
use crate::params::PlasmaParams;
use crate::sphere::{dot, norm, SphereBasis, SphereQuadrature, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityAxis {
    /// Number of cells.
    pub n: usize,
    pub v_max: f64,
}

impl VelocityAxis {
    pub fn new(n: usize, v_max: f64) -> Result<Self> {
        if n < 4 {
            return Err(Error::param("n_v", format!("need >= 4 cells, got {n}")));
        }
        if !(v_max > 0.0 && v_max.is_finite()) {
            return Err(Error::param("v_max", "must be finite and > 0"));
        }
        Ok(Self { n, v_max })
    }

    pub fn dv(&self) -> f64 {
        2.0 * self.v_max / self.n as f64
    }

    /// Centre of cell `q`.
    pub fn value(&self, q: usize) -> f64 {
        -self.v_max + (q as f64 + 0.5) * self.dv()
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.n).map(|q| self.value(q)).collect()
    }
}

/// `v_x` only (1V) or `(v_x, v_y)` (2V).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocitySpace {
    pub vx: VelocityAxis,
    pub vy: Option<VelocityAxis>,
}

impl VelocitySpace {
    pub fn one(vx: VelocityAxis) -> Self {
        Self { vx, vy: None }
    }

    pub fn two(vx: VelocityAxis, vy: VelocityAxis) -> Self {
        Self { vx, vy: Some(vy) }
    }

    pub fn nvy(&self) -> usize {
        self.vy.map_or(1, |a| a.n)
    }

    pub fn vy_value(&self, q: usize) -> f64 {
        self.vy.map_or(0.0, |a| a.value(q))
    }

    pub fn cell_volume(&self) -> f64 {
        self.vx.dv() * self.vy.map_or(1.0, |a| a.dv())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedDistribution {
    pub grid: Grid1D,
    pub velocity: VelocitySpace,
    pub quadrature: Arc<SphereQuadrature>,
    pub values: Vec<f64>,
}

impl ExtendedDistribution {
    pub fn new(
        grid: Grid1D,
        velocity: VelocitySpace,
        quadrature: Arc<SphereQuadrature>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let want = grid.n * velocity.vx.n * velocity.nvy() * quadrature.len();
        if values.len() != want {
            return Err(Error::GridMismatch(format!(
                "distribution has {} values, grid needs {want}",
                values.len()
            )));
        }
        let f = Self {
            grid,
            velocity,
            quadrature,
            values,
        };
        f.check_finite()?;
        Ok(f)
    }

    pub fn from_fn<F>(
        grid: Grid1D,
        velocity: VelocitySpace,
        quadrature: Arc<SphereQuadrature>,
        f: F,
    ) -> Self
    where
        F: Fn(f64, [f64; 2], Vec3) -> f64 + Sync,
    {
        let nvx = velocity.vx.n;
        let nvy = velocity.nvy();
        let ns = quadrature.len();
        let row = nvx * nvy * ns;
        let mut values = vec![0.0; grid.n * row];
        values
            .par_chunks_mut(row)
            .enumerate()
            .for_each(|(ix, out)| {
                let x = grid.x(ix);
                for q in 0..nvx {
                    let vx = velocity.vx.value(q);
                    for r in 0..nvy {
                        let vy = velocity.vy_value(r);
                        for (is, s) in quadrature.nodes.iter().enumerate() {
                            out[(q * nvy + r) * ns + is] = f(x, [vx, vy], *s);
                        }
                    }
                }
            });
        Self {
            grid,
            velocity,
            quadrature,
            values,
        }
    }

    pub fn n_sphere(&self) -> usize {
        self.quadrature.len()
    }

    /// Values per spatial node.
    pub fn row_len(&self) -> usize {
        self.velocity.vx.n * self.velocity.nvy() * self.n_sphere()
    }

    pub fn index(&self, ix: usize, ivx: usize, ivy: usize, is: usize) -> usize {
        ((ix * self.velocity.vx.n + ivx) * self.velocity.nvy() + ivy) * self.n_sphere() + is
    }

    pub fn at(&self, ix: usize, ivx: usize, ivy: usize, is: usize) -> f64 {
        self.values[self.index(ix, ivx, ivy, is)]
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::param(
                "distribution",
                format!("non-finite value at flat index {i}"),
            )),
            None => Ok(()),
        }
    }

    /// Per-node moments `∫∫ w(v, ŝ) f dv dΩ`.
    fn moment<W>(&self, weight: W) -> Vec<f64>
    where
        W: Fn([f64; 2], Vec3) -> f64 + Sync,
    {
        let nvy = self.velocity.nvy();
        let ns = self.n_sphere();
        let dv = self.velocity.cell_volume();
        let q = &self.quadrature;
        let vel = self.velocity;
        self.values
            .par_chunks(self.row_len())
            .map(|row| {
                let mut acc = 0.0;
                for ivx in 0..vel.vx.n {
                    let vx = vel.vx.value(ivx);
                    for ivy in 0..nvy {
                        let v = [vx, vel.vy_value(ivy)];
                        let base = (ivx * nvy + ivy) * ns;
                        for is in 0..ns {
                            acc += row[base + is] * q.weights[is] * weight(v, q.nodes[is]);
                        }
                    }
                }
                acc * dv
            })
            .collect()
    }

    pub fn density(&self) -> Vec<f64> {
        self.moment(|_, _| 1.0)
    }

    /// `∫∫ v f dv dΩ` for `v_x` and `v_y`.
    pub fn flux(&self) -> [Vec<f64>; 2] {
        [self.moment(|v, _| v[0]), self.moment(|v, _| v[1])]
    }

    /// `∫∫ ŝ f dv dΩ`.
    pub fn spin_moment(&self) -> [Vec<f64>; 3] {
        [0, 1, 2].map(|a| self.moment(move |_, s| s[a]))
    }

    /// `∫∫∫ f dx dv dΩ`.
    pub fn total(&self) -> f64 {
        self.grid.integrate(&self.density())
    }

    /// `∫∫∫ |f − g| dx dv dΩ`.
    pub fn l1_distance(&self, other: &Self) -> Result<f64> {
        if self.values.len() != other.values.len()
            || self.grid != other.grid
            || self.velocity != other.velocity
        {
            return Err(Error::GridMismatch(
                "distributions live on different grids".into(),
            ));
        }
        let ns = self.n_sphere();
        let w = &self.quadrature.weights;
        let sum: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .enumerate()
            .map(|(i, (a, b))| (a - b).abs() * w[i % ns])
            .sum();
        Ok(sum * self.grid.dx() * self.velocity.cell_volume())
    }
}

/// Nodal `E`, `B` and `∂ₓB` seen by the Eulerian solver.
#[derive(Debug, Clone, PartialEq)]
pub struct EulerianFields {
    pub e: [Vec<f64>; 3],
    pub b: [Vec<f64>; 3],
    pub db_dx: [Vec<f64>; 3],
}

impl EulerianFields {
    pub fn zero(grid: Grid1D) -> Self {
        let z = || std::array::from_fn(|_| vec![0.0; grid.n]);
        Self {
            e: z(),
            b: z(),
            db_dx: z(),
        }
    }

    pub fn from_external(field: &ExternalField, grid: Grid1D) -> Self {
        let mut out = Self::zero(grid);
        for j in 0..grid.n {
            let p = field.eval(grid.x(j), grid.length);
            for c in 0..3 {
                out.e[c][j] = p.e[c];
                out.b[c][j] = p.b[c];
                out.db_dx[c][j] = p.db_dx[c];
            }
        }
        out
    }

    /// Interpolates a field state to the nodes; `∂ₓB` is spectral.
    pub fn from_state(fs: &FieldState) -> Self {
        let g = fs.grid;
        let mut out = Self::zero(g);
        for j in 0..g.n {
            let (e, b) = fs.interpolate(g.x(j));
            for c in 0..3 {
                out.e[c][j] = e[c];
                out.b[c][j] = b[c];
            }
        }
        let sp = Spectral::new(g);
        for c in 0..3 {
            out.db_dx[c] = sp.derivative(&out.b[c], 1);
        }
        out
    }

    pub fn add(&mut self, other: &Self) {
        for c in 0..3 {
            for (a, b) in [
                (&mut self.e[c], &other.e[c]),
                (&mut self.b[c], &other.b[c]),
                (&mut self.db_dx[c], &other.db_dx[c]),
            ] {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            }
        }
    }

    fn check(&self, grid: &Grid1D) -> Result<()> {
        for v in self.e.iter().chain(&self.b).chain(&self.db_dx) {
            grid.check_len(v.len(), "field")?;
        }
        Ok(())
    }

    fn point(data: &[Vec<f64>; 3], j: usize) -> Vec3 {
        [data[0][j], data[1][j], data[2][j]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Limiter {
    /// Monotonized central.
    #[default]
    Mc,
    /// Plain Lax–Wendroff.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EulerianOptions {
    pub limiter: Limiter,
    pub quantum_term: bool,
}

/// Largest accepted spin rotation angle per step.
pub const SPIN_ANGLE_GUARD: f64 = PI / 4.0;

fn limited_slope(upwind: f64, local: f64, lim: Limiter) -> f64 {
    match lim {
        Limiter::None => local,
        Limiter::Mc => {
            if upwind * local <= 0.0 {
                0.0
            } else {
                let m = (2.0 * upwind.abs())
                    .min(0.5 * (upwind + local).abs())
                    .min(2.0 * local.abs());
                m.copysign(local)
            }
        }
    }
}

/// Upwind-biased value on the face between `f0` and `f1`.
#[inline]
fn face(fm1: f64, f0: f64, f1: f64, f2: f64, nu: f64, lim: Limiter) -> f64 {
    if nu >= 0.0 {
        f0 + 0.5 * (1.0 - nu) * limited_slope(f0 - fm1, f1 - f0, lim)
    } else {
        f1 - 0.5 * (1.0 + nu) * limited_slope(f2 - f1, f1 - f0, lim)
    }
}

/// One conservative step of `∂ₜf + a ∂f = 0` along a line, Courant number `nu`.
fn advect_line(line: &[f64], nu: f64, periodic: bool, lim: Limiter, out: &mut [f64]) {
    let n = line.len() as i64;
    let get = |i: i64| -> f64 {
        if periodic {
            line[i.rem_euclid(n) as usize]
        } else if (0..n).contains(&i) {
            line[i as usize]
        } else {
            0.0
        }
    };
    let mut left = face(get(-2), get(-1), get(0), get(1), nu, lim);
    for i in 0..n {
        let right = face(get(i - 1), get(i), get(i + 1), get(i + 2), nu, lim);
        out[i as usize] = line[i as usize] - nu * (right - left);
        left = right;
    }
}

/// Fourier interpolation kernel on `n` equispaced points, evaluated at offset `u`.
fn ring_kernel(n: usize, u: f64) -> f64 {
    let half = (n - 1) / 2;
    let mut k = 1.0;
    for m in 1..=half {
        k += 2.0 * (m as f64 * u).cos();
    }
    if n.is_multiple_of(2) {
        k += (0.5 * n as f64 * u).cos();
    }
    k / n as f64
}

/// Reusable Eulerian integrator for one sphere quadrature.
#[derive(Debug, Clone)]
pub struct EulerianSolver {
    quadrature: Arc<SphereQuadrature>,
    basis: SphereBasis,
    /// Dense tangential gradient per Cartesian component.
    gradient: [Vec<f64>; 3],
    pub options: EulerianOptions,
}

impl EulerianSolver {
    pub fn new(quadrature: Arc<SphereQuadrature>, options: EulerianOptions) -> Self {
        let basis = SphereBasis::new(&quadrature);
        let gradient = [0, 1, 2].map(|a| {
            let mut b = [0.0; 3];
            b[a] = 1.0;
            basis.gradient_operator(b)
        });
        Self {
            quadrature,
            basis,
            gradient,
            options,
        }
    }

    fn check(&self, f: &ExtendedDistribution, fields: &EulerianFields) -> Result<()> {
        if f.quadrature.n_theta != self.quadrature.n_theta
            || f.quadrature.n_phi != self.quadrature.n_phi
        {
            return Err(Error::GridMismatch(
                "sphere quadrature differs from the solver's".into(),
            ));
        }
        fields.check(&f.grid)
    }

    /// Checks the three stability limits and returns them as `(ratio, limit)` pairs.
    pub fn stability(
        &self,
        f: &ExtendedDistribution,
        fields: &EulerianFields,
        params: &PlasmaParams,
        dt: f64,
    ) -> Result<()> {
        params.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::param("dt", "must be finite and > 0"));
        }
        let vel = f.velocity;
        let qm = params.charge / params.mass;
        let dip = params.mu_b() / params.mass;
        let x_ratio = vel.vx.v_max * dt / f.grid.dx();
        if x_ratio > 1.0 {
            return Err(Error::StepRejected {
                guard: "x-advection CFL",
                ratio: x_ratio,
                limit: 1.0,
            });
        }
        let vy_max = vel.vy.map_or(0.0, |a| a.v_max);
        let mut ax: f64 = 0.0;
        let mut ay: f64 = 0.0;
        let mut bmax: f64 = 0.0;
        for j in 0..f.grid.n {
            let e = EulerianFields::point(&fields.e, j);
            let b = EulerianFields::point(&fields.b, j);
            let db = EulerianFields::point(&fields.db_dx, j);
            ax = ax.max(qm * (e[0].abs() + vy_max * b[2].abs()) + dip * norm(db));
            ay = ay.max(qm * (e[1].abs() + vel.vx.v_max * b[2].abs()));
            bmax = bmax.max(norm(b));
        }
        let mut v_ratio = ax * dt / vel.vx.dv();
        if let Some(vy) = vel.vy {
            v_ratio = v_ratio.max(ay * dt / vy.dv());
        }
        if v_ratio > 1.0 {
            return Err(Error::StepRejected {
                guard: "v-advection CFL",
                ratio: v_ratio,
                limit: 1.0,
            });
        }
        let angle = params.precession_rate() * bmax * dt;
        if angle >= SPIN_ANGLE_GUARD {
            return Err(Error::StepRejected {
                guard: "spin rotation",
                ratio: angle,
                limit: SPIN_ANGLE_GUARD,
            });
        }
        Ok(())
    }

    /// Advances `f` by `dt`.
    ///
    /// Transport is Strang split as `X(dt/2) V(dt/2) S(dt) V(dt/2) X(dt/2)`, with
    /// `V` itself split into `v_x` and `v_y` sweeps. The quantum spin-gradient
    /// term, when enabled, is added as the third-order Taylor increment
    /// `(e^{dt Q} − 1) f` of the input state.
    pub fn step(
        &self,
        f: &ExtendedDistribution,
        fields: &EulerianFields,
        params: &PlasmaParams,
        dt: f64,
    ) -> Result<ExtendedDistribution> {
        self.check(f, fields)?;
        self.stability(f, fields, params, dt)?;
        let half = 0.5 * dt;
        let two_v = f.velocity.vy.is_some();
        let mut v = self.advect_x(f, &f.values, half);
        v = self.advect_vx(f, fields, params, &v, half);
        if two_v {
            v = self.advect_vy(f, fields, params, &v, half);
        }
        v = self.rotate_spin(f, fields, params, &v, dt);
        if two_v {
            v = self.advect_vy(f, fields, params, &v, half);
        }
        v = self.advect_vx(f, fields, params, &v, half);
        v = self.advect_x(f, &v, half);
        if self.options.quantum_term {
            let inc = self.quantum_increment(f, fields, params, dt)?;
            v.iter_mut().zip(inc).for_each(|(a, b)| *a += b);
        }
        let out = ExtendedDistribution {
            values: v,
            ..f.clone()
        };
        out.check_finite()?;
        Ok(out)
    }

    fn advect_x(&self, f: &ExtendedDistribution, data: &[f64], tau: f64) -> Vec<f64> {
        let n = f.grid.n;
        let row = f.row_len();
        let per_vx = f.velocity.nvy() * f.n_sphere();
        let dx = f.grid.dx();
        let lim = self.options.limiter;
        let nu: Vec<f64> = (0..row)
            .map(|r| f.velocity.vx.value(r / per_vx) * tau / dx)
            .collect();
        let rows = |i: i64| &data[i.rem_euclid(n as i64) as usize * row..][..row];
        // faces[i] sits between nodes i and i + 1
        let faces: Vec<Vec<f64>> = (0..n as i64)
            .into_par_iter()
            .map(|i| {
                let (a, b, c, d) = (rows(i - 1), rows(i), rows(i + 1), rows(i + 2));
                (0..row)
                    .map(|r| face(a[r], b[r], c[r], d[r], nu[r], lim))
                    .collect()
            })
            .collect();
        let mut out = vec![0.0; data.len()];
        out.par_chunks_mut(row).enumerate().for_each(|(i, o)| {
            let right = &faces[i];
            let left = &faces[(i + n - 1) % n];
            let cur = &data[i * row..(i + 1) * row];
            for r in 0..row {
                o[r] = cur[r] - nu[r] * (right[r] - left[r]);
            }
        });
        out
    }

    fn advect_vx(
        &self,
        f: &ExtendedDistribution,
        fields: &EulerianFields,
        params: &PlasmaParams,
        data: &[f64],
        tau: f64,
    ) -> Vec<f64> {
        let vel = f.velocity;
        let (nvx, nvy, ns) = (vel.vx.n, vel.nvy(), f.n_sphere());
        let row = f.row_len();
        let qm = params.charge / params.mass;
        let dip = params.mu_b() / params.mass;
        let nodes = &f.quadrature.nodes;
        let lim = self.options.limiter;
        let dv = vel.vx.dv();
        let mut out = vec![0.0; data.len()];
        out.par_chunks_mut(row)
            .zip(data.par_chunks(row))
            .enumerate()
            .for_each(|(j, (o, d))| {
                let ex = fields.e[0][j];
                let bz = fields.b[2][j];
                let db = EulerianFields::point(&fields.db_dx, j);
                let mut line = vec![0.0; nvx];
                let mut res = vec![0.0; nvx];
                for iy in 0..nvy {
                    let vy = vel.vy_value(iy);
                    for is in 0..ns {
                        let a = -qm * (ex + vy * bz) - dip * dot(nodes[is], db);
                        let idx = |q: usize| (q * nvy + iy) * ns + is;
                        if a == 0.0 {
                            for q in 0..nvx {
                                o[idx(q)] = d[idx(q)];
                            }
                            continue;
                        }
                        for q in 0..nvx {
                            line[q] = d[idx(q)];
                        }
                        advect_line(&line, a * tau / dv, false, lim, &mut res);
                        for q in 0..nvx {
                            o[idx(q)] = res[q];
                        }
                    }
                }
            });
        out
    }

    fn advect_vy(
        &self,
        f: &ExtendedDistribution,
        fields: &EulerianFields,
        params: &PlasmaParams,
        data: &[f64],
        tau: f64,
    ) -> Vec<f64> {
        let vel = f.velocity;
        let Some(vy_axis) = vel.vy else {
            return data.to_vec();
        };
        let (nvx, nvy, ns) = (vel.vx.n, vel.nvy(), f.n_sphere());
        let row = f.row_len();
        let qm = params.charge / params.mass;
        let lim = self.options.limiter;
        let dv = vy_axis.dv();
        let mut out = vec![0.0; data.len()];
        out.par_chunks_mut(row)
            .zip(data.par_chunks(row))
            .enumerate()
            .for_each(|(j, (o, d))| {
                let ey = fields.e[1][j];
                let bz = fields.b[2][j];
                let mut line = vec![0.0; nvy];
                let mut res = vec![0.0; nvy];
                for q in 0..nvx {
                    let a = -qm * (ey - vel.vx.value(q) * bz);
                    for is in 0..ns {
                        let idx = |r: usize| (q * nvy + r) * ns + is;
                        if a == 0.0 {
                            for r in 0..nvy {
                                o[idx(r)] = d[idx(r)];
                            }
                            continue;
                        }
                        for r in 0..nvy {
                            line[r] = d[idx(r)];
                        }
                        advect_line(&line, a * tau / dv, false, lim, &mut res);
                        for r in 0..nvy {
                            o[idx(r)] = res[r];
                        }
                    }
                }
            });
        out
    }

    /// Rotates the sphere dependence at each `x` about `B(x)` by `(e/m)|B| dt`.
    fn rotate_spin(
        &self,
        f: &ExtendedDistribution,
        fields: &EulerianFields,
        params: &PlasmaParams,
        data: &[f64],
        dt: f64,
    ) -> Vec<f64> {
        let ns = f.n_sphere();
        let (nt, np) = (self.quadrature.n_theta, self.quadrature.n_phi);
        let row = f.row_len();
        let rate = params.precession_rate();
        let mut out = data.to_vec();
        out.par_chunks_mut(row)
            .zip(data.par_chunks(row))
            .enumerate()
            .for_each(|(j, (o, d))| {
                let b = EulerianFields::point(&fields.b, j);
                let bn = norm(b);
                if bn == 0.0 {
                    return;
                }
                if b[0].abs() <= 1e-14 * bn && b[1].abs() <= 1e-14 * bn {
                    // Rotation about ±z is a shift in φ on every polar ring.
                    let alpha = rate * b[2] * dt;
                    let dphi = 2.0 * PI / np as f64;
                    let kern: Vec<f64> = (0..np)
                        .map(|k| ring_kernel(np, k as f64 * dphi - alpha))
                        .collect();
                    for (ob, db) in o.chunks_mut(ns).zip(d.chunks(ns)) {
                        for i in 0..nt {
                            let src = &db[i * np..(i + 1) * np];
                            for jj in 0..np {
                                ob[i * np + jj] =
                                    (0..np).map(|k| kern[(jj + np - k) % np] * src[k]).sum();
                            }
                        }
                    }
                } else {
                    let m = self.basis.rotation_matrix(b, rate * bn * dt);
                    for (ob, db) in o.chunks_mut(ns).zip(d.chunks(ns)) {
                        for (node, x) in ob.iter_mut().enumerate() {
                            *x = m[node * ns..(node + 1) * ns]
                                .iter()
                                .zip(db)
                                .map(|(a, b)| a * b)
                                .sum();
                        }
                    }
                }
            });
        out
    }

    /// `Q f = (μ_B/m) ∂_{v_x}[(∂ₓB · ∇_ŝ) f]` with fourth-order differences in `v_x`.
    pub fn apply_quantum(
        &self,
        f: &ExtendedDistribution,
        fields: &EulerianFields,
        params: &PlasmaParams,
        data: &[f64],
    ) -> Vec<f64> {
        let vel = f.velocity;
        let (nvx, nvy, ns) = (vel.vx.n, vel.nvy(), f.n_sphere());
        let row = f.row_len();
        let coef = params.mu_b() / params.mass / (12.0 * vel.vx.dv());
        let mut out = vec![0.0; data.len()];
        out.par_chunks_mut(row)
            .zip(data.par_chunks(row))
            .enumerate()
            .for_each(|(j, (o, d))| {
                let db = EulerianFields::point(&fields.db_dx, j);
                if db == [0.0; 3] {
                    return;
                }
                let mut op = vec![0.0; ns * ns];
                for a in 0..3 {
                    if db[a] != 0.0 {
                        op.iter_mut()
                            .zip(&self.gradient[a])
                            .for_each(|(x, g)| *x += db[a] * g);
                    }
                }
                let mut g = vec![0.0; d.len()];
                for (gb, fb) in g.chunks_mut(ns).zip(d.chunks(ns)) {
                    for (node, x) in gb.iter_mut().enumerate() {
                        *x = op[node * ns..(node + 1) * ns]
                            .iter()
                            .zip(fb)
                            .map(|(a, b)| a * b)
                            .sum();
                    }
                }
                let at = |q: i64, iy: usize, is: usize| -> f64 {
                    if (0..nvx as i64).contains(&q) {
                        g[(q as usize * nvy + iy) * ns + is]
                    } else {
                        0.0
                    }
                };
                for q in 0..nvx {
                    let qi = q as i64;
                    for iy in 0..nvy {
                        for is in 0..ns {
                            let d4 = -at(qi + 2, iy, is) + 8.0 * at(qi + 1, iy, is)
                                - 8.0 * at(qi - 1, iy, is)
                                + at(qi - 2, iy, is);
                            o[(q * nvy + iy) * ns + is] = coef * d4;
                        }
                    }
                }
            });
        out
    }

    /// `dt Qf + dt² Q²f / 2 + dt³ Q³f / 6`.
    pub fn quantum_increment(
        &self,
        f: &ExtendedDistribution,
        fields: &EulerianFields,
        params: &PlasmaParams,
        dt: f64,
    ) -> Result<Vec<f64>> {
        self.check(f, fields)?;
        let q1 = self.apply_quantum(f, fields, params, &f.values);
        let q2 = self.apply_quantum(f, fields, params, &q1);
        let q3 = self.apply_quantum(f, fields, params, &q2);
        Ok((0..q1.len())
            .map(|i| dt * q1[i] + dt * dt / 2.0 * q2[i] + dt * dt * dt / 6.0 * q3[i])
            .collect())
    }
}

/// Single Eulerian step with a freshly built solver.
pub fn eulerian_step(
    f: &ExtendedDistribution,
    fields: &EulerianFields,
    params: &PlasmaParams,
    dt: f64,
    options: EulerianOptions,
) -> Result<ExtendedDistribution> {
    EulerianSolver::new(f.quadrature.clone(), options).step(f, fields, params, dt)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(nt: usize, np: usize) -> Arc<SphereQuadrature> {
        Arc::new(SphereQuadrature::new(nt, np).unwrap())
    }

    fn gauss(v: f64) -> f64 {
        (-v * v / 2.0).exp() / (2.0 * PI).sqrt()
    }

    #[test]
    fn free_streaming_converges() {
        let p = PlasmaParams::default();
        let k = 1.0;
        let init = |x: f64, v: [f64; 2], _: Vec3| (1.0 + 0.3 * (k * x).sin()) * gauss(v[0]);
        let mut errs = Vec::new();
        for nx in [32, 64, 128] {
            let g = Grid1D::new(nx, 2.0 * PI / k).unwrap();
            let vel = VelocitySpace::one(VelocityAxis::new(16, 4.0).unwrap());
            let q = quad(2, 3);
            let mut f = ExtendedDistribution::from_fn(g, vel, q.clone(), init);
            let fields = EulerianFields::zero(g);
            let opts = EulerianOptions {
                limiter: Limiter::None,
                quantum_term: false,
            };
            let solver = EulerianSolver::new(q.clone(), opts);
            let t_end = 1.0;
            let steps = nx;
            let dt = t_end / steps as f64;
            let m0 = f.total();
            for _ in 0..steps {
                f = solver.step(&f, &fields, &p, dt).unwrap();
            }
            assert!((f.total() - m0).abs() < 1e-12 * m0);
            let exact =
                ExtendedDistribution::from_fn(g, vel, q, |x, v, s| init(x - v[0] * t_end, v, s));
            errs.push(f.l1_distance(&exact).unwrap());
        }
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 1.8, "{errs:?}");
        }
    }

    #[test]
    fn uniform_field_rotates_spin_pattern_rigidly() {
        let p = PlasmaParams::default();
        let g = Grid1D::new(4, 1.0).unwrap();
        let vel = VelocitySpace::one(VelocityAxis::new(4, 0.1).unwrap());
        let q = quad(6, 12);
        let f0 = ExtendedDistribution::from_fn(g, vel, q.clone(), |_, _, s| {
            1.0 + 0.5 * s[0] + 0.2 * s[0] * s[1]
        });
        let b0 = 2.0;
        let fields =
            EulerianFields::from_external(&ExternalField::UniformB { b: [0.0, 0.0, b0] }, g);
        let solver = EulerianSolver::new(q.clone(), EulerianOptions::default());
        let period = 2.0 * PI / (p.precession_rate() * b0);
        let steps = 64;
        let mut f = f0.clone();
        for _ in 0..steps {
            f = solver.step(&f, &fields, &p, period / steps as f64).unwrap();
        }
        let err = f
            .values
            .iter()
            .zip(&f0.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
        // A quarter period maps ŝ_x onto ŝ_y.
        let mut f = f0.clone();
        for _ in 0..16 {
            f = solver.step(&f, &fields, &p, period / 64.0).unwrap();
        }
        let s = f.spin_moment();
        let n = f.density();
        assert!(s[0][0].abs() < 1e-12 * n[0] && s[1][0] > 0.1 * n[0]);
    }

    #[test]
    fn oblique_field_uses_dense_rotation() {
        let p = PlasmaParams::default();
        let g = Grid1D::new(4, 1.0).unwrap();
        let vel = VelocitySpace::one(VelocityAxis::new(4, 0.1).unwrap());
        let q = quad(6, 12);
        let f0 = ExtendedDistribution::from_fn(g, vel, q.clone(), |_, _, s| 1.0 + 0.5 * s[2]);
        let fields =
            EulerianFields::from_external(&ExternalField::UniformB { b: [1.0, 0.0, 0.0] }, g);
        let solver = EulerianSolver::new(q, EulerianOptions::default());
        let angle = 0.5;
        let f = solver
            .step(&f0, &fields, &p, angle / p.precession_rate())
            .unwrap();
        let s = f.spin_moment();
        let n = f.density()[0];
        // ∫ŝ(1 + a ŝ_z) = (4π a / 3) ẑ, rotated about x by `angle`.
        let amp = 4.0 * PI * 0.5 / 3.0 * vel.cell_volume() * 4.0;
        assert!((s[1][0] + amp * angle.sin()).abs() < 1e-12 * n);
        assert!((s[2][0] - amp * angle.cos()).abs() < 1e-12 * n);
    }

    #[test]
    fn quantum_term_vanishes_for_spin_independent_f() {
        let p = PlasmaParams::with_hbar(0.5);
        let g = Grid1D::new(16, 4.0).unwrap();
        let vel = VelocitySpace::two(
            VelocityAxis::new(16, 4.0).unwrap(),
            VelocityAxis::new(8, 4.0).unwrap(),
        );
        let q = quad(4, 8);
        let f0 = ExtendedDistribution::from_fn(g, vel, q.clone(), |x, v, _| {
            (1.0 + 0.2 * (PI * x / 2.0).cos()) * gauss(v[0]) * gauss(v[1])
        });
        let fields =
            EulerianFields::from_external(&ExternalField::GradientB { b0: 0.5, b1: 0.2 }, g);
        let off = EulerianSolver::new(q.clone(), EulerianOptions::default());
        let on = EulerianSolver::new(
            q,
            EulerianOptions {
                quantum_term: true,
                ..Default::default()
            },
        );
        let a = off.step(&f0, &fields, &p, 0.05).unwrap();
        let b = on.step(&f0, &fields, &p, 0.05).unwrap();
        let d = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(d < 1e-13, "{d}");
    }

    #[test]
    fn quantum_operator_matches_analytic_form() {
        let p = PlasmaParams::with_hbar(0.5);
        let g = Grid1D::new(8, 4.0).unwrap();
        let vel = VelocitySpace::one(VelocityAxis::new(128, 8.0).unwrap());
        let q = quad(6, 12);
        let a = [0.3, -0.2, 0.5];
        let f0 = ExtendedDistribution::from_fn(g, vel, q.clone(), |_, v, s| {
            gauss(v[0]) * (1.0 + dot(a, s))
        });
        let b1 = 0.4;
        let fields = EulerianFields::from_external(&ExternalField::GradientB { b0: 1.0, b1 }, g);
        let solver = EulerianSolver::new(q.clone(), EulerianOptions::default());
        let qf = solver.apply_quantum(&f0, &fields, &p, &f0.values);
        let exact = ExtendedDistribution::from_fn(g, vel, q, |_, v, s| {
            let dgrad = b1 * (a[2] - dot(a, s) * s[2]);
            p.mu_b() / p.mass * (-v[0] * gauss(v[0])) * dgrad
        });
        let err = qf
            .iter()
            .zip(&exact.values)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(err < 5e-6, "{err}");
    }

    #[test]
    fn cfl_violations_are_rejected() {
        let p = PlasmaParams::default();
        let g = Grid1D::new(16, 1.0).unwrap();
        let vel = VelocitySpace::one(VelocityAxis::new(8, 4.0).unwrap());
        let f = ExtendedDistribution::from_fn(g, vel, quad(2, 3), |_, _, _| 1.0);
        let fields = EulerianFields::zero(g);
        let err = eulerian_step(&f, &fields, &p, 0.1, EulerianOptions::default()).unwrap_err();
        assert!(matches!(
            err,
            Error::StepRejected {
                guard: "x-advection CFL",
                ..
            }
        ));
        let strong = EulerianFields::from_external(
            &ExternalField::UniformB {
                b: [0.0, 0.0, 100.0],
            },
            g,
        );
        let err = eulerian_step(&f, &strong, &p, 0.01, EulerianOptions::default()).unwrap_err();
        assert!(matches!(
            err,
            Error::StepRejected {
                guard: "spin rotation",
                ..
            }
        ));
    }

    #[test]
    fn mc_limiter_keeps_positivity() {
        let p = PlasmaParams::default();
        let g = Grid1D::new(32, 1.0).unwrap();
        let vel = VelocitySpace::one(VelocityAxis::new(8, 1.0).unwrap());
        let f0 = ExtendedDistribution::from_fn(g, vel, quad(2, 3), |x, _, _| {
            if (0.3..0.5).contains(&x) {
                1.0
            } else {
                0.0
            }
        });
        let fields = EulerianFields::zero(g);
        let mut f = f0;
        for _ in 0..40 {
            f = eulerian_step(&f, &fields, &p, 0.02, EulerianOptions::default()).unwrap();
        }
        assert!(f.values.iter().all(|&v| v >= -1e-14));
    }
}
