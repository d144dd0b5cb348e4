//! Gauge-invariant Wigner matrix with a straight-line dressed phase.
//!
//! ```text
//! W(x, v) = (1/2πħ) ∫ dz e^{−iz(mv − e⟨A⟩_z)/ħ} ρ(x + z/2, x − z/2)
//! ⟨A⟩_z   = ∫_{−1/2}^{1/2} dτ A_x(x + τz)
//! ```
//!
//! The output is the density per unit velocity, `m W`, projected on the spin
//! sphere as `f(x, v, ŝ) = [Tr W + Tr(σW)·ŝ] / 4π`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid1D, Spectral, C64};
use crate::kinetic::Profile;
use crate::params::PlasmaParams;
use crate::pauli::SpinorField;
use crate::sphere::{gauss_legendre, SphereQuadrature, Vec3};
use crate::transforms::spin::{trace_product, Mat2, PAULI};
use crate::transforms::wigner::{refine2, MomentumAxis, PhaseSpaceField};

/// Largest phase change tolerated between `n_tau` and `2 n_tau` nodes.
pub const TAU_DOUBLING_TOL: f64 = 1e-10;

/// Longitudinal vector potential `A_x(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VectorPotential {
    Analytic {
        profile: Profile,
    },
    /// Grid samples, evaluated off-grid by trigonometric interpolation.
    Sampled {
        values: Vec<f64>,
    },
}

impl VectorPotential {
    pub fn zero() -> Self {
        VectorPotential::Analytic {
            profile: Profile::zero(),
        }
    }

    pub fn uniform(a0: f64) -> Self {
        VectorPotential::Analytic {
            profile: Profile::constant(a0),
        }
    }

    pub(crate) fn resolve(&self, grid: &Grid1D) -> Result<AxField> {
        match self {
            VectorPotential::Analytic { profile } => {
                profile.validate()?;
                Ok(AxField::Analytic(profile.clone()))
            }
            VectorPotential::Sampled { values } => {
                grid.check_len(values.len(), "A_x")?;
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::param("A_x", "must be finite"));
                }
                let sp = Spectral::new(*grid);
                let spec = sp.fft_real(values);
                let n = grid.n as f64;
                let big = spec.iter().map(|c| c.norm()).fold(0.0, f64::max);
                let nyq = grid.n.is_multiple_of(2).then_some(grid.n / 2);
                let modes = spec
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.norm() > 1e-15 * big)
                    .map(|(j, c)| {
                        let w = if Some(j) == nyq { 0.5 } else { 1.0 };
                        (sp.wavenumbers()[j], *c * (w / n), Some(j) == nyq)
                    })
                    .collect();
                Ok(AxField::Modes(modes))
            }
        }
    }
}

/// `A_x` ready for pointwise evaluation.
#[derive(Debug, Clone)]
pub(crate) enum AxField {
    Analytic(Profile),
    /// `(k, c_k, nyquist)`; a Nyquist mode is split over `±k`.
    Modes(Vec<(f64, C64, bool)>),
}

impl AxField {
    pub(crate) fn derivative(&self, n: u32, x: f64) -> f64 {
        match self {
            AxField::Analytic(p) => p.derivative(n, x),
            AxField::Modes(modes) => modes
                .iter()
                .map(|&(k, c, nyq)| {
                    let d = C64::new(0.0, k).powu(n);
                    let mut z = c * d * C64::from_polar(1.0, k * x);
                    if nyq {
                        z += c * C64::new(0.0, -k).powu(n) * C64::from_polar(1.0, -k * x);
                    }
                    z.re
                })
                .sum(),
        }
    }

    pub(crate) fn value(&self, x: f64) -> f64 {
        self.derivative(0, x)
    }

    /// Gauss–Legendre estimate of `∫_{−1/2}^{1/2} A(x + τz) dτ`.
    fn line_average(&self, x: f64, z: f64, nodes: &[f64], weights: &[f64]) -> f64 {
        nodes
            .iter()
            .zip(weights)
            .map(|(t, w)| 0.5 * w * self.value(x + 0.5 * t * z))
            .sum()
    }
}

/// How the vector potential enters the phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dressing {
    /// Canonical momentum, `v = p/m`; gauge dependent.
    None,
    /// Local kinetic shift `mv = p + eA(x)`.
    Local,
    /// Straight-line average of `A` between the two arguments.
    LineIntegral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GiOptions {
    pub dressing: Dressing,
    /// Gauss–Legendre nodes in τ; the result is compared with twice as many.
    pub n_tau: usize,
}

impl Default for GiOptions {
    fn default() -> Self {
        Self {
            dressing: Dressing::LineIntegral,
            n_tau: 16,
        }
    }
}

impl GiOptions {
    pub fn with_dressing(dressing: Dressing) -> Self {
        Self {
            dressing,
            ..Self::default()
        }
    }
}

/// `(x, z)` dependent part `e⟨A⟩_z` of the phase, indexed `[j][m]`.
fn dressed_potential(
    a: &AxField,
    xs: &[f64],
    zs: &[f64],
    params: &PlasmaParams,
    opts: GiOptions,
) -> Result<Vec<f64>> {
    let e = params.charge;
    match opts.dressing {
        Dressing::None => Ok(vec![0.0; xs.len() * zs.len()]),
        Dressing::Local => Ok(xs
            .iter()
            .flat_map(|&x| {
                let v = e * a.value(x);
                zs.iter().map(move |_| v)
            })
            .collect()),
        Dressing::LineIntegral => {
            if opts.n_tau == 0 {
                return Err(Error::param("n_tau", "must be >= 1"));
            }
            let (n1, w1) = gauss_legendre(opts.n_tau);
            let (n2, w2) = gauss_legendre(2 * opts.n_tau);
            let rows: Vec<(Vec<f64>, f64)> = xs
                .par_iter()
                .map(|&x| {
                    let mut diff: f64 = 0.0;
                    let row = zs
                        .iter()
                        .map(|&z| {
                            let a1 = a.line_average(x, z, &n1, &w1);
                            let a2 = a.line_average(x, z, &n2, &w2);
                            diff = diff.max(e * (z * (a1 - a2)).abs() / params.hbar);
                            e * a2
                        })
                        .collect();
                    (row, diff)
                })
                .collect();
            let diff = rows.iter().map(|r| r.1).fold(0.0, f64::max);
            if diff > TAU_DOUBLING_TOL {
                return Err(Error::QuadratureNotConverged { diff });
            }
            Ok(rows.into_iter().flat_map(|r| r.0).collect())
        }
    }
}

/// Spin-resolved phase-space density per unit velocity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GiWignerDistribution {
    pub grid: Grid1D,
    /// Velocity axis.
    pub axis: MomentumAxis,
    /// `m Tr W`, x-major.
    pub scalar: Vec<f64>,
    /// `m Tr(σ_c W)`.
    pub vector: [Vec<f64>; 3],
}

impl GiWignerDistribution {
    pub fn scalar_field(&self) -> PhaseSpaceField {
        PhaseSpaceField {
            grid: self.grid,
            axis: self.axis,
            values: self.scalar.clone(),
        }
    }

    pub fn vector_field(&self, c: usize) -> PhaseSpaceField {
        PhaseSpaceField {
            grid: self.grid,
            axis: self.axis,
            values: self.vector[c].clone(),
        }
    }

    /// `f(x_j, v_q, ŝ)`.
    pub fn q_value(&self, j: usize, q: usize, s: Vec3) -> f64 {
        let i = j * self.axis.n + q;
        (self.scalar[i] + (0..3).map(|c| self.vector[c][i] * s[c]).sum::<f64>()) / (4.0 * PI)
    }

    pub fn q_projection(&self, j: usize, q: usize, quad: &SphereQuadrature) -> Vec<f64> {
        quad.nodes.iter().map(|s| self.q_value(j, q, *s)).collect()
    }

    /// Largest pointwise difference over all four spin components.
    pub fn max_difference(&self, other: &Self) -> Result<f64> {
        if self.grid != other.grid || self.axis != other.axis {
            return Err(Error::GridMismatch(
                "distributions live on different grids".into(),
            ));
        }
        let mut d: f64 = 0.0;
        for (a, b) in std::iter::once((&self.scalar, &other.scalar))
            .chain(self.vector.iter().zip(&other.vector))
        {
            for (x, y) in a.iter().zip(b) {
                d = d.max((x - y).abs());
            }
        }
        Ok(d)
    }
}

/// Shared kernel. `rho(j, m)` returns `[ρ↑↑, ρ↓↓, ρ↑↓]` at separation `zs[m]`.
#[allow(clippy::too_many_arguments)]
fn assemble<R>(
    grid: Grid1D,
    axis: MomentumAxis,
    params: &PlasmaParams,
    xs: &[f64],
    zs: &[f64],
    ws: &[f64],
    p_offset: f64,
    ea: &[f64],
    rho: R,
) -> GiWignerDistribution
where
    R: Fn(usize, usize) -> [C64; 3] + Sync,
{
    let (m, hbar) = (params.mass, params.hbar);
    let nz = zs.len();
    let nv = axis.n;
    let table: Vec<C64> = (0..nv)
        .flat_map(|q| {
            let p = m * axis.value(q);
            zs.iter().map(move |z| C64::from_polar(1.0, -p * z / hbar))
        })
        .collect();
    let pref = m / (2.0 * PI * hbar);
    let rows: Vec<[Vec<f64>; 4]> = (0..xs.len())
        .into_par_iter()
        .map(|j| {
            let coeff: Vec<[C64; 3]> = (0..nz)
                .map(|k| {
                    let d = C64::from_polar(ws[k], zs[k] * (p_offset + ea[j * nz + k]) / hbar);
                    rho(j, k).map(|r| r * d)
                })
                .collect();
            let mut out = [vec![0.0; nv], vec![0.0; nv], vec![0.0; nv], vec![0.0; nv]];
            for q in 0..nv {
                let ph = &table[q * nz..(q + 1) * nz];
                let mut acc = [C64::new(0.0, 0.0); 3];
                for (c, t) in coeff.iter().zip(ph) {
                    for i in 0..3 {
                        acc[i] += c[i] * t;
                    }
                }
                let w01 = acc[2] * pref;
                let w: Mat2 = [[acc[0] * pref, w01], [w01.conj(), acc[1] * pref]];
                out[0][q] = (w[0][0] + w[1][1]).re;
                for c in 0..3 {
                    out[c + 1][q] = trace_product(&PAULI[c], &w).re;
                }
            }
            out
        })
        .collect();
    let mut scalar = Vec::with_capacity(xs.len() * nv);
    let mut vector = [Vec::new(), Vec::new(), Vec::new()];
    for r in rows {
        scalar.extend_from_slice(&r[0]);
        for c in 0..3 {
            vector[c].extend_from_slice(&r[c + 1]);
        }
    }
    GiWignerDistribution {
        grid,
        axis,
        scalar,
        vector,
    }
}

/// Wigner matrix of a pure spinor on its periodic grid.
///
/// Separations are `z = mΔx` for `|m| ≤ N/2`, with the endpoints `±L/2`
/// sharing one weight, matching the canonical spatial transform.
pub fn gi_wigner_transform(
    psi: &SpinorField,
    a: &VectorPotential,
    params: &PlasmaParams,
    axis: MomentumAxis,
    opts: GiOptions,
) -> Result<GiWignerDistribution> {
    params.validate()?;
    psi.require_normalized()?;
    let grid = psi.grid;
    let field = a.resolve(&grid)?;
    let sp = Spectral::new(grid);
    let up = refine2(&sp, &psi.up);
    let dn = refine2(&sp, &psi.down);
    let n = grid.n;
    let half = n / 2;
    let even = n.is_multiple_of(2);
    let lo = if even {
        -(half as i64)
    } else {
        -(((n - 1) / 2) as i64)
    };
    let hi = -lo;
    let dx = grid.dx();
    let ms: Vec<i64> = (lo..=hi).collect();
    let zs: Vec<f64> = ms.iter().map(|&m| m as f64 * dx).collect();
    let ws: Vec<f64> = ms
        .iter()
        .map(|&m| {
            if even && m.unsigned_abs() as usize == half {
                0.5 * dx
            } else {
                dx
            }
        })
        .collect();
    let xs = grid.points();
    let ea = dressed_potential(&field, &xs, &zs, params, opts)?;
    let nf = 2 * n as i64;
    let idx = |k: i64| k.rem_euclid(nf) as usize;
    Ok(assemble(
        grid,
        axis,
        params,
        &xs,
        &zs,
        &ws,
        psi.momentum_offset,
        &ea,
        |j, k| {
            let c = 2 * j as i64;
            let (p, mnus) = (idx(c + ms[k]), idx(c - ms[k]));
            [
                up[p] * up[mnus].conj(),
                dn[p] * dn[mnus].conj(),
                up[p] * dn[mnus].conj(),
            ]
        },
    ))
}

/// Gaussian mixed state with separable phase-space density
/// `n(x) · N(p; p₀, Δp) · (1 + r·σ)/2`.
///
/// Its coherence length is `ħ/Δp`, so the Wigner function does not depend on `ħ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianMixedState {
    pub x0: f64,
    pub sigma_x: f64,
    pub p0: f64,
    pub sigma_p: f64,
    /// Bloch vector, `|r| ≤ 1`.
    pub bloch: Vec3,
}

impl GaussianMixedState {
    pub fn validate(&self, hbar: f64) -> Result<()> {
        let vals = [self.x0, self.sigma_x, self.p0, self.sigma_p];
        if vals.iter().any(|v| !v.is_finite()) || !(self.sigma_x > 0.0 && self.sigma_p > 0.0) {
            return Err(Error::param(
                "mixed state",
                "parameters must be finite with positive widths",
            ));
        }
        if self.sigma_x * self.sigma_p < 0.5 * hbar * (1.0 - 1e-12) {
            return Err(Error::InvalidDensityMatrix(format!(
                "σ_x σ_p = {:.3e} below ħ/2",
                self.sigma_x * self.sigma_p
            )));
        }
        let r2: f64 = self.bloch.iter().map(|b| b * b).sum();
        if r2 > 1.0 + 1e-12 {
            return Err(Error::InvalidDensityMatrix(format!(
                "|r| = {} > 1",
                r2.sqrt()
            )));
        }
        Ok(())
    }

    pub fn density(&self, x: f64) -> f64 {
        let t = (x - self.x0) / self.sigma_x;
        (-0.5 * t * t).exp() / (self.sigma_x * (2.0 * PI).sqrt())
    }

    /// Canonical momentum density.
    pub fn momentum_density(&self, p: f64) -> f64 {
        let t = (p - self.p0) / self.sigma_p;
        (-0.5 * t * t).exp() / (self.sigma_p * (2.0 * PI).sqrt())
    }
}

/// Wigner matrix of [`GaussianMixedState`] at the points of `grid`, treated as
/// an open interval. The separation integral is a trapezoid rule over
/// `|z| ≤ 12ħ/Δp` fine enough to avoid aliasing on `axis`.
pub fn gi_wigner_mixed(
    state: &GaussianMixedState,
    grid: Grid1D,
    a: &VectorPotential,
    params: &PlasmaParams,
    axis: MomentumAxis,
    opts: GiOptions,
) -> Result<GiWignerDistribution> {
    params.validate()?;
    state.validate(params.hbar)?;
    let field = a.resolve(&grid)?;
    let hbar = params.hbar;
    let xs = grid.points();
    let z_max = 12.0 * hbar / state.sigma_p;
    let a_max = xs
        .iter()
        .flat_map(|&x| [x - 0.5 * z_max, x, x + 0.5 * z_max])
        .map(|x| field.value(x).abs())
        .fold(0.0, f64::max);
    let q_max = params.mass * axis.v_max + state.p0.abs() + params.charge * a_max;
    let h0 = PI * hbar / (q_max + 8.0 * state.sigma_p);
    let half = (z_max / h0).ceil() as i64;
    let h = z_max / half as f64;
    let zs: Vec<f64> = (-half..=half).map(|m| m as f64 * h).collect();
    let ws: Vec<f64> = (-half..=half)
        .map(|m| if m.abs() == half { 0.5 * h } else { h })
        .collect();
    let ea = dressed_potential(&field, &xs, &zs, params, opts)?;
    let r = state.bloch;
    let spin = [
        C64::new(0.5 * (1.0 + r[2]), 0.0),
        C64::new(0.5 * (1.0 - r[2]), 0.0),
        C64::new(0.5 * r[0], -0.5 * r[1]),
    ];
    let coh: Vec<f64> = zs
        .iter()
        .map(|z| (-0.5 * (z * state.sigma_p / hbar).powi(2)).exp())
        .collect();
    let dens: Vec<f64> = xs.iter().map(|&x| state.density(x)).collect();
    Ok(assemble(
        grid,
        axis,
        params,
        &xs,
        &zs,
        &ws,
        state.p0,
        &ea,
        |j, k| {
            let w = dens[j] * coh[k];
            spin.map(|s| s * w)
        },
    ))
}

/// `f + (eħ²/24m³) ∂ₓ²A_x ∂³_v f`, the leading correction that turns the
/// locally shifted Wigner function into the line-integral one.
pub fn gi_correction_series(
    f: &PhaseSpaceField,
    a: &VectorPotential,
    params: &PlasmaParams,
    order: u32,
) -> Result<PhaseSpaceField> {
    params.validate()?;
    if order != 2 {
        return Err(Error::Unsupported {
            what: "correction order",
            detail: format!("only the ħ² term is available, got order {order}"),
        });
    }
    f.check_finite()?;
    let field = a.resolve(&f.grid)?;
    let a2: Vec<f64> = f
        .grid
        .points()
        .iter()
        .map(|&x| field.derivative(2, x))
        .collect();
    let vgrid = Grid1D::new(f.axis.n, 2.0 * f.axis.v_max)?;
    let vsp = Spectral::new(vgrid);
    let (e, m, hbar) = (params.charge, params.mass, params.hbar);
    let c = e * hbar * hbar / (24.0 * m * m * m);
    let mut values = f.values.clone();
    for (j, a2j) in a2.iter().enumerate() {
        if *a2j == 0.0 {
            continue;
        }
        let row = f.row(j);
        let d3 = vsp.derivative(row, 3);
        for (out, d) in values[j * f.axis.n..(j + 1) * f.axis.n].iter_mut().zip(d3) {
            *out += c * a2j * d;
        }
    }
    PhaseSpaceField::new(f.grid, f.axis, values)
}
