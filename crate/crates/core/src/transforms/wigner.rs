//! Spatial Wigner transform on a periodic grid.
//!
//! The relative coordinate `y` runs over one period `[-L/2, L/2)` in steps of
//! `Δx`, with `ψ(x ± y/2)` read off the band-limited interpolant on the grid
//! refined by two. On the conjugate momentum grid `Δp = 2πħ/L` both marginals
//! are exact identities of the discrete transform.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid1D, Spectral, C64};
use crate::params::PlasmaParams;
use crate::transforms::wavefunction::WaveFunction1D;

/// Uniform axis `p_q = -v_max + q Δp`, `Δp = 2 v_max / n`, `q = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentumAxis {
    pub n: usize,
    pub v_max: f64,
}

impl MomentumAxis {
    pub fn new(n: usize, v_max: f64) -> Result<Self> {
        if n < 2 || !n.is_multiple_of(2) {
            return Err(Error::param(
                "n_v",
                format!("must be even and >= 2, got {n}"),
            ));
        }
        if !(v_max.is_finite() && v_max > 0.0) {
            return Err(Error::param("v_max", format!("must be > 0, got {v_max}")));
        }
        Ok(Self { n, v_max })
    }

    /// Axis whose spacing is the spectral momentum quantum `2πħ/L` of `grid`.
    pub fn conjugate(grid: &Grid1D, hbar: f64, n: usize) -> Result<Self> {
        Self::new(n, n as f64 * PI * hbar / grid.length)
    }

    #[inline]
    pub fn step(&self) -> f64 {
        2.0 * self.v_max / self.n as f64
    }

    #[inline]
    pub fn value(&self, q: usize) -> f64 {
        -self.v_max + q as f64 * self.step()
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.n).map(|q| self.value(q)).collect()
    }
}

/// Real field on the `N_x × N_v` tensor grid, stored x-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpaceField {
    pub grid: Grid1D,
    pub axis: MomentumAxis,
    pub values: Vec<f64>,
}

impl PhaseSpaceField {
    pub fn new(grid: Grid1D, axis: MomentumAxis, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n * axis.n {
            return Err(Error::GridMismatch(format!(
                "phase-space field has {} values, expected {}x{}",
                values.len(),
                grid.n,
                axis.n
            )));
        }
        let f = Self { grid, axis, values };
        f.check_finite()?;
        Ok(f)
    }

    pub fn sample(grid: Grid1D, axis: MomentumAxis, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.n * axis.n);
        for j in 0..grid.n {
            let x = grid.x(j);
            for q in 0..axis.n {
                values.push(f(x, axis.value(q)));
            }
        }
        Self::new(grid, axis, values)
    }

    #[inline]
    pub fn at(&self, j: usize, q: usize) -> f64 {
        self.values[j * self.axis.n + q]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.axis.n..(j + 1) * self.axis.n]
    }

    pub fn check_finite(&self) -> Result<()> {
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(
                "phase-space field",
                format!(
                    "non-finite value at (x={}, v={})",
                    i / self.axis.n,
                    i % self.axis.n
                ),
            ));
        }
        Ok(())
    }

    pub fn same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid || self.axis != other.axis {
            return Err(Error::GridMismatch(format!(
                "({:?}, {:?}) vs ({:?}, {:?})",
                self.grid, self.axis, other.grid, other.axis
            )));
        }
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.dx() * self.axis.step()
    }
}

/// Position and momentum marginals with their abscissae.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginals {
    pub x: Vec<f64>,
    pub density_x: Vec<f64>,
    pub p: Vec<f64>,
    pub density_p: Vec<f64>,
}

/// Cross-Wigner function `(1/2πħ) Σ_y Δx e^{-i(p-offset)y/ħ} a(x+y/2) b*(x-y/2)`
/// of two amplitudes sampled on the grid refined by two.
///
/// The unpaired endpoint `y = -L/2` of an even grid is split evenly with its
/// periodic image `y = +L/2`, which keeps the transform Hermitian.
pub(crate) fn cross_wigner(
    fine_a: &[C64],
    fine_b: &[C64],
    grid: &Grid1D,
    hbar: f64,
    offset: f64,
    axis: &MomentumAxis,
) -> Vec<C64> {
    let n = grid.n;
    let nf = 2 * n;
    let dx = grid.dx();
    let half = n / 2;
    let even = n.is_multiple_of(2);
    let m_hi = if even { half } else { (n - 1) / 2 };
    // Phase table e^{-i (p_q - offset) m Δx / ħ} for m = 0..=m_hi.
    let phases: Vec<C64> = (0..axis.n)
        .flat_map(|q| {
            let p = axis.value(q) - offset;
            (0..=m_hi).map(move |m| C64::from_polar(1.0, -p * m as f64 * dx / hbar))
        })
        .collect();
    let pref = dx / (2.0 * PI * hbar);
    let mut out = vec![C64::new(0.0, 0.0); n * axis.n];
    out.par_chunks_mut(axis.n).enumerate().for_each(|(j, row)| {
        let idx = |k: i64| k.rem_euclid(nf as i64) as usize;
        let c0 = fine_a[2 * j] * fine_b[2 * j].conj();
        let mut plus = Vec::with_capacity(m_hi + 1);
        let mut minus = Vec::with_capacity(m_hi + 1);
        for m in 0..=m_hi as i64 {
            let centre = 2 * j as i64;
            plus.push(fine_a[idx(centre + m)] * fine_b[idx(centre - m)].conj());
            minus.push(fine_a[idx(centre - m)] * fine_b[idx(centre + m)].conj());
        }
        for (q, w) in row.iter_mut().enumerate() {
            let ph = &phases[q * (m_hi + 1)..(q + 1) * (m_hi + 1)];
            let mut acc = c0;
            for m in 1..=m_hi {
                let weight = if even && m == half { 0.5 } else { 1.0 };
                acc += (plus[m] * ph[m] + minus[m] * ph[m].conj()) * weight;
            }
            *w = acc * pref;
        }
    });
    out
}

/// Band-limited samples of `psi` on the grid refined by two.
pub(crate) fn refine2(spectral: &Spectral, psi: &[C64]) -> Vec<C64> {
    spectral.refine(psi, 2)
}

/// Wigner function `f_W(x, p)` of a normalized scalar state.
pub fn wigner_transform(
    psi: &WaveFunction1D,
    params: &PlasmaParams,
    n_v: usize,
    v_max: f64,
) -> Result<PhaseSpaceField> {
    params.validate()?;
    psi.require_normalized()?;
    let axis = MomentumAxis::new(n_v, v_max)?;
    wigner_on_axis(psi, params.hbar, axis)
}

pub(crate) fn wigner_on_axis(
    psi: &WaveFunction1D,
    hbar: f64,
    axis: MomentumAxis,
) -> Result<PhaseSpaceField> {
    let sp = Spectral::new(psi.grid);
    let fine = refine2(&sp, &psi.psi);
    let w = cross_wigner(&fine, &fine, &psi.grid, hbar, psi.momentum_offset, &axis);
    PhaseSpaceField::new(psi.grid, axis, w.into_iter().map(|z| z.re).collect())
}

pub fn marginals(f: &PhaseSpaceField) -> Result<Marginals> {
    f.check_finite()?;
    let dp = f.axis.step();
    let dx = f.grid.dx();
    let density_x = (0..f.grid.n)
        .map(|j| f.row(j).iter().sum::<f64>() * dp)
        .collect();
    let mut density_p = vec![0.0; f.axis.n];
    for j in 0..f.grid.n {
        for (acc, v) in density_p.iter_mut().zip(f.row(j)) {
            *acc += v;
        }
    }
    density_p.iter_mut().for_each(|v| *v *= dx);
    Ok(Marginals {
        x: f.grid.points(),
        density_x,
        p: f.axis.values(),
        density_p,
    })
}

/// `∫∫ O f dx dp` for a symbol sampled on the same tensor grid.
pub fn expect_phase_space(f: &PhaseSpaceField, symbol: &PhaseSpaceField) -> Result<f64> {
    f.same_grid(symbol)?;
    let s: f64 = f
        .values
        .iter()
        .zip(&symbol.values)
        .map(|(a, b)| a * b)
        .sum();
    Ok(s * f.grid.dx() * f.axis.step())
}

/// Momentum density `|ψ̃(p)|²`, `ψ̃(p) = (2πħ)^{-1/2} ∫ ψ(x) e^{-ipx/ħ} dx`, by
/// direct summation at each point of `axis`.
pub fn momentum_density(psi: &WaveFunction1D, hbar: f64, axis: &MomentumAxis) -> Vec<f64> {
    let g = psi.grid;
    let dx = g.dx();
    let norm = dx / (2.0 * PI * hbar).sqrt();
    (0..axis.n)
        .map(|q| {
            let p = axis.value(q) - psi.momentum_offset;
            let amp: C64 = psi
                .psi
                .iter()
                .enumerate()
                .map(|(j, z)| z * C64::from_polar(1.0, -p * g.x(j) / hbar))
                .sum();
            (amp * norm).norm_sqr()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::wavefunction::gaussian_packet;

    fn setup() -> (Grid1D, PlasmaParams, MomentumAxis) {
        let g = Grid1D::new(128, 20.0).unwrap();
        let p = PlasmaParams::default();
        let axis = MomentumAxis::conjugate(&g, p.hbar, 128).unwrap();
        (g, p, axis)
    }

    #[test]
    fn gaussian_matches_closed_form() {
        let (g, p, axis) = setup();
        let x0 = 9.3;
        let psi = gaussian_packet(g, x0, std::f64::consts::FRAC_1_SQRT_2, 0.0, 1.0).unwrap();
        let f = wigner_transform(&psi, &p, axis.n, axis.v_max).unwrap();
        let mut err: f64 = 0.0;
        for j in 0..g.n {
            for q in 0..axis.n {
                let (x, pp) = (g.x(j), axis.value(q));
                let exact = (-(x - x0).powi(2) - pp * pp).exp() / PI;
                err = err.max((f.at(j, q) - exact).abs());
            }
        }
        assert!(err < 1e-10, "{err}");
        assert!((f.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn plane_wave_is_a_single_mode() {
        let (g, p, axis) = setup();
        let k0 = 2.0 * PI * 7.0 / g.length;
        let psi = WaveFunction1D::from_fn(g, |x| C64::from_polar(1.0, k0 * x))
            .unwrap()
            .normalized()
            .unwrap();
        let f = wigner_transform(&psi, &p, axis.n, axis.v_max).unwrap();
        let m = marginals(&f).unwrap();
        let q0 = (0..axis.n)
            .min_by(|&a, &b| {
                (axis.value(a) - k0)
                    .abs()
                    .total_cmp(&(axis.value(b) - k0).abs())
            })
            .unwrap();
        for (q, d) in m.density_p.iter().enumerate() {
            if q == q0 {
                assert!((d - g.length / (2.0 * PI)).abs() < 1e-10);
            } else {
                assert!(d.abs() < 1e-10, "{q}: {d}");
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        let (g, p, _) = setup();
        let zero = WaveFunction1D::new(g, vec![C64::new(0.0, 0.0); g.n]).unwrap();
        assert!(matches!(
            wigner_transform(&zero, &p, 16, 1.0),
            Err(Error::NotNormalized { .. })
        ));
        let psi = gaussian_packet(g, 10.0, 1.0, 0.0, 1.0).unwrap();
        assert!(wigner_transform(&psi, &p, 16, 0.0).is_err());
        assert!(wigner_transform(&psi, &p, 15, 1.0).is_err());
    }

    #[test]
    fn expectation_values() {
        let (g, p, axis) = setup();
        let x0 = 8.0;
        let p0 = 1.3;
        let psi = gaussian_packet(g, x0, 0.9, p0, 1.0).unwrap();
        let f = wigner_transform(&psi, &p, axis.n, axis.v_max).unwrap();
        let one = PhaseSpaceField::sample(g, axis, |_, _| 1.0).unwrap();
        let xs = PhaseSpaceField::sample(g, axis, |x, _| x).unwrap();
        let ke = PhaseSpaceField::sample(g, axis, |_, pp| pp * pp / 2.0).unwrap();
        assert!((expect_phase_space(&f, &one).unwrap() - 1.0).abs() < 1e-10);
        assert!((expect_phase_space(&f, &xs).unwrap() - x0).abs() < 1e-8);
        let sp = Spectral::new(g);
        let d2 = sp.derivative_complex(&psi.psi, 2);
        let exact: f64 = psi
            .psi
            .iter()
            .zip(&d2)
            .map(|(a, b)| (a.conj() * b).re * -0.5)
            .sum::<f64>()
            * g.dx();
        assert!((expect_phase_space(&f, &ke).unwrap() - exact).abs() < 1e-8);
        let other =
            PhaseSpaceField::sample(g, MomentumAxis::new(64, 3.0).unwrap(), |_, _| 1.0).unwrap();
        assert!(expect_phase_space(&f, &other).is_err());
    }

    #[test]
    fn momentum_offset_shifts_the_momentum_axis() {
        let (g, p, axis) = setup();
        let psi = gaussian_packet(g, 10.0, 1.0, 0.0, 1.0).unwrap();
        let mut shifted = psi.clone();
        shifted.momentum_offset = 2.0 * axis.step();
        let f0 = wigner_transform(&psi, &p, axis.n, axis.v_max).unwrap();
        let f1 = wigner_transform(&shifted, &p, axis.n, axis.v_max).unwrap();
        for j in 0..g.n {
            for q in 2..axis.n {
                assert!((f1.at(j, q) - f0.at(j, q - 2)).abs() < 1e-13);
            }
        }
    }
}
