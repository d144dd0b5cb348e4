//! Uniform periodic 1D grid and the spectral operators built on it.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// `N` uniform points `x_j = j L / N` on the periodic domain `[0, L)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub n: usize,
    pub length: f64,
}

impl Grid1D {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::param(
                "n",
                format!("need at least 2 points, got {n}"),
            ));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::param("length", format!("must be > 0, got {length}")));
        }
        Ok(Self { n, length })
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Angular wavenumber of FFT bin `j` (standard FFT ordering).
    #[inline]
    pub fn wavenumber(&self, j: usize) -> f64 {
        let n = self.n as i64;
        let m = if (j as i64) < (n + 1) / 2 {
            j as i64
        } else {
            j as i64 - n
        };
        2.0 * PI * m as f64 / self.length
    }

    /// Largest resolved wavenumber `pi / dx`.
    pub fn k_max(&self) -> f64 {
        PI / self.dx()
    }

    /// Wraps a position into `[0, L)`.
    #[inline]
    pub fn wrap(&self, x: f64) -> f64 {
        let y = x.rem_euclid(self.length);
        if y >= self.length {
            0.0
        } else {
            y
        }
    }

    /// Trapezoid (= rectangle on a periodic grid) integral.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() * self.dx()
    }

    pub fn check_len(&self, len: usize, what: &str) -> Result<()> {
        if len != self.n {
            return Err(Error::GridMismatch(format!(
                "{what} has {len} samples, grid has {}",
                self.n
            )));
        }
        Ok(())
    }
}

/// FFT plans and wavenumbers for one grid. Cheap to clone.
#[derive(Clone)]
pub struct Spectral {
    grid: Grid1D,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    k: Arc<Vec<f64>>,
}

impl fmt::Debug for Spectral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectral")
            .field("grid", &self.grid)
            .finish()
    }
}

impl Spectral {
    pub fn new(grid: Grid1D) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.n);
        let inverse = planner.plan_fft_inverse(grid.n);
        let k = (0..grid.n).map(|j| grid.wavenumber(j)).collect();
        Self {
            grid,
            forward,
            inverse,
            k: Arc::new(k),
        }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.k
    }

    /// Unnormalized forward DFT in place.
    pub fn forward(&self, data: &mut [C64]) {
        self.forward.process(data);
    }

    /// Inverse DFT in place, including the `1/N` normalization.
    pub fn inverse(&self, data: &mut [C64]) {
        self.inverse.process(data);
        let s = 1.0 / self.grid.n as f64;
        data.iter_mut().for_each(|z| *z *= s);
    }

    pub fn fft_real(&self, f: &[f64]) -> Vec<C64> {
        let mut buf: Vec<C64> = f.iter().map(|&v| C64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    fn nyquist(&self) -> Option<usize> {
        self.grid.n.is_multiple_of(2).then_some(self.grid.n / 2)
    }

    /// Multiplies the spectrum by `(i k)^order`; odd orders drop the Nyquist bin.
    fn apply_derivative(&self, spec: &mut [C64], order: u32) {
        let nyq = self.nyquist();
        for (j, z) in spec.iter_mut().enumerate() {
            if order % 2 == 1 && Some(j) == nyq {
                *z = C64::new(0.0, 0.0);
                continue;
            }
            *z *= C64::new(0.0, self.k[j]).powu(order);
        }
    }

    pub fn derivative_complex(&self, f: &[C64], order: u32) -> Vec<C64> {
        let mut buf = f.to_vec();
        self.forward(&mut buf);
        self.apply_derivative(&mut buf, order);
        self.inverse(&mut buf);
        buf
    }

    pub fn derivative(&self, f: &[f64], order: u32) -> Vec<f64> {
        let mut buf = self.fft_real(f);
        self.apply_derivative(&mut buf, order);
        self.inverse(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }

    /// Band-limited interpolation onto the grid refined by `factor`.
    ///
    /// Sample `j` of the result sits at `j * dx / factor`. The Nyquist bin of
    /// an even grid is split symmetrically so real inputs stay real.
    pub fn refine(&self, f: &[C64], factor: usize) -> Vec<C64> {
        let n = self.grid.n;
        let m = n * factor;
        let mut spec = f.to_vec();
        self.forward(&mut spec);
        let mut fine = vec![C64::new(0.0, 0.0); m];
        let half = n / 2;
        for j in 0..n {
            let scaled = spec[j] * (factor as f64);
            if n.is_multiple_of(2) && j == half {
                fine[half] += scaled * 0.5;
                fine[m - half] += scaled * 0.5;
            } else if j < n.div_ceil(2) {
                fine[j] += scaled;
            } else {
                fine[m - (n - j)] += scaled;
            }
        }
        let mut planner = FftPlanner::new();
        let inv = planner.plan_fft_inverse(m);
        inv.process(&mut fine);
        let s = 1.0 / m as f64;
        fine.iter_mut().for_each(|z| *z *= s);
        fine
    }

    /// Evaluates the trigonometric interpolant of `f` at an arbitrary point.
    pub fn interpolate_at(&self, spec: &[C64], x: f64) -> C64 {
        let n = self.grid.n;
        let nyq = self.nyquist();
        let mut acc = C64::new(0.0, 0.0);
        for (j, &c) in spec.iter().enumerate() {
            if Some(j) == nyq {
                acc += c * (self.k[j] * x).cos();
            } else {
                acc += c * C64::from_polar(1.0, self.k[j] * x);
            }
        }
        acc / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_derivative_of_mode() {
        let g = Grid1D::new(64, 2.0 * PI).unwrap();
        let sp = Spectral::new(g);
        let f: Vec<f64> = g.points().iter().map(|&x| (3.0 * x).sin()).collect();
        let d = sp.derivative(&f, 1);
        let d2 = sp.derivative(&f, 2);
        for (j, x) in g.points().into_iter().enumerate() {
            assert!((d[j] - 3.0 * (3.0 * x).cos()).abs() < 1e-12);
            assert!((d2[j] + 9.0 * (3.0 * x).sin()).abs() < 1e-11);
        }
    }

    #[test]
    fn refine_reproduces_band_limited_function() {
        let g = Grid1D::new(32, 5.0).unwrap();
        let sp = Spectral::new(g);
        let k = 2.0 * PI / 5.0;
        let f = |x: f64| {
            C64::new(
                (k * x).cos() + 0.3 * (4.0 * k * x).sin(),
                (2.0 * k * x).cos(),
            )
        };
        let samples: Vec<C64> = g.points().iter().map(|&x| f(x)).collect();
        let fine = sp.refine(&samples, 2);
        for (j, z) in fine.iter().enumerate() {
            let x = j as f64 * g.dx() / 2.0;
            assert!((z - f(x)).norm() < 1e-13);
        }
        let spec = {
            let mut s = samples.clone();
            sp.forward(&mut s);
            s
        };
        assert!((sp.interpolate_at(&spec, 1.2345) - f(1.2345)).norm() < 1e-13);
    }

    #[test]
    fn wrap_stays_in_domain() {
        let g = Grid1D::new(8, 2.0).unwrap();
        assert_eq!(g.wrap(2.0), 0.0);
        assert!((g.wrap(-0.5) - 1.5).abs() < 1e-15);
        assert!(g.wrap(-1e-18) < 2.0);
    }
}
