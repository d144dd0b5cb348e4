//! Self-consistent and prescribed electromagnetic fields on the periodic grid.

pub mod external;
pub mod maxwell;
pub mod poisson;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{Grid1D, Spectral};
use crate::params::PlasmaParams;
use crate::sphere::Vec3;

pub use external::{external_profiles, ExternalField};
pub use maxwell::{maxwell_step, MaxwellOptions};
pub use poisson::solve_poisson;

/// Where each field component is sampled.
///
/// `Collocated` keeps everything on the integer nodes `x_j`. `Yee` keeps
/// `E_y`, `E_z` on integer nodes and moves `E_x`, `B_y`, `B_z` (and the free
/// current `j_x`) to the half nodes `x_{j+1/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Collocated,
    Yee,
}

/// Curl discretization for the magnetization current.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CurlMethod {
    #[default]
    Spectral,
    Centered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub grid: Grid1D,
    pub layout: Layout,
    pub e: [Vec<f64>; 3],
    /// `b[0]` is uniform.
    pub b: [Vec<f64>; 3],
    pub phi: Vec<f64>,
    pub m: [Vec<f64>; 3],
    pub j_free: [Vec<f64>; 3],
    pub j_bound: [Vec<f64>; 3],
}

fn zeros3(n: usize) -> [Vec<f64>; 3] {
    [vec![0.0; n], vec![0.0; n], vec![0.0; n]]
}

impl FieldState {
    pub fn zero(grid: Grid1D, layout: Layout) -> Self {
        let n = grid.n;
        Self {
            grid,
            layout,
            e: zeros3(n),
            b: zeros3(n),
            phi: vec![0.0; n],
            m: zeros3(n),
            j_free: zeros3(n),
            j_bound: zeros3(n),
        }
    }

    /// Position of sample `j` of component `comp` of `E` (`magnetic = false`) or `B`.
    pub fn position(&self, j: usize, comp: usize, magnetic: bool) -> f64 {
        let half = match self.layout {
            Layout::Collocated => false,
            Layout::Yee => (magnetic && comp > 0) || (!magnetic && comp == 0),
        };
        self.grid.x(j) + if half { 0.5 * self.grid.dx() } else { 0.0 }
    }

    /// `H = B/μ₀ − M` on the integer nodes (half-node `B` averaged in Yee layout).
    pub fn h_field(&self, params: &PlasmaParams) -> [Vec<f64>; 3] {
        let n = self.grid.n;
        let mu0 = params.mu0();
        let mut h = zeros3(n);
        for c in 0..3 {
            for j in 0..n {
                let b = if self.layout == Layout::Yee && c > 0 {
                    0.5 * (self.b[c][j] + self.b[c][(j + n - 1) % n])
                } else {
                    self.b[c][j]
                };
                h[c][j] = b / mu0 - self.m[c][j];
            }
        }
        h
    }

    /// `∫ (ε₀|E|²/2 + |B|²/2μ₀) dx`.
    pub fn energy(&self, params: &PlasmaParams) -> f64 {
        let e2: f64 = self.e.iter().flatten().map(|v| v * v).sum();
        let b2: f64 = self.b.iter().flatten().map(|v| v * v).sum();
        (0.5 * params.eps0 * e2 + 0.5 * b2 / params.mu0()) * self.grid.dx()
    }

    /// `∂ₓE_x − ρ_c/ε₀` with the difference matching the layout.
    pub fn gauss_residual(&self, rho_c: &[f64], params: &PlasmaParams) -> Result<Vec<f64>> {
        self.grid.check_len(rho_c.len(), "charge density")?;
        let n = self.grid.n;
        let ex = &self.e[0];
        let div = match self.layout {
            Layout::Yee => (0..n)
                .map(|j| (ex[j] - ex[(j + n - 1) % n]) / self.grid.dx())
                .collect(),
            Layout::Collocated => Spectral::new(self.grid).derivative(ex, 1),
        };
        Ok(div
            .iter()
            .zip(rho_c)
            .map(|(d, r): (&f64, &f64)| d - r / params.eps0)
            .collect())
    }

    /// Linear interpolation of every component to `x`, honouring the layout.
    pub fn interpolate(&self, x: f64) -> (Vec3, Vec3) {
        let mut e = [0.0; 3];
        let mut b = [0.0; 3];
        for c in 0..3 {
            e[c] = self.sample(&self.e[c], x - self.position(0, c, false));
            b[c] = self.sample(&self.b[c], x - self.position(0, c, true));
        }
        (e, b)
    }

    /// Cloud-in-cell interpolation of nodal data at `x` measured from the first node.
    pub fn sample(&self, data: &[f64], x: f64) -> f64 {
        let (j0, j1, w) = cic_weights(&self.grid, x);
        data[j0] * (1.0 - w) + data[j1] * w
    }
}

/// Lower node, upper node and fractional weight of the upper node.
#[inline]
pub fn cic_weights(grid: &Grid1D, x: f64) -> (usize, usize, f64) {
    let s = grid.wrap(x) / grid.dx();
    let j = (s.floor() as usize).min(grid.n - 1);
    let w = s - j as f64;
    (j, (j + 1) % grid.n, w)
}

/// `(0, −∂ₓM_z, ∂ₓM_y)` on the nodes.
pub fn bound_current(grid: &Grid1D, m: &[Vec<f64>; 3], method: CurlMethod) -> [Vec<f64>; 3] {
    let n = grid.n;
    let d = |f: &[f64]| -> Vec<f64> {
        match method {
            CurlMethod::Spectral => Spectral::new(*grid).derivative(f, 1),
            CurlMethod::Centered => (0..n)
                .map(|j| (f[(j + 1) % n] - f[(j + n - 1) % n]) / (2.0 * grid.dx()))
                .collect(),
        }
    };
    [
        vec![0.0; n],
        d(&m[2]).into_iter().map(|v| -v).collect(),
        d(&m[1]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn curl_of_cosine_texture() {
        let g = Grid1D::new(64, 10.0).unwrap();
        let k = 2.0 * PI * 3.0 / g.length;
        let mz: Vec<f64> = g.points().iter().map(|x| 0.4 * (k * x).cos()).collect();
        let m = [vec![0.0; g.n], vec![0.0; g.n], mz];
        let js = bound_current(&g, &m, CurlMethod::Spectral);
        let jc = bound_current(&g, &m, CurlMethod::Centered);
        for (j, x) in g.points().into_iter().enumerate() {
            let exact = 0.4 * k * (k * x).sin();
            assert!((js[1][j] - exact).abs() < 1e-12);
            assert!((jc[1][j] - exact).abs() < 0.02 * 0.4 * k);
            assert_eq!(js[2][j], 0.0);
        }
    }

    #[test]
    fn interpolation_respects_staggering() {
        let g = Grid1D::new(32, 4.0).unwrap();
        let mut f = FieldState::zero(g, Layout::Yee);
        let lin = |x: f64| (2.0 * PI * x / g.length).sin();
        for j in 0..g.n {
            f.e[0][j] = lin(f.position(j, 0, false));
            f.e[1][j] = lin(f.position(j, 1, false));
            f.b[2][j] = lin(f.position(j, 2, true));
        }
        let x = 1.37;
        let (e, b) = f.interpolate(x);
        for v in [e[0], e[1], b[2]] {
            assert!((v - lin(x)).abs() < 0.01);
        }
    }
}
