//! Single-state spin density transport: `∂ₜs = B_eff × s`.

use crate::error::{Error, Result};
use crate::grid::{Grid1D, Spectral};
use crate::params::PlasmaParams;
use crate::sphere::{cross, mat_vec, norm, rodrigues_matrix, Vec3};

/// Tolerance on `| |s| − ħ/2 |`.
pub const SPIN_LENGTH_TOL: f64 = 1e-10;

fn check(
    grid: &Grid1D,
    s: &[Vec3],
    n: &[f64],
    b: &[Vec<f64>; 3],
    params: &PlasmaParams,
) -> Result<()> {
    params.validate()?;
    grid.check_len(s.len(), "spin density")?;
    grid.check_len(n.len(), "density")?;
    for c in b {
        grid.check_len(c.len(), "magnetic field")?;
    }
    let half = 0.5 * params.hbar;
    for (index, v) in s.iter().enumerate() {
        let m = norm(*v);
        if (m - half).abs() > SPIN_LENGTH_TOL {
            return Err(Error::SpinMagnitude {
                index,
                magnitude: m,
                expected: half,
            });
        }
    }
    if let Some(i) = n.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::DensityFloor {
            index: i,
            value: n[i],
            floor: 0.0,
        });
    }
    Ok(())
}

/// `B_eff = (2μ_B/ħ) B − ∂ₓ(n ∂ₓs) / (m n)`, as an angular velocity.
pub fn effective_field(
    grid: &Grid1D,
    s: &[Vec3],
    n: &[f64],
    b: &[Vec<f64>; 3],
    params: &PlasmaParams,
) -> Vec<Vec3> {
    let sp = Spectral::new(*grid);
    let rate = params.precession_rate();
    let mut out: Vec<Vec3> = (0..grid.n)
        .map(|j| [0, 1, 2].map(|c| rate * b[c][j]))
        .collect();
    for c in 0..3 {
        let comp: Vec<f64> = s.iter().map(|v| v[c]).collect();
        let ds = sp.derivative(&comp, 1);
        let flux: Vec<f64> = ds.iter().zip(n).map(|(a, b)| a * b).collect();
        let div = sp.derivative(&flux, 1);
        for j in 0..grid.n {
            out[j][c] -= div[j] / (params.mass * n[j]);
        }
    }
    out
}

pub fn spin_density_rhs(
    grid: &Grid1D,
    s: &[Vec3],
    n: &[f64],
    b: &[Vec<f64>; 3],
    params: &PlasmaParams,
) -> Result<Vec<Vec3>> {
    check(grid, s, n, b, params)?;
    let beff = effective_field(grid, s, n, b, params);
    Ok(beff.iter().zip(s).map(|(w, v)| cross(*w, *v)).collect())
}

fn rotate_all(s: &[Vec3], w: &[Vec3], dt: f64) -> Vec<Vec3> {
    s.iter()
        .zip(w)
        .map(|(v, om)| {
            let m = norm(*om);
            if m == 0.0 {
                *v
            } else {
                mat_vec(&rodrigues_matrix(*om, m * dt), *v)
            }
        })
        .collect()
}

/// Midpoint step that rotates each `s` exactly about the effective field
/// evaluated at the half step, so `|s|` is preserved to rounding.
pub fn step_spin_density(
    grid: &Grid1D,
    s: &[Vec3],
    n: &[f64],
    b: &[Vec<f64>; 3],
    params: &PlasmaParams,
    dt: f64,
) -> Result<Vec<Vec3>> {
    check(grid, s, n, b, params)?;
    let w0 = effective_field(grid, s, n, b, params);
    let mid = rotate_all(s, &w0, 0.5 * dt);
    let w1 = effective_field(grid, &mid, n, b, params);
    let half = 0.5 * params.hbar;
    Ok(rotate_all(s, &w1, dt)
        .into_iter()
        .map(|v| {
            let m = norm(v);
            v.map(|c| c * half / m)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::dot;
    use proptest::prelude::*;

    fn uniform(grid: &Grid1D, v: Vec3) -> [Vec<f64>; 3] {
        [0, 1, 2].map(|c| vec![v[c]; grid.n])
    }

    #[test]
    fn uniform_spin_precesses() {
        let g = Grid1D::new(8, 1.0).unwrap();
        let p = PlasmaParams::with_hbar(0.6);
        let half = 0.3;
        let b0 = 1.5;
        let mut s = vec![[half, 0.0, 0.0]; 8];
        let n = vec![1.0; 8];
        let b = uniform(&g, [0.0, 0.0, b0]);
        let dt = 0.01;
        for _ in 0..500 {
            s = step_spin_density(&g, &s, &n, &b, &p, dt).unwrap();
        }
        let ang = p.precession_rate() * b0 * 5.0;
        assert!((s[3][0] - half * ang.cos()).abs() < 1e-12);
        assert!((s[3][1] - half * ang.sin()).abs() < 1e-12);
        let r = spin_density_rhs(&g, &s, &n, &uniform(&g, [0.0; 3]), &p).unwrap();
        assert!(r.iter().all(|v| norm(*v) == 0.0));
    }

    #[test]
    fn magnitude_violation_rejected() {
        let g = Grid1D::new(4, 1.0).unwrap();
        let p = PlasmaParams::default();
        let s = vec![[0.5, 0.0, 0.1]; 4];
        assert!(matches!(
            spin_density_rhs(&g, &s, &[1.0; 4], &uniform(&g, [0.0; 3]), &p),
            Err(Error::SpinMagnitude { .. })
        ));
    }

    #[test]
    fn long_run_keeps_magnitude() {
        let g = Grid1D::new(32, 2.0 * std::f64::consts::PI).unwrap();
        let p = PlasmaParams::default();
        let mut s: Vec<Vec3> = g
            .points()
            .iter()
            .map(|x| {
                let th = 1.0 + 0.3 * x.sin();
                [0.5 * th.sin(), 0.0, 0.5 * th.cos()]
            })
            .collect();
        let n: Vec<f64> = g.points().iter().map(|x| 1.0 + 0.2 * x.cos()).collect();
        let b = uniform(&g, [0.2, 0.0, 1.0]);
        for _ in 0..10_000 {
            s = step_spin_density(&g, &s, &n, &b, &p, 1e-3).unwrap();
        }
        let dev = s.iter().map(|v| (norm(*v) - 0.5).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-10);
    }

    proptest! {
        #[test]
        fn rhs_is_orthogonal_to_s(a in -1.0..1.0f64, c in -1.0..1.0f64, k in 1usize..4, bx in -2.0..2.0f64) {
            let g = Grid1D::new(16, 2.0 * std::f64::consts::PI).unwrap();
            let p = PlasmaParams::default();
            let s: Vec<Vec3> = g.points().iter().map(|x| {
                let th = a + c * (k as f64 * x).sin();
                let ph = c * x.cos();
                [0.5 * th.sin() * ph.cos(), 0.5 * th.sin() * ph.sin(), 0.5 * th.cos()]
            }).collect();
            let n: Vec<f64> = g.points().iter().map(|x| 1.5 + (k as f64 * x).cos()).collect();
            let r = spin_density_rhs(&g, &s, &n, &uniform(&g, [bx, 0.3, 0.0]), &p).unwrap();
            for (v, d) in s.iter().zip(&r) {
                prop_assert!(dot(*v, *d).abs() < 1e-14);
            }
        }
    }
}
