//! Residuals of the ensemble-averaged continuity, momentum and spin equations
//! evaluated on a sampled Pauli trajectory.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fluid::ensemble::{ensemble_moments, FluidMoments, WavefunctionEnsemble};
use crate::grid::{Grid1D, Spectral};
use crate::params::PlasmaParams;
use crate::pauli::{ExternalPotentials, PauliPropagator};
use crate::sphere::cross;

/// Residual fields at each interior time level of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedResiduals {
    pub grid: Grid1D,
    pub times: Vec<f64>,
    /// `[level][x]`.
    pub continuity: Vec<Vec<f64>>,
    pub momentum: Vec<Vec<f64>>,
    /// `[level][component][x]`.
    pub spin: Vec<[Vec<f64>; 3]>,
    /// Largest masked fraction over the levels used.
    pub masked_fraction: f64,
}

fn max_abs<'a>(it: impl Iterator<Item = &'a f64>) -> f64 {
    it.filter(|v| v.is_finite())
        .fold(0.0, |m, v| m.max(v.abs()))
}

impl AveragedResiduals {
    pub fn continuity_max(&self) -> f64 {
        max_abs(self.continuity.iter().flatten())
    }

    pub fn momentum_max(&self) -> f64 {
        max_abs(self.momentum.iter().flatten())
    }

    pub fn spin_max(&self) -> f64 {
        max_abs(self.spin.iter().flatten().flatten())
    }

    /// One row per `(time, x index)`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        w.write_record([
            "time",
            "x_index",
            "x",
            "continuity",
            "momentum",
            "spin_x",
            "spin_y",
            "spin_z",
        ])
        .map_err(|e| csv_error(path, e))?;
        for (l, t) in self.times.iter().enumerate() {
            for j in 0..self.grid.n {
                let row = [
                    *t,
                    j as f64,
                    self.grid.x(j),
                    self.continuity[l][j],
                    self.momentum[l][j],
                    self.spin[l][0][j],
                    self.spin[l][1][j],
                    self.spin[l][2][j],
                ];
                let mut rec: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
                rec[1] = j.to_string();
                w.write_record(&rec).map_err(|e| csv_error(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other:?}", path.display())),
    }
}

/// Steps every member with a shared propagator set and records every
/// `stride`-th state, starting with the initial ensemble.
pub fn ensemble_trajectory(
    ens: &WavefunctionEnsemble,
    pot: &ExternalPotentials,
    params: &PlasmaParams,
    dt: f64,
    stride: usize,
    levels: usize,
) -> Result<Vec<WavefunctionEnsemble>> {
    if stride == 0 || levels == 0 {
        return Err(Error::param(
            "stride",
            "stride and level count must be positive",
        ));
    }
    let props = ens
        .members
        .iter()
        .map(|m| PauliPropagator::new(m.grid, pot, params, dt, m.momentum_offset))
        .collect::<Result<Vec<_>>>()?;
    let mut cur = ens.clone();
    let mut out = vec![cur.clone()];
    for _ in 1..levels {
        cur.members.par_iter_mut().zip(&props).for_each(|(m, p)| {
            for _ in 0..stride {
                p.step(m);
            }
        });
        out.push(cur.clone());
    }
    Ok(out)
}

/// Residuals of the averaged equations at every interior level of a
/// trajectory sampled every `dt`.
pub fn averaged_equation_residual(
    trajectory: &[WavefunctionEnsemble],
    dt: f64,
    pot: &ExternalPotentials,
    params: &PlasmaParams,
) -> Result<AveragedResiduals> {
    if trajectory.len() < 3 {
        return Err(Error::TooFewSamples(format!(
            "averaged residuals need >= 3 time levels, got {}",
            trajectory.len()
        )));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", "must be finite and > 0"));
    }
    let grid = trajectory[0].grid();
    if trajectory.iter().any(|e| e.grid() != grid) {
        return Err(Error::GridMismatch(
            "trajectory levels on different grids".into(),
        ));
    }
    let moments = trajectory
        .par_iter()
        .map(|e| ensemble_moments(e, pot, params))
        .collect::<Result<Vec<FluidMoments>>>()?;
    let sp = Spectral::new(grid);
    let n = grid.n;
    let (m_e, q) = (params.mass, params.charge);
    let rate = params.precession_rate();
    let (vy, vz): (Vec<f64>, Vec<f64>) = if pot.direct_b {
        (vec![0.0; n], vec![0.0; n])
    } else {
        (
            pot.a[1].iter().map(|a| q * a / m_e).collect(),
            pot.a[2].iter().map(|a| q * a / m_e).collect(),
        )
    };

    let mut out = AveragedResiduals {
        grid,
        times: Vec::new(),
        continuity: Vec::new(),
        momentum: Vec::new(),
        spin: Vec::new(),
        masked_fraction: 0.0,
    };
    for l in 1..moments.len() - 1 {
        let (prev, cur, next) = (&moments[l - 1], &moments[l], &moments[l + 1]);
        let ddt = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| (x - y) / (2.0 * dt)).collect()
        };
        let nv: Vec<f64> = cur.n.iter().zip(&cur.v).map(|(a, b)| a * b).collect();
        let dnv = sp.derivative(&nv, 1);
        let dn_dt = ddt(&next.n, &prev.n);
        let dv_dt = ddt(&next.v, &prev.v);
        let dp = sp.derivative(&cur.pressure, 1);
        let dk: [Vec<f64>; 3] = std::array::from_fn(|c| sp.derivative(&cur.k[c], 1));
        let ds_dt: [Vec<f64>; 3] = std::array::from_fn(|c| ddt(&next.s[c], &prev.s[c]));

        let mut cont = vec![f64::NAN; n];
        let mut mom = vec![f64::NAN; n];
        let mut spin: [Vec<f64>; 3] = std::array::from_fn(|_| vec![f64::NAN; n]);
        for i in 0..n {
            cont[i] = dn_dt[i] + dnv[i];
            if !(prev.defined[i] && cur.defined[i] && next.defined[i]) {
                continue;
            }
            let b = [pot.b[0][i], pot.b[1][i], pot.b[2][i]];
            let vel = [cur.v[i], vy[i], vz[i]];
            let lorentz_x = if pot.direct_b { 0.0 } else { cross(vel, b)[0] };
            let lhs = m_e * cur.n[i] * (dv_dt[i] + cur.v[i] * cur.dv[i]);
            let rhs = -q * cur.n[i] * (pot.e[0][i] + lorentz_x) - dp[i]
                + cur.bohm_exact[i]
                + cur.f_spin[i];
            mom[i] = lhs - rhs;
            let s = [cur.s[0][i], cur.s[1][i], cur.s[2][i]];
            let bxs = cross(b, s);
            for c in 0..3 {
                spin[c][i] = cur.n[i] * (ds_dt[c][i] + cur.v[i] * cur.ds[c][i]) + dk[c][i]
                    - rate * cur.n[i] * bxs[c]
                    - cur.omega_spin[c][i];
            }
        }
        out.times.push(l as f64 * dt);
        out.continuity.push(cont);
        out.momentum.push(mom);
        out.spin.push(spin);
        out.masked_fraction = out.masked_fraction.max(cur.masked_fraction);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::C64;
    use crate::pauli::{spin_state, SpinorField};
    use std::f64::consts::PI;

    fn member(g: Grid1D, p0: f64, shift: f64, spin: (f64, f64)) -> SpinorField {
        let mut up = Vec::new();
        let mut down = Vec::new();
        for x in g.points() {
            let amp = (1.0 + 0.5 * (x + shift).cos()).sqrt();
            let th = spin.0 + 0.3 * (x - shift).sin();
            let chi = spin_state(th, spin.1 + 0.2 * x.cos());
            let z = C64::from_polar(amp, p0 * x);
            up.push(z * chi[0]);
            down.push(z * chi[1]);
        }
        let mut s = SpinorField::new(g, up, down).unwrap();
        s.normalize().unwrap();
        s
    }

    fn pair(g: Grid1D) -> WavefunctionEnsemble {
        WavefunctionEnsemble::new(
            vec![
                member(g, 1.0, 0.0, (0.8, 0.0)),
                member(g, -2.0, 1.3, (2.0, 1.0)),
            ],
            vec![0.6, 0.4],
        )
        .unwrap()
    }

    #[test]
    fn residuals_converge_at_second_order() {
        let mut errs = Vec::new();
        // dt ∝ Δx² keeps the kinetic phase per step fixed
        for (k, nx) in [32usize, 48, 64].into_iter().enumerate() {
            let g = Grid1D::new(nx, 2.0 * PI).unwrap();
            let dt = 0.02 / 2f64.powi(k as i32);
            let phi: Vec<f64> = g.points().iter().map(|x| 0.3 * x.cos()).collect();
            let ay: Vec<f64> = g.points().iter().map(|x| 0.2 * (2.0 * x).sin()).collect();
            let az: Vec<f64> = g.points().iter().map(|x| 0.1 * x.cos()).collect();
            let pot =
                ExternalPotentials::from_potentials(&g, phi, [vec![0.0; g.n], ay, az]).unwrap();
            let p = PlasmaParams::default();
            let traj = ensemble_trajectory(&pair(g), &pot, &p, dt, 1, 3).unwrap();
            let r = averaged_equation_residual(&traj, dt, &pot, &p).unwrap();
            errs.push([r.continuity_max(), r.momentum_max(), r.spin_max()]);
        }
        for c in 0..3 {
            let e: Vec<f64> = errs.iter().map(|e| e[c]).collect();
            let orders = crate::stats::observed_orders(&e, 2.0);
            assert!(
                orders.iter().all(|o| (o - 2.0).abs() < 0.2),
                "{c}: {e:?} {orders:?}"
            );
        }
    }

    #[test]
    fn stationary_ensemble_has_small_residuals() {
        let g = Grid1D::new(32, 2.0 * PI).unwrap();
        let p = PlasmaParams::default();
        let plane = |k: f64, th: f64| {
            let w = crate::transforms::wavefunction::WaveFunction1D::from_fn(g, |x| {
                C64::from_polar(1.0, k * x)
            })
            .unwrap()
            .normalized()
            .unwrap();
            SpinorField::product(&w, spin_state(th, 0.0))
        };
        let ens = WavefunctionEnsemble::new(vec![plane(1.0, 0.0), plane(-1.0, PI)], vec![0.5, 0.5])
            .unwrap();
        let pot = ExternalPotentials::uniform_b(&g, [0.0, 0.0, 0.7]);
        let traj = ensemble_trajectory(&ens, &pot, &p, 0.01, 5, 4).unwrap();
        let r = averaged_equation_residual(&traj, 0.05, &pot, &p).unwrap();
        assert!(r.continuity_max() < 1e-8 && r.momentum_max() < 1e-8 && r.spin_max() < 1e-8);
    }

    #[test]
    fn rejects_short_trajectories() {
        let g = Grid1D::new(16, 2.0 * PI).unwrap();
        let p = PlasmaParams::default();
        let traj = vec![pair(g), pair(g)];
        assert!(matches!(
            averaged_equation_residual(&traj, 0.1, &ExternalPotentials::zero(&g), &p),
            Err(Error::TooFewSamples(_))
        ));
    }

    #[test]
    fn csv_has_one_row_per_point() {
        let g = Grid1D::new(16, 2.0 * PI).unwrap();
        let p = PlasmaParams::default();
        let pot = ExternalPotentials::zero(&g);
        let traj = ensemble_trajectory(&pair(g), &pot, &p, 0.01, 1, 4).unwrap();
        let r = averaged_equation_residual(&traj, 0.01, &pot, &p).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("res.csv");
        r.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 16);
        assert!(text.starts_with("time,x_index,x,continuity"));
    }
}
