//! Ensemble-averaged fluid moments of a set of Pauli spinors.
//!
//! Every quantity that needs a derivative of a per-point ratio (velocity,
//! spin direction) is assembled from spectral derivatives of the smooth
//! products `n`, `n v` and `n s`, so no ratio is ever differentiated.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid1D, Spectral};
use crate::params::PlasmaParams;
use crate::pauli::{current_density, ExternalPotentials, SpinorField};
use crate::sphere::{cross, Vec3};

/// Tolerance on `Σ P_α − 1`.
pub const PROBABILITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct WavefunctionEnsemble {
    pub members: Vec<SpinorField>,
    pub probabilities: Vec<f64>,
}

impl WavefunctionEnsemble {
    pub fn new(members: Vec<SpinorField>, probabilities: Vec<f64>) -> Result<Self> {
        if members.is_empty() || members.len() != probabilities.len() {
            return Err(Error::param(
                "ensemble",
                "need one probability per member and at least one member",
            ));
        }
        if probabilities.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::param(
                "probabilities",
                "must be finite and nonnegative",
            ));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > PROBABILITY_TOL {
            return Err(Error::param(
                "probabilities",
                format!("sum to {total}, not 1"),
            ));
        }
        let grid = members[0].grid;
        for m in &members {
            if m.grid != grid {
                return Err(Error::GridMismatch(
                    "ensemble members on different grids".into(),
                ));
            }
            m.require_normalized()?;
        }
        Ok(Self {
            members,
            probabilities,
        })
    }

    pub fn grid(&self) -> Grid1D {
        self.members[0].grid
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Per-member fields on the grid.
#[derive(Debug, Clone)]
struct Member {
    n: Vec<f64>,
    dn: Vec<f64>,
    d2n: Vec<f64>,
    d3n: Vec<f64>,
    /// `n v`.
    j: Vec<f64>,
    v: Vec<f64>,
    s: Vec<Vec3>,
    /// `∂ₓs`.
    ds: Vec<Vec3>,
    /// `∂ₓ(n ∂ₓs)`.
    div: Vec<Vec3>,
    defined: Vec<bool>,
}

fn member_fields(
    sp: &Spectral,
    st: &SpinorField,
    pot: &ExternalPotentials,
    params: &PlasmaParams,
    floor: f64,
) -> Member {
    let g = st.grid;
    let n = st.density();
    let dn = sp.derivative(&n, 1);
    let d2n = sp.derivative(&n, 2);
    let d3n = sp.derivative(&n, 3);
    let j: Vec<f64> = current_density(st, sp, params, &pot.a[0])
        .into_iter()
        .map(|x| x / params.mass)
        .collect();
    let half = 0.5 * params.hbar;
    let ns: [Vec<f64>; 3] = {
        let mut out: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; g.n]);
        for i in 0..g.n {
            let (a, b) = (st.up[i], st.down[i]);
            let c = a.conj() * b;
            out[0][i] = half * 2.0 * c.re;
            out[1][i] = half * 2.0 * c.im;
            out[2][i] = half * (a.norm_sqr() - b.norm_sqr());
        }
        out
    };
    let d1: [Vec<f64>; 3] = std::array::from_fn(|c| sp.derivative(&ns[c], 1));
    let d2: [Vec<f64>; 3] = std::array::from_fn(|c| sp.derivative(&ns[c], 2));
    let nmax = n.iter().copied().fold(0.0, f64::max);
    let mut v = vec![f64::NAN; g.n];
    let mut s = vec![[f64::NAN; 3]; g.n];
    let mut ds = vec![[f64::NAN; 3]; g.n];
    let mut div = vec![[f64::NAN; 3]; g.n];
    let mut defined = vec![false; g.n];
    for i in 0..g.n {
        if !(n[i] > floor * nmax) {
            continue;
        }
        defined[i] = true;
        v[i] = j[i] / n[i];
        let si = [0, 1, 2].map(|c| ns[c][i] / n[i]);
        let dsi = [0, 1, 2].map(|c| (d1[c][i] - si[c] * dn[i]) / n[i]);
        s[i] = si;
        ds[i] = dsi;
        div[i] = [0, 1, 2].map(|c| d2[c][i] - dsi[c] * dn[i] - si[c] * d2n[i]);
    }
    Member {
        n,
        dn,
        d2n,
        d3n,
        j,
        v,
        s,
        ds,
        div,
        defined,
    }
}

/// `n ∂ₓ(∂ₓ²√n/√n)` from derivatives of `n`.
fn n_grad_q(n: f64, d1: f64, d2: f64, d3: f64) -> f64 {
    0.5 * d3 - d1 * d2 / n + d1 * d1 * d1 / (2.0 * n * n)
}

/// Averaged fluid moments, all on the grid. Spin-tensor entries keep only the
/// `x x` component since only x-derivatives exist.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidMoments {
    pub n: Vec<f64>,
    /// Mean x-velocity.
    pub v: Vec<f64>,
    /// Mean spin density `S = ⟨s_α⟩`.
    pub s: [Vec<f64>; 3],
    /// `m n ⟨w_α²⟩`.
    pub pressure: Vec<f64>,
    /// `K_{x a} = n ⟨w_α 𝒮_{α a}⟩`.
    pub k: [Vec<f64>; 3],
    /// `Σ_xx = ∂ₓS_a ∂ₓS^a`.
    pub sigma: Vec<f64>,
    /// `Σ̃_xx = ⟨∂ₓ𝒮_{α a} ∂ₓ𝒮_α^a⟩`.
    pub sigma_tilde: Vec<f64>,
    /// `2 ∂ₓS_a ⟨∂ₓ𝒮_α^a⟩`.
    pub sigma_cross: Vec<f64>,
    /// x-component of the spin force density.
    pub f_spin: Vec<f64>,
    /// Its three terms: Zeeman gradient, `−∂ₓ[n(Σ + Σ̃)]/m`, mixed gradient term.
    pub f_spin_terms: [Vec<f64>; 3],
    pub omega_spin: [Vec<f64>; 3],
    /// `[term][component]`.
    pub omega_terms: [[Vec<f64>; 3]; 3],
    /// `(ħ²/2m) Σ P_α n_α ∂ₓQ_α`, the exact averaged quantum force.
    pub bohm_exact: Vec<f64>,
    /// `(ħ² n/2m) ∂ₓ(∂ₓ²√n/√n)` of the mean density.
    pub bohm_mean: Vec<f64>,
    /// `∂ₓS`.
    pub ds: [Vec<f64>; 3],
    /// `∂ₓv`.
    pub dv: Vec<f64>,
    /// True where every member is above its density floor.
    pub defined: Vec<bool>,
    pub masked_fraction: f64,
}

/// Relative density floor below which a member's ratios are masked.
pub const MEMBER_FLOOR: f64 = 1e-10;

pub fn ensemble_moments(
    ens: &WavefunctionEnsemble,
    pot: &ExternalPotentials,
    params: &PlasmaParams,
) -> Result<FluidMoments> {
    params.validate()?;
    let g = ens.grid();
    pot.check_shapes(&g)?;
    let sp = Spectral::new(g);
    let members: Vec<Member> = ens
        .members
        .par_iter()
        .map(|m| member_fields(&sp, m, pot, params, MEMBER_FLOOR))
        .collect();
    let nn = g.n;
    let p = &ens.probabilities;
    let sum = |f: &dyn Fn(&Member, usize) -> f64| -> Vec<f64> {
        (0..nn)
            .map(|i| members.iter().zip(p).map(|(m, w)| w * f(m, i)).sum())
            .collect()
    };
    let defined: Vec<bool> = (0..nn)
        .map(|i| members.iter().all(|m| m.defined[i]))
        .collect();
    let masked_fraction = defined.iter().filter(|d| !**d).count() as f64 / nn as f64;
    let zero_if = |ok: bool, v: f64| if ok { v } else { 0.0 };

    let n = sum(&|m, i| m.n[i]);
    let dn = sum(&|m, i| m.dn[i]);
    let d2n = sum(&|m, i| m.d2n[i]);
    let d3n = sum(&|m, i| m.d3n[i]);
    let nv = sum(&|m, i| m.j[i]);
    let ns: [Vec<f64>; 3] =
        std::array::from_fn(|c| sum(&|m, i| zero_if(m.defined[i], m.n[i] * m.s[i][c])));
    let dnv = sp.derivative(&nv, 1);
    let dns: [Vec<f64>; 3] = std::array::from_fn(|c| sp.derivative(&ns[c], 1));
    let d2ns: [Vec<f64>; 3] = std::array::from_fn(|c| sp.derivative(&ns[c], 2));

    let mut v = vec![f64::NAN; nn];
    let mut dv = vec![f64::NAN; nn];
    let mut s: [Vec<f64>; 3] = std::array::from_fn(|_| vec![f64::NAN; nn]);
    let mut ds: [Vec<f64>; 3] = std::array::from_fn(|_| vec![f64::NAN; nn]);
    let mut div_s: [Vec<f64>; 3] = std::array::from_fn(|_| vec![f64::NAN; nn]);
    for i in 0..nn {
        if !defined[i] {
            continue;
        }
        v[i] = nv[i] / n[i];
        dv[i] = (dnv[i] - v[i] * dn[i]) / n[i];
        for c in 0..3 {
            s[c][i] = ns[c][i] / n[i];
            ds[c][i] = (dns[c][i] - s[c][i] * dn[i]) / n[i];
            div_s[c][i] = d2ns[c][i] - ds[c][i] * dn[i] - s[c][i] * d2n[i];
        }
    }

    let m_e = params.mass;
    let mut pressure = vec![0.0; nn];
    let mut k: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; nn]);
    let mut sigma = vec![0.0; nn];
    let mut sigma_tilde = vec![0.0; nn];
    let mut sigma_cross = vec![0.0; nn];
    let mut omega_terms: [[Vec<f64>; 3]; 3] =
        std::array::from_fn(|_| std::array::from_fn(|_| vec![0.0; nn]));
    let mut bohm_exact = vec![0.0; nn];
    let mut bohm_mean = vec![0.0; nn];
    let hb = params.hbar * params.hbar / (2.0 * m_e);
    for i in 0..nn {
        if !defined[i] {
            continue;
        }
        let si = [s[0][i], s[1][i], s[2][i]];
        let dsi = [ds[0][i], ds[1][i], ds[2][i]];
        let mut mean_dcal = [0.0; 3];
        let mut o3 = [0.0; 3];
        let mut sum_div = [0.0; 3];
        for (m, w) in members.iter().zip(p) {
            let wn = w * m.n[i];
            let wa = m.v[i] - v[i];
            let cal = [0, 1, 2].map(|c| m.s[i][c] - si[c]);
            let dcal = [0, 1, 2].map(|c| m.ds[i][c] - dsi[c]);
            pressure[i] += m_e * wn * wa * wa;
            for c in 0..3 {
                k[c][i] += wn * wa * cal[c];
                mean_dcal[c] += wn * dcal[c];
                sum_div[c] += w * m.div[i][c];
            }
            sigma_tilde[i] += wn * dcal.iter().map(|x| x * x).sum::<f64>();
            let t = cross(cal, m.div[i]);
            for c in 0..3 {
                o3[c] += w * t[c] / m_e;
            }
            bohm_exact[i] += w * hb * n_grad_q(m.n[i], m.dn[i], m.d2n[i], m.d3n[i]);
        }
        sigma_tilde[i] /= n[i];
        mean_dcal.iter_mut().for_each(|x| *x /= n[i]);
        sigma[i] = dsi.iter().map(|x| x * x).sum();
        sigma_cross[i] = 2.0 * (0..3).map(|c| dsi[c] * mean_dcal[c]).sum::<f64>();
        let div_mean = [div_s[0][i], div_s[1][i], div_s[2][i]];
        // ∂ₓ(n ⟨∂ₓ𝒮_α⟩) = Σ P ∂ₓ(n_α ∂ₓs_α) − ∂ₓ(n ∂ₓS)
        let div_fluct = [0, 1, 2].map(|c| sum_div[c] - div_mean[c]);
        let o1 = cross(si, div_mean);
        let o2 = cross(si, div_fluct);
        for c in 0..3 {
            omega_terms[0][c][i] = o1[c] / m_e;
            omega_terms[1][c][i] = o2[c] / m_e;
            omega_terms[2][c][i] = o3[c];
        }
        bohm_mean[i] = hb * n_grad_q(n[i], dn[i], d2n[i], d3n[i]);
    }

    let db: [Vec<f64>; 3] = std::array::from_fn(|c| sp.derivative(&pot.b[c], 1));
    let rate = params.precession_rate();
    let t1: Vec<f64> = (0..nn)
        .map(|i| {
            if !defined[i] {
                return 0.0;
            }
            -rate * n[i] * (0..3).map(|c| db[c][i] * s[c][i]).sum::<f64>()
        })
        .collect();
    let stress: Vec<f64> = (0..nn)
        .map(|i| n[i] * (sigma[i] + sigma_tilde[i]))
        .collect();
    let mixed: Vec<f64> = (0..nn).map(|i| n[i] * sigma_cross[i]).collect();
    let t2: Vec<f64> = sp
        .derivative(&stress, 1)
        .into_iter()
        .map(|x| -x / m_e)
        .collect();
    let t3: Vec<f64> = sp
        .derivative(&mixed, 1)
        .into_iter()
        .map(|x| -x / m_e)
        .collect();
    let f_spin = (0..nn).map(|i| t1[i] + t2[i] + t3[i]).collect();
    let omega_spin = std::array::from_fn(|c| {
        (0..nn)
            .map(|i| (0..3).map(|t| omega_terms[t][c][i]).sum())
            .collect()
    });

    Ok(FluidMoments {
        n,
        v,
        s,
        pressure,
        k,
        sigma,
        sigma_tilde,
        sigma_cross,
        f_spin,
        f_spin_terms: [t1, t2, t3],
        omega_spin,
        omega_terms,
        bohm_exact,
        bohm_mean,
        ds,
        dv,
        defined,
        masked_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::C64;
    use crate::pauli::{init_state, spin_state, spinor_observables, StateFamily};
    use crate::transforms::wavefunction::WaveFunction1D;
    use std::f64::consts::PI;

    fn grid() -> Grid1D {
        Grid1D::new(64, 2.0 * PI).unwrap()
    }

    /// Nodeless state with a spin direction that winds along x.
    pub(crate) fn textured(g: Grid1D, p0: f64, tilt: f64, hbar: f64) -> SpinorField {
        let mut up = Vec::with_capacity(g.n);
        let mut down = Vec::with_capacity(g.n);
        for x in g.points() {
            let amp = (1.0 + 0.3 * (x + tilt).cos()).sqrt();
            let th = 1.0 + 0.4 * (x - tilt).sin();
            let ph = 0.5 * (2.0 * x).cos() + tilt;
            let chi = spin_state(th, ph);
            let ph0 = C64::from_polar(amp, p0 * x / hbar + 0.2 * x.sin());
            up.push(ph0 * chi[0]);
            down.push(ph0 * chi[1]);
        }
        let mut s = SpinorField::new(g, up, down).unwrap();
        s.normalize().unwrap();
        s
    }

    #[test]
    fn single_member_degenerates() {
        let g = grid();
        let p = PlasmaParams::with_hbar(1.0);
        let st = textured(g, 1.0, 0.3, p.hbar);
        let pot = ExternalPotentials::zero(&g);
        let ens = WavefunctionEnsemble::new(vec![st.clone()], vec![1.0]).unwrap();
        let m = ensemble_moments(&ens, &pot, &p).unwrap();
        let obs = spinor_observables(&st, &pot, &p).unwrap();
        for i in 0..g.n {
            assert!(m.pressure[i].abs() < 1e-12 && m.sigma_tilde[i].abs() < 1e-12);
            assert!(m.k.iter().all(|k| k[i].abs() < 1e-12));
            assert!((m.n[i] - obs.n[i]).abs() < 1e-13);
            assert!((m.v[i] - obs.v[i]).abs() < 1e-13);
            for c in 0..3 {
                assert!((m.s[c][i] - obs.s[i][c]).abs() < 1e-13);
                assert!(
                    m.omega_terms[1][c][i].abs() < 1e-10 && m.omega_terms[2][c][i].abs() < 1e-10
                );
            }
            assert!((m.bohm_exact[i] - m.bohm_mean[i]).abs() < 1e-10);
        }
        assert!(m.sigma.iter().any(|v| *v > 1e-3));
        assert_eq!(m.masked_fraction, 0.0);
    }

    #[test]
    fn counter_propagating_plane_waves() {
        let g = grid();
        let p = PlasmaParams::default();
        let p0 = 2.0;
        let fam = |p0: f64| StateFamily::PlaneWave {
            p0,
            theta: 0.0,
            phi: 0.0,
        };
        let a = init_state(&fam(p0), g, &p).unwrap();
        let b = init_state(&fam(-p0), g, &p).unwrap();
        let ens = WavefunctionEnsemble::new(vec![a, b], vec![0.5, 0.5]).unwrap();
        let m = ensemble_moments(&ens, &ExternalPotentials::zero(&g), &p).unwrap();
        for i in 0..g.n {
            assert!(m.v[i].abs() < 1e-13);
            let want = m.n[i] * p.mass * (p0 / p.mass).powi(2);
            assert!((m.pressure[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn opposite_spins_cancel() {
        let g = grid();
        let p = PlasmaParams::default();
        let env = WaveFunction1D::from_fn(g, |x| C64::new((1.0 + 0.2 * x.cos()).sqrt(), 0.0))
            .unwrap()
            .normalized()
            .unwrap();
        let plus = SpinorField::product(&env, spin_state(PI / 2.0, 0.0));
        let minus = SpinorField::product(&env, spin_state(PI / 2.0, PI));
        let ens = WavefunctionEnsemble::new(vec![plus, minus], vec![0.5, 0.5]).unwrap();
        let m = ensemble_moments(&ens, &ExternalPotentials::zero(&g), &p).unwrap();
        assert!(m.s.iter().flatten().all(|v| v.abs() < 1e-14));
        assert!(m.k.iter().flatten().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn rejects_bad_ensembles() {
        let g = grid();
        let p = PlasmaParams::default();
        let a = textured(g, 0.0, 0.0, p.hbar);
        assert!(WavefunctionEnsemble::new(vec![a.clone(), a.clone()], vec![0.5, 0.4]).is_err());
        let other = textured(Grid1D::new(32, 2.0 * PI).unwrap(), 0.0, 0.0, p.hbar);
        assert!(matches!(
            WavefunctionEnsemble::new(vec![a, other], vec![0.5, 0.5]),
            Err(Error::GridMismatch(_))
        ));
    }
}
