//! Residual of the gauge-invariant spin-kinetic equation against its
//! semiclassical form plus the `ħ²` bracket.
//!
//! With the tilde operators the static equation reads
//!
//! ```text
//! L f = v_x ∂ₓf + Δṽ_x[∂ₓf] − (e/m)(v + Δṽ) × B̃ · ∇_v f − (e/m) Ẽ · ∇_v f
//!       − (μ_B/m) (∂ₓB)~ · (ŝ + ∇ŝ) ∂_{v_x} f − (2μ_B/ħ) (ŝ × (B̃ + ΔB̃)) · ∇ŝ f
//! ```
//!
//! Expanding the tilde fields to `ħ²` gives `L = L_sc − R₂ − R_×`, where
//! `L_sc` keeps the bare fields, `R₂` collects the `ħ²` terms and
//! `R_× = (e/m)(Δṽ × b)·∇_v` is the product of two `ħ²` corrections.

use std::path::Path;
use std::rc::Rc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fluid::averaged::csv_error;
use crate::gauge::tilde::{
    dv, levi, scaled, sum, FieldProfiles, Probe, TildeFields, Truncation, UNIT,
};
use crate::kinetic::{AnalyticDistribution, SamplePoints};
use crate::params::PlasmaParams;
use crate::sphere::Vec3;
use crate::stats::loglog_slope;

/// Number of trailing rows used for the running slope.
pub const SLOPE_WINDOW: usize = 3;

fn add(a: [u32; 3], b: [u32; 3]) -> [u32; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

const VX: [u32; 3] = [1, 0, 0];

/// `L f` at one phase-space point, with the given tilde operators.
fn tilde_operator(
    tf: &TildeFields,
    f: &AnalyticDistribution,
    p: &PlasmaParams,
    x: f64,
    v: Vec3,
    s: Vec3,
) -> f64 {
    let qm = p.charge / p.mass;
    let mu = p.mu_b() / p.mass;
    let z = [0u32; 3];
    let f0: Probe<'_> = Rc::new(move |n, w| f.deriv(0, n, x, w, s));
    let fx: Probe<'_> = Rc::new(move |n, w| f.deriv(1, n, x, w, s));
    let grad: Vec<Probe<'_>> = (0..3)
        .map(|j| -> Probe<'_> { Rc::new(move |n, w| f.deriv_spin_gradient(0, n, x, w, s)[j]) })
        .collect();

    let mut out = v[0] * fx(z, v) + tf.delta_v(0, x, &fx)(z, v);
    for i in 0..3 {
        let fi = dv(&f0, UNIT[i]);
        out -= qm * tf.e_tilde(i, x, &fi)(z, v);
        for j in 0..3 {
            for k in 0..3 {
                let eps = levi(i, j, k);
                if eps == 0.0 {
                    continue;
                }
                let bk = tf.b_tilde(k, x, &fi);
                out -= qm * eps * (v[j] * bk(z, v) + tf.delta_v(j, x, &bk)(z, v));
            }
        }
    }
    for k in 0..3 {
        let inner = dv(&sum(vec![scaled(s[k], &f0), grad[k].clone()]), VX);
        out -= mu * tf.b_tilde_gradient(k, x, &inner)(z, v);
    }
    for j in 0..3 {
        for k in 0..3 {
            for l in 0..3 {
                let eps = levi(j, k, l);
                if eps == 0.0 {
                    continue;
                }
                let b = tf.b_tilde(l, x, &grad[j])(z, v) + tf.delta_b(l, x, &grad[j])(z, v);
                out -= qm * eps * s[k] * b;
            }
        }
    }
    out
}

/// `(L_sc, R₂, R_×)` at one point, from closed-form derivatives.
fn split_terms(
    fields: &FieldProfiles,
    f: &AnalyticDistribution,
    p: &PlasmaParams,
    x: f64,
    v: Vec3,
    s: Vec3,
) -> [f64; 3] {
    let (qm, mu, e, m) = (p.charge / p.mass, p.mu_b() / p.mass, p.charge, p.mass);
    let c = p.hbar / p.mass;
    let d = |nx: u32, nv: [u32; 3]| f.deriv(nx, nv, x, v, s);
    let dg = |nv: [u32; 3], j: usize| f.deriv_spin_gradient(0, nv, x, v, s)[j];
    let bd = |n: u32, k: usize| fields.b[k].derivative(n, x);
    let ed = |n: u32, i: usize| fields.e[i].derivative(n, x);

    let mut lsc = v[0] * d(1, [0; 3]);
    for i in 0..3 {
        let mut force = ed(0, i);
        for j in 0..3 {
            for k in 0..3 {
                force += levi(i, j, k) * v[j] * bd(0, k);
            }
        }
        lsc -= qm * force * d(0, UNIT[i]);
    }
    for k in 0..3 {
        lsc -= mu * bd(1, k) * (s[k] * d(0, VX) + dg(VX, k));
    }
    for j in 0..3 {
        for k in 0..3 {
            for l in 0..3 {
                lsc -= qm * levi(j, k, l) * s[k] * bd(0, l) * dg([0; 3], j);
            }
        }
    }

    let c2 = c * c;
    let mut r2 = 0.0;
    let mut rx = 0.0;
    for k in 0..3 {
        for l in 0..3 {
            r2 += e * c2 / (12.0 * m) * levi(0, k, l) * bd(1, k) * d(1, add(UNIT[l], VX));
        }
    }
    for i in 0..3 {
        let dxx = add(UNIT[i], [2, 0, 0]);
        r2 -= qm * c2 / 24.0 * ed(2, i) * d(0, dxx);
        for j in 0..3 {
            for k in 0..3 {
                let eps = levi(i, j, k);
                if eps == 0.0 {
                    continue;
                }
                r2 -= qm * c2 / 24.0 * eps * v[j] * bd(2, k) * d(0, dxx);
                for a in 0..3 {
                    for b in 0..3 {
                        let eps2 = levi(j, a, b);
                        if eps2 == 0.0 {
                            continue;
                        }
                        let dvx = -e * c2 / (12.0 * m) * eps2 * bd(1, a);
                        r2 += qm * eps * dvx * bd(0, k) * d(0, add(add(UNIT[b], VX), UNIT[i]));
                        rx += qm
                            * eps
                            * dvx
                            * (-c2 / 24.0)
                            * bd(2, k)
                            * d(0, add(add(UNIT[b], [3, 0, 0]), UNIT[i]));
                    }
                }
            }
        }
    }
    for k in 0..3 {
        r2 += mu * (-c2 / 24.0) * bd(3, k) * (s[k] * d(0, [3, 0, 0]) + dg([3, 0, 0], k));
    }
    for j in 0..3 {
        for k in 0..3 {
            for l in 0..3 {
                r2 += qm * levi(j, k, l) * s[k] * c2 / 24.0 * bd(2, l) * dg([2, 0, 0], j);
            }
        }
    }
    [lsc, r2, rx]
}

/// Norms for one value of `ħ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GiResidualRow {
    pub hbar: f64,
    /// `max |L_exact f − (L_sc − R₂) f|`.
    pub residual: f64,
    /// `max |R₂ f|`.
    pub bracket: f64,
    /// `max |L_trunc f − (L_sc − R₂ − R_×) f|`, zero up to rounding.
    pub identity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GiKineticResidual {
    pub rows: Vec<GiResidualRow>,
}

impl GiKineticResidual {
    /// Log-log slope of the residual over the trailing [`SLOPE_WINDOW`] rows
    /// ending at `i`, once at least two rows are available.
    pub fn trailing_slope(&self, i: usize) -> Option<f64> {
        if i == 0 || i >= self.rows.len() {
            return None;
        }
        let lo = (i + 1).saturating_sub(SLOPE_WINDOW);
        let w = &self.rows[lo..=i];
        let h: Vec<f64> = w.iter().map(|r| r.hbar).collect();
        let r: Vec<f64> = w.iter().map(|r| r.residual).collect();
        loglog_slope(&h, &r).ok()
    }

    /// Slope over all rows.
    pub fn slope(&self) -> Result<f64> {
        let h: Vec<f64> = self.rows.iter().map(|r| r.hbar).collect();
        let r: Vec<f64> = self.rows.iter().map(|r| r.residual).collect();
        loglog_slope(&h, &r)
    }

    pub fn max_identity(&self) -> f64 {
        self.rows.iter().map(|r| r.identity).fold(0.0, f64::max)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        w.write_record(["hbar", "residual", "slope"])
            .map_err(|e| csv_error(path, e))?;
        for (i, r) in self.rows.iter().enumerate() {
            let slope = self
                .trailing_slope(i)
                .map(|s| format!("{s:.17e}"))
                .unwrap_or_default();
            w.write_record([
                format!("{:.17e}", r.hbar),
                format!("{:.17e}", r.residual),
                slope,
            ])
            .map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Evaluates both forms of the static operator on every sample point.
pub fn gi_kinetic_residual(
    f: &AnalyticDistribution,
    fields: &FieldProfiles,
    base: &PlasmaParams,
    points: &SamplePoints,
    hbar_list: &[f64],
) -> Result<GiKineticResidual> {
    f.validate()?;
    fields.validate()?;
    if hbar_list.is_empty() {
        return Err(Error::TooFewSamples("need at least one ħ".into()));
    }
    let rows = hbar_list
        .iter()
        .map(|&hbar| {
            let p = PlasmaParams { hbar, ..*base };
            let exact = TildeFields::new(fields.clone(), &p, Truncation::Exact)?;
            let trunc = TildeFields::new(fields.clone(), &p, Truncation::Hbar2)?;
            let per_x: Vec<[f64; 3]> = points
                .x
                .par_iter()
                .map(|&x| {
                    let mut acc = [0.0f64; 3];
                    for &v in &points.v {
                        for &s in &points.sphere.nodes {
                            let [lsc, r2, rx] = split_terms(fields, f, &p, x, v, s);
                            let le = tilde_operator(&exact, f, &p, x, v, s);
                            let lt = tilde_operator(&trunc, f, &p, x, v, s);
                            acc[0] = acc[0].max((le - (lsc - r2)).abs());
                            acc[1] = acc[1].max(r2.abs());
                            acc[2] = acc[2].max((lt - (lsc - r2 - rx)).abs());
                        }
                    }
                    acc
                })
                .collect();
            let m = |c: usize| per_x.iter().map(|a| a[c]).fold(0.0, f64::max);
            Ok(GiResidualRow {
                hbar,
                residual: m(0),
                bracket: m(1),
                identity: m(2),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GiKineticResidual { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetic::Profile;
    use crate::sphere::SphereQuadrature;

    fn dist() -> AnalyticDistribution {
        AnalyticDistribution {
            density: Profile::SingleMode {
                offset: 1.0,
                amplitude: 0.3,
                k: 0.5,
                phase: 0.2,
            },
            drift: [0.2, -0.1, 0.1],
            v_thermal: 0.8,
            spin: [1.0, 0.2, -0.3, 0.5],
        }
    }

    fn points(f: &AnalyticDistribution) -> SamplePoints {
        SamplePoints::lattice(6.0, 4, f, 2, SphereQuadrature::new(2, 4).unwrap())
    }

    fn mode(amp: f64, k: f64, phase: f64) -> Profile {
        Profile::SingleMode {
            offset: 0.3,
            amplitude: amp,
            k,
            phase,
        }
    }

    #[test]
    fn uniform_fields_reduce_to_semiclassical() {
        let f = dist();
        let fields = FieldProfiles::uniform([0.4, -0.2, 0.1], [0.3, 0.8, -0.5]);
        let r = gi_kinetic_residual(
            &f,
            &fields,
            &PlasmaParams::default(),
            &points(&f),
            &[0.5, 1.0],
        )
        .unwrap();
        for row in &r.rows {
            assert!(
                row.residual < 1e-13 && row.bracket == 0.0 && row.identity < 1e-13,
                "{row:?}"
            );
        }
    }

    #[test]
    fn single_mode_fields_leave_fourth_order_residual() {
        let f = dist();
        let fields = FieldProfiles {
            e: [mode(0.6, 1.0, 0.1), mode(0.2, 0.7, 0.0), Profile::zero()],
            b: [
                Profile::constant(0.4),
                mode(0.5, 0.9, 0.3),
                mode(0.8, 1.1, -0.2),
            ],
        };
        let hbars = [0.4, 0.2, 0.1];
        let r = gi_kinetic_residual(&f, &fields, &PlasmaParams::default(), &points(&f), &hbars)
            .unwrap();
        assert!(r.max_identity() < 1e-12, "{r:?}");
        let slope = r.slope().unwrap();
        assert!(slope >= 3.8, "{r:?} {slope}");
        assert!(r.rows[2].bracket > 10.0 * r.rows[2].residual);
    }

    #[test]
    fn csv_lists_each_hbar() {
        let r = GiKineticResidual {
            rows: vec![
                GiResidualRow {
                    hbar: 0.2,
                    residual: 1.6e-3,
                    bracket: 0.0,
                    identity: 0.0,
                },
                GiResidualRow {
                    hbar: 0.1,
                    residual: 1e-4,
                    bracket: 0.0,
                    identity: 0.0,
                },
            ],
        };
        assert!((r.trailing_slope(1).unwrap() - 4.0).abs() < 1e-12);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("res.csv");
        r.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "hbar,residual,slope");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].ends_with(','));
    }
}
