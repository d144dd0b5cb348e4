//! Static gauge transformations `ψ → ψ e^{−ieΛ/ħ}`, `A → A + ∇Λ`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid1D, C64};
use crate::params::PlasmaParams;
use crate::pauli::{ExternalPotentials, SpinorField};

/// Gauge function `Λ(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum GaugeTransformSpec {
    Constant {
        value: f64,
    },
    /// `Λ = αx`. The non-periodic phase goes into the momentum offset.
    Linear {
        slope: f64,
    },
    /// `Λ = β sin(kx + phase)` with `k` a multiple of `2π/L`.
    SingleMode {
        amplitude: f64,
        k: f64,
        #[serde(default)]
        phase: f64,
    },
}

impl GaugeTransformSpec {
    pub fn from_name(family: &str, value: serde_json::Value) -> Result<Self> {
        let mut v = value;
        if let serde_json::Value::Object(ref mut m) = v {
            m.insert(
                "family".into(),
                serde_json::Value::String(family.to_string()),
            );
        }
        serde_json::from_value(v).map_err(|e| Error::Unsupported {
            what: "gauge family",
            detail: e.to_string(),
        })
    }

    pub fn validate(&self, grid: &Grid1D) -> Result<()> {
        match *self {
            GaugeTransformSpec::Constant { value } if value.is_finite() => Ok(()),
            GaugeTransformSpec::Linear { slope } if slope.is_finite() => Ok(()),
            GaugeTransformSpec::SingleMode {
                amplitude,
                k,
                phase,
            } if amplitude.is_finite() && k.is_finite() && phase.is_finite() => {
                let cycles = k * grid.length / (2.0 * PI);
                if (cycles - cycles.round()).abs() > 1e-9 {
                    return Err(Error::Unsupported {
                        what: "gauge family",
                        detail: format!("single-mode Λ must be periodic, kL/2π = {cycles}"),
                    });
                }
                Ok(())
            }
            _ => Err(Error::param("gauge", "parameters must be finite")),
        }
    }

    /// Periodic part of `Λ(x)`; the linear ramp is carried separately.
    pub fn periodic_value(&self, x: f64) -> f64 {
        match *self {
            GaugeTransformSpec::Constant { value } => value,
            GaugeTransformSpec::Linear { .. } => 0.0,
            GaugeTransformSpec::SingleMode {
                amplitude,
                k,
                phase,
            } => amplitude * (k * x + phase).sin(),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match *self {
            GaugeTransformSpec::Linear { slope } => slope * x,
            _ => self.periodic_value(x),
        }
    }

    pub fn gradient(&self, x: f64) -> f64 {
        match *self {
            GaugeTransformSpec::Constant { .. } => 0.0,
            GaugeTransformSpec::Linear { slope } => slope,
            GaugeTransformSpec::SingleMode {
                amplitude,
                k,
                phase,
            } => amplitude * k * (k * x + phase).cos(),
        }
    }

    pub fn inverse(&self) -> Self {
        match *self {
            GaugeTransformSpec::Constant { value } => {
                GaugeTransformSpec::Constant { value: -value }
            }
            GaugeTransformSpec::Linear { slope } => GaugeTransformSpec::Linear { slope: -slope },
            GaugeTransformSpec::SingleMode {
                amplitude,
                k,
                phase,
            } => GaugeTransformSpec::SingleMode {
                amplitude: -amplitude,
                k,
                phase,
            },
        }
    }
}

/// `(ψ e^{−ieΛ/ħ}, A + ∇Λ)`. `φ`, `E` and `B` are unchanged for static `Λ`.
pub fn gauge_transform_state(
    psi: &SpinorField,
    pot: &ExternalPotentials,
    g: &GaugeTransformSpec,
    params: &PlasmaParams,
) -> Result<(SpinorField, ExternalPotentials)> {
    params.validate()?;
    g.validate(&psi.grid)?;
    pot.check_shapes(&psi.grid)?;
    let e = params.charge;
    let mut out = psi.clone();
    for (j, x) in psi.grid.points().into_iter().enumerate() {
        let ph = C64::from_polar(1.0, -e * g.periodic_value(x) / params.hbar);
        out.up[j] *= ph;
        out.down[j] *= ph;
    }
    if let GaugeTransformSpec::Linear { slope } = *g {
        out.momentum_offset -= e * slope;
    }
    let mut pot2 = pot.clone();
    for (j, x) in psi.grid.points().into_iter().enumerate() {
        pot2.a[0][j] += g.gradient(x);
    }
    Ok((out, pot2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::{init_state, spinor_observables, StateFamily};

    fn setup() -> (SpinorField, ExternalPotentials, PlasmaParams) {
        let g = Grid1D::new(64, 10.0).unwrap();
        let p = PlasmaParams::default();
        let fam = StateFamily::Gaussian {
            x0: 5.0,
            sigma: 0.8,
            p0: 0.7,
            theta: 1.1,
            phi: 0.4,
        };
        (
            init_state(&fam, g, &p).unwrap(),
            ExternalPotentials::zero(&g),
            p,
        )
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn observables_are_invariant() {
        let (psi, pot, p) = setup();
        let o0 = spinor_observables(&psi, &pot, &p).unwrap();
        let specs = [
            GaugeTransformSpec::Constant { value: 0.9 },
            GaugeTransformSpec::Linear { slope: 0.35 },
            GaugeTransformSpec::SingleMode {
                amplitude: 0.4,
                k: 2.0 * PI / 10.0 * 2.0,
                phase: 0.3,
            },
        ];
        for g in specs {
            let (psi2, pot2) = gauge_transform_state(&psi, &pot, &g, &p).unwrap();
            let o = spinor_observables(&psi2, &pot2, &p).unwrap();
            assert!(max_diff(&o.n, &o0.n) < 1e-13);
            let nmax = o0.n.iter().copied().fold(0.0, f64::max);
            for j in 0..o.n.len() {
                if o0.defined[j] {
                    assert!((o.n[j] * o.v[j] - o0.n[j] * o0.v[j]).abs() < 1e-13, "{g:?}");
                }
                if o0.n[j] > 1e-3 * nmax {
                    assert!((o.v[j] - o0.v[j]).abs() < 1e-13, "{g:?}");
                }
            }
            for c in 0..3 {
                let a: Vec<f64> = o.s.iter().map(|s| s[c]).collect();
                let b: Vec<f64> = o0.s.iter().map(|s| s[c]).collect();
                assert!(max_diff(&a, &b) < 1e-13);
            }
        }
    }

    #[test]
    fn linear_gauge_moves_the_offset() {
        let (psi, pot, p) = setup();
        let (psi2, pot2) =
            gauge_transform_state(&psi, &pot, &GaugeTransformSpec::Linear { slope: 0.5 }, &p)
                .unwrap();
        assert_eq!(psi2.momentum_offset, -0.5);
        assert!(pot2.a[0].iter().all(|a| *a == 0.5));
        assert_eq!(psi2.up, psi.up);
    }

    #[test]
    fn round_trip_recovers_state() {
        let (psi, pot, p) = setup();
        let g = GaugeTransformSpec::SingleMode {
            amplitude: 0.7,
            k: 2.0 * PI / 10.0,
            phase: 0.0,
        };
        let (a, pa) = gauge_transform_state(&psi, &pot, &g, &p).unwrap();
        let (b, pb) = gauge_transform_state(&a, &pa, &g.inverse(), &p).unwrap();
        let d = psi
            .up
            .iter()
            .chain(&psi.down)
            .zip(b.up.iter().chain(&b.down))
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(d < 1e-14);
        assert!(max_diff(&pb.a[0], &pot.a[0]) < 1e-15);
    }

    #[test]
    fn rejects_unsupported_families() {
        let (psi, pot, p) = setup();
        let bad = GaugeTransformSpec::SingleMode {
            amplitude: 1.0,
            k: 1.0,
            phase: 0.0,
        };
        assert!(matches!(
            gauge_transform_state(&psi, &pot, &bad, &p),
            Err(Error::Unsupported { .. })
        ));
        assert!(GaugeTransformSpec::from_name("quadratic", serde_json::json!({"a": 1.0})).is_err());
    }
}
