//! Nonlocal field operators `Ẽ`, `B̃`, `Δṽ`, `ΔB̃` acting on phase-space test
//! functions.
//!
//! A field is `F(x) = F₀ + Σ_{κ=±k} F̂_κ e^{iκx}`. The mixed operator
//! `←∂ₓ·→∂_v` turns into a shift of the test function along `v_x` by
//! `κħτ/m`, integrated over `τ ∈ [−1/2, 1/2]`:
//!
//! ```text
//! corr(F)[g] = Σ_κ F̂_κ e^{iκx} ∫dτ [g(v − κcτ x̂) − g(v)]          ≈ −(c²/24) F'' ∂²_{v_x} g
//! sin(F)[g]  = Σ_κ F̂_κ e^{iκx} ∫dτ τ [g(v − κcτ x̂) − g(v + κcτ x̂)]/2i ≈ (c/12) F' ∂_{v_x} g
//! ```
//!
//! with `c = ħ/m`. Then `Ẽ = E + corr(E)`, `B̃ = B + corr(B)`,
//! `Δṽ_i = −(ec/m) ε_ikl sin(B_k)[∂_{v_l}·]` and `ΔB̃ = c sin(∂ₓB)[∂_{v_x}·]`.

use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetic::Profile;
use crate::params::PlasmaParams;
use crate::sphere::{gauss_legendre, Vec3};

/// Velocity derivatives of a test function at fixed `(x, ŝ)`:
/// `probe(n, v) = ∂^{n_x}_{v_x} ∂^{n_y}_{v_y} ∂^{n_z}_{v_z} g(v)`.
pub type Probe<'a> = Rc<dyn Fn([u32; 3], Vec3) -> f64 + 'a>;

/// τ nodes used by the exact operators.
const TAU_NODES: usize = 16;

pub(crate) const UNIT: [[u32; 3]; 3] = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];

pub(crate) fn levi(i: usize, j: usize, k: usize) -> f64 {
    if i == j || j == k || i == k {
        0.0
    } else if (i, j, k) == (0, 1, 2) || (i, j, k) == (1, 2, 0) || (i, j, k) == (2, 0, 1) {
        1.0
    } else {
        -1.0
    }
}

fn add(a: [u32; 3], b: [u32; 3]) -> [u32; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

/// `∂_v^d g`.
pub fn dv<'a>(g: &Probe<'a>, d: [u32; 3]) -> Probe<'a> {
    let g = g.clone();
    Rc::new(move |n, v| g(add(n, d), v))
}

pub fn scaled<'a>(a: f64, g: &Probe<'a>) -> Probe<'a> {
    let g = g.clone();
    Rc::new(move |n, v| a * g(n, v))
}

pub fn sum<'a>(parts: Vec<Probe<'a>>) -> Probe<'a> {
    Rc::new(move |n, v| parts.iter().map(|p| p(n, v)).sum())
}

fn zero<'a>() -> Probe<'a> {
    Rc::new(|_, _| 0.0)
}

/// How the nonlocal brackets are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    /// τ-quadrature of the defining integrals.
    Exact,
    /// Leading `ħ²` terms.
    Hbar2,
}

/// Static fields, each constant or a single Fourier mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldProfiles {
    pub e: [Profile; 3],
    pub b: [Profile; 3],
}

impl FieldProfiles {
    pub fn uniform(e: Vec3, b: Vec3) -> Self {
        Self {
            e: e.map(Profile::constant),
            b: b.map(Profile::constant),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for p in self.e.iter().chain(&self.b) {
            p.validate()?;
            if let Profile::Polynomial { .. } = p {
                if !p.is_constant() {
                    return Err(Error::Unsupported {
                        what: "field family",
                        detail: "fields must be constant or a single mode".into(),
                    });
                }
            }
        }
        if !self.b[0].is_constant() {
            return Err(Error::Unsupported {
                what: "field family",
                detail: "B_x must be uniform in one dimension".into(),
            });
        }
        Ok(())
    }

    pub fn is_uniform(&self) -> bool {
        self.e.iter().chain(&self.b).all(|p| p.is_constant())
    }
}

/// `∂ₓ^shift F` and its next derivatives at one point.
#[derive(Debug, Clone, Copy)]
struct Mode {
    k: f64,
    value: f64,
    /// Oscillating part of `value`.
    osc: f64,
    d1: f64,
    d2: f64,
}

impl Mode {
    fn at(p: &Profile, x: f64, shift: u32) -> Self {
        match *p {
            Profile::SingleMode {
                offset,
                amplitude,
                k,
                ..
            } if amplitude != 0.0 && k != 0.0 => {
                let value = p.derivative(shift, x);
                Mode {
                    k,
                    value,
                    osc: if shift == 0 { value - offset } else { value },
                    d1: p.derivative(shift + 1, x),
                    d2: p.derivative(shift + 2, x),
                }
            }
            _ => Mode {
                k: 0.0,
                value: if shift == 0 { p.value(x) } else { 0.0 },
                osc: 0.0,
                d1: 0.0,
                d2: 0.0,
            },
        }
    }

    fn is_uniform(&self) -> bool {
        self.k == 0.0
    }
}

/// Tilde fields for one value of `ħ`.
#[derive(Debug, Clone)]
pub struct TildeFields {
    pub fields: FieldProfiles,
    pub truncation: Truncation,
    c: f64,
    e_over_m: f64,
    tau: Vec<(f64, f64)>,
}

impl TildeFields {
    pub fn new(
        fields: FieldProfiles,
        params: &PlasmaParams,
        truncation: Truncation,
    ) -> Result<Self> {
        params.validate()?;
        fields.validate()?;
        let (nodes, weights) = gauss_legendre(TAU_NODES);
        Ok(Self {
            fields,
            truncation,
            c: params.hbar / params.mass,
            e_over_m: params.charge / params.mass,
            tau: nodes
                .iter()
                .zip(&weights)
                .map(|(t, w)| (0.5 * t, 0.5 * w))
                .collect(),
        })
    }

    fn corr<'a>(&'a self, f: Mode, g: &Probe<'a>) -> Probe<'a> {
        if f.is_uniform() {
            return zero();
        }
        let g = g.clone();
        let c = self.c;
        match self.truncation {
            Truncation::Hbar2 => {
                Rc::new(move |n, v| -(c * c / 24.0) * f.d2 * g(add(n, [2, 0, 0]), v))
            }
            Truncation::Exact => Rc::new(move |n, v| {
                let base = g(n, v);
                let s: f64 = self
                    .tau
                    .iter()
                    .map(|&(t, w)| w * (g(n, [v[0] - f.k * c * t, v[1], v[2]]) - base))
                    .sum();
                f.osc * s
            }),
        }
    }

    fn sin<'a>(&'a self, f: Mode, g: &Probe<'a>) -> Probe<'a> {
        if f.is_uniform() {
            return zero();
        }
        let g = g.clone();
        let c = self.c;
        match self.truncation {
            Truncation::Hbar2 => Rc::new(move |n, v| (c / 12.0) * f.d1 * g(add(n, [1, 0, 0]), v)),
            Truncation::Exact => Rc::new(move |n, v| {
                let s: f64 = self
                    .tau
                    .iter()
                    .map(|&(t, w)| {
                        let a = f.k * c * t;
                        w * t * (g(n, [v[0] - a, v[1], v[2]]) - g(n, [v[0] + a, v[1], v[2]]))
                    })
                    .sum();
                -f.d1 / (2.0 * f.k) * s
            }),
        }
    }

    fn tilde<'a>(&'a self, f: Mode, g: &Probe<'a>) -> Probe<'a> {
        let base = scaled(f.value, g);
        if f.is_uniform() {
            base
        } else {
            sum(vec![base, self.corr(f, g)])
        }
    }

    /// Correction part `e(x)` of `Ẽ_i`.
    pub fn e_corr<'a>(&'a self, i: usize, x: f64, g: &Probe<'a>) -> Probe<'a> {
        self.corr(Mode::at(&self.fields.e[i], x, 0), g)
    }

    /// Correction part `b(x)` of `B̃_j`.
    pub fn b_corr<'a>(&'a self, j: usize, x: f64, g: &Probe<'a>) -> Probe<'a> {
        self.corr(Mode::at(&self.fields.b[j], x, 0), g)
    }

    pub fn e_tilde<'a>(&'a self, i: usize, x: f64, g: &Probe<'a>) -> Probe<'a> {
        self.tilde(Mode::at(&self.fields.e[i], x, 0), g)
    }

    pub fn b_tilde<'a>(&'a self, j: usize, x: f64, g: &Probe<'a>) -> Probe<'a> {
        self.tilde(Mode::at(&self.fields.b[j], x, 0), g)
    }

    /// `(∂ₓB)~_j`: the tilde construction applied to the field gradient.
    pub fn b_tilde_gradient<'a>(&'a self, j: usize, x: f64, g: &Probe<'a>) -> Probe<'a> {
        self.tilde(Mode::at(&self.fields.b[j], x, 1), g)
    }

    /// `Δṽ_i[g] = −(ec/m) Σ ε_ikl sin(B_k)[∂_{v_l} g]`.
    pub fn delta_v<'a>(&'a self, i: usize, x: f64, g: &Probe<'a>) -> Probe<'a> {
        let mut parts = Vec::new();
        for k in 0..3 {
            let mode = Mode::at(&self.fields.b[k], x, 0);
            if mode.is_uniform() {
                continue;
            }
            for l in 0..3 {
                let eps = levi(i, k, l);
                if eps != 0.0 {
                    parts.push(scaled(
                        -self.e_over_m * self.c * eps,
                        &self.sin(mode, &dv(g, UNIT[l])),
                    ));
                }
            }
        }
        sum(parts)
    }

    /// `ΔB̃_j[g] = c sin(∂ₓB_j)[∂_{v_x} g]`.
    pub fn delta_b<'a>(&'a self, j: usize, x: f64, g: &Probe<'a>) -> Probe<'a> {
        let mode = Mode::at(&self.fields.b[j], x, 1);
        scaled(self.c, &self.sin(mode, &dv(g, UNIT[0])))
    }
}

/// Truncated tilde fields.
pub fn tilde_fields_hbar2(fields: &FieldProfiles, params: &PlasmaParams) -> Result<TildeFields> {
    TildeFields::new(fields.clone(), params, Truncation::Hbar2)
}

/// Reference evaluation of the defining τ integrals.
pub fn tilde_fields_exact(fields: &FieldProfiles, params: &PlasmaParams) -> Result<TildeFields> {
    TildeFields::new(fields.clone(), params, Truncation::Exact)
}

/// The four corrections applied to one test function at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectionValues {
    pub e_corr: Vec3,
    pub b_corr: Vec3,
    pub delta_v: Vec3,
    pub delta_b: Vec3,
}

impl CorrectionValues {
    pub fn max_abs(&self) -> f64 {
        [self.e_corr, self.b_corr, self.delta_v, self.delta_b]
            .iter()
            .flatten()
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_difference(&self, other: &Self) -> f64 {
        let a = [self.e_corr, self.b_corr, self.delta_v, self.delta_b];
        let b = [other.e_corr, other.b_corr, other.delta_v, other.delta_b];
        a.iter()
            .flatten()
            .zip(b.iter().flatten())
            .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }
}

impl TildeFields {
    pub fn corrections_at(&self, x: f64, v: Vec3, g: &Probe<'_>) -> CorrectionValues {
        let z = [0u32; 3];
        CorrectionValues {
            e_corr: [0, 1, 2].map(|i| self.e_corr(i, x, g)(z, v)),
            b_corr: [0, 1, 2].map(|i| self.b_corr(i, x, g)(z, v)),
            delta_v: [0, 1, 2].map(|i| self.delta_v(i, x, g)(z, v)),
            delta_b: [0, 1, 2].map(|i| self.delta_b(i, x, g)(z, v)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetic::AnalyticDistribution;

    fn gaussian() -> AnalyticDistribution {
        AnalyticDistribution {
            density: Profile::SingleMode {
                offset: 1.0,
                amplitude: 0.2,
                k: 0.7,
                phase: 0.1,
            },
            drift: [0.3, -0.2, 0.1],
            v_thermal: 0.9,
            spin: [1.0, 0.0, 0.0, 0.0],
        }
    }

    fn probe(f: &AnalyticDistribution, x: f64) -> Probe<'_> {
        Rc::new(move |n, v| f.deriv(0, n, x, v, [0.0, 0.0, 1.0]))
    }

    fn mode(amp: f64, k: f64) -> Profile {
        Profile::SingleMode {
            offset: 0.4,
            amplitude: amp,
            k,
            phase: 0.3,
        }
    }

    #[test]
    fn uniform_fields_have_no_corrections() {
        let fields = FieldProfiles::uniform([0.3, -0.2, 0.1], [0.5, 0.7, -1.1]);
        let f = gaussian();
        for t in [Truncation::Exact, Truncation::Hbar2] {
            let tf = TildeFields::new(fields.clone(), &PlasmaParams::with_hbar(0.7), t).unwrap();
            for &x in &[0.0, 1.3] {
                let g = probe(&f, x);
                assert_eq!(tf.corrections_at(x, [0.2, 0.1, -0.3], &g).max_abs(), 0.0);
                let bt = tf.b_tilde(1, x, &g)([0; 3], [0.2, 0.1, -0.3]);
                assert_eq!(bt, 0.7 * g([0; 3], [0.2, 0.1, -0.3]));
            }
        }
    }

    #[test]
    fn corrections_vanish_on_velocity_independent_functions() {
        let fields = FieldProfiles {
            e: [mode(0.5, 1.1), mode(0.2, 0.9), Profile::zero()],
            b: [Profile::constant(0.3), mode(0.4, 1.3), mode(0.6, 0.8)],
        };
        let flat: Probe<'_> = Rc::new(|n, _| if n == [0, 0, 0] { 2.5 } else { 0.0 });
        for t in [Truncation::Exact, Truncation::Hbar2] {
            let tf = TildeFields::new(fields.clone(), &PlasmaParams::with_hbar(0.5), t).unwrap();
            assert!(tf.corrections_at(0.7, [0.1, 0.2, 0.3], &flat).max_abs() < 1e-15);
        }
    }

    #[test]
    fn truncation_error_is_fourth_order() {
        let fields = FieldProfiles {
            e: [mode(0.8, 1.2), Profile::zero(), Profile::zero()],
            b: [Profile::constant(0.2), mode(0.5, 0.9), mode(1.0, 1.2)],
        };
        let f = gaussian();
        let x = 0.9;
        let v = [0.4, -0.1, 0.3];
        let gap = |hbar: f64| {
            let p = PlasmaParams::with_hbar(hbar);
            let g = probe(&f, x);
            let a = tilde_fields_exact(&fields, &p)
                .unwrap()
                .corrections_at(x, v, &g);
            let b = tilde_fields_hbar2(&fields, &p)
                .unwrap()
                .corrections_at(x, v, &g);
            (a.max_difference(&b), a.max_abs())
        };
        let (d1, big) = gap(0.2);
        let (d2, _) = gap(0.1);
        assert!(big > 1e-4);
        let ratio = d1 / d2;
        assert!((ratio - 16.0).abs() < 0.5, "{ratio}");
    }

    #[test]
    fn rejects_unsupported_fields() {
        let p = PlasmaParams::default();
        let mut fields = FieldProfiles::uniform([0.0; 3], [0.0; 3]);
        fields.e[0] = Profile::Polynomial {
            coeffs: vec![0.0, 1.0],
        };
        assert!(matches!(
            tilde_fields_hbar2(&fields, &p),
            Err(Error::Unsupported { .. })
        ));
        let mut fields = FieldProfiles::uniform([0.0; 3], [0.0; 3]);
        fields.b[0] = mode(0.1, 1.0);
        assert!(matches!(
            tilde_fields_hbar2(&fields, &p),
            Err(Error::Unsupported { .. })
        ));
    }
}
