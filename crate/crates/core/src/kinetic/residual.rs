//! ħ²-truncated residual of the full spin-Wigner equation.
//!
//! The nonlocal operator brackets `(2m/ħ) sin(ħ z / 2m) − z` and
//! `cos(ħ z / 2m) − 1`, with `z = ←∂ₓ · →∂_v`, are expanded to their leading
//! `ħ²` terms and applied to a closed-form distribution. Everything is
//! evaluated from analytic derivatives, so the result carries no
//! discretization error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::PlasmaParams;
use crate::sphere::{cross, dot, SphereQuadrature, Vec3};

/// Analytic one-dimensional profile with derivatives of any order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    /// `Σ c_n x^n`.
    Polynomial { coeffs: Vec<f64> },
    /// `offset + amplitude cos(k x + phase)`.
    SingleMode {
        #[serde(default)]
        offset: f64,
        amplitude: f64,
        k: f64,
        #[serde(default)]
        phase: f64,
    },
}

impl Profile {
    pub fn constant(c: f64) -> Self {
        Profile::Polynomial { coeffs: vec![c] }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// Builds a profile from a family name and its JSON parameters.
    pub fn from_name(family: &str, value: serde_json::Value) -> Result<Self> {
        let mut v = value;
        if let serde_json::Value::Object(ref mut m) = v {
            m.insert(
                "family".into(),
                serde_json::Value::String(family.to_string()),
            );
        }
        serde_json::from_value(v).map_err(|e| Error::Unsupported {
            what: "potential family",
            detail: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Profile::Polynomial { coeffs } => {
                !coeffs.is_empty() && coeffs.iter().all(|c| c.is_finite())
            }
            Profile::SingleMode {
                offset,
                amplitude,
                k,
                phase,
            } => [offset, amplitude, k, phase].iter().all(|c| c.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param(
                "profile",
                "coefficients must be finite and non-empty",
            ))
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Profile::Polynomial { coeffs } => coeffs.iter().skip(1).all(|c| *c == 0.0),
            Profile::SingleMode { amplitude, k, .. } => *amplitude == 0.0 || *k == 0.0,
        }
    }

    /// `dⁿ/dxⁿ` at `x`.
    pub fn derivative(&self, n: u32, x: f64) -> f64 {
        match self {
            Profile::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(n as usize)
                .map(|(p, c)| {
                    let falling: f64 = (0..n).map(|i| (p as u32 - i) as f64).product();
                    c * falling * x.powi((p - n as usize) as i32)
                })
                .sum(),
            Profile::SingleMode {
                offset,
                amplitude,
                k,
                phase,
            } => {
                let arg = k * x + phase + 0.5 * std::f64::consts::PI * n as f64;
                let base = amplitude * k.powi(n as i32) * arg.cos();
                if n == 0 {
                    offset + base
                } else {
                    base
                }
            }
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.derivative(0, x)
    }
}

/// Static scalar and vector potentials. `E = −∂ₓV x̂` and `B = ∇ × A = (0, −∂ₓA_z, ∂ₓA_y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticPotentials {
    pub v: Profile,
    pub a: [Profile; 3],
}

impl AnalyticPotentials {
    pub fn electrostatic(v: Profile) -> Self {
        Self {
            v,
            a: [Profile::zero(), Profile::zero(), Profile::zero()],
        }
    }

    /// Rejects what the truncation cannot represent in one dimension.
    pub fn validate(&self) -> Result<()> {
        self.v.validate()?;
        for a in &self.a {
            a.validate()?;
        }
        if !self.a[0].is_constant() {
            return Err(Error::Unsupported {
                what: "vector potential",
                detail: "A_x must be uniform in one dimension (Coulomb gauge)".into(),
            });
        }
        Ok(())
    }

    fn a_deriv(&self, n: u32, x: f64) -> Vec3 {
        [0, 1, 2].map(|c| self.a[c].derivative(n, x))
    }

    /// `∂ₓⁿ B` at `x`.
    fn b_deriv(&self, n: u32, x: f64) -> Vec3 {
        let d = self.a_deriv(n + 1, x);
        [0.0, -d[2], d[1]]
    }
}

/// `f = n(x) Π_c G(v_c; u_c, σ) (a₀ + a·ŝ)` with Maxwellian factors `G`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticDistribution {
    pub density: Profile,
    pub drift: Vec3,
    pub v_thermal: f64,
    /// `[a₀, a_x, a_y, a_z]`.
    pub spin: [f64; 4],
}

/// Probabilists' Hermite polynomial.
fn hermite(n: u32, t: f64) -> f64 {
    let (mut a, mut b) = (1.0, t);
    if n == 0 {
        return a;
    }
    for k in 1..n {
        let c = t * b - k as f64 * a;
        a = b;
        b = c;
    }
    b
}

impl AnalyticDistribution {
    /// `∂ⁿ G / ∂v_cⁿ` for component `c`.
    fn gauss(&self, c: usize, n: u32, v: f64) -> f64 {
        let s = self.v_thermal;
        let t = (v - self.drift[c]) / s;
        let g = (-0.5 * t * t).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
        (-1.0 / s).powi(n as i32) * hermite(n, t) * g
    }

    /// Velocity factor with `n[c]` derivatives on component `c`.
    fn vel(&self, n: [u32; 3], v: Vec3) -> f64 {
        (0..3).map(|c| self.gauss(c, n[c], v[c])).product()
    }

    fn spin_value(&self, s: Vec3) -> f64 {
        self.spin[0] + dot([self.spin[1], self.spin[2], self.spin[3]], s)
    }

    /// Tangential gradient of the spin factor, `a − (a·ŝ) ŝ`.
    fn spin_gradient(&self, s: Vec3) -> Vec3 {
        let a = [self.spin[1], self.spin[2], self.spin[3]];
        let p = dot(a, s);
        [0, 1, 2].map(|c| a[c] - p * s[c])
    }

    /// `∂ₓ^nx ∂_v^nv f` at one phase-space point.
    pub(crate) fn deriv(&self, nx: u32, nv: [u32; 3], x: f64, v: Vec3, s: Vec3) -> f64 {
        self.density.derivative(nx, x) * self.vel(nv, v) * self.spin_value(s)
    }

    /// `∇ŝ ∂ₓ^nx ∂_v^nv f` at one phase-space point.
    pub(crate) fn deriv_spin_gradient(
        &self,
        nx: u32,
        nv: [u32; 3],
        x: f64,
        v: Vec3,
        s: Vec3,
    ) -> Vec3 {
        let a = self.density.derivative(nx, x) * self.vel(nv, v);
        self.spin_gradient(s).map(|g| a * g)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        self.density.validate()?;
        if !(self.v_thermal > 0.0 && self.v_thermal.is_finite()) {
            return Err(Error::param("v_thermal", "must be > 0"));
        }
        Ok(())
    }
}

/// Where the operators are evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePoints {
    pub x: Vec<f64>,
    pub v: Vec<Vec3>,
    pub sphere: SphereQuadrature,
}

impl SamplePoints {
    /// `nx` points on `[0, L)`, a `nv³` velocity lattice spanning `drift ± 2.5 v_t`.
    pub fn lattice(
        length: f64,
        nx: usize,
        f: &AnalyticDistribution,
        nv: usize,
        sphere: SphereQuadrature,
    ) -> Self {
        let x = (0..nx).map(|j| length * j as f64 / nx as f64).collect();
        let axis = |c: usize| -> Vec<f64> {
            (0..nv)
                .map(|i| {
                    let t = if nv == 1 {
                        0.0
                    } else {
                        -2.5 + 5.0 * i as f64 / (nv - 1) as f64
                    };
                    f.drift[c] + t * f.v_thermal
                })
                .collect()
        };
        let (ax, ay, az) = (axis(0), axis(1), axis(2));
        let mut v = Vec::with_capacity(nv * nv * nv);
        for &a in &ax {
            for &b in &ay {
                for &c in &az {
                    v.push([a, b, c]);
                }
            }
        }
        Self { x, v, sphere }
    }
}

/// Residual norms for one value of ħ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationResidual {
    pub hbar: f64,
    /// Max-norm of the `ħ²` bracket terms applied to `f`.
    pub rhs: f64,
    /// Max-norm of the difference between the two algebraic forms of the
    /// semiclassical operator.
    pub lhs_difference: f64,
}

/// Evaluates the truncated right-hand side and the left-hand-side consistency
/// check on every sample point, for each `ħ` in `hbar_list`.
pub fn full_equation_residual_hbar2(
    f: &AnalyticDistribution,
    pot: &AnalyticPotentials,
    base: &PlasmaParams,
    points: &SamplePoints,
    hbar_list: &[f64],
) -> Result<Vec<TruncationResidual>> {
    pot.validate()?;
    f.validate()?;
    hbar_list
        .iter()
        .map(|&hbar| {
            let params = PlasmaParams { hbar, ..*base };
            params.validate()?;
            let mut rhs: f64 = 0.0;
            let mut diff: f64 = 0.0;
            for &x in &points.x {
                for &v in &points.v {
                    for &s in &points.sphere.nodes {
                        let (r, d) = evaluate(f, pot, &params, x, v, s);
                        rhs = rhs.max(r.abs());
                        diff = diff.max(d.abs());
                    }
                }
            }
            Ok(TruncationResidual {
                hbar,
                rhs,
                lhs_difference: diff,
            })
        })
        .collect()
}

/// Returns `(RHS, LHS₁ − LHS₂)` at one phase-space point.
fn evaluate(
    f: &AnalyticDistribution,
    pot: &AnalyticPotentials,
    p: &PlasmaParams,
    x: f64,
    v: Vec3,
    s: Vec3,
) -> (f64, f64) {
    let (e, m, hbar) = (p.charge, p.mass, p.hbar);
    let mu = p.mu_b();
    let qm = e / m;
    let n0 = f.density.value(x);
    let n1 = f.density.derivative(1, x);
    let sv = f.spin_value(s);
    let sg = f.spin_gradient(s);
    let g0 = f.vel([0, 0, 0], v);
    let gv = [
        f.vel([1, 0, 0], v),
        f.vel([0, 1, 0], v),
        f.vel([0, 0, 1], v),
    ];
    let gxx = f.vel([2, 0, 0], v);
    let gxxx = f.vel([3, 0, 0], v);

    let b = pot.b_deriv(0, x);
    let b1 = pot.b_deriv(1, x);
    let b2 = pot.b_deriv(2, x);
    let b3 = pot.b_deriv(3, x);
    let ef = [-pot.v.derivative(1, x), 0.0, 0.0];

    // Semiclassical operator, split form.
    let vxb = cross(v, b);
    let lorentz = [0, 1, 2].map(|c| qm * (ef[c] + vxb[c]));
    let mut force = lorentz;
    force[0] += mu / m * dot(s, b1);
    let stream = v[0] * n1 * g0 * sv;
    let accel: f64 = (0..3).map(|c| force[c] * n0 * gv[c] * sv).sum::<f64>();
    let precess = qm * dot(cross(s, b), sg) * n0 * g0;
    let mixed = mu / m * dot(b1, sg) * n0 * gv[0];
    let lhs_split = stream - accel - precess - mixed;

    // Same operator with the spin-gradient and dipole pieces kept together.
    let lor: f64 = (0..3).map(|c| lorentz[c] * gv[c]).sum::<f64>() * n0 * sv;
    let combined = mu / m * (dot(b1, sg) + dot(s, b1) * sv) * n0 * gv[0];
    let lhs_joint = v[0] * n1 * g0 * sv - lor - combined - qm * dot(cross(s, b), sg) * n0 * g0;

    // ħ² terms of the two brackets.
    let c3 = hbar * hbar / (24.0 * m * m);
    let a3 = pot.a_deriv(3, x);
    let scalar =
        qm * (pot.v.derivative(3, x) - dot(v, a3)) * sv - mu / m * (dot(b3, sg) + dot(s, b3) * sv);
    let t1 = c3 * scalar * n0 * gxxx;

    let c2 = hbar * hbar / (8.0 * m * m);
    let ax = pot.a[0].value(x);
    let ax2 = pot.a[0].derivative(2, x);
    let n1_term = qm * ax2 * n1 * gxx * sv;
    // ∂ₓ²(A_x ∂ₓA) · ∇_v ∂²_{v_x} f with uniform A_x
    let d2 = [0, 1, 2].map(|c| ax * pot.a[c].derivative(3, x));
    let conv = qm
        * qm
        * n0
        * sv
        * (d2[0] * f.vel([3, 0, 0], v) + d2[1] * f.vel([2, 1, 0], v) + d2[2] * f.vel([2, 0, 1], v));
    let prec2 = qm * dot(cross(s, b2), sg) * n0 * gxx;
    let t2 = c2 * (n1_term + conv - prec2);

    (t1 + t2, lhs_split - lhs_joint)
}
