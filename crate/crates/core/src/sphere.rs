//! Quadrature and band-limited calculus on the unit (Bloch) sphere.
//!
//! Nodes form a product grid: Gauss–Legendre in `cos(theta)` times uniform
//! azimuth. Node `i * n_phi + j` has polar index `i` and azimuthal index `j`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereQuadrature {
    pub n_theta: usize,
    pub n_phi: usize,
    /// `cos(theta)` at the polar nodes, ascending.
    pub mu: Vec<f64>,
    pub phi: Vec<f64>,
    /// Unit vectors, polar-major.
    pub nodes: Vec<Vec3>,
    /// Solid-angle weights summing to `4 pi`.
    pub weights: Vec<f64>,
}

impl SphereQuadrature {
    pub const DEFAULT_N_THETA: usize = 16;
    pub const DEFAULT_N_PHI: usize = 32;

    pub fn new(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta < 2 {
            return Err(Error::param("n_theta", format!("need >= 2, got {n_theta}")));
        }
        if n_phi < 3 {
            return Err(Error::param("n_phi", format!("need >= 3, got {n_phi}")));
        }
        let (mu, gw) = gauss_legendre(n_theta);
        let phi: Vec<f64> = (0..n_phi)
            .map(|j| 2.0 * PI * j as f64 / n_phi as f64)
            .collect();
        let dphi = 2.0 * PI / n_phi as f64;
        let mut nodes = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        for (i, &m) in mu.iter().enumerate() {
            let st = (1.0 - m * m).sqrt();
            for &p in &phi {
                nodes.push([st * p.cos(), st * p.sin(), m]);
                weights.push(gw[i] * dphi);
            }
        }
        Ok(Self {
            n_theta,
            n_phi,
            mu,
            phi,
            nodes,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Polar and azimuthal angle of node `idx`.
    pub fn angles(&self, idx: usize) -> (f64, f64) {
        let i = idx / self.n_phi;
        let j = idx % self.n_phi;
        (self.mu[i].acos(), self.phi[j])
    }

    /// `∫ f dΩ`, summed in node order.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.len());
        f.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }

    /// `∫ ŝ f dΩ`.
    pub fn first_moment(&self, f: &[f64]) -> Vec3 {
        let mut acc = [0.0; 3];
        for ((v, w), s) in f.iter().zip(&self.weights).zip(&self.nodes) {
            for a in 0..3 {
                acc[a] += v * w * s[a];
            }
        }
        acc
    }

    pub fn check_len(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::GridMismatch(format!(
                "sphere field has {len} values, quadrature has {}",
                self.len()
            )));
        }
        Ok(())
    }
}

/// Angle triple used by the harmonic evaluators.
#[derive(Debug, Clone, Copy)]
struct Angles {
    mu: f64,
    sin_theta: f64,
    phi: f64,
}

impl Angles {
    fn from_vec(s: Vec3) -> Self {
        let r = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
        let mu = (s[2] / r).clamp(-1.0, 1.0);
        Self {
            mu,
            sin_theta: (1.0 - mu * mu).max(0.0).sqrt(),
            phi: s[1].atan2(s[0]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Trig {
    Cos,
    Sin,
}

#[derive(Debug, Clone, Copy)]
struct Mode {
    l: usize,
    m: usize,
    trig: Trig,
}

/// Fully normalized associated Legendre values `P̄_l^m(mu)` for `l, m <= lmax`
/// (no Condon–Shortley phase), stored as `p[l][m]`.
fn normalized_legendre(lmax: usize, mu: f64, sin_theta: f64) -> Vec<Vec<f64>> {
    let mut p = vec![vec![0.0; lmax + 1]; lmax + 1];
    p[0][0] = (1.0 / (4.0 * PI)).sqrt();
    for m in 1..=lmax {
        let mf = m as f64;
        p[m][m] = p[m - 1][m - 1] * ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * sin_theta;
    }
    for m in 0..lmax {
        p[m + 1][m] = (2.0 * m as f64 + 3.0).sqrt() * mu * p[m][m];
    }
    for m in 0..=lmax {
        for l in (m + 2)..=lmax {
            let lf = l as f64;
            let mf = m as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0))
                .sqrt();
            p[l][m] = a * (mu * p[l - 1][m] - b * p[l - 2][m]);
        }
    }
    p
}

/// Real spherical-harmonic basis on a [`SphereQuadrature`], band-limited to
/// degree `n_theta - 1` and azimuthal order below `n_phi / 2`.
#[derive(Debug, Clone)]
pub struct SphereBasis {
    quad: SphereQuadrature,
    modes: Vec<Mode>,
    lmax: usize,
    /// `[node][mode]`
    synth: Vec<f64>,
    /// `[mode][node]`, quadrature weights folded in.
    analysis: Vec<f64>,
    /// Tangential gradient, Cartesian, `[node][mode]` per component.
    grad: [Vec<f64>; 3],
}

impl SphereBasis {
    pub fn new(quad: &SphereQuadrature) -> Self {
        let lmax = quad.n_theta - 1;
        let mmax = (quad.n_phi.saturating_sub(1) / 2).min(lmax);
        let mut modes = Vec::new();
        for l in 0..=lmax {
            modes.push(Mode {
                l,
                m: 0,
                trig: Trig::Cos,
            });
            for m in 1..=l.min(mmax) {
                modes.push(Mode {
                    l,
                    m,
                    trig: Trig::Cos,
                });
                modes.push(Mode {
                    l,
                    m,
                    trig: Trig::Sin,
                });
            }
        }
        let nm = modes.len();
        let nn = quad.len();
        let mut synth = vec![0.0; nn * nm];
        let mut analysis = vec![0.0; nm * nn];
        let mut grad = [vec![0.0; nn * nm], vec![0.0; nn * nm], vec![0.0; nn * nm]];
        for (node, s) in quad.nodes.iter().enumerate() {
            let ang = Angles::from_vec(*s);
            let (theta_hat, phi_hat) = tangent_frame(ang);
            let vals = eval_modes(&modes, lmax, ang);
            for (k, (y, dtheta, dphi_sin)) in vals.into_iter().enumerate() {
                synth[node * nm + k] = y;
                analysis[k * nn + node] = y * quad.weights[node];
                for a in 0..3 {
                    grad[a][node * nm + k] = theta_hat[a] * dtheta + phi_hat[a] * dphi_sin;
                }
            }
        }
        Self {
            quad: quad.clone(),
            modes,
            lmax,
            synth,
            analysis,
            grad,
        }
    }

    pub fn quadrature(&self) -> &SphereQuadrature {
        &self.quad
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn coefficients(&self, f: &[f64]) -> Vec<f64> {
        let nn = self.quad.len();
        (0..self.modes.len())
            .map(|k| {
                let row = &self.analysis[k * nn..(k + 1) * nn];
                row.iter().zip(f).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    fn apply_rows(&self, mat: &[f64], coeffs: &[f64]) -> Vec<f64> {
        let nm = self.modes.len();
        (0..self.quad.len())
            .map(|node| {
                let row = &mat[node * nm..(node + 1) * nm];
                row.iter().zip(coeffs).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        self.apply_rows(&self.synth, coeffs)
    }

    /// Tangential gradient `∇_ŝ f = θ̂ ∂_θ f + φ̂ (1/sinθ) ∂_φ f` in Cartesian components.
    pub fn gradient(&self, f: &[f64]) -> Vec<Vec3> {
        let c = self.coefficients(f);
        let gx = self.apply_rows(&self.grad[0], &c);
        let gy = self.apply_rows(&self.grad[1], &c);
        let gz = self.apply_rows(&self.grad[2], &c);
        (0..self.quad.len())
            .map(|i| [gx[i], gy[i], gz[i]])
            .collect()
    }

    /// `b · ∇_ŝ f` for a fixed vector `b`.
    pub fn directional_gradient(&self, f: &[f64], b: Vec3) -> Vec<f64> {
        let c = self.coefficients(f);
        let nm = self.modes.len();
        (0..self.quad.len())
            .map(|node| {
                let mut acc = 0.0;
                for a in 0..3 {
                    if b[a] == 0.0 {
                        continue;
                    }
                    let row = &self.grad[a][node * nm..(node + 1) * nm];
                    acc += b[a] * row.iter().zip(&c).map(|(x, y)| x * y).sum::<f64>();
                }
                acc
            })
            .collect()
    }

    /// Dense `[node][node]` matrix of `f ↦ b · ∇_ŝ f`.
    pub fn gradient_operator(&self, b: Vec3) -> Vec<f64> {
        let nn = self.quad.len();
        let nm = self.modes.len();
        let mut out = vec![0.0; nn * nn];
        for node in 0..nn {
            let row: Vec<f64> = (0..nm)
                .map(|k| (0..3).map(|a| b[a] * self.grad[a][node * nm + k]).sum())
                .collect();
            let dst = &mut out[node * nn..(node + 1) * nn];
            for (k, r) in row.iter().enumerate() {
                if *r == 0.0 {
                    continue;
                }
                let an = &self.analysis[k * nn..(k + 1) * nn];
                dst.iter_mut().zip(an).for_each(|(d, a)| *d += r * a);
            }
        }
        out
    }

    /// Linear map `f ↦ f ∘ R⁻¹` where `R` rotates by `angle` about `axis`,
    /// returned as a dense `[node][node]` matrix.
    pub fn rotation_matrix(&self, axis: Vec3, angle: f64) -> Vec<f64> {
        let nn = self.quad.len();
        let nm = self.modes.len();
        let inv = rodrigues_matrix(axis, -angle);
        let mut out = vec![0.0; nn * nn];
        for (node, s) in self.quad.nodes.iter().enumerate() {
            let src = mat_vec(&inv, *s);
            let vals = eval_modes(&self.modes, self.lmax, Angles::from_vec(src));
            let y: Vec<f64> = vals.into_iter().map(|v| v.0).collect();
            for src_node in 0..nn {
                let mut acc = 0.0;
                for k in 0..nm {
                    acc += y[k] * self.analysis[k * nn + src_node];
                }
                out[node * nn + src_node] = acc;
            }
        }
        out
    }

    /// Rotates a sphere function rigidly: `f_new(ŝ) = f(R⁻¹ ŝ)`.
    pub fn rotate(&self, f: &[f64], axis: Vec3, angle: f64) -> Vec<f64> {
        let c = self.coefficients(f);
        let inv = rodrigues_matrix(axis, -angle);
        self.quad
            .nodes
            .iter()
            .map(|s| {
                let src = mat_vec(&inv, *s);
                eval_modes(&self.modes, self.lmax, Angles::from_vec(src))
                    .into_iter()
                    .zip(&c)
                    .map(|(v, a)| v.0 * a)
                    .sum()
            })
            .collect()
    }
}

fn tangent_frame(a: Angles) -> (Vec3, Vec3) {
    let (sp, cp) = a.phi.sin_cos();
    ([a.mu * cp, a.mu * sp, -a.sin_theta], [-sp, cp, 0.0])
}

/// For each mode returns `(Y, ∂_θ Y, ∂_φ Y / sinθ)`.
fn eval_modes(modes: &[Mode], lmax: usize, a: Angles) -> Vec<(f64, f64, f64)> {
    let p = normalized_legendre(lmax, a.mu, a.sin_theta);
    let st = a.sin_theta.max(1e-300);
    modes
        .iter()
        .map(|md| {
            let (l, m) = (md.l, md.m);
            let lf = l as f64;
            let mf = m as f64;
            let plm = p[l][m];
            let prev = if l > m { p[l - 1][m] } else { 0.0 };
            let c = ((2.0 * lf + 1.0) * (lf * lf - mf * mf) / (2.0 * lf - 1.0).max(1.0)).sqrt();
            let dtheta_p = (lf * a.mu * plm - c * prev) / st;
            if m == 0 {
                return (plm, dtheta_p, 0.0);
            }
            let s2 = std::f64::consts::SQRT_2;
            let (sm, cm) = (mf * a.phi).sin_cos();
            match md.trig {
                Trig::Cos => (s2 * plm * cm, s2 * dtheta_p * cm, -s2 * mf * plm / st * sm),
                Trig::Sin => (s2 * plm * sm, s2 * dtheta_p * sm, s2 * mf * plm / st * cm),
            }
        })
        .collect()
}

/// Rotation matrix for a right-handed rotation by `angle` about `axis`.
pub fn rodrigues_matrix(axis: Vec3, angle: f64) -> [[f64; 3]; 3] {
    let n = norm(axis);
    let k = if n > 0.0 {
        [axis[0] / n, axis[1] / n, axis[2] / n]
    } else {
        [0.0, 0.0, 1.0]
    };
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    [
        [
            c + k[0] * k[0] * t,
            k[0] * k[1] * t - k[2] * s,
            k[0] * k[2] * t + k[1] * s,
        ],
        [
            k[1] * k[0] * t + k[2] * s,
            c + k[1] * k[1] * t,
            k[1] * k[2] * t - k[0] * s,
        ],
        [
            k[2] * k[0] * t - k[1] * s,
            k[2] * k[1] * t + k[0] * s,
            c + k[2] * k[2] * t,
        ],
    ]
}

pub fn mat_vec(m: &[[f64; 3]; 3], v: Vec3) -> Vec3 {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}
