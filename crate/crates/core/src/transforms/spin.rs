//! Q-function representation of the spin sector on the unit sphere.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::C64;
use crate::sphere::{SphereQuadrature, Vec3};

pub type Mat2 = [[C64; 2]; 2];

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

pub const SIGMA_X: Mat2 = [[ZERO, ONE], [ONE, ZERO]];
pub const SIGMA_Y: Mat2 = [[ZERO, C64 { re: 0.0, im: -1.0 }], [I, ZERO]];
pub const SIGMA_Z: Mat2 = [[ONE, ZERO], [ZERO, C64 { re: -1.0, im: 0.0 }]];
pub const PAULI: [Mat2; 3] = [SIGMA_X, SIGMA_Y, SIGMA_Z];

const HERMITIAN_TOL: f64 = 1e-14;
const TRACE_TOL: f64 = 1e-14;
const PSD_TOL: f64 = 1e-12;
/// Reconstructions whose smallest eigenvalue falls below `-POSITIVITY_FLAG` are flagged.
pub const POSITIVITY_FLAG: f64 = 1e-8;

/// `Tr(a b)`.
pub fn trace_product(a: &Mat2, b: &Mat2) -> C64 {
    a[0][0] * b[0][0] + a[0][1] * b[1][0] + a[1][0] * b[0][1] + a[1][1] * b[1][1]
}

pub fn hermiticity_defect(m: &Mat2) -> f64 {
    let mut d: f64 = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            d = d.max((m[a][b] - m[b][a].conj()).norm());
        }
    }
    d
}

/// Eigenvalues (ascending) of the Hermitian part of `m`.
pub fn hermitian_eigenvalues(m: &Mat2) -> [f64; 2] {
    let a = m[0][0].re;
    let d = m[1][1].re;
    let b = (m[0][1] + m[1][0].conj()) * 0.5;
    let mean = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    [mean - rad, mean + rad]
}

/// `(scalar I + v·σ) / 2`.
pub fn from_moments(scalar: f64, v: Vec3) -> Mat2 {
    [
        [
            C64::new(0.5 * (scalar + v[2]), 0.0),
            C64::new(0.5 * v[0], -0.5 * v[1]),
        ],
        [
            C64::new(0.5 * v[0], 0.5 * v[1]),
            C64::new(0.5 * (scalar - v[2]), 0.0),
        ],
    ]
}

/// `(Tr m, Tr σ m)` of a Hermitian matrix, real parts only.
pub fn to_moments(m: &Mat2) -> (f64, Vec3) {
    let tr = (m[0][0] + m[1][1]).re;
    let v = [
        trace_product(&SIGMA_X, m).re,
        trace_product(&SIGMA_Y, m).re,
        trace_product(&SIGMA_Z, m).re,
    ];
    (tr, v)
}

/// Validated spin density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrixSpin {
    m: Mat2,
}

impl DensityMatrixSpin {
    pub fn new(m: Mat2) -> Result<Self> {
        let h = hermiticity_defect(&m);
        if !(h < HERMITIAN_TOL) {
            return Err(Error::InvalidDensityMatrix(format!(
                "not Hermitian (defect {h:.3e})"
            )));
        }
        let tr = m[0][0] + m[1][1];
        if !((tr - ONE).norm() < TRACE_TOL) {
            return Err(Error::InvalidDensityMatrix(format!(
                "trace {tr} differs from 1"
            )));
        }
        let [lo, _] = hermitian_eigenvalues(&m);
        if !(lo >= -PSD_TOL) {
            return Err(Error::InvalidDensityMatrix(format!(
                "negative eigenvalue {lo:.3e}"
            )));
        }
        Ok(Self { m })
    }

    /// `(I + r·σ)/2` for a Bloch vector with `|r| ≤ 1`.
    pub fn from_bloch(r: Vec3) -> Result<Self> {
        Self::new(from_moments(1.0, r))
    }

    /// Normalized `g g†` for an arbitrary complex 2×2 matrix `g`.
    pub fn from_factor(g: &Mat2) -> Result<Self> {
        let mut m = [[ZERO; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                m[a][b] = g[a][0] * g[b][0].conj() + g[a][1] * g[b][1].conj();
            }
        }
        let tr = (m[0][0] + m[1][1]).re;
        if !(tr > 0.0) {
            return Err(Error::InvalidDensityMatrix("zero factor".into()));
        }
        for row in m.iter_mut() {
            for z in row.iter_mut() {
                *z /= tr;
            }
        }
        // Enforce exact Hermiticity and trace after rounding.
        m[1][0] = m[0][1].conj();
        m[0][0].im = 0.0;
        m[1][1] = C64::new(1.0 - m[0][0].re, 0.0);
        Self::new(m)
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.m
    }

    pub fn bloch(&self) -> Vec3 {
        to_moments(&self.m).1
    }
}

/// Real samples of a function on the nodes of a sphere quadrature.
#[derive(Debug, Clone)]
pub struct SpinDistribution {
    pub quadrature: Arc<SphereQuadrature>,
    pub values: Vec<f64>,
}

impl SpinDistribution {
    pub fn new(quadrature: Arc<SphereQuadrature>, values: Vec<f64>) -> Result<Self> {
        quadrature.check_len(values.len())?;
        Ok(Self { quadrature, values })
    }

    pub fn integral(&self) -> f64 {
        self.quadrature.integrate(&self.values)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `f(ŝ) = Tr[(1 + ŝ·σ) ρ] / 4π` for a validated density matrix.
pub fn spin_q_transform(
    rho: &DensityMatrixSpin,
    quad: &Arc<SphereQuadrature>,
) -> Result<SpinDistribution> {
    spin_q_transform_hermitian(rho.matrix(), quad)
}

/// Linear extension of [`spin_q_transform`] to any Hermitian 2×2 matrix.
pub fn spin_q_transform_hermitian(
    m: &Mat2,
    quad: &Arc<SphereQuadrature>,
) -> Result<SpinDistribution> {
    let h = hermiticity_defect(m);
    if !(h < HERMITIAN_TOL * (1.0 + max_abs(m))) {
        return Err(Error::InvalidDensityMatrix(format!(
            "not Hermitian (defect {h:.3e})"
        )));
    }
    let tr = m[0][0] + m[1][1];
    let tv = [
        trace_product(&SIGMA_X, m),
        trace_product(&SIGMA_Y, m),
        trace_product(&SIGMA_Z, m),
    ];
    let scale = 1.0 / (4.0 * PI);
    let mut values = Vec::with_capacity(quad.len());
    for s in &quad.nodes {
        let z = (tr + tv[0] * s[0] + tv[1] * s[1] + tv[2] * s[2]) * scale;
        if z.im.abs() > 1e-14 * (1.0 + z.re.abs()) {
            return Err(Error::InvalidDensityMatrix(format!("complex Q value {z}")));
        }
        values.push(z.re);
    }
    SpinDistribution::new(quad.clone(), values)
}

fn max_abs(m: &Mat2) -> f64 {
    m.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Moments of a spin distribution and the density matrix they define.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinMoments {
    /// `∫ f dΩ`.
    pub scalar: f64,
    /// `3 ∫ ŝ f dΩ`.
    pub vector: Vec3,
    /// `(scalar I + vector·σ) / 2`.
    pub rho: Mat2,
    /// Smallest eigenvalue of `rho`.
    pub min_eigenvalue: f64,
}

impl SpinMoments {
    /// False when the reconstruction is not positive within [`POSITIVITY_FLAG`].
    pub fn is_physical(&self) -> bool {
        self.min_eigenvalue >= -POSITIVITY_FLAG
    }

    pub fn density_matrix(&self) -> Result<DensityMatrixSpin> {
        DensityMatrixSpin::new(self.rho)
    }
}

pub fn spin_moments_and_reconstruct(f: &SpinDistribution) -> SpinMoments {
    let scalar = f.integral();
    let first = f.quadrature.first_moment(&f.values);
    let vector = [3.0 * first[0], 3.0 * first[1], 3.0 * first[2]];
    let rho = from_moments(scalar, vector);
    let [min_eigenvalue, _] = hermitian_eigenvalues(&rho);
    SpinMoments {
        scalar,
        vector,
        rho,
        min_eigenvalue,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn quad() -> Arc<SphereQuadrature> {
        Arc::new(SphereQuadrature::new(16, 32).unwrap())
    }

    fn max_diff(a: &Mat2, b: &Mat2) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                d = d.max((a[i][j] - b[i][j]).norm());
            }
        }
        d
    }

    #[test]
    fn closed_forms() {
        let q = quad();
        let up = DensityMatrixSpin::from_bloch([0.0, 0.0, 1.0]).unwrap();
        let mixed = DensityMatrixSpin::from_bloch([0.0, 0.0, 0.0]).unwrap();
        let xp = DensityMatrixSpin::from_bloch([1.0, 0.0, 0.0]).unwrap();
        let fu = spin_q_transform(&up, &q).unwrap();
        let fm = spin_q_transform(&mixed, &q).unwrap();
        let fx = spin_q_transform(&xp, &q).unwrap();
        for (i, s) in q.nodes.iter().enumerate() {
            assert!((fu.values[i] - (1.0 + s[2]) / (4.0 * PI)).abs() < 1e-16);
            assert!((fm.values[i] - 1.0 / (4.0 * PI)).abs() < 1e-16);
            assert!((fx.values[i] - (1.0 + s[0]) / (4.0 * PI)).abs() < 1e-16);
        }
        let m = spin_moments_and_reconstruct(&fu);
        assert!((m.scalar - 1.0).abs() < 1e-13);
        assert!((m.vector[2] - 1.0).abs() < 1e-13 && m.vector[0].abs() < 1e-13);
        assert!(max_diff(&m.rho, up.matrix()) < 1e-13);
        let m = spin_moments_and_reconstruct(&fm);
        assert!(max_diff(&m.rho, mixed.matrix()) < 1e-13);
    }

    #[test]
    fn rejects_invalid_matrices() {
        let bad = [[ONE, ONE], [ZERO, ZERO]];
        assert!(DensityMatrixSpin::new(bad).is_err());
        assert!(spin_q_transform_hermitian(&bad, &quad()).is_err());
        assert!(DensityMatrixSpin::from_bloch([0.0, 0.0, 1.5]).is_err());
        assert!(DensityMatrixSpin::new(from_moments(2.0, [0.0; 3])).is_err());
    }

    #[test]
    fn invalid_distribution_is_flagged() {
        let q = quad();
        let values = q
            .nodes
            .iter()
            .map(|s| (1.0 + 3.0 * s[2]) / (4.0 * PI))
            .collect();
        let m = spin_moments_and_reconstruct(&SpinDistribution::new(q, values).unwrap());
        assert!(!m.is_physical());
        assert!(m.density_matrix().is_err());
    }

    fn arb_mat() -> impl Strategy<Value = Mat2> {
        prop::array::uniform8(-1.0f64..1.0).prop_map(|a| {
            [
                [C64::new(a[0], a[1]), C64::new(a[2], a[3])],
                [C64::new(a[4], a[5]), C64::new(a[6], a[7])],
            ]
        })
    }

    fn hermitian(a: Mat2) -> Mat2 {
        let mut h = a;
        h[0][0].im = 0.0;
        h[1][1].im = 0.0;
        h[1][0] = h[0][1].conj();
        h
    }

    proptest! {
        #[test]
        fn round_trip_and_positivity(g in arb_mat()) {
            prop_assume!(g.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>() > 1e-3);
            let q = quad();
            let rho = DensityMatrixSpin::from_factor(&g).unwrap();
            let f = spin_q_transform(&rho, &q).unwrap();
            prop_assert!(f.min() >= -1e-12);
            prop_assert!((f.integral() - 1.0).abs() < 1e-10);
            let m = spin_moments_and_reconstruct(&f);
            prop_assert!(m.is_physical());
            prop_assert!(max_diff(&m.rho, rho.matrix()) < 1e-12);
        }

        #[test]
        fn linear_in_rho(a in arb_mat(), b in arb_mat(), ca in -2.0f64..2.0, cb in -2.0f64..2.0) {
            let q = quad();
            let (ha, hb) = (hermitian(a), hermitian(b));
            let mut mix = [[ZERO; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    mix[i][j] = ha[i][j] * ca + hb[i][j] * cb;
                }
            }
            let fa = spin_q_transform_hermitian(&ha, &q).unwrap();
            let fb = spin_q_transform_hermitian(&hb, &q).unwrap();
            let fm = spin_q_transform_hermitian(&mix, &q).unwrap();
            for i in 0..q.len() {
                prop_assert!((fm.values[i] - ca * fa.values[i] - cb * fb.values[i]).abs() < 1e-13);
            }
        }
    }
}
