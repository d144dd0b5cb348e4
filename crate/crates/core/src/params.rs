//! Physical parameters in normalized units.
//!
//! Everything is measured in units where the electron mass, the elementary
//! charge and the vacuum permittivity are one by default. The reduced Planck
//! constant stays a free knob so that quantum corrections can be dialed in and
//! out, and the Bohr magneton is always derived from it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlasmaParams {
    /// Electron mass.
    pub mass: f64,
    /// Magnitude of the electron charge; the electron carries `-charge`.
    pub charge: f64,
    /// Dimensionless quantum parameter.
    pub hbar: f64,
    /// Vacuum permittivity.
    pub eps0: f64,
    /// Speed of light.
    pub c: f64,
}

impl Default for PlasmaParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            charge: 1.0,
            hbar: 1.0,
            eps0: 1.0,
            c: 10.0,
        }
    }
}

impl PlasmaParams {
    pub fn with_hbar(hbar: f64) -> Self {
        Self {
            hbar,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("mass", self.mass),
            ("charge", self.charge),
            ("hbar", self.hbar),
            ("eps0", self.eps0),
            ("c", self.c),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::param(
                    name,
                    format!("must be finite and > 0, got {value}"),
                ));
            }
        }
        Ok(())
    }

    /// Bohr magneton `e hbar / 2m`, recomputed on every call.
    #[inline]
    pub fn mu_b(&self) -> f64 {
        self.charge * self.hbar / (2.0 * self.mass)
    }

    /// Vacuum permeability `1 / (eps0 c^2)`.
    #[inline]
    pub fn mu0(&self) -> f64 {
        1.0 / (self.eps0 * self.c * self.c)
    }

    /// Spin precession rate per unit field, `2 mu_B / hbar = e / m`.
    #[inline]
    pub fn precession_rate(&self) -> f64 {
        2.0 * self.mu_b() / self.hbar
    }

    /// Plasma frequency for electron density `n0`.
    pub fn plasma_frequency(&self, n0: f64) -> f64 {
        (n0 * self.charge * self.charge / (self.eps0 * self.mass)).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bohr_magneton_tracks_hbar() {
        let mut p = PlasmaParams::with_hbar(0.3);
        assert_eq!(p.mu_b(), 0.15);
        p.hbar = 2.0;
        assert_eq!(p.mu_b(), 1.0);
        assert_eq!(p.precession_rate(), 1.0);
    }

    #[test]
    fn rejects_nonpositive() {
        let p = PlasmaParams {
            hbar: 0.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        let p = PlasmaParams {
            c: f64::NAN,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        assert!(PlasmaParams::default().validate().is_ok());
    }

    #[test]
    fn mu0_from_c() {
        let p = PlasmaParams::default();
        assert!((p.mu0() * p.eps0 * p.c * p.c - 1.0).abs() < 1e-15);
    }
}
