use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{FieldState, Layout};
use crate::grid::Grid1D;
use crate::sphere::Vec3;

/// Prescribed analytic fields, evaluated wherever they are needed and never evolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExternalField {
    UniformB {
        b: Vec3,
    },
    /// `B_z = b0 + b1 (x − L/2)` on `[0, L)`.
    GradientB {
        b0: f64,
        b1: f64,
    },
    /// `E_x = e0 sin(k x)`.
    SingleModeE {
        e0: f64,
        k: f64,
    },
}

/// Field values and their x-derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PointField {
    pub e: Vec3,
    pub b: Vec3,
    pub db_dx: Vec3,
}

impl ExternalField {
    pub fn from_name(kind: &str, value: serde_json::Value) -> Result<Self> {
        let mut v = value;
        if let serde_json::Value::Object(ref mut m) = v {
            m.insert("kind".into(), serde_json::Value::String(kind.to_string()));
        }
        serde_json::from_value(v).map_err(|e| Error::param("kind", e.to_string()))
    }

    pub fn eval(&self, x: f64, length: f64) -> PointField {
        match *self {
            ExternalField::UniformB { b } => PointField {
                b,
                ..Default::default()
            },
            ExternalField::GradientB { b0, b1 } => PointField {
                b: [0.0, 0.0, b0 + b1 * (x - 0.5 * length)],
                db_dx: [0.0, 0.0, b1],
                ..Default::default()
            },
            ExternalField::SingleModeE { e0, k } => PointField {
                e: [e0 * (k * x).sin(), 0.0, 0.0],
                ..Default::default()
            },
        }
    }

    /// Largest `|B|` over the domain.
    pub fn b_max(&self, length: f64) -> f64 {
        match *self {
            ExternalField::UniformB { b } => crate::sphere::norm(b),
            ExternalField::GradientB { b0, b1 } => (b0 - 0.5 * b1 * length)
                .abs()
                .max((b0 + 0.5 * b1 * length).abs()),
            ExternalField::SingleModeE { .. } => 0.0,
        }
    }

    /// Modelling caveats that belong in run metadata.
    pub fn caveat(&self) -> Option<&'static str> {
        match self {
            ExternalField::GradientB { .. } => Some(
                "gradient_B is linear on [0, L) and jumps at the periodic seam; div B = 0 holds trivially for B_z(x)",
            ),
            _ => None,
        }
    }
}

/// Samples the profile on the grid as a field overlay.
pub fn external_profiles(field: &ExternalField, grid: Grid1D) -> FieldState {
    let mut fs = FieldState::zero(grid, Layout::Collocated);
    for j in 0..grid.n {
        let p = field.eval(grid.x(j), grid.length);
        for c in 0..3 {
            fs.e[c][j] = p.e[c];
            fs.b[c][j] = p.b[c];
        }
    }
    fs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles() {
        let g = Grid1D::new(8, 4.0).unwrap();
        let f = external_profiles(&ExternalField::UniformB { b: [0.0, 0.0, 2.0] }, g);
        assert!(f.b[2].iter().all(|&v| v == 2.0));
        let gb = ExternalField::GradientB { b0: 1.0, b1: 0.5 };
        let f = external_profiles(&gb, g);
        assert_eq!(f.b[2][0], 0.0);
        assert_eq!(f.b[2][4], 1.0);
        assert!(gb.caveat().is_some());
        let f = external_profiles(&ExternalField::SingleModeE { e0: 0.3, k: 1.5 }, g);
        assert!((f.e[0][3] - 0.3 * (1.5f64 * 1.5).sin()).abs() < 1e-15);
        assert!(ExternalField::from_name("dipole", serde_json::json!({})).is_err());
        assert!(
            ExternalField::from_name("gradient_b", serde_json::json!({"b0": 1.0, "b1": 0.1}))
                .is_ok()
        );
    }
}
