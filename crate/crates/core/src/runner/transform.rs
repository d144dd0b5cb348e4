//! Post-processing transforms of spinor snapshots.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauge::{
    gi_wigner_transform, Dressing, GiOptions, GiWignerDistribution, VectorPotential,
};
use crate::grid::{Grid1D, C64};
use crate::params::PlasmaParams;
use crate::pauli::SpinorField;
use crate::runner::io::{Snapshot, SnapshotAxis, SnapshotMeta};
use crate::sphere::SphereQuadrature;
use crate::transforms::spin_q_transform_hermitian;
use crate::transforms::wigner::MomentumAxis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    /// Canonical Wigner matrix.
    Wigner,
    /// Spin Q-function of the local density matrix at every grid point.
    SpinQ,
    /// Gauge-invariant Wigner matrix with line-integral dressing.
    Gi,
}

impl TransformKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "wigner" => Ok(Self::Wigner),
            "spinq" => Ok(Self::SpinQ),
            "gi" => Ok(Self::Gi),
            other => Err(Error::Config(vec![format!(
                "kind: unknown transform `{other}` (expected wigner, spinq or gi)"
            )])),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Wigner => "wigner",
            Self::SpinQ => "spinq",
            Self::Gi => "gi",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformOptions {
    pub n_v: usize,
    pub v_max: f64,
    pub n_theta: usize,
    pub n_phi: usize,
    /// Grid samples of `A_x` for the gauge-invariant transform; zero if absent.
    pub a_x: Option<Vec<f64>>,
}

impl Default for TransformOptions {
    fn default() -> Self {
        Self {
            n_v: 64,
            v_max: 6.0,
            n_theta: 8,
            n_phi: 16,
            a_x: None,
        }
    }
}

/// Rebuilds the spinor and its parameters from a `spinor` snapshot.
pub fn spinor_from_snapshot(snap: &Snapshot) -> Result<(SpinorField, PlasmaParams)> {
    let meta = &snap.meta;
    if meta.kind != "spinor" {
        return Err(Error::Format(format!(
            "expected a spinor snapshot, found `{}`",
            meta.kind
        )));
    }
    let shape = meta.shape();
    if shape.len() != 2 || shape[1] != 4 {
        return Err(Error::Format(format!(
            "spinor snapshot has shape {shape:?}, expected [n_x, 4]"
        )));
    }
    let length = meta
        .attribute_f64("length")
        .ok_or_else(|| Error::Format("spinor snapshot lacks `length`".into()))?;
    let params: PlasmaParams = match meta.attributes.get("params") {
        Some(v) => serde_json::from_value(v.clone())?,
        None => return Err(Error::Format("spinor snapshot lacks `params`".into())),
    };
    let grid = Grid1D::new(shape[0], length)?;
    let (mut up, mut down) = (Vec::with_capacity(grid.n), Vec::with_capacity(grid.n));
    for c in snap.data.chunks_exact(4) {
        up.push(C64::new(c[0], c[1]));
        down.push(C64::new(c[2], c[3]));
    }
    let mut psi = SpinorField::new(grid, up, down)?;
    psi.momentum_offset = meta.attribute_f64("momentum_offset").unwrap_or(0.0);
    Ok((psi, params))
}

fn matrix_snapshot(
    kind: &str,
    w: &GiWignerDistribution,
    time: f64,
    step: usize,
) -> Result<Snapshot> {
    let (g, axis) = (w.grid, w.axis);
    let mut meta = SnapshotMeta::new(
        kind,
        vec![
            SnapshotAxis::uniform("x", g.n, 0.0, g.dx()),
            SnapshotAxis::uniform("v", axis.n, axis.values()[0], axis.step()),
            SnapshotAxis::labelled("component", &["scalar", "sigma_x", "sigma_y", "sigma_z"]),
        ],
    );
    meta.time = time;
    meta.step = step;
    let mut data = Vec::with_capacity(w.scalar.len() * 4);
    for i in 0..w.scalar.len() {
        data.extend([w.scalar[i], w.vector[0][i], w.vector[1][i], w.vector[2][i]]);
    }
    Snapshot::new(meta, data)
}

/// Applies `kind` to a spinor snapshot and returns the transformed snapshot.
pub fn transform_snapshot(
    snap: &Snapshot,
    kind: TransformKind,
    opts: &TransformOptions,
) -> Result<Snapshot> {
    let (psi, params) = spinor_from_snapshot(snap)?;
    let (time, step) = (snap.meta.time, snap.meta.step);
    match kind {
        TransformKind::Wigner | TransformKind::Gi => {
            let axis = MomentumAxis::new(opts.n_v, opts.v_max)?;
            let (a, dressing) = match (kind, &opts.a_x) {
                (TransformKind::Gi, Some(values)) => (
                    VectorPotential::Sampled {
                        values: values.clone(),
                    },
                    Dressing::LineIntegral,
                ),
                (TransformKind::Gi, None) => (VectorPotential::zero(), Dressing::LineIntegral),
                _ => (VectorPotential::zero(), Dressing::None),
            };
            let w =
                gi_wigner_transform(&psi, &a, &params, axis, GiOptions::with_dressing(dressing))?;
            matrix_snapshot(kind.name(), &w, time, step)
        }
        TransformKind::SpinQ => {
            let quad = Arc::new(SphereQuadrature::new(opts.n_theta, opts.n_phi)?);
            let g = psi.grid;
            let mut data = Vec::with_capacity(g.n * quad.len());
            for (u, d) in psi.up.iter().zip(&psi.down) {
                let m = [[u * u.conj(), u * d.conj()], [d * u.conj(), d * d.conj()]];
                data.extend(spin_q_transform_hermitian(&m, &quad)?.values);
            }
            let mut meta = SnapshotMeta::new(
                "spinq",
                vec![
                    SnapshotAxis::uniform("x", g.n, 0.0, g.dx()),
                    SnapshotAxis::index("node", quad.len()),
                ],
            );
            meta.time = time;
            meta.step = step;
            meta.attributes
                .insert("n_theta".into(), opts.n_theta.into());
            meta.attributes.insert("n_phi".into(), opts.n_phi.into());
            meta.attributes
                .insert("nodes".into(), serde_json::to_value(&quad.nodes)?);
            meta.attributes
                .insert("weights".into(), serde_json::to_value(&quad.weights)?);
            Snapshot::new(meta, data)
        }
    }
}
