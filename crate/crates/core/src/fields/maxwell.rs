use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{bound_current, CurlMethod, FieldState, Layout};
use crate::params::PlasmaParams;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MaxwellOptions {
    pub curl: CurlMethod,
}

/// Advances a Yee-layout field state by `dt` with the sources taken at mid-step.
///
/// `j_free[0]` lives on the half nodes; the transverse currents and `M` on the
/// integer nodes. Sequence: half step of `B`, full step of `E`, half step of `B`.
pub fn maxwell_step(
    fs: &FieldState,
    j_free: &[Vec<f64>; 3],
    m: &[Vec<f64>; 3],
    params: &PlasmaParams,
    dt: f64,
    opts: MaxwellOptions,
) -> Result<FieldState> {
    params.validate()?;
    if fs.layout != Layout::Yee {
        return Err(Error::Unsupported {
            what: "field layout",
            detail: "electromagnetic update needs the Yee layout".into(),
        });
    }
    let g = fs.grid;
    for c in j_free.iter().chain(m) {
        g.check_len(c.len(), "source")?;
    }
    let dx = g.dx();
    let courant = params.c * dt / dx;
    if !(dt > 0.0) || courant > 1.0 {
        return Err(Error::StepRejected {
            guard: "electromagnetic CFL",
            ratio: courant,
            limit: 1.0,
        });
    }
    let n = g.n;
    let jb = bound_current(&g, m, opts.curl);
    let mut out = fs.clone();
    let half_b = |f: &mut FieldState| {
        for j in 0..n {
            let jp = (j + 1) % n;
            f.b[1][j] += 0.5 * dt * (f.e[2][jp] - f.e[2][j]) / dx;
            f.b[2][j] -= 0.5 * dt * (f.e[1][jp] - f.e[1][j]) / dx;
        }
    };
    half_b(&mut out);
    let c2 = params.c * params.c;
    for j in 0..n {
        let jm = (j + n - 1) % n;
        let jy = j_free[1][j] + jb[1][j];
        let jz = j_free[2][j] + jb[2][j];
        out.e[1][j] += dt * (-c2 * (out.b[2][j] - out.b[2][jm]) / dx - jy / params.eps0);
        out.e[2][j] += dt * (c2 * (out.b[1][j] - out.b[1][jm]) / dx - jz / params.eps0);
        out.e[0][j] -= dt * j_free[0][j] / params.eps0;
    }
    half_b(&mut out);
    out.m = m.clone();
    out.j_free = j_free.clone();
    out.j_bound = jb;
    Ok(out)
}
