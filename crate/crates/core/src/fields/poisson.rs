use crate::error::{Error, Result};
use crate::grid::{Grid1D, Spectral, C64};
use crate::params::PlasmaParams;

/// Relative tolerance on the mean charge accepted as neutral.
pub const NEUTRALITY_TOL: f64 = 1e-10;

/// Solves `∂ₓ²φ = −ρ_c/ε₀` spectrally with zero-mean `φ`; returns `(φ, E_x = −∂ₓφ)`.
pub fn solve_poisson(
    grid: &Grid1D,
    rho_c: &[f64],
    params: &PlasmaParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    grid.check_len(rho_c.len(), "charge density")?;
    let n = grid.n as f64;
    let mean = rho_c.iter().sum::<f64>() / n;
    let scale = rho_c.iter().map(|v| v.abs()).sum::<f64>() / n;
    if mean.abs() > NEUTRALITY_TOL * scale.max(1.0) {
        return Err(Error::NonNeutral {
            net: mean * grid.length,
        });
    }
    let sp = Spectral::new(*grid);
    let mut spec = sp.fft_real(rho_c);
    let mut e_spec = spec.clone();
    for (j, (&k, (p, e))) in sp
        .wavenumbers()
        .iter()
        .zip(spec.iter_mut().zip(e_spec.iter_mut()))
        .enumerate()
    {
        if j == 0 {
            *p = C64::new(0.0, 0.0);
            *e = C64::new(0.0, 0.0);
            continue;
        }
        *p /= params.eps0 * k * k;
        let nyquist = grid.n.is_multiple_of(2) && j == grid.n / 2;
        *e = if nyquist {
            C64::new(0.0, 0.0)
        } else {
            *p * C64::new(0.0, -k)
        };
    }
    sp.inverse(&mut spec);
    sp.inverse(&mut e_spec);
    Ok((
        spec.iter().map(|z| z.re).collect(),
        e_spec.iter().map(|z| z.re).collect(),
    ))
}
