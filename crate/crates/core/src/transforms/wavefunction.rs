use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid1D, C64};

/// Tolerance on `|‖ψ‖² - 1|` accepted by consumers that require normalized input.
pub const NORM_TOLERANCE: f64 = 1e-10;

/// Scalar wavefunction on a periodic grid.
///
/// The physical state is `psi(x) * exp(i * momentum_offset * x / hbar)`; the
/// offset carries the non-periodic phase left by a linear gauge function so
/// that the stored samples stay periodic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveFunction1D {
    pub grid: Grid1D,
    pub psi: Vec<C64>,
    #[serde(default)]
    pub momentum_offset: f64,
}

impl WaveFunction1D {
    pub fn new(grid: Grid1D, psi: Vec<C64>) -> Result<Self> {
        grid.check_len(psi.len(), "wavefunction")?;
        if psi.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::param("psi", "non-finite amplitude"));
        }
        Ok(Self {
            grid,
            psi,
            momentum_offset: 0.0,
        })
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> C64) -> Result<Self> {
        let psi = grid.points().into_iter().map(f).collect();
        Self::new(grid, psi)
    }

    /// `Σ |ψ|² Δx`.
    pub fn norm_sqr(&self) -> f64 {
        self.psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_sqr();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::NotNormalized { norm: n });
        }
        let s = 1.0 / n.sqrt();
        self.psi.iter_mut().for_each(|z| *z *= s);
        Ok(())
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    pub fn require_normalized(&self) -> Result<()> {
        let n = self.norm_sqr();
        if !((n - 1.0).abs() < NORM_TOLERANCE) {
            return Err(Error::NotNormalized { norm: n });
        }
        Ok(())
    }

    pub fn density(&self) -> Vec<f64> {
        self.psi.iter().map(|z| z.norm_sqr()).collect()
    }
}

/// Normalized Gaussian packet `(2πσ²)^{-1/4} exp(-(x-x0)²/(4σ²) + i p0 x / ħ)`
/// summed over periodic images so the samples are smooth on the ring.
///
/// `sigma` is the standard deviation of `|ψ|²`.
pub fn gaussian_packet(
    grid: Grid1D,
    x0: f64,
    sigma: f64,
    p0: f64,
    hbar: f64,
) -> Result<WaveFunction1D> {
    if !(sigma > 0.0) {
        return Err(Error::param("sigma", format!("must be > 0, got {sigma}")));
    }
    let l = grid.length;
    let images = ((8.0 * sigma / l).ceil() as i64).max(1);
    WaveFunction1D::from_fn(grid, |x| {
        let mut acc = C64::new(0.0, 0.0);
        for j in -images..=images {
            let d = x - x0 + j as f64 * l;
            acc += C64::from_polar((-d * d / (4.0 * sigma * sigma)).exp(), p0 * d / hbar);
        }
        acc
    })?
    .normalized()
}
