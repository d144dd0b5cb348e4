//! Frequency and damping-rate fits of oscillating diagnostics.

use std::f64::consts::PI;

use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::C64;
use crate::runner::io::DiagnosticsSeries;
use crate::stats::linear_fit;

/// Smallest accepted spectral peak to median power ratio.
pub const PEAK_RATIO_MIN: f64 = 10.0;

/// Smallest number of oscillation periods accepted.
pub const MIN_PERIODS: f64 = 8.0;

/// Model `e^{−γ t}(a cos ωt + b sin ωt) + c` fitted to a column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrequencyFit {
    pub omega: f64,
    pub gamma: f64,
    /// One-sigma uncertainty of `omega` from the residual spread.
    pub uncertainty: f64,
    pub gamma_uncertainty: f64,
    pub amplitude: f64,
    pub peak_ratio: f64,
    pub periods: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FitOutcome {
    Fitted(FrequencyFit),
    Inconclusive { reason: String },
}

impl FitOutcome {
    pub fn fitted(&self) -> Option<&FrequencyFit> {
        match self {
            FitOutcome::Fitted(f) => Some(f),
            FitOutcome::Inconclusive { .. } => None,
        }
    }
}

fn inconclusive(reason: impl Into<String>) -> Result<FitOutcome> {
    Ok(FitOutcome::Inconclusive {
        reason: reason.into(),
    })
}

pub fn fit_frequency(series: &DiagnosticsSeries, column: &str) -> Result<FitOutcome> {
    let y = series
        .column(column)
        .ok_or_else(|| Error::Format(format!("no column `{column}`")))?;
    fit_samples(series.time(), y)
}

/// Fits uniformly spaced samples `y(t)`.
pub fn fit_samples(t: &[f64], y: &[f64]) -> Result<FitOutcome> {
    let n = t.len();
    if n != y.len() {
        return Err(Error::Format(format!("{} times for {} values", n, y.len())));
    }
    if n < 16 {
        return Err(Error::TooFewSamples(format!(
            "frequency fit needs >= 16 samples, got {n}"
        )));
    }
    let dt = (t[n - 1] - t[0]) / (n - 1) as f64;
    if t.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-6 * dt) {
        return Err(Error::Format(
            "frequency fit needs uniformly spaced times".into(),
        ));
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = y.iter().map(|v| v - mean).collect();
    let scale = dev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(scale > 1e-14 * mean.abs().max(f64::MIN_POSITIVE)) {
        return inconclusive("series is constant");
    }

    let nfft = 8 * n.next_power_of_two();
    let mut buf: Vec<C64> = dev
        .iter()
        .enumerate()
        .map(|(i, v)| {
            C64::new(
                v * 0.5 * (1.0 - (2.0 * PI * i as f64 / (n - 1) as f64).cos()),
                0.0,
            )
        })
        .collect();
    buf.resize(nfft, C64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(nfft).process(&mut buf);
    let power: Vec<f64> = buf[..=nfft / 2].iter().map(|z| z.norm_sqr()).collect();
    let (k, peak) =
        power.iter().enumerate().skip(1).fold(
            (1, 0.0),
            |(bk, bp), (k, &p)| if p > bp { (k, p) } else { (bk, bp) },
        );
    let mut sorted = power[1..].to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let peak_ratio = if median > 0.0 {
        peak / median
    } else {
        f64::INFINITY
    };
    if !(peak_ratio >= PEAK_RATIO_MIN) || k == nfft / 2 {
        return inconclusive(format!(
            "no dominant spectral peak (peak/median = {peak_ratio:.3})"
        ));
    }
    let frac = {
        let (a, b, c) = (power[k - 1].ln(), power[k].ln(), power[k + 1].ln());
        let d = a - 2.0 * b + c;
        if d < 0.0 {
            0.5 * (a - c) / d
        } else {
            0.0
        }
    };
    let omega0 = 2.0 * PI * (k as f64 + frac) / (nfft as f64 * dt);
    let span = t[n - 1] - t[0];
    let periods = omega0 * span / (2.0 * PI);
    if periods < MIN_PERIODS {
        return inconclusive(format!("only {periods:.2} periods in the series"));
    }

    let tau: Vec<f64> = t.iter().map(|x| x - t[0]).collect();
    let gamma0 = envelope_rate(&tau, &dev, omega0);
    let fit = VarPro { tau: &tau, y };
    let (theta, jtj_inv, ssr) = fit.refine([omega0, gamma0]);
    let sigma2 = ssr / (n as f64 - 5.0);
    let coeffs = fit.linear(theta).0;
    Ok(FitOutcome::Fitted(FrequencyFit {
        omega: theta[0],
        gamma: theta[1],
        uncertainty: (sigma2 * jtj_inv[0][0]).max(0.0).sqrt(),
        gamma_uncertainty: (sigma2 * jtj_inv[1][1]).max(0.0).sqrt(),
        amplitude: coeffs[0].hypot(coeffs[1]),
        peak_ratio,
        periods: theta[0] * span / (2.0 * PI),
    }))
}

/// Decay rate from a regression of the per-period maxima of `|y|`.
fn envelope_rate(tau: &[f64], dev: &[f64], omega: f64) -> f64 {
    let period = 2.0 * PI / omega;
    let mut ts = Vec::new();
    let mut logs = Vec::new();
    let mut start = 0;
    while start < tau.len() {
        let end = tau[start..]
            .iter()
            .position(|&x| x >= tau[start] + period)
            .map_or(tau.len(), |p| start + p);
        if end == tau.len() && !ts.is_empty() {
            break;
        }
        let (i, m) = (start..end).fold((start, 0.0), |(bi, bm), i| {
            if dev[i].abs() > bm {
                (i, dev[i].abs())
            } else {
                (bi, bm)
            }
        });
        if m > 0.0 {
            ts.push(tau[i]);
            logs.push(m.ln());
        }
        start = end;
    }
    match linear_fit(&ts, &logs) {
        Ok((_, slope)) if ts.len() >= 3 && slope.is_finite() => -slope,
        _ => 0.0,
    }
}

/// Separable least squares: the amplitudes and offset are eliminated for each
/// trial `(ω, γ)`.
struct VarPro<'a> {
    tau: &'a [f64],
    y: &'a [f64],
}

impl VarPro<'_> {
    fn basis(&self, theta: [f64; 2], i: usize) -> [f64; 3] {
        let t = self.tau[i];
        let e = (-theta[1] * t).exp();
        let (s, c) = (theta[0] * t).sin_cos();
        [e * c, e * s, 1.0]
    }

    /// Best linear coefficients and the residual vector.
    fn linear(&self, theta: [f64; 2]) -> ([f64; 3], Vec<f64>) {
        let mut a = [[0.0; 3]; 3];
        let mut b = [0.0; 3];
        for i in 0..self.tau.len() {
            let phi = self.basis(theta, i);
            for r in 0..3 {
                b[r] += phi[r] * self.y[i];
                for c in 0..3 {
                    a[r][c] += phi[r] * phi[c];
                }
            }
        }
        let coeffs = solve3(a, b).unwrap_or([0.0; 3]);
        let res = (0..self.tau.len())
            .map(|i| {
                let phi = self.basis(theta, i);
                self.y[i] - (coeffs[0] * phi[0] + coeffs[1] * phi[1] + coeffs[2] * phi[2])
            })
            .collect();
        (coeffs, res)
    }

    fn ssr(&self, theta: [f64; 2]) -> f64 {
        self.linear(theta).1.iter().map(|r| r * r).sum()
    }

    fn jacobian(&self, theta: [f64; 2]) -> Vec<[f64; 2]> {
        let h = [
            1e-6 * theta[0].abs().max(1e-3),
            1e-6 * theta[0].abs().max(1e-3),
        ];
        let mut cols: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for p in 0..2 {
            let mut plus = theta;
            let mut minus = theta;
            plus[p] += h[p];
            minus[p] -= h[p];
            let rp = self.linear(plus).1;
            let rm = self.linear(minus).1;
            cols[p] = rp
                .iter()
                .zip(&rm)
                .map(|(a, b)| (a - b) / (2.0 * h[p]))
                .collect();
        }
        (0..self.tau.len())
            .map(|i| [cols[0][i], cols[1][i]])
            .collect()
    }

    /// Levenberg–Marquardt on `(ω, γ)`; returns the optimum, `(JᵀJ)⁻¹` and the
    /// residual sum of squares.
    fn refine(&self, mut theta: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2], f64) {
        let mut cost = self.ssr(theta);
        let mut lambda = 1e-3;
        for _ in 0..200 {
            let (_, r) = self.linear(theta);
            let j = self.jacobian(theta);
            let mut jtj = [[0.0; 2]; 2];
            let mut jtr = [0.0; 2];
            for (row, ri) in j.iter().zip(&r) {
                for a in 0..2 {
                    jtr[a] += row[a] * ri;
                    for b in 0..2 {
                        jtj[a][b] += row[a] * row[b];
                    }
                }
            }
            let mut improved = false;
            for _ in 0..30 {
                let m = [
                    [jtj[0][0] * (1.0 + lambda), jtj[0][1]],
                    [jtj[1][0], jtj[1][1] * (1.0 + lambda)],
                ];
                let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
                if det == 0.0 || !det.is_finite() {
                    break;
                }
                // r = y − model, so the model Jacobian is −J.
                let step = [
                    -(m[1][1] * jtr[0] - m[0][1] * jtr[1]) / det,
                    -(m[0][0] * jtr[1] - m[1][0] * jtr[0]) / det,
                ];
                let trial = [theta[0] + step[0], theta[1] + step[1]];
                let c = self.ssr(trial);
                if c < cost {
                    let small =
                        step[0].abs() <= 1e-15 * theta[0].abs().max(1.0) && step[1].abs() <= 1e-15;
                    theta = trial;
                    cost = c;
                    lambda = (lambda * 0.3).max(1e-12);
                    improved = !small;
                    break;
                }
                lambda *= 10.0;
            }
            if !improved {
                break;
            }
        }
        let j = self.jacobian(theta);
        let mut jtj = [[0.0; 2]; 2];
        for row in &j {
            for a in 0..2 {
                for b in 0..2 {
                    jtj[a][b] += row[a] * row[b];
                }
            }
        }
        let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
        let inv = if det != 0.0 {
            [
                [jtj[1][1] / det, -jtj[0][1] / det],
                [-jtj[1][0] / det, jtj[0][0] / det],
            ]
        } else {
            [[f64::INFINITY; 2]; 2]
        };
        (theta, inv, cost)
    }
}

/// Gaussian elimination with partial pivoting.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col] == 0.0 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..3 {
            let f = a[r][col] / a[col][col];
            for c in col..3 {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let s: f64 = (r + 1..3).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}
